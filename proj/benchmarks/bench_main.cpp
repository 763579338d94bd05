#include <benchmark/benchmark.h>

#include "risbeam/link.hpp"
#include "risbeam/optimizer.hpp"

using namespace risbeam;

static void BM_SynthesizeChannels(benchmark::State& state) {
  const auto link = LinkModel::standard();
  for (auto _ : state) benchmark::DoNotOptimize(link.realize({130.0, 170.0}));
}
BENCHMARK(BM_SynthesizeChannels);

static void BM_EndToEndGain(benchmark::State& state) {
  const auto link = LinkModel::standard();
  const auto chan = link.realize({130.0, 170.0});
  const auto config = RisConfig::all_off(link.layout);
  for (auto _ : state) benchmark::DoNotOptimize(end_to_end_gain(config, chan, link.amplitude));
}
BENCHMARK(BM_EndToEndGain);

static void BM_ReceiverMeasure(benchmark::State& state) {
  auto link = LinkModel::standard();
  link.tone.buffer_len = static_cast<std::size_t>(state.range(0));
  auto chain = link.receiver({130.0, 170.0});
  const auto config = RisConfig::all_off(link.layout);
  for (auto _ : state) benchmark::DoNotOptimize(chain.measure(config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReceiverMeasure)->Arg(1000)->Arg(10000);

static void BM_GreedyReceiver(benchmark::State& state) {
  const auto link = LinkModel::standard();
  const auto grouping = make_grouping(link.layout, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto chain = link.receiver({130.0, 170.0});
    auto meter = measure_with(chain);
    benchmark::DoNotOptimize(greedy_iterative(meter, link.layout, grouping));
  }
}
BENCHMARK(BM_GreedyReceiver)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_ExhaustiveSmall(benchmark::State& state) {
  const RisLayout layout(3, 2, 0.03, {});
  LinkModel link = LinkModel::standard();
  link.layout = layout;
  const auto chan = link.realize({130.0, 170.0});
  for (auto _ : state) {
    auto meter = exact_gain_measure(chan, link.amplitude);
    benchmark::DoNotOptimize(exhaustive_search(meter, layout, 4));
  }
}
BENCHMARK(BM_ExhaustiveSmall)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
