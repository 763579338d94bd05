#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "risbeam/link.hpp"
#include "risbeam/optimizer.hpp"

using namespace risbeam;

namespace {

MeasureFn constant_meter() {
  return MeasureFn([](const RisConfig&) { return 0.0; });
}

ChannelRealization random_channel(std::size_t n, std::uint64_t seed, bool dual_pol) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  ChannelRealization c;
  for (int p = 0; p < 2; ++p) {
    c.h[p] = CVec::Zero(static_cast<Eigen::Index>(n));
    c.g[p] = CVec::Zero(static_cast<Eigen::Index>(n));
    if (p == 1 && !dual_pol) continue;
    for (Eigen::Index i = 0; i < c.h[p].size(); ++i) {
      c.h[p][i] = {gauss(rng), gauss(rng)};
      c.g[p][i] = {gauss(rng), gauss(rng)};
    }
  }
  return c;
}

// every config over states [0, P) for N elements, evaluated directly
double brute_force_best(const ChannelRealization& chan, int states, double amplitude) {
  const std::size_t n = chan.size();
  std::vector<ElementState> s(n, 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    best = std::max(best, end_to_end_gain(RisConfig(s), chan, amplitude));
    std::size_t i = 0;
    while (i < n && ++s[i] == states) s[i++] = 0;
    if (i == n) break;
  }
  return 10.0 * std::log10(best);
}

}  // namespace

TEST_CASE("greedy measurement budget on the standard layout", "[optimizer]") {
  const auto layout = RisLayout::standard();
  const std::vector<std::pair<int, std::size_t>> expected{{1, 304}, {2, 152}, {4, 76}, {8, 40}};
  for (const auto& [size, count] : expected) {
    auto meter = constant_meter();
    const auto result = greedy_iterative(meter, layout, make_grouping(layout, size));
    CHECK(meter.calls() == count);
    CHECK(result.trace.size() == count);
  }

  GreedyOptions two;
  two.states_per_unit = 2;
  auto meter = constant_meter();
  greedy_iterative(meter, layout, make_grouping(layout, 1), two);
  CHECK(meter.calls() == 152);
}

TEST_CASE("greedy keeps strict improvements and otherwise the previous state", "[optimizer]") {
  const RisLayout layout(2, 1, 0.01, {});
  // group 0 tries 0..3, group 1 tries 0..3
  const std::vector<double> script{5.0, 7.0, 7.0, 6.0, 7.0, 7.0, 6.5, 7.0};
  std::size_t call = 0;
  std::vector<RisConfig> seen;
  MeasureFn meter([&](const RisConfig& c) {
    seen.push_back(c);
    return script.at(call++);
  });
  const auto result = greedy_iterative(meter, layout, make_grouping(layout, 1));

  // state 1 wins group 0 (tie at state 2 keeps the earlier one); nothing beats 7 in group 1
  CHECK(result.config == RisConfig(std::vector<ElementState>{1, 0}));
  CHECK(result.trace.final_config == result.config);
  CHECK(seen[0] == RisConfig(std::vector<ElementState>{0, 0}));
  CHECK(seen[4] == RisConfig(std::vector<ElementState>{1, 0}));
  CHECK(seen[7] == RisConfig(std::vector<ElementState>{1, 3}));

  const auto& e = result.trace.entries;
  REQUIRE(e.size() == 8);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(e[i].measurement_index == i);
    CHECK(e[i].group_index == static_cast<long>(i / 4));
    CHECK(e[i].candidate_state == static_cast<int>(i % 4));
    CHECK(e[i].p_r == script[i]);
  }
  CHECK(e[0].p_max == 5.0);
  CHECK(e.back().p_max == 7.0);
  CHECK(result.trace.final_max() == 7.0);
  CHECK(result.trace.running_max_nondecreasing());
}

TEST_CASE("the first measurement registers even below 0 dBFS", "[optimizer]") {
  const RisLayout layout(1, 1, 0.01, {});
  MeasureFn meter([](const RisConfig& c) { return -20.0 - c[0]; });
  const auto result = greedy_iterative(meter, layout, make_grouping(layout, 1));
  CHECK(result.config == RisConfig(1));
  CHECK(result.trace.final_max() == -20.0);
}

TEST_CASE("greedy equals exhaustive search for one element", "[optimizer]") {
  const RisLayout layout(1, 1, 0.01, {});
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    for (int states : {2, 4}) {
      const auto chan = random_channel(1, seed, states == 4);
      auto m1 = exact_gain_measure(chan, 1.0);
      auto m2 = exact_gain_measure(chan, 1.0);
      GreedyOptions opt;
      opt.states_per_unit = states;
      const auto greedy = greedy_iterative(m1, layout, make_grouping(layout, 1), opt);
      const auto oracle = exhaustive_search(m2, layout, states);
      CHECK(greedy.config == oracle.config);
      CHECK(greedy_gap(oracle.trace.final_max(), greedy.trace.final_max()) == 0.0);
    }
  }
}

TEST_CASE("exhaustive search enumerates every configuration", "[optimizer]") {
  const RisLayout two(2, 1, 0.01, {});
  ChannelRealization chan;
  chan.h = {CVec::Ones(2), CVec::Zero(2)};
  chan.g = {CVec::Ones(2), CVec::Zero(2)};
  auto meter = exact_gain_measure(chan, 1.0);
  const auto best = exhaustive_search(meter, two, 2);
  CHECK(meter.calls() == 4);
  CHECK(best.config == RisConfig(std::vector<ElementState>{0, 0}));  // lexicographically first of the ties
  CHECK(best.trace.final_max() == Catch::Approx(10.0 * std::log10(4.0)));

  const RisLayout four(2, 2, 0.01, {});
  auto m4 = exact_gain_measure(random_channel(4, 3, true), 1.0);
  const auto r4 = exhaustive_search(m4, four, 4);
  CHECK(m4.calls() == 256);
  CHECK(r4.trace.size() == 256);
  // lexicographic order, last element fastest
  CHECK(r4.trace.entries[1].measurement_index == 1);
}

TEST_CASE("exhaustive search refuses budgets above the cap", "[optimizer]") {
  const RisLayout layout(4, 3, 0.01, {});
  auto meter = constant_meter();
  try {
    exhaustive_search(meter, layout, 4, 1 << 20);
    FAIL("expected BudgetExceeded");
  } catch (const BudgetExceeded& e) {
    CHECK(e.required() == Catch::Approx(std::pow(4.0, 12.0)));
  }
  CHECK(meter.calls() == 0);
}

TEST_CASE("exhaustive search dominates greedy on small random channels", "[optimizer]") {
  const RisLayout layout(3, 2, 0.01, {});
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto chan = random_channel(6, seed, false);
    auto m1 = exact_gain_measure(chan, 0.9);
    auto m2 = exact_gain_measure(chan, 0.9);
    GreedyOptions opt;
    opt.states_per_unit = 2;
    const auto greedy = greedy_iterative(m1, layout, make_grouping(layout, 1), opt);
    const auto oracle = exhaustive_search(m2, layout, 2);
    CHECK(oracle.trace.final_max() == Catch::Approx(brute_force_best(chan, 2, 0.9)));
    CHECK(greedy_gap(oracle.trace.final_max(), greedy.trace.final_max()) >= -1e-9);
    CHECK(m2.calls() == 64);
  }
}

TEST_CASE("noiseless traces never lose ground", "[optimizer]") {
  auto link = LinkModel::standard();
  link.channel.noise_variance = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    link.channel.seed = seed;
    for (PolarPoint p : {PolarPoint{50, 120}, PolarPoint{110, 170}, PolarPoint{130, 270}}) {
      auto chain = link.receiver(p);
      const double off = chain.measure(RisConfig::all_off(link.layout));
      auto meter = measure_with(chain);
      const auto r = greedy_iterative(meter, link.layout, make_grouping(link.layout, 1));
      CHECK(r.trace.running_max_nondecreasing());
      CHECK(r.trace.final_max() >= off);
      CHECK(chain.measure(r.config) == r.trace.final_max());
    }
  }
}

TEST_CASE("finer groups win in the median", "[optimizer]") {
  auto link = LinkModel::standard();
  link.channel.noise_variance = 0.0;
  std::map<int, std::vector<double>> finals;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    link.channel.seed = seed;
    const auto chan = link.realize({130.0, 170.0});
    for (int size : {1, 2, 4, 8}) {
      auto meter = exact_gain_measure(chan, link.amplitude);
      finals[size].push_back(greedy_iterative(meter, link.layout, make_grouping(link.layout, size)).trace.final_max());
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  CHECK(median(finals[1]) >= median(finals[2]));
  CHECK(median(finals[2]) >= median(finals[4]));
  CHECK(median(finals[4]) >= median(finals[8]));
}

TEST_CASE("visit order and extra sweeps", "[optimizer]") {
  const auto layout = RisLayout::standard();
  const auto grouping = make_grouping(layout, 4);

  GreedyOptions reversed;
  for (std::size_t i = grouping.count(); i-- > 0;) reversed.visit_order.push_back(i);
  auto meter = constant_meter();
  const auto r = greedy_iterative(meter, layout, grouping, reversed);
  CHECK(r.trace.entries.front().group_index == static_cast<long>(grouping.count() - 1));
  CHECK(r.trace.entries.back().group_index == 0);

  GreedyOptions bad;
  bad.visit_order = {0, 0, 1};
  CHECK_THROWS_AS(greedy_iterative(meter, layout, grouping, bad), std::invalid_argument);

  auto link = LinkModel::standard();
  link.channel.noise_variance = 0.0;
  const auto chan = link.realize({70.0, 170.0});
  auto m1 = exact_gain_measure(chan, link.amplitude);
  auto m2 = exact_gain_measure(chan, link.amplitude);
  GreedyOptions multi;
  multi.max_sweeps = 3;
  const auto once = greedy_iterative(m1, layout, make_grouping(layout, 1));
  const auto more = greedy_iterative(m2, layout, make_grouping(layout, 1), multi);
  CHECK(more.trace.final_max() >= once.trace.final_max());
  CHECK(m2.calls() % 304 == 0);
  CHECK(m2.calls() <= 3 * 304);
}

TEST_CASE("grouping must partition the layout", "[optimizer]") {
  const auto layout = RisLayout::standard();
  auto scheme = make_grouping(layout, 2);
  scheme.groups.pop_back();
  auto meter = constant_meter();
  CHECK_THROWS_AS(greedy_iterative(meter, layout, scheme), std::invalid_argument);
}

TEST_CASE("meter failures carry the partial trace", "[optimizer]") {
  const auto layout = RisLayout::standard();
  std::size_t calls = 0;
  MeasureFn meter([&](const RisConfig&) -> double {
    if (++calls == 6) throw std::runtime_error("probe lost");
    return 1.0;
  });
  try {
    greedy_iterative(meter, layout, make_grouping(layout, 1));
    FAIL("expected OptimizerError");
  } catch (const OptimizerError& e) {
    CHECK(e.partial().size() == 5);
  }
}

TEST_CASE("trace CSV layout", "[optimizer]") {
  const auto layout = RisLayout::standard();
  auto meter = constant_meter();
  const auto r = greedy_iterative(meter, layout, make_grouping(layout, 8));
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "measurement_index,group_index,candidate_state,p_r_dbfs,p_max_dbfs");
  std::getline(is, line);
  CHECK(line == "0,0,0,0.000000,0.000000");
  std::size_t rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 40);
}

TEST_CASE("empty captures read as minus infinity during optimization", "[optimizer]") {
  const RisLayout layout(2, 1, 0.01, {});
  ChannelRealization silent;
  silent.h = {CVec::Zero(2), CVec::Zero(2)};
  silent.g = {CVec::Zero(2), CVec::Zero(2)};
  ReceiverChain chain(silent, {}, {}, 0.9, 1);
  CHECK_THROWS_AS(chain.measure(RisConfig(2)), MeasurementFloorError);

  auto meter = measure_with(chain);
  const auto r = greedy_iterative(meter, layout, make_grouping(layout, 1));
  CHECK(r.config == RisConfig(2));
  CHECK(r.trace.size() == 8);
  CHECK(std::isinf(r.trace.final_max()));
}
