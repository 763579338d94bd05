#include "risbeam/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "risbeam/seeding.hpp"

namespace risbeam {

namespace {

using ojson = nlohmann::ordered_json;

// Runs fn(i) for i in [0, n). Results must be written to slot i so output
// order never depends on completion order.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  for (unsigned t = 0; t < count; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string csv_header(const ScenarioConfig& config) { return "# " + config.header_line() + "\n"; }

ojson summary_header(const ScenarioConfig& config, const char* experiment) {
  ojson j;
  j["header"] = config.header_line();
  j["experiment"] = experiment;
  j["config_hash"] = fmt::format("{:016x}", config.hash());
  j["seed"] = config.seed;
  j["seeds"] = config.seeds;
  return j;
}

std::string fmt_num(double v) { return fmt::format("{:g}", v); }

CodebookSettings codebook_settings(const ScenarioConfig& config, const RisLayout& layout, std::uint64_t seed) {
  CodebookSettings s;
  s.group_size = config.optimizer.group_size;
  s.greedy = config.optimizer.greedy_options(make_grouping(layout, s.group_size), seed);
  return s;
}

struct SingleRun {
  double baseline = 0.0;
  double final_power = 0.0;
  OptimizerResult result;
};

// all-off baseline, one optimizer run, then the final configuration measured once more
SingleRun baseline_and_greedy(ReceiverChain& chain, const RisLayout& layout, const GroupingScheme& grouping,
                              const GreedyOptions& options) {
  SingleRun run;
  run.baseline = chain.measure(RisConfig::all_off(layout));
  auto meter = measure_with(chain);
  run.result = greedy_iterative(meter, layout, grouping, options);
  run.final_power = chain.measure(run.result.config);
  return run;
}

void append_trace_rows(std::ostringstream& os, const std::string& prefix, const PowerTrace& trace,
                       std::size_t index_offset) {
  for (const auto& e : trace.entries)
    os << prefix
       << fmt::format("{},{},{},{:.6f},{:.6f}\n", e.measurement_index + index_offset, e.group_index, e.candidate_state,
                      e.p_r, e.p_max);
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

// ---------------------------------------------------------------- sweep

SweepResult run_sweep(const ScenarioConfig& config) {
  SweepResult result;
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < config.sweep.points.size(); ++i) {
    const auto& p = config.sweep.points[i];
    if (!(p.point.distance_cm > 0.0) || !(p.point.angle_deg > 0.0 && p.point.angle_deg < 180.0)) {
      result.errors.push_back(fmt::format("point {}: {} deg / {} cm is outside the reflective half-plane", i,
                                          p.point.angle_deg, p.point.distance_cm));
    } else if (!p.interior && !config.scene.grid.contains(p.point.angle_deg, p.point.distance_cm)) {
      result.errors.push_back(fmt::format("point {}: {} deg / {} cm is not a grid point and not marked interior", i,
                                          p.point.angle_deg, p.point.distance_cm));
    } else {
      valid.push_back(i);
    }
  }

  const auto seeds = config.seed_list();
  const std::size_t n_tasks = valid.size() * seeds.size();
  std::vector<std::optional<SweepRow>> rows(n_tasks);
  std::vector<std::string> task_errors(n_tasks);

  parallel_for(n_tasks, config.parallel, [&](std::size_t t) {
    const std::size_t pi = valid[t / seeds.size()];
    const std::uint64_t seed = seeds[t % seeds.size()];
    const auto& point = config.sweep.points[pi].point;
    try {
      const auto link = config.link(seed);
      const auto grouping = make_grouping(link.layout, config.optimizer.group_size);
      auto chain = link.receiver(point);
      auto run = baseline_and_greedy(chain, link.layout, grouping, config.optimizer.greedy_options(grouping, seed));

      SweepRow row;
      row.point_index = pi;
      row.point = point;
      row.seed = seed;
      row.baseline_dbfs = run.baseline;
      row.final_dbfs = run.final_power;
      row.gain_db = run.final_power - run.baseline;
      row.measurements = 1 + run.result.trace.size();
      row.trace = std::move(run.result.trace);

      if (config.sweep.order_sensitivity) {
        auto spec = config.optimizer;
        spec.order = VisitOrder::Shuffled;
        auto shuffled_chain = link.receiver(point, 1);
        auto shuffled = baseline_and_greedy(shuffled_chain, link.layout, grouping, spec.greedy_options(grouping, seed));
        row.shuffled_final_dbfs = shuffled.final_power;
      }
      rows[t] = std::move(row);
    } catch (const std::exception& e) {
      task_errors[t] = fmt::format("point {} seed {}: {}", pi, seed, e.what());
    }
  });

  for (std::size_t t = 0; t < n_tasks; ++t) {
    if (rows[t]) result.rows.push_back(std::move(*rows[t]));
    if (!task_errors[t].empty()) result.errors.push_back(task_errors[t]);
  }
  return result;
}

ojson sweep_summary(const ScenarioConfig& config, const SweepResult& result) {
  auto j = summary_header(config, "sweep");
  std::map<double, std::vector<double>> by_angle;
  std::vector<double> order_spread;
  for (const auto& r : result.rows) {
    by_angle[r.point.angle_deg].push_back(r.gain_db);
    if (r.shuffled_final_dbfs) order_spread.push_back(std::abs(*r.shuffled_final_dbfs - r.final_dbfs));
  }
  auto per_angle = ojson::array();
  for (const auto& [angle, gains] : by_angle)
    per_angle.push_back({{"angle_deg", angle}, {"runs", gains.size()}, {"median_gain_db", median(gains)}});
  j["rows"] = result.rows.size();
  j["median_gain_by_angle"] = std::move(per_angle);
  if (!order_spread.empty()) j["median_visit_order_spread_db"] = median(order_spread);
  j["errors"] = result.errors;
  return j;
}

void write_sweep_outputs(const ScenarioConfig& config, const SweepResult& result, const std::filesystem::path& dir) {
  const bool shuffled = config.sweep.order_sensitivity;
  std::ostringstream rows;
  rows << csv_header(config);
  rows << "point_index,angle_deg,distance_cm,seed,baseline_dbfs,final_dbfs,gain_db,measurements"
       << (shuffled ? ",shuffled_final_dbfs" : "") << '\n';
  for (const auto& r : result.rows) {
    rows << fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{}", r.point_index, fmt_num(r.point.angle_deg),
                        fmt_num(r.point.distance_cm), r.seed, r.baseline_dbfs, r.final_dbfs, r.gain_db,
                        r.measurements);
    if (shuffled) rows << fmt::format(",{:.6f}", r.shuffled_final_dbfs.value_or(std::nan("")));
    rows << '\n';
  }
  write_file(dir / "sweep.csv", rows.str());

  std::ostringstream traces;
  traces << csv_header(config);
  traces << "point_index,seed,measurement_index,group_index,candidate_state,p_r_dbfs,p_max_dbfs\n";
  for (const auto& r : result.rows) {
    const auto prefix = fmt::format("{},{},", r.point_index, r.seed);
    traces << prefix << fmt::format("0,-1,-1,{:.6f},{:.6f}\n", r.baseline_dbfs, r.baseline_dbfs);
    append_trace_rows(traces, prefix, r.trace, 1);
  }
  write_file(dir / "sweep_traces.csv", traces.str());
  write_file(dir / "sweep_summary.json", sweep_summary(config, result).dump(2) + "\n");
}

// ---------------------------------------------------------------- codebook

CodebookResult run_codebook_experiment(const ScenarioConfig& config,
                                       const std::optional<std::filesystem::path>& load_path) {
  std::optional<Codebook> loaded;
  if (load_path) {
    std::ifstream in(*load_path);
    if (!in) throw ConfigError("codebook: cannot open " + load_path->string());
    try {
      loaded = read_codebook_json(in);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("codebook: ") + e.what());
    }
    const auto layout = config.layout.build();
    for (const auto& e : loaded->entries)
      if (!e.config.matches(layout)) throw ConfigError("codebook: loaded codewords do not match the layout");
  }

  std::vector<PolarPoint> path;
  for (const auto& p : config.codebook.path) path.push_back(p.point);

  const auto seeds = config.seed_list();
  CodebookResult result;
  result.runs.resize(seeds.size());
  parallel_for(seeds.size(), config.parallel, [&](std::size_t i) {
    const auto link = config.link(seeds[i]);
    const auto settings = codebook_settings(config, link.layout, seeds[i]);
    CodebookRun run;
    run.seed = seeds[i];
    if (loaded) {
      run.book = *loaded;
    } else {
      run.book = generate_codebook(link, config.codebook.references, settings);
      run.book.metadata["config_hash"] = fmt::format("{:016x}", config.hash());
    }
    if (!path.empty()) run.path = evaluate_path(run.book, path, link, settings);
    result.runs[i] = std::move(run);
  });
  return result;
}

ojson codebook_summary(const ScenarioConfig& config, const CodebookResult& result) {
  auto j = summary_header(config, "codebook");
  std::vector<double> gaps;
  std::size_t above_off = 0;
  std::size_t points = 0;
  auto per_seed = ojson::array();
  for (const auto& run : result.runs) {
    std::vector<double> seed_gaps;
    for (const auto& r : run.path.records) {
      seed_gaps.push_back(r.p_online - r.p_codebook);
      above_off += r.p_codebook > r.p_off ? 1 : 0;
      ++points;
    }
    gaps.insert(gaps.end(), seed_gaps.begin(), seed_gaps.end());
    per_seed.push_back({{"seed", run.seed},
                        {"codewords", run.book.size()},
                        {"path_points", run.path.records.size()},
                        {"median_online_minus_codebook_db", seed_gaps.empty() ? ojson(nullptr) : ojson(median(seed_gaps))},
                        {"codeword_switches", run.path.codeword_switches},
                        {"reconfiguration_ms", run.path.reconfiguration_ms()}});
  }
  j["path_points"] = points;
  j["median_online_minus_codebook_db"] = gaps.empty() ? ojson(nullptr) : ojson(median(gaps));
  j["fraction_codebook_above_off"] = points ? ojson(static_cast<double>(above_off) / static_cast<double>(points)) : ojson(nullptr);
  j["runs"] = std::move(per_seed);
  return j;
}

void write_codebook_outputs(const ScenarioConfig& config, const CodebookResult& result,
                            const std::filesystem::path& dir) {
  for (const auto& run : result.runs) {
    std::ostringstream book;
    write_codebook_json(book, run.book);
    write_file(dir / fmt::format("codebook_seed{}.json", run.seed), book.str());

    std::ostringstream path;
    path << csv_header(config);
    write_path_csv(path, run.path);
    write_file(dir / fmt::format("path_seed{}.csv", run.seed), path.str());
  }
  write_file(dir / "codebook_summary.json", codebook_summary(config, result).dump(2) + "\n");
}

// ---------------------------------------------------------------- grouping

GroupingResult run_grouping_experiment(const ScenarioConfig& config) {
  const auto seeds = config.seed_list();
  const auto& sizes = config.grouping.group_sizes;
  const auto& angles = config.grouping.angles_deg;
  const std::size_t n_tasks = angles.size() * sizes.size() * seeds.size();

  GroupingResult result;
  result.runs.resize(n_tasks);
  parallel_for(n_tasks, config.parallel, [&](std::size_t t) {
    const double angle = angles[t / (sizes.size() * seeds.size())];
    const int size = sizes[(t / seeds.size()) % sizes.size()];
    const std::uint64_t seed = seeds[t % seeds.size()];

    const auto link = config.link(seed);
    const auto grouping = make_grouping(link.layout, size);
    auto chain = link.receiver({angle, config.grouping.distance_cm}, static_cast<std::uint64_t>(size));
    auto run = baseline_and_greedy(chain, link.layout, grouping, config.optimizer.greedy_options(grouping, seed));

    GroupingRun& out = result.runs[t];
    out.angle_deg = angle;
    out.group_size = size;
    out.seed = seed;
    out.baseline_dbfs = run.baseline;
    out.final_dbfs = run.final_power;
    out.gain_db = run.final_power - run.baseline;
    out.measurements = run.result.trace.size();
    out.trace = std::move(run.result.trace);
  });
  return result;
}

std::vector<std::pair<int, double>> median_grouping_deficits(const GroupingResult& result) {
  std::map<std::pair<double, std::uint64_t>, double> reference;
  for (const auto& r : result.runs)
    if (r.group_size == 1) reference[{r.angle_deg, r.seed}] = r.gain_db;

  std::map<int, std::vector<double>> deficits;
  for (const auto& r : result.runs) {
    auto it = reference.find({r.angle_deg, r.seed});
    if (it != reference.end()) deficits[r.group_size].push_back(it->second - r.gain_db);
  }
  std::vector<std::pair<int, double>> out;
  for (const auto& [size, d] : deficits) out.emplace_back(size, median(d));
  return out;
}

ojson grouping_summary(const ScenarioConfig& config, const GroupingResult& result) {
  auto j = summary_header(config, "grouping");
  std::map<std::pair<double, int>, std::vector<const GroupingRun*>> cells;
  std::map<std::pair<double, std::uint64_t>, const GroupingRun*> reference;
  for (const auto& r : result.runs) {
    cells[{r.angle_deg, r.group_size}].push_back(&r);
    if (r.group_size == 1) reference[{r.angle_deg, r.seed}] = &r;
  }

  auto table = ojson::array();
  for (const auto& [key, runs] : cells) {
    std::vector<double> gains;
    std::vector<double> deltas;
    std::optional<double> ratio;
    for (const auto* r : runs) {
      gains.push_back(r->gain_db);
      if (auto it = reference.find({r->angle_deg, r->seed}); it != reference.end()) {
        deltas.push_back(r->gain_db - it->second->gain_db);
        ratio = static_cast<double>(r->measurements) / static_cast<double>(it->second->measurements);
      }
    }
    table.push_back({{"angle_deg", key.first},
                     {"group_size", key.second},
                     {"runs", runs.size()},
                     {"measurements", runs.front()->measurements},
                     {"measurement_ratio_vs_size1", ratio ? ojson(*ratio) : ojson(nullptr)},
                     {"median_gain_db", median(gains)},
                     {"median_delta_vs_size1_db", deltas.empty() ? ojson(nullptr) : ojson(median(deltas))}});
  }
  j["cells"] = std::move(table);

  auto pooled = ojson::array();
  for (const auto& [size, d] : median_grouping_deficits(result))
    pooled.push_back({{"group_size", size}, {"median_deficit_vs_size1_db", d}});
  j["median_deficits"] = std::move(pooled);
  return j;
}

void write_grouping_outputs(const ScenarioConfig& config, const GroupingResult& result,
                            const std::filesystem::path& dir) {
  std::map<std::pair<double, int>, std::ostringstream> files;
  for (const auto& r : result.runs) {
    auto& os = files[{r.angle_deg, r.group_size}];
    if (os.tellp() == 0) {
      os << csv_header(config);
      os << "seed,measurement_index,group_index,candidate_state,p_r_dbfs,p_max_dbfs\n";
    }
    append_trace_rows(os, fmt::format("{},", r.seed), r.trace, 0);
  }
  for (const auto& [key, os] : files)
    write_file(dir / fmt::format("grouping_a{}_g{}.csv", fmt_num(key.first), key.second), os.str());
  write_file(dir / "grouping_summary.json", grouping_summary(config, result).dump(2) + "\n");
}

// ---------------------------------------------------------------- oracle

ChannelRealization oracle_channel(std::size_t elements, OracleChannel kind, int states_per_unit, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(elements);
  std::mt19937_64 rng(derive_seed(seed, {fnv1a64("oracle-channel")}));
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  ChannelRealization chan;
  const int active_pols = states_per_unit > 2 ? 2 : 1;  // 2 states only toggle the H diode
  const double common = phase(rng);
  for (int p = 0; p < 2; ++p) {
    chan.h[p] = CVec::Zero(n);
    chan.g[p] = CVec::Zero(n);
    if (p >= active_pols) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (kind == OracleChannel::Random) {
        chan.h[p][i] = Complex(gauss(rng), gauss(rng));
        chan.g[p][i] = Complex(gauss(rng), gauss(rng));
      } else {
        // element phases cancel in conj(g) * h, leaving one common phase
        const double el = phase(rng);
        chan.h[p][i] = std::polar(mag(rng), common + el);
        chan.g[p][i] = std::polar(mag(rng), el);
      }
    }
  }
  return chan;
}

bool OracleResult::all_nonnegative(double tol) const {
  return std::all_of(instances.begin(), instances.end(), [tol](const auto& i) { return i.gap_db >= -tol; });
}

OracleResult run_oracle_check(const ScenarioConfig& config) {
  const auto& spec = config.oracle;
  const RisLayout layout(spec.nx, spec.ny, kSpeedOfLight / config.layout.carrier_hz / 2.0, {}, config.layout.carrier_hz);
  const auto grouping = make_grouping(layout, 1);

  OracleResult result;
  result.elements = layout.active_count();
  result.instances.resize(static_cast<std::size_t>(spec.instances));

  // reject an oversized enumeration before any work
  const double required = std::pow(static_cast<double>(spec.states_per_unit), static_cast<double>(result.elements));
  if (required > static_cast<double>(spec.cap))
    throw BudgetExceeded(fmt::format("oracle-check: {}^{} configurations exceed the cap of {}", spec.states_per_unit,
                                     result.elements, spec.cap),
                         required);

  parallel_for(result.instances.size(), config.parallel, [&](std::size_t i) {
    const std::uint64_t seed = config.seed + i;
    const auto chan = oracle_channel(result.elements, spec.channel, spec.states_per_unit, seed);
    auto oracle_meter = exact_gain_measure(chan, config.layout.amplitude);
    const auto oracle = exhaustive_search(oracle_meter, layout, spec.states_per_unit, spec.cap);
    auto greedy_meter = exact_gain_measure(chan, config.layout.amplitude);
    GreedyOptions opt;
    opt.states_per_unit = spec.states_per_unit;
    const auto greedy = greedy_iterative(greedy_meter, layout, grouping, opt);

    auto& inst = result.instances[i];
    inst.seed = seed;
    inst.oracle_db = oracle.trace.final_max();
    inst.greedy_db = 10.0 * std::log10(end_to_end_gain(greedy.config, chan, config.layout.amplitude));
    inst.gap_db = greedy_gap(inst.oracle_db, inst.greedy_db);
    inst.oracle_measurements = oracle_meter.calls();
    inst.greedy_measurements = greedy_meter.calls();
  });
  return result;
}

ojson oracle_summary(const ScenarioConfig& config, const OracleResult& result) {
  auto j = summary_header(config, "oracle-check");
  std::vector<double> gaps;
  std::size_t zero = 0;
  for (const auto& i : result.instances) {
    gaps.push_back(i.gap_db);
    zero += i.gap_db == 0.0 ? 1 : 0;
  }
  j["elements"] = result.elements;
  j["states_per_unit"] = config.oracle.states_per_unit;
  j["channel"] = config.oracle.channel == OracleChannel::Random ? "random" : "rank-one";
  j["instances"] = result.instances.size();
  j["zero_gap_instances"] = zero;
  if (!gaps.empty()) {
    j["min_gap_db"] = *std::min_element(gaps.begin(), gaps.end());
    j["median_gap_db"] = median(gaps);
    j["max_gap_db"] = *std::max_element(gaps.begin(), gaps.end());
  }
  j["all_gaps_nonnegative"] = result.all_nonnegative();
  return j;
}

void write_oracle_outputs(const ScenarioConfig& config, const OracleResult& result, const std::filesystem::path& dir) {
  std::ostringstream os;
  os << csv_header(config);
  os << "seed,oracle_db,greedy_db,gap_db,oracle_measurements,greedy_measurements\n";
  for (const auto& i : result.instances)
    os << fmt::format("{},{:.9f},{:.9f},{:.9f},{},{}\n", i.seed, i.oracle_db, i.greedy_db, i.gap_db,
                      i.oracle_measurements, i.greedy_measurements);
  write_file(dir / "oracle.csv", os.str());
  write_file(dir / "oracle_summary.json", oracle_summary(config, result).dump(2) + "\n");
}

}  // namespace risbeam
