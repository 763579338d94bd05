#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "risbeam/codebook.hpp"
#include "risbeam/link.hpp"
#include "risbeam/optimizer.hpp"

namespace risbeam {

inline constexpr int kConfigSchemaVersion = 1;

/// Invalid scenario configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A receiver placement. Points off the measurement grid must be flagged interior.
struct ScenarioPoint {
  PolarPoint point;
  bool interior = false;
};

struct LayoutSpec {
  int nx = 10;
  int ny = 8;
  std::optional<double> spacing_m;  // half a wavelength when unset
  double carrier_hz = kDefaultCarrierHz;
  double amplitude = kDefaultElementAmplitude;
  std::optional<std::vector<ElementIndex>> disabled;  // top-right 2x2 when unset

  RisLayout build() const;
};

struct SceneSpec {
  PolarPoint tx{78.0, 100.0};
  double tx_half_beamwidth_deg = kDefaultHalfBeamwidthDeg;
  double tx_h_weight = 0.5;
  double rx_half_beamwidth_deg = kDefaultHalfBeamwidthDeg;
  double rx_h_weight = 0.5;
  double pattern_floor_db = kDefaultPatternFloorDb;
  MeasurementGrid grid = MeasurementGrid::standard();
};

enum class VisitOrder { RowMajor, Shuffled, Explicit };

struct OptimizerSpec {
  int states_per_unit = kStatesPerElement;
  int group_size = 1;
  VisitOrder order = VisitOrder::RowMajor;
  std::vector<std::size_t> explicit_order;
  int max_sweeps = 1;

  /// Options for one run; shuffled orders are drawn from `seed`.
  GreedyOptions greedy_options(const GroupingScheme& grouping, std::uint64_t seed) const;
};

struct SweepSpec {
  std::vector<ScenarioPoint> points;
  /// Also run each point with a shuffled visit order and report the spread.
  bool order_sensitivity = false;
};

struct CodebookSpec {
  std::vector<PolarPoint> references;
  std::vector<ScenarioPoint> path;
};

struct GroupingSpec {
  std::vector<int> group_sizes{1, 2, 4, 8};
  std::vector<double> angles_deg{70.0, 90.0, 130.0, 145.0};
  double distance_cm = 170.0;
};

enum class OracleChannel { Random, RankOne };

struct OracleSpec {
  int nx = 2;
  int ny = 2;
  int states_per_unit = kStatesPerElement;
  int instances = 100;
  OracleChannel channel = OracleChannel::Random;
  std::uint64_t cap = kDefaultExhaustiveCap;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  /// Number of consecutive seeds (seed, seed+1, ...) for batch experiments.
  int seeds = 1;
  /// Optional selector: "sweep", "codebook", "grouping" or "oracle-check". Empty runs anything.
  std::string experiment;
  LayoutSpec layout;
  SceneSpec scene;
  ChannelModelParams channel;
  ToneParams tone;
  AdcParams adc;
  OptimizerSpec optimizer;
  SweepSpec sweep;
  CodebookSpec codebook;
  GroupingSpec grouping;
  OracleSpec oracle;
  std::filesystem::path out_dir = "out";
  unsigned parallel = 1;

  /// Defaults: the 13-point sweep, six references at 170 cm, interior path.
  static ScenarioConfig standard();
  static ScenarioConfig from_json(const nlohmann::json& j);
  static ScenarioConfig load(const std::filesystem::path& path);

  /// Canonical form with every default filled in (output dir and thread count excluded).
  nlohmann::ordered_json to_json() const;
  std::uint64_t hash() const;
  std::string header_line() const;

  void validate() const;
  LinkModel link(std::uint64_t seed) const;
  std::vector<std::uint64_t> seed_list() const;
};

// ---- sweep ----

struct SweepRow {
  std::size_t point_index = 0;
  PolarPoint point;
  std::uint64_t seed = 0;
  double baseline_dbfs = 0.0;
  double final_dbfs = 0.0;
  double gain_db = 0.0;
  /// Power values traced: the all-off baseline plus every optimizer measurement.
  std::size_t measurements = 0;
  PowerTrace trace;  // optimizer measurements only
  std::optional<double> shuffled_final_dbfs;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> errors;
};

SweepResult run_sweep(const ScenarioConfig& config);
void write_sweep_outputs(const ScenarioConfig& config, const SweepResult& result, const std::filesystem::path& dir);
nlohmann::ordered_json sweep_summary(const ScenarioConfig& config, const SweepResult& result);

// ---- codebook ----

struct CodebookRun {
  std::uint64_t seed = 0;
  Codebook book;
  PathEvaluation path;
};

struct CodebookResult {
  std::vector<CodebookRun> runs;
};

/// Generates one book per seed, or loads `load_path` and uses it for every seed.
CodebookResult run_codebook_experiment(const ScenarioConfig& config,
                                       const std::optional<std::filesystem::path>& load_path = std::nullopt);
void write_codebook_outputs(const ScenarioConfig& config, const CodebookResult& result,
                            const std::filesystem::path& dir);
nlohmann::ordered_json codebook_summary(const ScenarioConfig& config, const CodebookResult& result);

// ---- grouping ----

struct GroupingRun {
  double angle_deg = 0.0;
  int group_size = 1;
  std::uint64_t seed = 0;
  double baseline_dbfs = 0.0;
  double final_dbfs = 0.0;
  double gain_db = 0.0;
  std::size_t measurements = 0;  // optimizer measurements
  PowerTrace trace;
};

struct GroupingResult {
  std::vector<GroupingRun> runs;  // ordered by angle, then group size, then seed
};

GroupingResult run_grouping_experiment(const ScenarioConfig& config);
void write_grouping_outputs(const ScenarioConfig& config, const GroupingResult& result,
                            const std::filesystem::path& dir);
nlohmann::ordered_json grouping_summary(const ScenarioConfig& config, const GroupingResult& result);

/// Per group size: median over runs of (gain with size 1 - gain with this size),
/// pairing runs by (angle, seed).
std::vector<std::pair<int, double>> median_grouping_deficits(const GroupingResult& result);

// ---- oracle check ----

struct OracleInstance {
  std::uint64_t seed = 0;
  double oracle_db = 0.0;
  double greedy_db = 0.0;
  double gap_db = 0.0;
  std::size_t oracle_measurements = 0;
  std::size_t greedy_measurements = 0;
};

struct OracleResult {
  std::size_t elements = 0;
  std::vector<OracleInstance> instances;
  bool all_nonnegative(double tol = 1e-9) const;
};

/// Random small channels (noiseless), greedy vs exhaustive on the exact gain.
OracleResult run_oracle_check(const ScenarioConfig& config);
void write_oracle_outputs(const ScenarioConfig& config, const OracleResult& result, const std::filesystem::path& dir);
nlohmann::ordered_json oracle_summary(const ScenarioConfig& config, const OracleResult& result);

/// Channel used by the oracle check for one seeded instance.
ChannelRealization oracle_channel(std::size_t elements, OracleChannel kind, int states_per_unit, std::uint64_t seed);

double median(std::vector<double> values);

}  // namespace risbeam
