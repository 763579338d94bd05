#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "risbeam/experiments.hpp"

using namespace risbeam;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("risbeam_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ScenarioConfig parse(const char* text) { return ScenarioConfig::from_json(nlohmann::json::parse(text)); }

ScenarioConfig small_config() {
  auto c = ScenarioConfig::standard();
  c.seed = 5;
  c.sweep.points = {{{70.0, 170.0}, false}, {{130.0, 220.0}, false}};
  c.codebook.references = {{70.0, 170.0}, {130.0, 170.0}};
  c.codebook.path = {{{75.0, 195.0}, true}, {{125.0, 145.0}, true}};
  c.grouping.angles_deg = {70.0};
  c.oracle.instances = 10;
  return c;
}

}  // namespace

TEST_CASE("standard scenario defaults", "[experiments]") {
  const auto c = ScenarioConfig::standard();
  REQUIRE_NOTHROW(c.validate());
  CHECK(c.sweep.points.size() == 13);
  CHECK(c.codebook.references.size() == 6);
  for (const auto& r : c.codebook.references) CHECK(r.distance_cm == 170.0);
  CHECK_FALSE(c.codebook.path.empty());
  CHECK(c.grouping.group_sizes == std::vector<int>{1, 2, 4, 8});
  CHECK(c.grouping.angles_deg == std::vector<double>{70, 90, 130, 145});
  CHECK(c.tone.buffer_len == 10000);
  CHECK(c.tone.sample_rate_hz == 1e6);
  CHECK(c.layout.carrier_hz == 5.2e9);
  CHECK(c.scene.tx.angle_deg == 78.0);
  CHECK(c.scene.tx.distance_cm == 100.0);
  CHECK(c.seed_list() == std::vector<std::uint64_t>{1});
}

TEST_CASE("config parsing and validation", "[experiments]") {
  const auto c = parse(R"({"seed": 42, "seeds": 3})");
  CHECK(c.seed == 42);
  CHECK(c.seed_list() == std::vector<std::uint64_t>{42, 43, 44});

  CHECK_THROWS_AS(parse(R"({"seeds": 3})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "colour": "red"})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "version": 2})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "grouping": {"group_sizes": [1, 3]}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "grouping": {"angles_deg": [75]}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "codebook": {"references": [[75, 170]]}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "codebook": {"references": [[70, 170], [70, 170]]}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "codebook": {"path": [[75, 190]]}})"), ConfigError);
  CHECK_NOTHROW(parse(R"({"seed": 1, "codebook": {"path": [{"angle_deg": 75, "distance_cm": 190, "interior": true}]}})"));
  CHECK_THROWS_AS(parse(R"({"seed": 1, "channel": {"noise_variance": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "layout": {"nx": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": 1, "optimizer": {"visit_order": "random"}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"seed": "one"})"), ConfigError);

  const auto inf = parse(R"({"seed": 1, "channel": {"rician_k_db": "inf"}})");
  CHECK(inf.channel.rician_k_db == std::numeric_limits<double>::infinity());

  CHECK_THROWS_AS(ScenarioConfig::load("/nonexistent/risbeam.json"), ConfigError);
}

TEST_CASE("canonical form round trips and drives the hash", "[experiments]") {
  auto c = small_config();
  const auto again = ScenarioConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(again.to_json() == c.to_json());
  CHECK(again.hash() == c.hash());

  auto other = c;
  other.seed = 6;
  CHECK(other.hash() != c.hash());
  other = c;
  other.out_dir = "elsewhere";
  other.parallel = 4;
  CHECK(other.hash() == c.hash());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(c.hash()));
  CHECK(c.header_line() == std::string("risbeam config_hash=") + hex + " seed=5 seeds=1");
}

TEST_CASE("sweep rows and error handling", "[experiments]") {
  auto c = small_config();
  c.sweep.points.push_back({{100.0, 170.0}, false});  // not on the grid
  c.sweep.points.push_back({{-20.0, 170.0}, true});
  c.sweep.points.push_back({{110.0, 120.0}, false});
  const auto r = run_sweep(c);
  CHECK(r.rows.size() == 3);
  CHECK(r.errors.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.measurements == 305);
    CHECK(row.trace.size() == 304);
    CHECK(std::abs(row.gain_db - (row.final_dbfs - row.baseline_dbfs)) <= 1e-9);
  }
  CHECK(r.rows[2].point_index == 4);

  auto single = small_config();
  single.sweep.points = {{{50.0, 120.0}, false}};
  CHECK(run_sweep(single).rows.size() == 1);
}

TEST_CASE("grouping experiment counts and self-comparison", "[experiments]") {
  auto c = small_config();
  const auto r = run_grouping_experiment(c);
  REQUIRE(r.runs.size() == 4);
  const std::vector<std::size_t> counts{304, 152, 76, 40};
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.runs[i].measurements == counts[i]);

  c.grouping.group_sizes = {1};
  c.seeds = 3;
  const auto self = run_grouping_experiment(c);
  for (const auto& [size, d] : median_grouping_deficits(self)) CHECK(d == 0.0);
  const auto summary = grouping_summary(c, self);
  for (const auto& cell : summary.at("cells")) CHECK(cell.at("median_delta_vs_size1_db") == 0.0);
}

TEST_CASE("oracle check batches", "[experiments]") {
  auto c = small_config();
  c.oracle.nx = 1;
  c.oracle.ny = 1;
  c.oracle.instances = 50;
  auto single = run_oracle_check(c);
  CHECK(single.elements == 1);
  for (const auto& i : single.instances) CHECK(i.gap_db == 0.0);

  c.oracle.nx = 2;
  c.oracle.ny = 2;
  c.oracle.instances = 100;
  const auto four = run_oracle_check(c);
  CHECK(four.instances.size() == 100);
  CHECK(four.all_nonnegative());
  for (const auto& i : four.instances) {
    CHECK(i.oracle_measurements == 256);
    CHECK(i.greedy_measurements == 16);
  }

  c.oracle.nx = 3;
  c.oracle.ny = 2;
  c.oracle.states_per_unit = 2;
  c.oracle.channel = OracleChannel::RankOne;
  for (const auto& i : run_oracle_check(c).instances) CHECK(i.gap_db == Catch::Approx(0.0).margin(1e-12));

  c.oracle.nx = 4;
  c.oracle.ny = 3;
  c.oracle.states_per_unit = 4;
  c.oracle.cap = 4096;
  CHECK_THROWS_AS(run_oracle_check(c), BudgetExceeded);
}

TEST_CASE("codebook experiment load mode reproduces generate mode", "[experiments]") {
  const auto c = small_config();
  const auto dir = scratch("codebook");
  const auto generated = run_codebook_experiment(c);
  write_codebook_outputs(c, generated, dir);
  const auto loaded = run_codebook_experiment(c, dir / "codebook_seed5.json");
  REQUIRE(loaded.runs.size() == 1);
  const auto& a = generated.runs[0].path.records;
  const auto& b = loaded.runs[0].path.records;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].p_codebook == b[i].p_codebook);

  CHECK_THROWS_AS(run_codebook_experiment(c, dir / "missing.json"), ConfigError);

  auto empty = c;
  empty.codebook.path.clear();
  const auto vacuous = run_codebook_experiment(empty);
  CHECK(vacuous.runs[0].path.records.empty());
  const auto dir2 = scratch("codebook_empty");
  write_codebook_outputs(empty, vacuous, dir2);
  CHECK(fs::exists(dir2 / "path_seed5.csv"));
  CHECK(nlohmann::json::parse(slurp(dir2 / "codebook_summary.json")).at("path_points") == 0);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("outputs are byte-identical across reruns and thread counts", "[experiments]") {
  auto c = small_config();
  c.seeds = 2;
  const auto d1 = scratch("det1");
  const auto d2 = scratch("det2");
  write_sweep_outputs(c, run_sweep(c), d1);
  write_grouping_outputs(c, run_grouping_experiment(c), d1);
  write_oracle_outputs(c, run_oracle_check(c), d1);
  c.parallel = 3;
  write_sweep_outputs(c, run_sweep(c), d2);
  write_grouping_outputs(c, run_grouping_experiment(c), d2);
  write_oracle_outputs(c, run_oracle_check(c), d2);

  std::size_t files = 0;
  const std::string header = "# " + c.header_line();
  for (const auto& e : fs::directory_iterator(d1)) {
    ++files;
    const auto name = e.path().filename();
    CHECK(slurp(e.path()) == slurp(d2 / name));
    const auto text = slurp(e.path());
    if (name.extension() == ".csv") CHECK(text.rfind(header + "\n", 0) == 0);
    if (name.extension() == ".json") CHECK(nlohmann::json::parse(text).at("header") == c.header_line());
  }
  CHECK(files == 3 + 5 + 2);
  fs::remove_all(d1);
  fs::remove_all(d2);
}
