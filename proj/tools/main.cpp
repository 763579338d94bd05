#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "risbeam/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string load_codebook;
  std::vector<int> group_sizes;
  unsigned parallel = 0;
};

risbeam::ScenarioConfig resolve(const Options& opt) {
  auto config = opt.config_path.empty() ? risbeam::ScenarioConfig::standard()
                                        : risbeam::ScenarioConfig::load(opt.config_path);
  if (opt.seed) config.seed = *opt.seed;
  if (!opt.out_dir.empty()) config.out_dir = opt.out_dir;
  if (!opt.group_sizes.empty()) config.grouping.group_sizes = opt.group_sizes;
  if (opt.parallel > 0) config.parallel = opt.parallel;
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config_path, "Scenario config (JSON); built-in defaults when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opt.seed, "Master seed, overrides the config");
  cmd->add_option("--out", opt.out_dir, "Output directory, overrides the config");
  cmd->add_option("--parallel", opt.parallel, "Worker threads")->check(CLI::PositiveNumber);
}

void print_errors(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "risbeam: " << e << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded simulator and optimizer for RIS-assisted indoor links"};
  app.require_subcommand(1);

  Options opt;
  auto* sweep = app.add_subcommand("sweep", "Greedy optimization at every sweep point");
  auto* codebook = app.add_subcommand("codebook", "Generate or load a codebook and evaluate it along a path");
  auto* grouping = app.add_subcommand("grouping", "Compare greedy runs over element group sizes");
  auto* oracle = app.add_subcommand("oracle-check", "Greedy against exhaustive search on small layouts");
  for (auto* cmd : {sweep, codebook, grouping, oracle}) add_common(cmd, opt);
  codebook->add_option("--load-codebook", opt.load_codebook, "Use this codebook instead of generating one");
  grouping->add_option("--group-sizes", opt.group_sizes, "Group sizes to compare, e.g. 1,2,4,8")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto config = resolve(opt);
    const std::string verb = app.get_subcommands().front()->get_name();
    if (!config.experiment.empty() && config.experiment != verb) {
      std::cerr << "risbeam: config selects '" << config.experiment << "' but the command was '" << verb << "'\n";
      return kExitConfig;
    }
    const auto& dir = config.out_dir;

    if (sweep->parsed()) {
      const auto result = risbeam::run_sweep(config);
      risbeam::write_sweep_outputs(config, result, dir);
      print_errors(result.errors);
      std::cout << risbeam::sweep_summary(config, result).dump(2) << '\n';
    } else if (codebook->parsed()) {
      std::optional<std::filesystem::path> load;
      if (!opt.load_codebook.empty()) load = opt.load_codebook;
      const auto result = risbeam::run_codebook_experiment(config, load);
      risbeam::write_codebook_outputs(config, result, dir);
      std::cout << risbeam::codebook_summary(config, result).dump(2) << '\n';
    } else if (grouping->parsed()) {
      const auto result = risbeam::run_grouping_experiment(config);
      risbeam::write_grouping_outputs(config, result, dir);
      std::cout << risbeam::grouping_summary(config, result).dump(2) << '\n';
    } else if (oracle->parsed()) {
      const auto result = risbeam::run_oracle_check(config);
      risbeam::write_oracle_outputs(config, result, dir);
      std::cout << risbeam::oracle_summary(config, result).dump(2) << '\n';
      if (!result.all_nonnegative()) {
        std::cerr << "risbeam: greedy exceeded the exhaustive optimum on at least one instance\n";
        return kExitAssertion;
      }
    }
  } catch (const risbeam::ConfigError& e) {
    std::cerr << "risbeam: " << e.what() << '\n';
    return kExitConfig;
  } catch (const risbeam::BudgetExceeded& e) {
    std::cerr << "risbeam: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "risbeam: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return kExitOk;
}
