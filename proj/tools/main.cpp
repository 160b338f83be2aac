#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "horolab/scenario.hpp"

namespace {

int loadConfig(const std::string& path, horolab::ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "config: cannot open '" << path << "'\n";
    return 2;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    cfg = horolab::config_from_json(buf.str());
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"horolab: quantitative experiments on time-changed unipotent flows"};
  app.require_subcommand(1);

  std::string configPath, outDir, scenario;
  std::uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "execute one scenario");
  CLI::Option* runConfig = run->add_option("--config", configPath, "configuration file");
  CLI::Option* runScenario = run->add_option("--scenario", scenario, "scenario name");
  CLI::Option* runSeed = run->add_option("--seed", seed, "random seed override");
  CLI::Option* runOut = run->add_option("--out", outDir, "output directory");

  CLI::App* list = app.add_subcommand("list", "print the scenario catalog");

  CLI::App* validate = app.add_subcommand("validate", "check a configuration file");
  validate->add_option("--config", configPath, "configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    const auto entries = horolab::list_scenarios();
    for (const auto& e : entries) std::cout << e.name << ": " << e.verifies << "\n";
    std::cout << entries.size() << " scenarios\n";
    return 0;
  }

  horolab::ExperimentConfig cfg;
  if (*runConfig || validate->parsed()) {
    const int rc = loadConfig(configPath, cfg);
    if (rc != 0) return rc;
  }

  if (validate->parsed()) {
    const horolab::ValidationReport rep = horolab::validate_config(cfg);
    if (!rep.ok) {
      for (const auto& e : rep.errors) std::cerr << e << "\n";
      return 2;
    }
    std::cout << "ok\n";
    return 0;
  }

  if (*runScenario) cfg.scenario = scenario;
  if (*runSeed) cfg.seed = seed;
  if (*runOut) cfg.outDir = outDir;

  const horolab::RunResult res = horolab::run_scenario(cfg);
  if (res.exitCode == 2) {
    std::cerr << res.manifest << "\n";
    return 2;
  }
  std::cout << res.manifest << "\n";
  return res.exitCode;
}
