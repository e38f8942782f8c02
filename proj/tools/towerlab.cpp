#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "towerlab/config.hpp"
#include "towerlab/experiment.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  bool dump_config = false;
  bool verify = false;
  std::string export_dir;
};

int env_workers() {
  const char* text = std::getenv("TOWERLAB_WORKERS");
  if (!text || !*text) return 0;
  char* end = nullptr;
  const long v = std::strtol(text, &end, 10);
  if (*end != '\0' || v < 0) throw towerlab::ConfigError("TOWERLAB_WORKERS", "must be a non-negative integer");
  return static_cast<int>(v);
}

void add_common(CLI::App* sub, Options& opt) {
  sub->add_option("--seed", opt.seed, "Master seed (overrides the config file)");
  sub->add_option("--out", opt.out, "Output directory");
  sub->add_option("--workers", opt.workers, "Worker threads, 0 = all cores (default: TOWERLAB_WORKERS)");
}

int run_single(towerlab::ExperimentKind kind, const Options& opt) {
  towerlab::ExperimentConfig config =
      opt.config_path.empty() ? towerlab::default_config(kind) : towerlab::load_config(opt.config_path);
  if (config.kind != kind) {
    throw towerlab::ConfigError("experiment.kind", "config describes '" + towerlab::kind_name(config.kind) +
                                                       "' but the subcommand is '" +
                                                       towerlab::kind_name(kind) + "'");
  }
  if (opt.seed) config.seed = *opt.seed;
  if (opt.out) config.out = *opt.out;
  config.workers = opt.workers ? *opt.workers : env_workers();
  towerlab::validate_config(config);
  if (opt.dump_config) {
    towerlab::write_config(std::cout, config);
    return 0;
  }
  const towerlab::ExperimentResult result = towerlab::run_experiment(config);
  for (const auto& c : result.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": value " << c.value << ", threshold "
              << c.threshold << " (" << c.detail << ")\n";
  }
  std::cout << "output: " << config.out << "\n";
  return result.exit_code();
}

int run_acceptance(const Options& opt) {
  const std::uint64_t seed = opt.seed.value_or(1);
  if (!opt.export_dir.empty()) {
    std::filesystem::create_directories(opt.export_dir);
    for (const auto& entry : towerlab::acceptance_suite(seed)) {
      const auto path = std::filesystem::path(opt.export_dir) / (entry.name + ".ini");
      std::ofstream file(path);
      towerlab::write_config(file, entry.config);
      if (!file) throw towerlab::ConfigError("--export-configs", "cannot write " + path.string());
      std::cout << path.string() << "\n";
    }
    return 0;
  }
  const std::string out = opt.out.value_or("acceptance");
  const int workers = opt.workers ? *opt.workers : env_workers();
  const towerlab::AcceptanceRun run = towerlab::run_all_acceptance(seed, out, workers);
  for (const auto& [name, result] : run.results) {
    for (const auto& c : result.checks) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << name << "." << c.name << ": value " << c.value
                << ", threshold " << c.threshold << "\n";
    }
    std::cout << "  " << name << " took " << run.seconds.at(name) << " s\n";
  }
  int code = run.passed() ? 0 : 2;
  if (opt.verify) {
    const std::string second = out + ".verify";
    towerlab::run_all_acceptance(seed, second, workers == 1 ? 2 : 1);
    std::string diff;
    const bool same = towerlab::trees_identical(out, second, &diff);
    std::cout << (same ? "PASS" : "FAIL") << " determinism: rerun with another worker count "
              << (same ? "is byte-identical" : "differs at " + diff) << "\n";
    std::filesystem::remove_all(second);
    if (!same) code = 2;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"towerlab: Monte Carlo experiments on Markov shift towers and intermittent maps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(towerlab::kVersion));

  Options opt;
  const std::pair<const char*, towerlab::ExperimentKind> kinds[] = {
      {"return-tail", towerlab::ExperimentKind::return_tail},
      {"meeting-tail", towerlab::ExperimentKind::meeting_tail},
      {"approx-decay", towerlab::ExperimentKind::approx_decay},
      {"clt", towerlab::ExperimentKind::clt},
      {"coboundary", towerlab::ExperimentKind::coboundary},
      {"stationarity", towerlab::ExperimentKind::stationarity},
  };
  std::vector<std::pair<CLI::App*, towerlab::ExperimentKind>> subs;
  for (const auto& [name, kind] : kinds) {
    CLI::App* sub = app.add_subcommand(name, "Run the " + std::string(name) + " experiment");
    sub->add_option("--config", opt.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_flag("--dump-config", opt.dump_config, "Print the effective configuration and exit");
    add_common(sub, opt);
    subs.emplace_back(sub, kind);
  }
  CLI::App* all = app.add_subcommand("all-acceptance", "Run the full acceptance suite");
  add_common(all, opt);
  all->add_flag("--verify-determinism", opt.verify,
                "Rerun with a different worker count and compare the output trees");
  all->add_option("--export-configs", opt.export_dir,
                  "Write each suite entry as an INI file into this directory and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (all->parsed()) return run_acceptance(opt);
    for (const auto& [sub, kind] : subs) {
      if (sub->parsed()) return run_single(kind, opt);
    }
  } catch (const towerlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 3;
}
