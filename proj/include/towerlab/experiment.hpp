#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "towerlab/config.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

inline constexpr const char* kVersion = "1.0.0";

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::return_tail;
  std::vector<Check> checks;
  // Ordered key/value report entries (also written to report.txt).
  std::vector<std::pair<std::string, std::string>> report;
  std::vector<std::string> files;

  bool passed() const;
  // 0 when every check passes, 2 otherwise.
  int exit_code() const;
  const Check* find_check(const std::string& name) const;
  // Report value parsed as a number; throws if absent.
  double metric(const std::string& key) const;
};

TowerSpec build_tower(const ExperimentConfig& config);
obs::ObservableSpec build_observable(const ExperimentConfig& config, const TowerSpec& spec);

// Runs the configured pipeline and writes config.ini, report.txt, the CSVs and
// manifest.json into config.out. Throws ConfigError for invalid settings or an
// unwritable output directory.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct AcceptanceEntry {
  std::string name;  // output subdirectory
  ExperimentConfig config;
};

// The fixed acceptance suite for a seed.
std::vector<AcceptanceEntry> acceptance_suite(std::uint64_t seed);

struct AcceptanceRun {
  std::vector<std::pair<std::string, ExperimentResult>> results;
  std::map<std::string, double> seconds;  // wall time per entry (never written to disk)
  bool passed() const;
};

// Runs every entry into out/<name>/ and writes out/summary.txt.
AcceptanceRun run_all_acceptance(std::uint64_t seed, const std::string& out, int workers);

// Byte comparison of two directory trees; the first difference is reported
// through `difference`.
bool trees_identical(const std::string& a, const std::string& b, std::string* difference = nullptr);

std::string sha256_hex(const std::string& bytes);

}  // namespace towerlab
