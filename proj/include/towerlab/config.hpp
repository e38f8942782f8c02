#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace towerlab {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind { return_tail, meeting_tail, approx_decay, clt, coboundary, stationarity };

std::string kind_name(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);

struct MapsSection {
  double alpha = 0.5;
  std::uint64_t samples = 1000000;
  std::uint64_t cap = 1000000;
  std::string mode = "orbit";  // orbit | uniform
  std::uint64_t burn_in = 100000;
  std::uint32_t replicates = 16;
  std::uint64_t kac_steps = 0;  // 0 disables the Kac diagnostic
};

struct TowerSection {
  std::string model = "power";  // power | geometric | uniform | lsv | file
  double beta = 3.0;
  double gamma = 0.0;
  double ratio = 0.5;
  std::uint32_t max_roof = 4;
  std::uint64_t cap = 10000;
  double xi = 0.5;
  std::string file;
  // model = lsv: tower built from sampled return times of the intermittent map
  double lsv_alpha = 0.4;
  std::uint64_t lsv_samples = 1000000;
  std::uint64_t lsv_cap = 100000;
};

struct ChainSection {
  std::uint64_t runs = 100000;
  std::uint64_t cap = 2048;
  std::uint64_t steps = 1000000;
  std::uint64_t exact_n = 12;
  double moment_eta = 2.0;
};

struct ObservableSection {
  std::string mode = "geometric";  // geometric | center
  std::string base = "short_block_contrast";
  double constant = 0.0;
};

struct DecaySection {
  std::vector<std::int64_t> ms{4, 8, 16, 32};
  std::uint64_t samples = 10000;
  std::uint64_t outer = 16;
  std::uint64_t inner = 1;
  std::int64_t radius = 96;
  double r = 2.0;
  std::uint64_t meeting_runs = 1000000;
};

struct CltSection {
  std::uint64_t length = 10000;
  std::uint64_t replicates = 1000;
  std::uint64_t margin = 256;
  std::vector<std::int64_t> cutoffs{50, 100, 200};
  std::uint64_t groups = 10;
  std::uint64_t short_length = 1000;
};

struct CoboundarySection {
  std::uint64_t length = 1000000;
  std::uint64_t cutoff = 200;
  double variance_fraction = 0.01;
  double slack = 1e-9;
};

struct FitSection {
  std::uint64_t min = 16;
  std::uint64_t max = 1024;
  double gamma = 0.0;
  std::uint32_t bootstrap = 200;
};

// Pass/fail thresholds; an unset threshold disables its check.
struct ChecksSection {
  std::optional<double> slope_target;
  std::optional<double> slope_tolerance;
  std::optional<double> kac_tolerance;
  std::optional<double> spearman_max;
  std::optional<double> r2_min;
  std::optional<double> exact_sigma;
  std::optional<double> mc_relative_max;
  std::optional<double> dominance;  // tolerance factor on C * comparator
  std::optional<double> plateau_max;
  std::optional<double> cutoff_sensitivity_max;
  std::optional<double> variance_gap_max;
  std::optional<double> ks_max;
  std::optional<double> tv_max;
  std::optional<double> kernel_error_max;
  std::optional<double> theta_tolerance;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::return_tail;
  std::uint64_t seed = 1;
  MapsSection maps;
  TowerSection tower;
  ChainSection chain;
  ObservableSection observable;
  DecaySection decay;
  CltSection clt;
  CoboundarySection coboundary;
  FitSection fit;
  ChecksSection checks;

  // Runtime settings; never serialized, so output trees do not depend on them.
  int workers = 0;
  std::string out = "out";
};

// INI format: [section] then key = value lines. Fields left out take the
// defaults of the experiment kind; a threshold set to "none" is disabled.
// Unknown sections or keys and malformed values raise ConfigError naming the field.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
// Throws ConfigError naming the first invalid field.
void validate_config(const ExperimentConfig& config);
void write_config(std::ostream& out, const ExperimentConfig& config);
std::string config_text(const ExperimentConfig& config);

// Defaults for one experiment kind (moderate sizes).
ExperimentConfig default_config(ExperimentKind kind);

}  // namespace towerlab
