#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "towerlab/histogram.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

// State (a, l) of the tower chain: symbol index into the TowerSpec and level
// 0 <= l < roof(a).
struct ChainState {
  std::uint32_t symbol = 0;
  std::uint32_t level = 0;

  friend bool operator==(const ChainState&, const ChainState&) = default;
};

// Markov shift tower data: alphabet with probabilities P_A, integer roof h_A
// and the metric base xi. Immutable once built; construction validates.
class TowerSpec {
 public:
  static constexpr double kWeightTolerance = 1e-12;

  // `ids` are external labels (for towers built from tails, the roof value).
  TowerSpec(std::vector<std::int64_t> ids, std::vector<double> weights,
            std::vector<std::uint32_t> roofs, double xi, double truncated_mass = 0.0);

  std::size_t size() const { return weights_.size(); }
  std::int64_t id(std::uint32_t a) const { return ids_[a]; }
  double weight(std::uint32_t a) const { return weights_[a]; }
  std::uint32_t roof(std::uint32_t a) const { return roofs_[a]; }
  double xi() const { return xi_; }
  // Mass removed by truncation before renormalization (reporting only).
  double truncated_mass() const { return truncated_mass_; }

  const std::vector<std::int64_t>& ids() const { return ids_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<std::uint32_t>& roofs() const { return roofs_; }

  double mean_roof() const { return mean_roof_; }
  std::uint32_t max_roof() const { return max_roof_; }
  std::uint64_t state_count() const { return state_count_; }
  // gcd of roofs carrying positive mass; the chain is aperiodic iff this is 1.
  std::uint64_t roof_gcd() const { return roof_gcd_; }

  bool valid(ChainState s) const { return s.symbol < size() && s.level < roofs_[s.symbol]; }
  bool in_base(ChainState s) const { return s.level == 0; }
  bool at_top(ChainState s) const { return s.level + 1 == roofs_[s.symbol]; }

  // P_A(h >= n) and E_A[(h - n)_+], exact from the table.
  double roof_survival(std::uint64_t n) const;
  double roof_excess(std::uint64_t n) const;

  std::uint32_t draw_innovation(double u) const { return innovation_table_.sample(u); }
  // Symbol law of the stationary measure: proportional to P_A(a) h_A(a).
  std::uint32_t draw_stationary_symbol(double u) const { return stationary_table_.sample(u); }

  // Dense index of a valid state in [0, state_count()); states ordered by
  // symbol then level.
  std::uint64_t state_index(ChainState s) const { return state_offset_[s.symbol] + s.level; }
  ChainState state_at(std::uint64_t index) const;

  friend bool operator==(const TowerSpec& a, const TowerSpec& b) {
    return a.ids_ == b.ids_ && a.weights_ == b.weights_ && a.roofs_ == b.roofs_ && a.xi_ == b.xi_;
  }

 private:
  std::vector<std::int64_t> ids_;
  std::vector<double> weights_;
  std::vector<std::uint32_t> roofs_;
  double xi_;
  double truncated_mass_;
  double mean_roof_ = 0.0;
  std::uint32_t max_roof_ = 0;
  std::uint64_t state_count_ = 0;
  std::uint64_t roof_gcd_ = 0;
  std::vector<std::uint64_t> state_offset_;
  std::vector<double> survival_by_roof_;  // P(h >= n), n = 0..max_roof+1
  std::vector<double> excess_by_roof_;    // E[(h - n)_+], n = 0..max_roof+1
  AliasTable innovation_table_;
  AliasTable stationary_table_;
};

// Invariant probability of (a, l): P_A(a) / E[h_A].
double nu_mass(const TowerSpec& spec, ChainState state);
std::vector<double> nu_vector(const TowerSpec& spec);

// Parametric roof laws, each given by its survival function S(n) = P(h >= n)
// with S(1) = 1.
struct PowerTail {
  double beta = 3.0;   // S(n) proportional to n^-beta (1 + log n)^gamma
  double gamma = 0.0;
};
struct GeometricTail {
  double ratio = 0.5;  // S(n) = ratio^(n-1), i.e. P(h = n) = (1-ratio) ratio^(n-1)
};
struct UniformRoof {
  std::uint32_t max_roof = 1;  // h uniform on {1..max_roof}
};
using TailModel = std::variant<PowerTail, GeometricTail, UniformRoof>;

double model_survival(const TailModel& model, std::uint64_t n);

// Alphabet = roof values with positive mass up to `cap`, renormalized.
TowerSpec build_tower_from_model(const TailModel& model, std::uint64_t cap, double xi);
// Alphabet = distinct uncensored values n >= 1 of the histogram with their
// empirical masses, renormalized over the uncensored part.
TowerSpec build_tower_from_tail(const TailHistogram& hist, double xi);

// Finite window g_{first} .. g_{first+len-1} of an admissible trajectory with
// the innovation that produced each state (kNoInnovation where unknown).
struct TrajectoryWindow {
  static constexpr std::uint32_t kNoInnovation = 0xffffffffU;

  std::int64_t first = 0;
  std::int64_t center = 0;
  std::vector<ChainState> states;
  std::vector<std::uint32_t> innovations;

  std::int64_t last() const { return first + static_cast<std::int64_t>(states.size()) - 1; }
  bool contains(std::int64_t t) const { return t >= first && t <= last(); }
  // Symmetric half-width around the center that lies inside the window.
  std::int64_t radius() const;
  const ChainState& at(std::int64_t t) const { return states[static_cast<std::size_t>(t - first)]; }
  ChainState& at(std::int64_t t) { return states[static_cast<std::size_t>(t - first)]; }
  std::uint32_t innovation_at(std::int64_t t) const {
    return innovations[static_cast<std::size_t>(t - first)];
  }
};

// First index where admissibility fails, or nullopt if the window lies in the
// set of admissible trajectories.
std::optional<std::int64_t> first_inadmissible(const TowerSpec& spec, const TrajectoryWindow& w);

struct Separation {
  std::uint64_t s = 0;
  std::uint64_t s_minus = 0;
  std::uint64_t s_plus = 0;
  // True when the minimum comes from a side without a disagreement inside
  // the window; s is then only a lower bound.
  bool window_limited = false;
};

Separation separation_time(const TrajectoryWindow& a, const TrajectoryWindow& b);

struct MetricValue {
  double value = 1.0;
  bool upper_bound = false;  // window-limited: the true distance is <= value
};

MetricValue metric(const TrajectoryWindow& a, const TrajectoryWindow& b, double xi);

// Number of base visits (level 0) at times from..to inclusive; 0 if from > to.
std::uint64_t g0_visits(const TrajectoryWindow& w, std::int64_t from, std::int64_t to);

// Dense transition matrix (row-major, state_count^2) and the exact push-forward
// error max |nu P - nu|. Only for small specs.
std::vector<double> transition_matrix(const TowerSpec& spec, std::uint64_t max_states = 4096);
double kernel_stationarity_error(const TowerSpec& spec, std::uint64_t max_states = 4096);

// Text format:
//   xi = <value>
//   symbol weight roof
//   <id> <weight> <roof>
// Doubles are written with 17 significant digits.
void write_tower_spec(std::ostream& out, const TowerSpec& spec);
TowerSpec read_tower_spec(std::istream& in);

}  // namespace towerlab
