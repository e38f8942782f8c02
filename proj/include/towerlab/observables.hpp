#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "towerlab/rng.hpp"
#include "towerlab/tower.hpp"

namespace towerlab::obs {

// Bounded real function of a chain state.
struct BaseFunction {
  std::string name;
  std::function<double(ChainState)> f;
  double sup = 0.0;  // declared sup |f|
};

BaseFunction zero_function();
BaseFunction constant_function(double c);
BaseFunction level_function(const TowerSpec& spec);
BaseFunction base_indicator();
// f(a) 1{l = 0} with f = P(h=2) on roof-1 symbols and -P(h=1) on roof-2
// symbols: mean zero under P_A, vanishing on long blocks.
BaseFunction short_block_contrast(const TowerSpec& spec);
// Looks a preset up by name: zero, constant, level, base_indicator,
// short_block_contrast.
BaseFunction make_base_function(const std::string& name, const TowerSpec& spec,
                                double constant = 0.0);

enum class Mode { finite_window, geometric };

// Window functional F(window, k) reading only g_{k-width} .. g_{k+width}.
using WindowFunction = std::function<double(const TrajectoryWindow&, std::int64_t)>;

// Lipschitz observable psi of a two-sided trajectory.
//
// geometric:     psi(g) = scale * sum_j xi^{n0(g, j)} phi(g_j), where n0(g, j)
//                counts base visits strictly after 0 up to j (j > 0) or from
//                j + 1 up to 0 (j <= 0).
// finite_window: psi(g) = scale * F(g_{-width} .. g_{width}).
class ObservableSpec {
 public:
  static ObservableSpec geometric(const TowerSpec& spec, BaseFunction phi);
  static ObservableSpec finite_window(const TowerSpec& spec, std::string name, WindowFunction f,
                                      std::int64_t width, double sup);
  // psi(g) = phi(g_0).
  static ObservableSpec center(const TowerSpec& spec, BaseFunction phi);

  Mode mode() const { return mode_; }
  const std::string& name() const { return name_; }
  double xi() const { return xi_; }
  std::int64_t width() const { return width_; }
  double scale() const { return scale_; }
  // Max over symbols of sum_l |phi(a, l)| (geometric mode).
  double block_mass() const { return block_mass_; }
  // Certified sup |psi| and Lipschitz constant in the metric xi^s.
  double sup_bound() const;
  double lipschitz() const;
  // Copy rescaled so that lipschitz() == 1.
  ObservableSpec normalized() const;
  ObservableSpec scaled(double factor) const;

  double phi(ChainState s) const { return phi_.f(s); }
  double window_value(const TrajectoryWindow& w, std::int64_t k) const { return window_(w, k); }

 private:
  Mode mode_ = Mode::geometric;
  std::string name_;
  double xi_ = 0.5;
  std::int64_t width_ = 0;
  double scale_ = 1.0;
  double block_mass_ = 0.0;
  double window_sup_ = 0.0;
  BaseFunction phi_;
  WindowFunction window_;
};

struct PsiValue {
  double value = 0.0;
  double truncation_bound = 0.0;
};

// psi of the trajectory shifted to index k (default: the window center).
// Geometric mode truncates at the window edges with bound
// 2 M xi^{min(c+, c-)}, c+ = base visits in (k, last], c- = base visits in
// [first, k]. Finite-window mode throws if the window does not cover k +- width.
PsiValue eval_psi(const ObservableSpec& obs, const TrajectoryWindow& w);
PsiValue eval_psi_at(const ObservableSpec& obs, const TrajectoryWindow& w, std::int64_t k);

// X_k = psi(shift^k g) for every index of the window, truncated at the window
// edges. Linear time in geometric mode.
std::vector<double> psi_series(const ObservableSpec& obs, const TrajectoryWindow& w);

// Exact E_nu[psi] in geometric mode: E S_0 + 2 xi / (1 - xi) E_P S, where S is
// a block sum of phi and S_0 the size-biased block containing the origin.
double stationary_mean(const ObservableSpec& obs, const TowerSpec& spec);

// Keeps g up to index k + m and evolves the rest with fresh innovations read
// from `fresh` at position t - first.
TrajectoryWindow refresh_future(const TowerSpec& spec, const TrajectoryWindow& w, std::int64_t k,
                                std::int64_t m, InnovationStream fresh);

// Replaces g before index k - m by an independent stationary past (drawn from
// `fresh`) and re-evolves from k - m onwards with the recorded innovations.
TrajectoryWindow refresh_past(const TowerSpec& spec, const TrajectoryWindow& w, std::int64_t k,
                              std::int64_t m, InnovationStream fresh);

struct ApproxEstimate {
  double value = 0.0;
  double mc_error = 0.0;     // outer + inner for nested estimates
  double outer_error = 0.0;
  double inner_error = 0.0;
  double truncation_bound = 0.0;  // max over evaluated windows
};

// X_{m,k}: average of psi over `replicates` future refreshes.
ApproxEstimate estimate_Xmk(const ObservableSpec& obs, const TowerSpec& spec,
                            const TrajectoryWindow& w, std::int64_t k, std::int64_t m,
                            std::uint64_t replicates, InnovationStream stream);

// tilde X_{m,k}: innovations eps_{k-m} .. eps_{k+m} of w frozen; the outer
// loop redraws the past, the inner loop the future.
ApproxEstimate estimate_tilde_Xmk(const ObservableSpec& obs, const TowerSpec& spec,
                                  const TrajectoryWindow& w, std::int64_t k, std::int64_t m,
                                  std::uint64_t outer, std::uint64_t inner,
                                  InnovationStream stream);

struct DecayConfig {
  std::vector<std::int64_t> ms{4, 8, 16, 32};
  std::uint64_t samples = 10000;
  std::uint64_t outer = 16;
  std::uint64_t inner = 1;
  std::int64_t radius = 96;
  double r = 2.0;
  std::uint64_t meeting_runs = 1000000;
  std::uint64_t seed = 0;
};

struct DecayPoint {
  std::int64_t m = 0;
  double estimate = 0.0;  // E|tilde X_{m,k} - X_k|
  double mc_error = 0.0;
  double comparator = 0.0;  // m^{-r/2} + P(T >= floor(m / r))
  double ratio = 0.0;
  double truncation_bound = 0.0;  // mean over samples of the per-sample bound
};

// Sample i draws a stationary window from InnovationStream(seed, i) and reuses
// it for every m.
std::vector<DecayPoint> approx_decay_experiment(const ObservableSpec& obs, const TowerSpec& spec,
                                                const DecayConfig& config, int workers = 1);

// Per-sample |tilde X_{m,k} - X_k| for samples [begin, end), laid out as
// rows of ms.size() values. `truncation`, if given, accumulates per m the sum
// of the truncation bounds of the evaluated windows.
std::vector<double> decay_chunk(const ObservableSpec& obs, const TowerSpec& spec,
                                const DecayConfig& config, std::uint64_t begin, std::uint64_t end,
                                std::vector<double>* truncation = nullptr);

}  // namespace towerlab::obs
