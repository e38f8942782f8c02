#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "towerlab/histogram.hpp"
#include "towerlab/tower.hpp"

namespace towerlab::stats {

// S_0 = 0, S_n = S_{n-1} + x_{n-1}; length n + 1.
std::vector<double> birkhoff_sums(std::span<const double> series);

// Biased (divide-by-n) autocovariance at lags 0..max_lag with the sample mean
// removed. Lags run in parallel; each lag is summed in index order, so the
// result does not depend on the worker count.
std::vector<double> autocovariance(std::span<const double> series, std::size_t max_lag,
                                   int workers = 1);

// Autocovariance of several independent stretches of one stationary process:
// pooled mean, lag products taken within each stretch, divided by the total
// length.
std::vector<double> pooled_autocovariance(const std::vector<std::vector<double>>& series,
                                          std::size_t max_lag, int workers = 1);

// Per-stretch sufficient statistics for the pooled autocovariance:
// prod[k] = sum_{i<n-k} x_i x_{i+k}, head[k] = sum_{i<n-k} x_i,
// tail[k] = sum_{i>=k} x_i.
struct LagSums {
  std::uint64_t n = 0;
  double sum = 0.0;
  std::vector<double> prod;
  std::vector<double> head;
  std::vector<double> tail;
};

LagSums lag_sums(std::span<const double> series, std::size_t max_lag);
// Same estimator as pooled_autocovariance, assembled from lag sums in order.
std::vector<double> autocovariance_from_lag_sums(std::span<const LagSums> parts);

// cov[0] + 2 sum_{k=1..cutoff} cov[k].
double green_kubo_variance(std::span<const double> cov, std::size_t cutoff);

struct GreenKubo {
  double c2 = 0.0;
  double se = 0.0;        // from the spread over groups of stretches
  bool possibly_zero = false;  // c2 < 3 se
};

// Green-Kubo estimate from pooled stretches, with a standard error from
// `groups` disjoint groups of stretches.
GreenKubo green_kubo_pooled(const std::vector<std::vector<double>>& series, std::size_t cutoff,
                            std::size_t groups, int workers = 1);

double normal_cdf(double x);

// Kolmogorov-Smirnov distance between the empirical law of samples / sqrt(c2)
// and N(0, 1). Throws for fewer than 100 samples or c2 <= 0.
double clt_test(std::span<const double> samples, double c2);
double ks_normal(std::span<const double> standardized);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Weighted least squares of y on x (unit weights when `weights` is empty).
LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> weights = {});

double spearman(std::span<const double> x, std::span<const double> y);

struct TailFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double hill = 0.0;  // -(Hill tail index) at threshold n_min
  std::size_t points = 0;
  std::vector<std::uint64_t> grid;
};

inline constexpr std::uint64_t kMinSurvivors = 100;
inline constexpr std::size_t kMinFitPoints = 5;

// Least-squares slope of log P(V >= n) - gamma log log n against log n on a
// log-spaced grid over [n_min, n_max], using points with at least
// kMinSurvivors survivors, weighted by survivor count. The CI is the 2.5 and
// 97.5 percentiles over `bootstrap` multinomial resamples of the histogram.
TailFit tail_exponent_fit(const TailHistogram& hist, std::uint64_t n_min, std::uint64_t n_max,
                          double gamma = 0.0, std::uint32_t bootstrap = 200,
                          std::uint64_t seed = 0);

// Fit of log P(V >= n) against n over the points with at least kMinSurvivors
// survivors in [n_min, n_max].
LinearFit exponential_tail_fit(const TailHistogram& hist, std::uint64_t n_min, std::uint64_t n_max);

// Hill estimator of the tail index from all observations >= threshold;
// censored observations enter at the cap.
double hill_estimator(const TailHistogram& hist, std::uint64_t threshold);

// max over n in [n_min, len] of |S_n| / sqrt(2 c2 n log log n).
double lil_envelope_check(std::span<const double> series, double c2, std::size_t n_min = 1000);

// Sample variance of S_n / sqrt(n) over replicates (values are S_n).
double scaled_sum_variance(std::span<const double> sums, std::uint64_t n);

struct CoboundarySpec {
  std::string name;
  std::function<double(ChainState)> chi;
  double sup = 0.0;  // declared sup |chi|
};

CoboundarySpec center_level_coboundary(const TowerSpec& spec);

struct CoboundaryReport {
  double max_abs_sum = 0.0;        // sup_n |S_n|
  double bound = 0.0;              // 2 sup|chi|
  double max_identity_error = 0.0;  // sup_n |S_n - (chi_n - chi_0)|
  double identity_tolerance = 0.0;  // n 1e-15 sup|chi| at the last n
  double c2 = 0.0;                 // Green-Kubo at the requested cutoff
  double variance = 0.0;           // Var(v)
  double lil = 0.0;
  bool bounded = false;
  bool identity = false;
  bool small_variance = false;
};

// v_k = chi(g_{k+1}) - chi(g_k) along the states.
std::vector<double> make_coboundary(const CoboundarySpec& cob, std::span<const ChainState> states);

// Checks |S_n| <= 2 sup|chi| + slack for every n, the telescoping identity,
// and c2(cutoff) < variance_fraction * Var(v).
CoboundaryReport verify_coboundary(const CoboundarySpec& cob, std::span<const ChainState> states,
                                   std::size_t cutoff, double variance_fraction, double slack,
                                   int workers = 1);

}  // namespace towerlab::stats
