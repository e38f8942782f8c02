#pragma once

#include <cstdint>

#include "towerlab/histogram.hpp"

// Intermittent baker's map on the unit square and its expanding quotient
//
//   T(x, y) = (g(x), g^{-1}(y))      x in [0, 1/2]
//             (2x - 1, (y + 1) / 2)  x in (1/2, 1]
//
// with g(x) = x (1 + 2^alpha x^alpha), induced on Y = (1/2, 1].
namespace towerlab::maps {

class LsvParams {
 public:
  explicit LsvParams(double alpha);  // throws unless 0 < alpha < 1
  double alpha() const { return alpha_; }
  double two_pow_alpha() const { return two_pow_alpha_; }

 private:
  double alpha_;
  double two_pow_alpha_;
};

struct MapPoint {
  double x = 0.0;
  double y = 0.0;
};

struct ReturnSample {
  std::uint64_t tau = 0;
  bool censored = false;  // tau == cap and the true return time exceeds cap
  double start = 0.0;
};

inline constexpr double kDomainTolerance = 1e-12;
inline constexpr double kInverseTolerance = 1e-14;

double lsv_g(double x, const LsvParams& p);
// Inverse of g on [0, 1/2]; bisection with a Newton polish.
double lsv_g_inverse(double y, const LsvParams& p);

MapPoint baker_step(MapPoint point, const LsvParams& p);
double quotient_step(double x, const LsvParams& p);

ReturnSample return_time(double x0, const LsvParams& p, std::uint64_t cap);

enum class ReturnSampling {
  // Successive returns along stationary orbits (the induced law).
  stationary_orbit,
  // Independent starts uniform on Y; fast diagnostic only.
  uniform_start,
};

struct ReturnTailConfig {
  std::uint64_t samples = 1;
  std::uint64_t cap = 1000000;
  std::uint64_t seed = 0;
  ReturnSampling mode = ReturnSampling::stationary_orbit;
  std::uint64_t burn_in = 100000;
  // Fixed replicate split; results do not depend on the worker count.
  std::uint32_t replicates = 16;
};

TailHistogram sample_return_tail(const LsvParams& p, const ReturnTailConfig& config,
                                 int workers = 1);

// One replicate's share of sample_return_tail; replicates merge by addition.
TailHistogram return_tail_replicate(const LsvParams& p, const ReturnTailConfig& config,
                                    std::uint64_t replicate);

// Fraction of time a quotient orbit spends in Y over `steps` steps after a
// burn-in, starting from a stream-drawn point.
double occupation_fraction(const LsvParams& p, std::uint64_t steps, std::uint64_t burn_in,
                           std::uint64_t seed);

}  // namespace towerlab::maps
