#include "towerlab/maps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "towerlab/parallel.hpp"
#include "towerlab/rng.hpp"

namespace towerlab::maps {

LsvParams::LsvParams(double alpha) : alpha_(alpha), two_pow_alpha_(std::exp2(alpha)) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("LSV intermittency exponent alpha must lie in (0, 1)");
  }
}

namespace {

// g(x) = x (1 + (2x)^alpha); the (2x)^alpha form makes g(1/2) = 1 exactly.
inline double g_unchecked(double x, double alpha) {
  return x * (1.0 + std::pow(2.0 * x, alpha));
}

inline double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

inline double quotient_unchecked(double x, double alpha) {
  return x <= 0.5 ? std::min(1.0, g_unchecked(x, alpha)) : 2.0 * x - 1.0;
}

double uniform_in_y(InnovationStream& stream) {
  // (1/2, 1]
  return 0.5 + 0.5 * (1.0 - stream.next_uniform());
}

}  // namespace

double lsv_g(double x, const LsvParams& p) {
  if (x < -kDomainTolerance || x > 0.5 + kDomainTolerance) {
    throw std::domain_error("lsv_g: x must lie in [0, 1/2]");
  }
  x = std::clamp(x, 0.0, 0.5);
  return clamp_unit(g_unchecked(x, p.alpha()));
}

double lsv_g_inverse(double y, const LsvParams& p) {
  if (y < -kDomainTolerance || y > 1.0 + kDomainTolerance) {
    throw std::domain_error("lsv_g_inverse: y must lie in [0, 1]");
  }
  y = clamp_unit(y);
  if (y == 0.0) return 0.0;
  if (y == 1.0) return 0.5;
  const double alpha = p.alpha();

  // g(x) >= x and g(x) <= 2x on [0, 1/2], so x* lies in [y/2, y].
  double lo = 0.5 * y;
  double hi = std::min(0.5, y);
  for (int it = 0; it < 200 && hi - lo > kInverseTolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g_unchecked(mid, alpha) < y ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double residual = g_unchecked(x, alpha) - y;
    const double slope = 1.0 + (1.0 + alpha) * std::pow(2.0 * x, alpha);
    const double next = x - residual / slope;
    if (!(next >= lo - kInverseTolerance && next <= hi + kInverseTolerance)) break;
    x = next;
  }
  if (!(std::abs(x - 0.5 * (lo + hi)) <= 1e-10)) {
    throw std::runtime_error("lsv_g_inverse: root polish left the bisection bracket");
  }
  return std::clamp(x, 0.0, 0.5);
}

MapPoint baker_step(MapPoint point, const LsvParams& p) {
  if (point.x < -kDomainTolerance || point.x > 1.0 + kDomainTolerance ||
      point.y < -kDomainTolerance || point.y > 1.0 + kDomainTolerance) {
    throw std::domain_error("baker_step: point outside the unit square");
  }
  const double x = clamp_unit(point.x);
  const double y = clamp_unit(point.y);
  if (x <= 0.5) return {lsv_g(x, p), lsv_g_inverse(y, p)};
  return {clamp_unit(2.0 * x - 1.0), clamp_unit(0.5 * (y + 1.0))};
}

double quotient_step(double x, const LsvParams& p) {
  if (x < -kDomainTolerance || x > 1.0 + kDomainTolerance) {
    throw std::domain_error("quotient_step: x must lie in [0, 1]");
  }
  return quotient_unchecked(clamp_unit(x), p.alpha());
}

ReturnSample return_time(double x0, const LsvParams& p, std::uint64_t cap) {
  if (cap == 0) throw std::invalid_argument("return_time: cap must be positive");
  if (!(x0 > 0.5 && x0 <= 1.0 + kDomainTolerance)) {
    throw std::domain_error("return_time: start must lie in (1/2, 1]");
  }
  double x = std::min(x0, 1.0);
  for (std::uint64_t n = 1; n <= cap; ++n) {
    x = quotient_unchecked(x, p.alpha());
    if (x > 0.5) return {n, false, x0};
  }
  return {cap, true, x0};
}

namespace {

TailHistogram orbit_replicate(const LsvParams& p, const ReturnTailConfig& config,
                              std::uint64_t replicate, std::uint64_t quota_n) {
  TailHistogram hist(config.cap);
  if (quota_n == 0) return hist;
  InnovationStream stream = InnovationStream(config.seed, replicate).substream(stream_tag::replicate);
  const double alpha = p.alpha();

  double x = 1.0 - stream.next_uniform();
  for (std::uint64_t i = 0; i < config.burn_in; ++i) x = quotient_unchecked(x, alpha);
  // Enter Y; an orbit stuck near the neutral point is restarted inside Y.
  std::uint64_t guard = 0;
  while (!(x > 0.5)) {
    x = quotient_unchecked(x, alpha);
    if (++guard > config.cap) x = uniform_in_y(stream);
  }

  std::uint64_t recorded = 0;
  while (recorded < quota_n) {
    std::uint64_t t = 0;
    bool returned = false;
    while (t < config.cap) {
      x = quotient_unchecked(x, alpha);
      ++t;
      if (x > 0.5) {
        returned = true;
        break;
      }
    }
    if (returned) {
      hist.add(t);
    } else {
      hist.add_censored();
      x = uniform_in_y(stream);
    }
    ++recorded;
  }
  return hist;
}

TailHistogram uniform_replicate(const LsvParams& p, const ReturnTailConfig& config,
                                std::uint64_t replicate, std::uint64_t quota_n) {
  TailHistogram hist(config.cap);
  InnovationStream stream = InnovationStream(config.seed, replicate).substream(stream_tag::replicate);
  for (std::uint64_t i = 0; i < quota_n; ++i) {
    const ReturnSample s = return_time(uniform_in_y(stream), p, config.cap);
    if (s.censored) {
      hist.add_censored();
    } else {
      hist.add(s.tau);
    }
  }
  return hist;
}

}  // namespace

TailHistogram return_tail_replicate(const LsvParams& p, const ReturnTailConfig& config,
                                    std::uint64_t replicate) {
  const std::uint64_t replicates = std::max<std::uint32_t>(1, config.replicates);
  const std::uint64_t n = quota(config.samples, replicates, replicate);
  return config.mode == ReturnSampling::stationary_orbit ? orbit_replicate(p, config, replicate, n)
                                                         : uniform_replicate(p, config, replicate, n);
}

TailHistogram sample_return_tail(const LsvParams& p, const ReturnTailConfig& config, int workers) {
  if (config.samples == 0) throw std::invalid_argument("sample_return_tail: samples must be >= 1");
  if (config.cap == 0) throw std::invalid_argument("sample_return_tail: cap must be >= 1");
  const std::uint64_t replicates = std::max<std::uint32_t>(1, config.replicates);
  std::vector<TailHistogram> parts(replicates);
  parallel_for(replicates, resolve_workers(workers),
               [&](std::size_t r) { parts[r] = return_tail_replicate(p, config, r); });
  TailHistogram merged(config.cap);
  for (const auto& part : parts) merged.merge(part);
  return merged;
}

double occupation_fraction(const LsvParams& p, std::uint64_t steps, std::uint64_t burn_in,
                           std::uint64_t seed) {
  if (steps == 0) throw std::invalid_argument("occupation_fraction: steps must be >= 1");
  InnovationStream stream = InnovationStream(seed, 0).substream(stream_tag::replicate);
  double x = 1.0 - stream.next_uniform();
  for (std::uint64_t i = 0; i < burn_in; ++i) x = quotient_unchecked(x, p.alpha());
  std::uint64_t inside = 0;
  for (std::uint64_t i = 0; i < steps; ++i) {
    x = quotient_unchecked(x, p.alpha());
    inside += x > 0.5 ? 1 : 0;
  }
  return static_cast<double>(inside) / static_cast<double>(steps);
}

}  // namespace towerlab::maps
