#include "towerlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "towerlab/parallel.hpp"
#include "towerlab/rng.hpp"

namespace towerlab::stats {

std::vector<double> birkhoff_sums(std::span<const double> series) {
  if (series.empty()) throw std::invalid_argument("birkhoff_sums: empty series");
  std::vector<double> sums(series.size() + 1, 0.0);
  for (std::size_t i = 0; i < series.size(); ++i) sums[i + 1] = sums[i] + series[i];
  return sums;
}

namespace {

double lag_product(const double* c, std::size_t n, std::size_t lag) {
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) acc += c[i] * c[i + lag];
  return acc;
}

}  // namespace

std::vector<double> autocovariance(std::span<const double> series, std::size_t max_lag,
                                   int workers) {
  const std::size_t n = series.size();
  if (max_lag >= n) throw std::invalid_argument("autocovariance: max lag must be below the length");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = series[i] - mean;
  std::vector<double> cov(max_lag + 1);
  parallel_for(max_lag + 1, resolve_workers(workers), [&](std::size_t k) {
    cov[k] = lag_product(c.data(), n, k) / static_cast<double>(n);
  });
  return cov;
}

std::vector<double> pooled_autocovariance(const std::vector<std::vector<double>>& series,
                                          std::size_t max_lag, int workers) {
  if (series.empty()) throw std::invalid_argument("pooled_autocovariance: no series");
  double mean = 0.0;
  std::size_t total = 0;
  for (const auto& s : series) {
    if (max_lag >= s.size()) {
      throw std::invalid_argument("pooled_autocovariance: max lag must be below every length");
    }
    for (double x : s) mean += x;
    total += s.size();
  }
  mean /= static_cast<double>(total);
  std::vector<std::vector<double>> centered(series.size());
  for (std::size_t r = 0; r < series.size(); ++r) {
    centered[r].resize(series[r].size());
    for (std::size_t i = 0; i < series[r].size(); ++i) centered[r][i] = series[r][i] - mean;
  }
  std::vector<double> cov(max_lag + 1);
  parallel_for(max_lag + 1, resolve_workers(workers), [&](std::size_t k) {
    double acc = 0.0;
    for (const auto& c : centered) acc += lag_product(c.data(), c.size(), k);
    cov[k] = acc / static_cast<double>(total);
  });
  return cov;
}

LagSums lag_sums(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (max_lag >= n) throw std::invalid_argument("lag_sums: max lag must be below the length");
  LagSums out;
  out.n = n;
  for (double x : series) out.sum += x;
  out.prod.resize(max_lag + 1);
  out.head.resize(max_lag + 1);
  out.tail.resize(max_lag + 1);
  double dropped_end = 0.0;
  double dropped_start = 0.0;
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out.prod[k] = lag_product(series.data(), n, k);
    if (k > 0) {
      dropped_end += series[n - k];
      dropped_start += series[k - 1];
    }
    out.head[k] = out.sum - dropped_end;
    out.tail[k] = out.sum - dropped_start;
  }
  return out;
}

std::vector<double> autocovariance_from_lag_sums(std::span<const LagSums> parts) {
  if (parts.empty()) throw std::invalid_argument("autocovariance_from_lag_sums: no parts");
  const std::size_t lags = parts.front().prod.size();
  double total = 0.0;
  double sum = 0.0;
  for (const auto& p : parts) {
    if (p.prod.size() != lags) throw std::invalid_argument("autocovariance_from_lag_sums: lag mismatch");
    total += static_cast<double>(p.n);
    sum += p.sum;
  }
  const double mu = sum / total;
  std::vector<double> cov(lags, 0.0);
  for (std::size_t k = 0; k < lags; ++k) {
    double acc = 0.0;
    for (const auto& p : parts) {
      acc += p.prod[k] - mu * (p.head[k] + p.tail[k]) +
             static_cast<double>(p.n - k) * mu * mu;
    }
    cov[k] = acc / total;
  }
  return cov;
}

double green_kubo_variance(std::span<const double> cov, std::size_t cutoff) {
  if (cov.empty() || cutoff >= cov.size()) {
    throw std::invalid_argument("green_kubo_variance: cutoff exceeds the available lags");
  }
  double sum = 0.0;
  for (std::size_t k = 1; k <= cutoff; ++k) sum += cov[k];
  return cov[0] + 2.0 * sum;
}

GreenKubo green_kubo_pooled(const std::vector<std::vector<double>>& series, std::size_t cutoff,
                            std::size_t groups, int workers) {
  if (groups < 2 || groups > series.size()) {
    throw std::invalid_argument("green_kubo_pooled: need 2 <= groups <= number of stretches");
  }
  GreenKubo gk;
  gk.c2 = green_kubo_variance(pooled_autocovariance(series, cutoff, workers), cutoff);
  std::vector<double> per_group(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t begin = series.size() * g / groups;
    const std::size_t end = series.size() * (g + 1) / groups;
    const std::vector<std::vector<double>> part(series.begin() + static_cast<std::ptrdiff_t>(begin),
                                                series.begin() + static_cast<std::ptrdiff_t>(end));
    per_group[g] = green_kubo_variance(pooled_autocovariance(part, cutoff, workers), cutoff);
  }
  const double mean = std::accumulate(per_group.begin(), per_group.end(), 0.0) / groups;
  double ss = 0.0;
  for (double v : per_group) ss += (v - mean) * (v - mean);
  gk.se = std::sqrt(ss / static_cast<double>(groups - 1) / static_cast<double>(groups));
  gk.possibly_zero = gk.c2 < 3.0 * gk.se;
  return gk;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_normal(std::span<const double> standardized) {
  std::vector<double> v(standardized.begin(), standardized.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = normal_cdf(v[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double clt_test(std::span<const double> samples, double c2) {
  if (samples.size() < 100) throw std::invalid_argument("clt_test: need at least 100 samples");
  if (!(c2 > 0.0)) {
    throw std::invalid_argument("clt_test: c2 <= 0, the variance is degenerate");
  }
  const double scale = 1.0 / std::sqrt(c2);
  std::vector<double> z(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) z[i] = samples[i] * scale;
  return ks_normal(z);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> weights) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("linear_fit: need at least two paired points");
  }
  if (!weights.empty() && weights.size() != x.size()) {
    throw std::invalid_argument("linear_fit: weight count mismatch");
  }
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w(i);
    mx += w(i) * x[i];
    my += w(i) * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w(i) * (x[i] - mx) * (x[i] - mx);
    sxy += w(i) * (x[i] - mx) * (y[i] - my);
    syy += w(i) * (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("linear_fit: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman: need at least two paired points");
  }
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  return pearson(rx, ry);
}

namespace {

std::vector<std::uint64_t> log_grid(std::uint64_t lo, std::uint64_t hi, std::size_t points) {
  std::vector<std::uint64_t> grid;
  const double ratio = std::log(static_cast<double>(hi) / static_cast<double>(lo));
  for (std::size_t i = 0; i < points; ++i) {
    const double t = points > 1 ? static_cast<double>(i) / static_cast<double>(points - 1) : 0.0;
    auto n = static_cast<std::uint64_t>(std::llround(static_cast<double>(lo) * std::exp(ratio * t)));
    n = std::clamp(n, lo, hi);
    if (grid.empty() || grid.back() != n) grid.push_back(n);
  }
  return grid;
}

struct FitInput {
  std::vector<double> x, y, w;
};

FitInput tail_points(const std::vector<std::uint64_t>& grid, const std::vector<double>& surv,
                     double total, double gamma, std::uint64_t min_survivors) {
  FitInput in;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (surv[i] < static_cast<double>(min_survivors) || surv[i] <= 0.0) continue;
    const double n = static_cast<double>(grid[i]);
    in.x.push_back(std::log(n));
    in.y.push_back(std::log(surv[i] / total) - (gamma != 0.0 ? gamma * std::log(std::log(n)) : 0.0));
    in.w.push_back(surv[i]);
  }
  return in;
}

constexpr std::size_t kGridPoints = 32;

}  // namespace

TailFit tail_exponent_fit(const TailHistogram& hist, std::uint64_t n_min, std::uint64_t n_max,
                          double gamma, std::uint32_t bootstrap, std::uint64_t seed) {
  if (n_min < 1 || n_max <= n_min) throw std::invalid_argument("tail_exponent_fit: bad window");
  if (gamma != 0.0 && n_min < 2) {
    throw std::invalid_argument("tail_exponent_fit: log correction needs n_min >= 2");
  }
  n_max = std::min(n_max, hist.cap() + 1);
  if (n_max <= n_min) throw std::invalid_argument("tail_exponent_fit: window beyond the cap");
  const std::vector<std::uint64_t> grid = log_grid(n_min, n_max, kGridPoints);
  const double total = static_cast<double>(hist.total());
  std::vector<double> surv(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) surv[i] = static_cast<double>(hist.survivors(grid[i]));
  const FitInput in = tail_points(grid, surv, total, gamma, kMinSurvivors);
  if (in.x.size() < kMinFitPoints) {
    throw std::invalid_argument("tail_exponent_fit: fewer than 5 points with >= 100 survivors");
  }
  TailFit fit;
  const LinearFit lf = linear_fit(in.x, in.y, in.w);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.r2 = lf.r2;
  fit.points = in.x.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (surv[i] >= static_cast<double>(kMinSurvivors)) fit.grid.push_back(grid[i]);
  }
  fit.hill = -hill_estimator(hist, n_min);

  fit.ci_low = fit.ci_high = fit.slope;
  if (bootstrap > 0) {
    // Bins: below n_min, each value in [n_min, n_max), and everything >= n_max.
    std::vector<double> bins;
    bins.push_back(total - static_cast<double>(hist.survivors(n_min)));
    for (std::uint64_t v = n_min; v < n_max; ++v) bins.push_back(static_cast<double>(hist.count(v)));
    bins.push_back(static_cast<double>(hist.survivors(n_max)));
    std::mt19937_64 engine(derive_seed(seed, stream_tag::bootstrap));
    std::vector<double> slopes;
    std::vector<double> resampled(bins.size());
    std::vector<double> rsurv(grid.size());
    for (std::uint32_t b = 0; b < bootstrap; ++b) {
      auto remaining = static_cast<std::int64_t>(hist.total());
      double remaining_p = 1.0;
      for (std::size_t i = 0; i < bins.size(); ++i) {
        const double p = bins[i] / total;
        double q = remaining_p > 0.0 ? std::clamp(p / remaining_p, 0.0, 1.0) : 0.0;
        if (i + 1 == bins.size()) q = 1.0;
        std::binomial_distribution<std::int64_t> draw(remaining, q);
        const std::int64_t x = remaining > 0 ? draw(engine) : 0;
        resampled[i] = static_cast<double>(x);
        remaining -= x;
        remaining_p -= p;
      }
      // suffix[v - n_min] = resampled survivors at v, for v in [n_min, n_max].
      std::vector<double> suffix(n_max - n_min + 1);
      suffix.back() = resampled.back();
      for (std::uint64_t v = n_max; v-- > n_min;) {
        suffix[v - n_min] = suffix[v - n_min + 1] + resampled[1 + (v - n_min)];
      }
      for (std::size_t i = 0; i < grid.size(); ++i) {
        // Same qualifying points as the original fit.
        rsurv[i] = surv[i] >= static_cast<double>(kMinSurvivors) ? suffix[grid[i] - n_min] : 0.0;
      }
      const FitInput sel = tail_points(grid, rsurv, total, gamma, 1);
      if (sel.x.size() < 2) continue;
      slopes.push_back(linear_fit(sel.x, sel.y, sel.w).slope);
    }
    if (!slopes.empty()) {
      std::sort(slopes.begin(), slopes.end());
      auto pick = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(slopes.size() - 1)));
        return slopes[idx];
      };
      fit.ci_low = pick(0.025);
      fit.ci_high = pick(0.975);
    }
  }
  return fit;
}

LinearFit exponential_tail_fit(const TailHistogram& hist, std::uint64_t n_min, std::uint64_t n_max) {
  std::vector<double> x, y;
  const double total = static_cast<double>(hist.total());
  for (std::uint64_t n = n_min; n <= std::min(n_max, hist.cap()); ++n) {
    const auto s = hist.survivors(n);
    if (s < kMinSurvivors) continue;
    x.push_back(static_cast<double>(n));
    y.push_back(std::log(static_cast<double>(s) / total));
  }
  if (x.size() < kMinFitPoints) {
    throw std::invalid_argument("exponential_tail_fit: fewer than 5 points with >= 100 survivors");
  }
  return linear_fit(x, y);
}

double hill_estimator(const TailHistogram& hist, std::uint64_t threshold) {
  if (threshold < 1) throw std::invalid_argument("hill_estimator: threshold must be >= 1");
  const double u = static_cast<double>(threshold);
  double k = 0.0;
  double sum = 0.0;
  for (std::uint64_t v = threshold; v <= hist.cap(); ++v) {
    const auto c = hist.count(v);
    if (c == 0) continue;
    k += static_cast<double>(c);
    sum += static_cast<double>(c) * std::log(static_cast<double>(v) / u);
  }
  if (hist.censored() > 0 && threshold <= hist.cap() + 1) {
    k += static_cast<double>(hist.censored());
    sum += static_cast<double>(hist.censored()) * std::log(static_cast<double>(hist.cap() + 1) / u);
  }
  if (sum <= 0.0) throw std::invalid_argument("hill_estimator: no spread above the threshold");
  return k / sum;
}

double lil_envelope_check(std::span<const double> series, double c2, std::size_t n_min) {
  if (!(c2 > 0.0)) throw std::invalid_argument("lil_envelope_check: c2 must be > 0");
  if (n_min < 16) throw std::invalid_argument("lil_envelope_check: n_min must be >= 16");
  if (series.size() < n_min) throw std::invalid_argument("lil_envelope_check: series too short");
  double s = 0.0;
  double best = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    s += series[i];
    const std::size_t n = i + 1;
    if (n < n_min) continue;
    const double dn = static_cast<double>(n);
    best = std::max(best, std::abs(s) / std::sqrt(2.0 * c2 * dn * std::log(std::log(dn))));
  }
  return best;
}

double scaled_sum_variance(std::span<const double> sums, std::uint64_t n) {
  if (sums.size() < 2 || n == 0) throw std::invalid_argument("scaled_sum_variance: need >= 2 sums");
  const double mean = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(sums.size());
  double ss = 0.0;
  for (double s : sums) ss += (s - mean) * (s - mean);
  return ss / static_cast<double>(sums.size() - 1) / static_cast<double>(n);
}

CoboundarySpec center_level_coboundary(const TowerSpec& spec) {
  return {"center_level", [](ChainState s) { return static_cast<double>(s.level); },
          static_cast<double>(spec.max_roof() - 1)};
}

std::vector<double> make_coboundary(const CoboundarySpec& cob, std::span<const ChainState> states) {
  if (states.size() < 2) throw std::invalid_argument("make_coboundary: need at least two states");
  std::vector<double> v(states.size() - 1);
  double prev = cob.chi(states[0]);
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    const double next = cob.chi(states[i + 1]);
    v[i] = next - prev;
    prev = next;
  }
  return v;
}

CoboundaryReport verify_coboundary(const CoboundarySpec& cob, std::span<const ChainState> states,
                                   std::size_t cutoff, double variance_fraction, double slack,
                                   int workers) {
  const std::vector<double> v = make_coboundary(cob, states);
  CoboundaryReport rep;
  rep.bound = 2.0 * cob.sup;
  const double chi0 = cob.chi(states[0]);
  double s = 0.0;
  bool bounded = true;
  bool identity = true;
  for (std::size_t n = 1; n <= v.size(); ++n) {
    s += v[n - 1];
    rep.max_abs_sum = std::max(rep.max_abs_sum, std::abs(s));
    const double err = std::abs(s - (cob.chi(states[n]) - chi0));
    rep.max_identity_error = std::max(rep.max_identity_error, err);
    if (std::abs(s) > rep.bound + slack) bounded = false;
    if (err > static_cast<double>(n) * 1e-15 * cob.sup) identity = false;
  }
  rep.identity_tolerance = static_cast<double>(v.size()) * 1e-15 * cob.sup;
  const std::vector<double> cov = autocovariance(v, cutoff, workers);
  rep.c2 = green_kubo_variance(cov, cutoff);
  rep.variance = cov[0];
  if (v.size() >= 1000 && rep.variance > 0.0) rep.lil = lil_envelope_check(v, rep.variance);
  rep.bounded = bounded;
  rep.identity = identity;
  rep.small_variance = std::abs(rep.c2) < variance_fraction * rep.variance;
  return rep;
}

}  // namespace towerlab::stats
