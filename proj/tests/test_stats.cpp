#include <doctest.h>

#include <cmath>
#include <random>

#include "towerlab/chain.hpp"
#include "towerlab/reference.hpp"
#include "towerlab/stats.hpp"

using namespace towerlab;
using namespace towerlab::stats;

namespace {

std::vector<double> ar1(double rho, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, std::sqrt(1.0 - rho * rho));
  std::vector<double> x(n);
  double prev = std::normal_distribution<double>(0.0, 1.0)(gen);
  for (std::size_t i = 0; i < n; ++i) {
    prev = rho * prev + z(gen);
    x[i] = prev;
  }
  return x;
}

// P(V >= n) = n^-2 exactly for V = floor(U^-1/2).
TailHistogram pareto_histogram(std::uint64_t samples, std::uint64_t cap, std::uint64_t seed) {
  InnovationStream s(seed, 0);
  TailHistogram h(cap);
  for (std::uint64_t i = 0; i < samples; ++i) {
    const double u = 1.0 - s.next_uniform();
    const double v = std::floor(1.0 / std::sqrt(u));
    if (v > static_cast<double>(cap)) h.add_censored(); else h.add(static_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace

TEST_CASE("birkhoff sums") {
  const std::vector<double> x{1.0, -2.0, 0.5};
  const auto s = birkhoff_sums(x);
  REQUIRE(s.size() == 4);
  CHECK(s[0] == 0.0);
  CHECK(s[3] == -0.5);
}

TEST_CASE("alternating series has lag-one autocovariance -1") {
  std::vector<double> x(10000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? -1.0 : 1.0;
  const auto cov = autocovariance(x, 3);
  CHECK(cov[0] == doctest::Approx(1.0));
  CHECK(cov[1] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(cov[1] == doctest::Approx(-9999.0 / 10000.0).epsilon(1e-14));
  CHECK(cov[2] == doctest::Approx(9998.0 / 10000.0).epsilon(1e-14));
}

TEST_CASE("parallel autocovariance equals the naive reference bit for bit") {
  const auto x = ar1(0.7, 50000, 3);
  const auto ref = reference::autocovariance(x, 300);
  for (int workers : {1, 2, 5}) CHECK(autocovariance(x, 300, workers) == ref);
  for (std::size_t k = 1; k < ref.size(); ++k) CHECK(ref[0] >= std::abs(ref[k]));
}

TEST_CASE("pooled autocovariance from lag sums") {
  std::vector<std::vector<double>> parts;
  std::vector<LagSums> sums;
  for (std::uint64_t r = 0; r < 7; ++r) {
    parts.push_back(ar1(0.5, 1000 + 37 * r, 10 + r));
    sums.push_back(lag_sums(parts.back(), 20));
  }
  const auto pooled = pooled_autocovariance(parts, 20, 3);
  const auto merged = autocovariance_from_lag_sums(sums);
  REQUIRE(pooled.size() == merged.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) CHECK(merged[k] == doctest::Approx(pooled[k]).epsilon(1e-12));
  // A single stretch reduces to the plain estimator.
  const std::vector<LagSums> one{lag_sums(parts[0], 20)};
  const auto single = autocovariance_from_lag_sums(one);
  const auto plain = autocovariance(parts[0], 20);
  for (std::size_t k = 0; k < plain.size(); ++k) CHECK(single[k] == doctest::Approx(plain[k]).epsilon(1e-12));
}

TEST_CASE("Green-Kubo variance of AR(1) with rho = 1/2 is 3") {
  const auto x = ar1(0.5, 2000000, 7);
  const auto cov = autocovariance(x, 100);
  CHECK(green_kubo_variance(cov, 100) == doctest::Approx(3.0).epsilon(0.03));
  std::vector<std::vector<double>> parts;
  for (std::uint64_t r = 0; r < 40; ++r) parts.push_back(ar1(0.5, 50000, 100 + r));
  const GreenKubo gk = green_kubo_pooled(parts, 100, 10, 2);
  CHECK(std::abs(gk.c2 - 3.0) <= 4 * gk.se);
  CHECK_FALSE(gk.possibly_zero);
  CHECK(gk.c2 >= -3 * gk.se);
}

TEST_CASE("Green-Kubo of a coboundary is near zero and flagged") {
  std::vector<std::vector<double>> parts;
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto e = ar1(0.0, 20001, 300 + r);
    std::vector<double> v(20000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = e[i + 1] - e[i];
    parts.push_back(v);
  }
  const GreenKubo gk = green_kubo_pooled(parts, 200, 10);
  CHECK(std::abs(gk.c2) < 0.05);
  CHECK(gk.possibly_zero);
}

TEST_CASE("KS distance") {
  const std::vector<double> zeros(1000, 0.0);
  CHECK(ks_normal(zeros) == 0.5);
  // Frozen from scipy.stats.kstest.
  const std::vector<double> x{-1.5, -0.5, 0.0, 0.3, 2.0, 0.7, -0.2, 1.1};
  CHECK(ks_normal(x) == doctest::Approx(0.18353753872598688).epsilon(1e-12));
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK_THROWS(clt_test(std::vector<double>(50, 1.0), 1.0));
  CHECK_THROWS(clt_test(std::vector<double>(500, 1.0), 0.0));
}

TEST_CASE("CLT test on normal samples and scale equivariance") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z(0.0, 2.0);
  std::vector<double> s(20000);
  for (double& v : s) v = z(gen);
  const double ks = clt_test(s, 4.0);
  CHECK(ks < 1.36 / std::sqrt(20000.0));
  std::vector<double> scaled = s;
  for (double& v : scaled) v *= 3.0;
  CHECK(clt_test(scaled, 36.0) == doctest::Approx(ks).epsilon(1e-12));
  const auto x = ar1(0.3, 100000, 9);
  std::vector<double> x3 = x;
  for (double& v : x3) v *= 3.0;
  CHECK(green_kubo_variance(autocovariance(x3, 50), 50) ==
        doctest::Approx(9.0 * green_kubo_variance(autocovariance(x, 50), 50)).epsilon(1e-12));
}

TEST_CASE("linear fit and Spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{3, 5, 7, 9, 11};
  const LinearFit f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  const std::vector<double> yn{3, 5.5, 7, 9, 20};
  const std::vector<double> w{1, 1, 1, 1, 1e-9};
  CHECK(linear_fit(x, yn, w).slope == doctest::Approx(1.95).epsilon(1e-6));
  // Frozen from scipy.stats.spearmanr.
  CHECK(spearman(std::vector<double>{1, 2, 3, 4, 5, 6}, std::vector<double>{2, 1, 4, 3, 6, 5}) ==
        doctest::Approx(0.8285714285714287).epsilon(1e-12));
  CHECK(spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 3, 2, 4}) ==
        doctest::Approx(0.9486832980505139).epsilon(1e-12));
  CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
}

TEST_CASE("tail fit recovers an exact power law") {
  TailHistogram h(100000);
  // Counts with survivors exactly 10^9 n^-2 at every n (rounded).
  std::uint64_t prev = 0;
  for (std::uint64_t n = 100000; n >= 1; --n) {
    const auto surv = static_cast<std::uint64_t>(std::llround(1e9 / (double(n) * double(n))));
    h.add(n, surv - prev);
    prev = surv;
  }
  const TailFit fit = tail_exponent_fit(h, 16, 1024, 0.0, 50, 1);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.ci_low <= fit.slope);
  CHECK(fit.ci_high >= fit.slope);
  CHECK(fit.points >= 20);
}

TEST_CASE("tail fit with a log correction") {
  TailHistogram h(20000);
  std::uint64_t prev = 0;
  for (std::uint64_t n = 20000; n >= 1; --n) {
    // Survival proportional to n^-2.5 log n for n >= 2.
    const double s = n == 1 ? 1e10 : 1e10 * std::pow(double(n), -2.5) * std::log(double(n));
    const auto surv = static_cast<std::uint64_t>(std::llround(s));
    h.add(n, surv - prev);
    prev = surv;
  }
  const TailFit plain = tail_exponent_fit(h, 16, 1024, 0.0, 0);
  const TailFit corrected = tail_exponent_fit(h, 16, 1024, 1.0, 0);
  CHECK(corrected.slope == doctest::Approx(-2.5).epsilon(1e-4));
  CHECK(plain.slope > -2.5);
  CHECK_THROWS(tail_exponent_fit(h, 1, 1024, 1.0, 0));
}

TEST_CASE("tail fit, bootstrap and Hill on Pareto samples") {
  const TailHistogram h = pareto_histogram(1000000, 100000, 3);
  const TailFit fit = tail_exponent_fit(h, 16, 1024, 0.0, 200, 9);
  CHECK(std::abs(fit.slope + 2.0) < 0.05);
  CHECK(fit.ci_low < fit.slope);
  CHECK(fit.ci_high > fit.slope);
  CHECK(fit.ci_high - fit.ci_low < 0.2);
  CHECK(std::abs(fit.hill + 2.0) < 0.2);
  const TailFit again = tail_exponent_fit(h, 16, 1024, 0.0, 200, 9);
  CHECK(again.ci_low == fit.ci_low);
  CHECK(again.ci_high == fit.ci_high);
  CHECK(hill_estimator(h, 50) == doctest::Approx(2.0).epsilon(0.05));
  // Too few qualifying points.
  const TailHistogram small = pareto_histogram(1000, 1000, 4);
  CHECK_THROWS(tail_exponent_fit(small, 16, 1024, 0.0, 0));
}

TEST_CASE("exponential tail fit") {
  TailHistogram h(200);
  std::uint64_t prev = 0;
  for (std::uint64_t n = 200; n >= 1; --n) {
    const auto surv = static_cast<std::uint64_t>(std::llround(1e12 * std::pow(0.5, double(n - 1))));
    h.add(n, surv - prev);
    prev = surv;
  }
  const LinearFit f = exponential_tail_fit(h, 1, 200);
  CHECK(f.slope == doctest::Approx(std::log(0.5)).epsilon(1e-4));
  CHECK(f.r2 > 0.999999);
}

TEST_CASE("LIL envelope and scaled sum variance") {
  const auto e = ar1(0.0, 1000000, 12);
  const double lil = lil_envelope_check(e, 1.0);
  CHECK(lil > 0.1);
  CHECK(lil < 1.5);
  CHECK_THROWS(lil_envelope_check(e, 1.0, 8));
  CHECK_THROWS(lil_envelope_check(e, 0.0));
  std::vector<double> sums{1.0, -1.0, 3.0, -3.0};
  CHECK(scaled_sum_variance(sums, 4) == doctest::Approx(20.0 / 3.0 / 4.0));
}

TEST_CASE("coboundary of the center level telescopes and has no variance") {
  const TowerSpec s = build_tower_from_model(UniformRoof{8}, 8, 0.5);
  const TrajectoryWindow path = chain::simulate(s, 200001, InnovationStream(2, 0));
  const CoboundarySpec cob = center_level_coboundary(s);
  CHECK(cob.sup == 7.0);
  const auto v = make_coboundary(cob, path.states);
  double total = 0.0;
  for (double x : v) total += x;
  CHECK(total == cob.chi(path.states.back()) - cob.chi(path.states.front()));
  const CoboundaryReport rep = verify_coboundary(cob, path.states, 200, 0.01, 1e-9, 2);
  CHECK(rep.bounded);
  CHECK(rep.identity);
  CHECK(rep.small_variance);
  CHECK(rep.max_abs_sum <= 14.0);
  // The level itself, centered, is not a coboundary.
  const CoboundarySpec level{"level", [](ChainState x) { return static_cast<double>(x.level); }, 7.0};
  std::vector<double> centered(path.states.size());
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] = path.states[i].level;
  const auto cov = autocovariance(centered, 200);
  CHECK(green_kubo_variance(cov, 200) > 0.5 * cov[0]);
}
