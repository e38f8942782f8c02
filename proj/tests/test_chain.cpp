#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "towerlab/chain.hpp"
#include "towerlab/reference.hpp"
#include "towerlab/stats.hpp"
#include "towerlab/tower.hpp"

using namespace towerlab;

namespace {

TowerSpec two_symbol() { return TowerSpec({1, 2}, {0.5, 0.5}, {1, 2}, 0.5); }

// E[T] for independent nu starts, from the linear absorption system of the
// coupled product chain.
double exact_mean_meeting_time(const TowerSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.state_count());
  const std::vector<double> nu = nu_vector(spec);
  const Eigen::Index pairs = n * n;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(pairs, pairs);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(pairs);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const Eigen::Index row = x * n + y;
      if (x == y) continue;
      rhs(row) = 1.0;
      const ChainState sx = spec.state_at(static_cast<std::uint64_t>(x));
      const ChainState sy = spec.state_at(static_cast<std::uint64_t>(y));
      // Shared innovation: enumerate it explicitly.
      for (std::uint32_t e = 0; e < spec.size(); ++e) {
        const auto nx = static_cast<Eigen::Index>(spec.state_index(chain::step(sx, e, spec)));
        const auto ny = static_cast<Eigen::Index>(spec.state_index(chain::step(sy, e, spec)));
        if (nx != ny) A(row, nx * n + ny) -= spec.weight(e);
      }
    }
  }
  const Eigen::VectorXd t = A.partialPivLu().solve(rhs);
  double mean = 0.0;
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) mean += nu[static_cast<std::size_t>(x)] * nu[static_cast<std::size_t>(y)] * t(x * n + y);
  }
  return mean;
}

}  // namespace

TEST_CASE("step examples") {
  const TowerSpec s({3, 1}, {0.5, 0.5}, {3, 1}, 0.5);
  CHECK(chain::step({0, 0}, 1, s) == ChainState{0, 1});
  CHECK(chain::step({0, 2}, 1, s) == ChainState{1, 0});
  const TowerSpec ones({1, 2, 3}, {0.2, 0.3, 0.5}, {1, 1, 1}, 0.5);
  for (std::uint32_t a = 0; a < 3; ++a) {
    for (std::uint32_t e = 0; e < 3; ++e) CHECK(chain::step({a, 0}, e, ones) == ChainState{e, 0});
  }
}

TEST_CASE("simulate is admissible and reproducible") {
  const TowerSpec s = build_tower_from_model(PowerTail{2.5, 0.0}, 100, 0.5);
  const TrajectoryWindow a = chain::simulate(s, 5000, InnovationStream(3, 1));
  const TrajectoryWindow b = chain::simulate(s, 5000, InnovationStream(3, 1));
  CHECK_FALSE(first_inadmissible(s, a).has_value());
  CHECK(a.states == b.states);
  CHECK(a.innovations == b.innovations);
  const TrajectoryWindow w = chain::simulate_window(s, 7, 20, InnovationStream(3, 2));
  CHECK(w.first == -13);
  CHECK(w.last() == 27);
  CHECK(w.radius() == 20);
  CHECK_FALSE(first_inadmissible(s, w).has_value());
  const TrajectoryWindow fixed = chain::simulate(s, 10, InnovationStream(3, 1), ChainState{0, 0});
  CHECK(fixed.states[0] == ChainState{0, 0});
}

TEST_CASE("sample_stationary follows nu") {
  const TowerSpec s = build_tower_from_model(PowerTail{3.0, 0.0}, 6, 0.5);
  const auto nu = nu_vector(s);
  std::vector<std::uint64_t> counts(nu.size());
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    InnovationStream st(19, static_cast<std::uint64_t>(i));
    ++counts[s.state_index(chain::sample_stationary(s, st))];
  }
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double sigma = std::sqrt(nu[i] * (1 - nu[i]) / n);
    CHECK(std::abs(counts[i] / double(n) - nu[i]) <= 4 * sigma);
  }
}

TEST_CASE("aperiodicity is required") {
  const TowerSpec periodic({2, 4}, {0.5, 0.5}, {2, 4}, 0.5);
  CHECK(periodic.roof_gcd() == 2);
  CHECK_THROWS(chain::require_aperiodic(periodic));
  CHECK_THROWS(chain::meeting_tail_experiment(periodic, 10, 10, 1));
  CHECK_NOTHROW(chain::require_aperiodic(two_symbol()));
}

TEST_CASE("meeting time with unit roofs") {
  const TowerSpec ones({1, 2, 3}, {0.2, 0.3, 0.5}, {1, 1, 1}, 0.5);
  for (std::uint64_t r = 0; r < 2000; ++r) {
    const auto m = chain::meeting_time(ones, InnovationStream(4, r), 100);
    if (m.start_a == m.start_b) {
      CHECK(m.t == 0);
    } else {
      CHECK(m.t == 1);
    }
  }
  const auto res = chain::meeting_tail_experiment(ones, 20000, 10, 4);
  CHECK(res.hist.survivors(2) == 0);
  const auto exact = chain::exact_meeting_survival(ones, 3);
  CHECK(exact[0] == 1.0);
  CHECK(exact[1] == doctest::Approx(1.0 - (0.04 + 0.09 + 0.25)).epsilon(1e-14));
  CHECK(exact[2] == 0.0);
}

TEST_CASE("coupling monotonicity and synchronous refresh along sampled pairs") {
  const TowerSpec s = build_tower_from_model(PowerTail{2.5, 0.0}, 60, 0.5);
  for (std::uint64_t r = 0; r < 500; ++r) {
    const InnovationStream stream(8, r);
    InnovationStream sa = stream.substream(stream_tag::start_a);
    InnovationStream sb = stream.substream(stream_tag::start_b);
    InnovationStream path = stream;
    ChainState a = chain::sample_stationary(s, sa);
    ChainState b = chain::sample_stationary(s, sb);
    std::int64_t met = a == b ? 0 : -1;
    for (std::uint64_t n = 1; n <= 400; ++n) {
      const std::uint32_t e = chain::innovation_at(s, path, n);
      a = chain::step(a, e, s);
      b = chain::step(b, e, s);
      if (met >= 0) {
        REQUIRE(a == b);
      } else if (a == b) {
        met = static_cast<std::int64_t>(n);
        CHECK(a.level == 0);
      }
    }
    const auto m = chain::meeting_time(s, stream, 400);
    if (met >= 0) {
      CHECK_FALSE(m.censored);
      CHECK(static_cast<std::int64_t>(m.t) == met);
    } else {
      CHECK(m.censored);
    }
  }
}

TEST_CASE("mean meeting time of the two-symbol spec matches the absorption oracle") {
  const TowerSpec s = two_symbol();
  const double oracle = exact_mean_meeting_time(s);
  // Frozen from an independent solve of the same system: 14/9.
  CHECK(oracle == doctest::Approx(14.0 / 9.0).epsilon(1e-12));
  const auto exact = chain::exact_meeting_survival(s, 200);
  double from_survival = 0.0;
  for (std::size_t n = 1; n < exact.size(); ++n) from_survival += exact[n];
  CHECK(from_survival == doctest::Approx(oracle).epsilon(1e-12));

  const std::uint64_t runs = 1000000;
  const auto res = chain::meeting_tail_experiment(s, runs, 1000, 31);
  CHECK(res.hist.censored() == 0);
  double sum = 0.0, sq = 0.0;
  for (std::uint64_t v = 0; v <= 1000; ++v) {
    sum += double(v) * double(res.hist.count(v));
    sq += double(v) * double(v) * double(res.hist.count(v));
  }
  const double mean = sum / runs;
  const double sd = std::sqrt(sq / runs - mean * mean);
  CHECK(std::abs(mean - oracle) <= 4 * sd / std::sqrt(double(runs)));
}

TEST_CASE("exact meeting survival agrees with Monte Carlo for a geometric roof") {
  const TowerSpec s = build_tower_from_model(GeometricTail{0.5}, 12, 0.5);
  const auto exact = chain::exact_meeting_survival(s, 12);
  const std::uint64_t runs = 400000;
  const auto res = chain::meeting_tail_experiment(s, runs, 64, 2);
  for (std::uint64_t n = 0; n <= 12; ++n) {
    const double p = exact[n];
    const double sigma = std::sqrt(p * (1 - p) / runs);
    CHECK(std::abs(res.hist.survival(n) - p) <= 3 * sigma + 1e-15);
  }
}

TEST_CASE("fast-forward meeting time equals the step-by-step reference") {
  const TowerSpec s = build_tower_from_model(PowerTail{2.5, 0.0}, 300, 0.5);
  for (std::uint64_t r = 0; r < 3000; ++r) {
    for (std::uint64_t cap : {5, 50, 2000}) {
      const auto fast = chain::meeting_time(s, InnovationStream(12, r), cap);
      const auto slow = reference::meeting_time(s, InnovationStream(12, r), cap);
      CHECK(fast.t == slow.t);
      CHECK(fast.censored == slow.censored);
    }
  }
  const TailHistogram ref = reference::meeting_tail(s, 20000, 256, 6);
  CHECK(chain::meeting_tail_experiment(s, 20000, 256, 6, 1).hist == ref);
  CHECK(chain::meeting_tail_experiment(s, 20000, 256, 6, 4).hist == ref);
}

TEST_CASE("one-step transition frequencies match the kernel within 3 sigma") {
  const TowerSpec s = build_tower_from_model(PowerTail{2.5, 0.0}, 8, 0.5);
  const std::uint64_t n = s.state_count();
  const auto P = transition_matrix(s);
  const TrajectoryWindow path = chain::simulate(s, 2000000, InnovationStream(23, 0));
  std::vector<double> counts(n * n, 0.0), rows(n, 0.0);
  for (std::size_t t = 0; t + 1 < path.states.size(); ++t) {
    const std::uint64_t i = s.state_index(path.states[t]);
    counts[i * n + s.state_index(path.states[t + 1])] += 1.0;
    rows[i] += 1.0;
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    REQUIRE(rows[i] > 0.0);
    for (std::uint64_t j = 0; j < n; ++j) {
      const double p = P[i * n + j];
      const double sigma = std::sqrt(p * (1 - p) / rows[i]);
      CHECK(std::abs(counts[i * n + j] / rows[i] - p) <= 3 * sigma);
    }
  }
}

TEST_CASE("occupancy and base-return frequency") {
  const TowerSpec s = build_tower_from_model(PowerTail{3.0, 0.0}, 13, 0.5);
  const std::uint64_t steps = 2000000;
  const auto counts = chain::occupancy(s, steps, InnovationStream(1, 0));
  std::uint64_t total = 0, base = 0;
  for (std::uint64_t i = 0; i < counts.size(); ++i) {
    total += counts[i];
    if (s.state_at(i).level == 0) base += counts[i];
  }
  CHECK(total == steps);
  CHECK(std::abs(double(base) / steps * s.mean_roof() - 1.0) < 0.01);
}

TEST_CASE("meeting-time ratio to E[(h - n)_+] shows no upward trend") {
  for (double beta : {2.5, 3.0}) {
    CAPTURE(beta);
    const TowerSpec s = build_tower_from_model(PowerTail{beta, 0.0}, 10000, 0.5);
    const std::uint64_t cap = 512;
    const auto res = chain::meeting_tail_experiment(s, 400000, cap, 9);
    std::vector<double> ns, ratios;
    double max_ratio = 0.0;
    for (std::uint64_t n = 8; n <= cap / 2; ++n) max_ratio = std::max(max_ratio, res.ratio[n]);
    for (std::uint64_t n = 8; n <= cap / 4; ++n) {
      ns.push_back(double(n));
      ratios.push_back(res.ratio[n]);
    }
    CHECK(stats::spearman(ns, ratios) <= 0.2);
    CHECK(max_ratio < 10.0);
  }
}
