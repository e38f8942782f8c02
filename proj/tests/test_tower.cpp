#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "towerlab/chain.hpp"
#include "towerlab/maps.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/stats.hpp"
#include "towerlab/tower.hpp"

using namespace towerlab;

namespace {

TowerSpec two_symbol(double pa = 0.5, std::uint32_t ha = 1, std::uint32_t hb = 2, double xi = 0.5) {
  return TowerSpec({ha, hb}, {pa, 1.0 - pa}, {ha, hb}, xi);
}

TrajectoryWindow make_window(std::int64_t first, std::int64_t center, std::vector<ChainState> states) {
  TrajectoryWindow w;
  w.first = first;
  w.center = center;
  w.states = std::move(states);
  w.innovations.assign(w.states.size(), TrajectoryWindow::kNoInnovation);
  return w;
}

// Separation time by literal enumeration of the definition.
std::uint64_t brute_separation(const TrajectoryWindow& g, const TrajectoryWindow& h) {
  std::int64_t tp = 0;
  while (g.contains(tp) && g.at(tp) == h.at(tp)) ++tp;
  std::int64_t tm = 0;
  while (g.contains(-tm) && g.at(-tm) == h.at(-tm)) ++tm;
  std::uint64_t sm = 0, sp = 0;
  for (std::int64_t l = 0; l < tm; ++l) sm += g.at(-l).level == 0;
  for (std::int64_t l = 1; l <= tp && g.contains(l); ++l) sp += g.at(l).level == 0;
  return std::min(sm, sp);
}

}  // namespace

TEST_CASE("tower spec validation") {
  CHECK_THROWS(TowerSpec({}, {}, {}, 0.5));
  CHECK_THROWS(TowerSpec({1}, {1.0}, {0}, 0.5));
  CHECK_THROWS(TowerSpec({1}, {1.0}, {1}, 1.0));
  CHECK_THROWS(TowerSpec({1, 2}, {0.5, 0.4}, {1, 2}, 0.5));
  CHECK_THROWS(TowerSpec({1, 2}, {1.5, -0.5}, {1, 2}, 0.5));
  CHECK_NOTHROW(TowerSpec({1, 2}, {0.5, 0.5 + 1e-13}, {1, 2}, 0.5));
}

TEST_CASE("nu_mass examples") {
  const TowerSpec one({1}, {1.0}, {1}, 0.5);
  CHECK(nu_mass(one, {0, 0}) == 1.0);
  const TowerSpec s = two_symbol();
  CHECK(s.mean_roof() == doctest::Approx(1.5));
  CHECK(nu_mass(s, {0, 0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(nu_mass(s, {1, 0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(nu_mass(s, {1, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (const TowerSpec& spec : {build_tower_from_model(PowerTail{3.0, 0.0}, 200, 0.5),
                                build_tower_from_model(GeometricTail{0.7}, 40, 0.5),
                                build_tower_from_model(UniformRoof{9}, 9, 0.3)}) {
    const auto nu = nu_vector(spec);
    CHECK(nu.size() == spec.state_count());
    CHECK(std::abs(std::accumulate(nu.begin(), nu.end(), 0.0) - 1.0) < 1e-12);
  }
}

TEST_CASE("state indexing is a bijection") {
  const TowerSpec spec = build_tower_from_model(PowerTail{2.5, 0.0}, 30, 0.5);
  for (std::uint64_t i = 0; i < spec.state_count(); ++i) {
    const ChainState s = spec.state_at(i);
    CHECK(spec.valid(s));
    CHECK(spec.state_index(s) == i);
  }
}

TEST_CASE("build_tower_from_tail point mass") {
  TailHistogram h(10);
  h.add(1, 50);
  const TowerSpec spec = build_tower_from_tail(h, 0.5);
  CHECK(spec.size() == 1);
  CHECK(spec.roof(0) == 1);
  CHECK(spec.weight(0) == 1.0);
}

TEST_CASE("power model survival reproduces n^-3 below the cap") {
  const std::uint64_t cap = 10000;
  const TowerSpec spec = build_tower_from_model(PowerTail{3.0, 0.0}, cap, 0.5);
  double worst = 0.0;
  for (std::uint64_t n = 1; n <= cap; ++n) {
    worst = std::max(worst, std::abs(spec.roof_survival(n) - std::pow(static_cast<double>(n), -3.0)));
  }
  CHECK(worst < 1e-9);
  CHECK(spec.roof_survival(cap + 1) == 0.0);
  double excess = 0.0;
  for (std::uint32_t a = 0; a < spec.size(); ++a) {
    excess += spec.weight(a) * std::max(0.0, static_cast<double>(spec.roof(a)) - 5.0);
  }
  CHECK(spec.roof_excess(5) == doctest::Approx(excess).epsilon(1e-12));
}

TEST_CASE("geometric and uniform models") {
  const TowerSpec g = build_tower_from_model(GeometricTail{0.5}, 30, 0.5);
  for (std::uint64_t n = 1; n <= 20; ++n) {
    CHECK(g.roof_survival(n) == doctest::Approx(std::pow(0.5, n - 1.0)).epsilon(1e-8));
  }
  const TowerSpec u = build_tower_from_model(UniformRoof{4}, 4, 0.5);
  CHECK(u.size() == 4);
  CHECK(u.mean_roof() == doctest::Approx(2.5));
}

TEST_CASE("tower built from LSV return times has tail slope -2") {
  maps::ReturnTailConfig c;
  c.samples = 2000000;
  c.cap = 100000;
  c.seed = 13;
  const TailHistogram h = maps::sample_return_tail(maps::LsvParams(0.5), c);
  const TowerSpec spec = build_tower_from_tail(h, 0.5);
  std::vector<double> x, y;
  for (double n = 16; n <= 1024; n *= 1.25) {
    x.push_back(std::log(n));
    y.push_back(std::log(spec.roof_survival(static_cast<std::uint64_t>(n))));
  }
  const stats::LinearFit fit = stats::linear_fit(x, y);
  CHECK(std::abs(fit.slope + 2.0) <= 0.2);
  // Round trip: the spec survival equals the empirical survival of the input.
  for (std::uint64_t n : {1, 2, 5, 50, 500}) {
    CHECK(spec.roof_survival(n) == doctest::Approx(h.survival(n)).epsilon(1e-9));
  }
}

TEST_CASE("kernel stationarity is exact") {
  for (const TowerSpec& spec : {two_symbol(), build_tower_from_model(PowerTail{3.0, 0.0}, 13, 0.5),
                                build_tower_from_model(PowerTail{2.2, 1.0}, 40, 0.5),
                                build_tower_from_model(GeometricTail{0.5}, 30, 0.5)}) {
    CHECK(spec.state_count() <= 1000);
    CHECK(kernel_stationarity_error(spec) < 1e-12);
    const auto P = transition_matrix(spec);
    const std::uint64_t n = spec.state_count();
    for (std::uint64_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::uint64_t j = 0; j < n; ++j) row += P[i * n + j];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("tower spec text round trip") {
  const TowerSpec spec = build_tower_from_model(PowerTail{3.0, 0.5}, 100, 0.37);
  std::stringstream s;
  write_tower_spec(s, spec);
  const TowerSpec back = read_tower_spec(s);
  CHECK(back == spec);
  std::istringstream bad("xi = 0.5\nsymbol weight roof\n1 0.5 1\n");
  CHECK_THROWS(read_tower_spec(bad));
}

TEST_CASE("admissibility") {
  const TowerSpec s = two_symbol();
  CHECK_FALSE(first_inadmissible(s, make_window(0, 0, {{1, 0}, {1, 1}, {0, 0}, {1, 0}})).has_value());
  const auto bad = first_inadmissible(s, make_window(0, 0, {{1, 0}, {0, 0}}));
  REQUIRE(bad.has_value());
  CHECK(*bad == 1);
  const auto top = first_inadmissible(s, make_window(-1, 0, {{1, 1}, {1, 1}}));
  REQUIRE(top.has_value());
  CHECK(*top == 0);
}

TEST_CASE("separation time of identical windows is window limited") {
  const TowerSpec s = two_symbol();
  const TrajectoryWindow w = chain::simulate_window(s, 0, 10, InnovationStream(1, 0));
  const Separation sep = separation_time(w, w);
  CHECK(sep.window_limited);
  CHECK(sep.s_minus == g0_visits(w, -10, 0));
  CHECK(sep.s_plus == g0_visits(w, 1, 10));
  CHECK(sep.s == std::min(sep.s_minus, sep.s_plus));
}

TEST_CASE("separation time with disagreement at the center") {
  const TowerSpec s = two_symbol();
  const TrajectoryWindow a = make_window(-1, 0, {{1, 1}, {0, 0}, {1, 0}});
  const TrajectoryWindow b = make_window(-1, 0, {{1, 1}, {1, 0}, {1, 1}});
  const Separation sep = separation_time(a, b);
  CHECK(sep.s == 0);
  CHECK_FALSE(sep.window_limited);
  CHECK(metric(a, b, 0.5).value == 1.0);
}

TEST_CASE("separation time of a hand-built pair agreeing on [-5, 7]") {
  // h = 2 everywhere, levels alternate with g_0 at level 0.
  const TowerSpec s({1, 2}, {0.5, 0.5}, {2, 2}, 0.5);
  std::vector<ChainState> ga, gb;
  for (std::int64_t t = -10; t <= 10; ++t) {
    const std::uint32_t level = static_cast<std::uint32_t>((t % 2 + 2) % 2);
    ChainState x{0, level};
    ChainState y{0, level};
    // Blocks starting at even t < -5 or t > 7 use a different symbol in b.
    const std::int64_t block = t - level;
    if (block < -5 || block > 7) y.symbol = 1;
    ga.push_back(x);
    gb.push_back(y);
  }
  const TrajectoryWindow a = make_window(-10, 0, ga);
  const TrajectoryWindow b = make_window(-10, 0, gb);
  REQUIRE_FALSE(first_inadmissible(s, a).has_value());
  REQUIRE_FALSE(first_inadmissible(s, b).has_value());
  const Separation sep = separation_time(a, b);
  // First disagreements at -6 and 8.
  CHECK(sep.s_minus == 3);  // levels 0 at 0, -2, -4 before -6
  CHECK(sep.s_plus == 4);   // levels 0 at 2, 4, 6, 8
  CHECK(sep.s == 3);
  CHECK(sep.s == brute_separation(a, b));
  CHECK_FALSE(sep.window_limited);
  CHECK(metric(a, b, 0.5).value == 0.125);
}

TEST_CASE("separation matches brute force and the metric is a symmetric ultrametric") {
  const TowerSpec s = build_tower_from_model(PowerTail{2.5, 0.0}, 50, 0.5);
  int checked = 0;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    InnovationStream st(77, i);
    const TrajectoryWindow g = chain::simulate_window(s, 0, 40, st);
    const auto m1 = static_cast<std::int64_t>(st.bits_at(1000) % 20);
    const auto m2 = static_cast<std::int64_t>(st.bits_at(1001) % 20);
    const TrajectoryWindow h = obs::refresh_future(s, obs::refresh_past(s, g, 0, m1, st.substream(1)), 0, m2,
                                                   st.substream(2));
    const TrajectoryWindow k = obs::refresh_past(s, obs::refresh_future(s, h, 0, m2 / 2, st.substream(3)), 0,
                                                 m1 / 2, st.substream(4));
    CHECK(separation_time(g, h).s == brute_separation(g, h));
    const MetricValue gh = metric(g, h, 0.5), hg = metric(h, g, 0.5);
    CHECK(gh.value == hg.value);
    CHECK(gh.value <= 1.0);
    const MetricValue hk = metric(h, k, 0.5), gk = metric(g, k, 0.5);
    if (!gh.upper_bound && !hk.upper_bound && !gk.upper_bound) {
      CHECK(gk.value <= std::max(gh.value, hk.value));
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("g0_visits") {
  const TrajectoryWindow w = make_window(-2, 0, {{1, 0}, {1, 1}, {0, 0}, {0, 0}, {1, 0}});
  CHECK(g0_visits(w, -2, 2) == 4);
  CHECK(g0_visits(w, 1, 0) == 0);
  CHECK(g0_visits(w, -1, -1) == 0);
  CHECK_THROWS(g0_visits(w, -3, 0));
}
