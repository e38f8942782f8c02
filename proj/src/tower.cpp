#include "towerlab/tower.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "towerlab/format.hpp"

namespace towerlab {

TowerSpec::TowerSpec(std::vector<std::int64_t> ids, std::vector<double> weights,
                     std::vector<std::uint32_t> roofs, double xi, double truncated_mass)
    : ids_(std::move(ids)),
      weights_(std::move(weights)),
      roofs_(std::move(roofs)),
      xi_(xi),
      truncated_mass_(truncated_mass) {
  if (weights_.empty()) throw std::invalid_argument("tower spec: alphabet is empty");
  if (ids_.size() != weights_.size() || roofs_.size() != weights_.size()) {
    throw std::invalid_argument("tower spec: ids, weights and roofs differ in length");
  }
  if (!(xi_ > 0.0 && xi_ < 1.0)) throw std::invalid_argument("tower spec: xi must lie in (0, 1)");

  double total = 0.0;
  for (std::size_t a = 0; a < size(); ++a) {
    if (!(weights_[a] >= 0.0) || !std::isfinite(weights_[a])) {
      throw std::invalid_argument("tower spec: weights must be finite and nonnegative");
    }
    if (roofs_[a] == 0) throw std::invalid_argument("tower spec: every roof must be >= 1");
    total += weights_[a];
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw std::invalid_argument("tower spec: weights sum to " + format_double(total) + ", not 1");
  }

  state_offset_.resize(size());
  std::vector<double> stationary(size());
  for (std::size_t a = 0; a < size(); ++a) {
    state_offset_[a] = state_count_;
    state_count_ += roofs_[a];
    mean_roof_ += weights_[a] * roofs_[a];
    stationary[a] = weights_[a] * roofs_[a];
    if (weights_[a] > 0.0) {
      max_roof_ = std::max(max_roof_, roofs_[a]);
      roof_gcd_ = std::gcd(roof_gcd_, static_cast<std::uint64_t>(roofs_[a]));
    }
  }

  std::vector<double> mass_at(max_roof_ + 2, 0.0);
  for (std::size_t a = 0; a < size(); ++a) {
    if (weights_[a] > 0.0) mass_at[roofs_[a]] += weights_[a];
  }
  survival_by_roof_.assign(max_roof_ + 2, 0.0);
  for (std::uint64_t n = max_roof_ + 1; n-- > 0;) {
    survival_by_roof_[n] = survival_by_roof_[n + 1] + mass_at[n];
  }
  excess_by_roof_.assign(max_roof_ + 2, 0.0);
  for (std::uint64_t n = max_roof_; n-- > 0;) {
    excess_by_roof_[n] = excess_by_roof_[n + 1] + survival_by_roof_[n + 1];
  }

  innovation_table_ = AliasTable(weights_);
  stationary_table_ = AliasTable(stationary);
}

double TowerSpec::roof_survival(std::uint64_t n) const {
  return n < survival_by_roof_.size() ? survival_by_roof_[n] : 0.0;
}

double TowerSpec::roof_excess(std::uint64_t n) const {
  return n < excess_by_roof_.size() ? excess_by_roof_[n] : 0.0;
}

ChainState TowerSpec::state_at(std::uint64_t index) const {
  if (index >= state_count_) throw std::out_of_range("state index out of range");
  const auto it = std::upper_bound(state_offset_.begin(), state_offset_.end(), index);
  const auto a = static_cast<std::uint32_t>(std::distance(state_offset_.begin(), it) - 1);
  return {a, static_cast<std::uint32_t>(index - state_offset_[a])};
}

double nu_mass(const TowerSpec& spec, ChainState state) {
  if (!spec.valid(state)) throw std::invalid_argument("nu_mass: state not in the tower");
  return spec.weight(state.symbol) / spec.mean_roof();
}

std::vector<double> nu_vector(const TowerSpec& spec) {
  std::vector<double> nu(spec.state_count());
  for (std::uint32_t a = 0; a < spec.size(); ++a) {
    for (std::uint32_t l = 0; l < spec.roof(a); ++l) nu[spec.state_index({a, l})] = nu_mass(spec, {a, l});
  }
  return nu;
}

double model_survival(const TailModel& model, std::uint64_t n) {
  if (n <= 1) return 1.0;
  const auto dn = static_cast<double>(n);
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PowerTail>) {
          return std::pow(dn, -m.beta) * std::pow(1.0 + std::log(dn), m.gamma);
        } else if constexpr (std::is_same_v<M, GeometricTail>) {
          return std::pow(m.ratio, dn - 1.0);
        } else {
          return n > m.max_roof ? 0.0 : (m.max_roof - dn + 1.0) / m.max_roof;
        }
      },
      model);
}

TowerSpec build_tower_from_model(const TailModel& model, std::uint64_t cap, double xi) {
  if (cap == 0) throw std::invalid_argument("build_tower_from_model: cap must be >= 1");
  if (cap > 0xfffffffeULL) throw std::invalid_argument("build_tower_from_model: cap too large");
  if (const auto* power = std::get_if<PowerTail>(&model)) {
    if (!(power->beta > 0.0) || power->gamma > power->beta) {
      throw std::invalid_argument("power tail needs beta > 0 and gamma <= beta");
    }
  } else if (const auto* geo = std::get_if<GeometricTail>(&model)) {
    if (!(geo->ratio >= 0.0 && geo->ratio < 1.0)) {
      throw std::invalid_argument("geometric tail ratio must lie in [0, 1)");
    }
  } else if (std::get<UniformRoof>(model).max_roof == 0) {
    throw std::invalid_argument("uniform roof needs max_roof >= 1");
  }

  std::vector<std::int64_t> ids;
  std::vector<double> masses;
  std::vector<std::uint32_t> roofs;
  double kept = 0.0;
  double s_n = 1.0;
  for (std::uint64_t n = 1; n <= cap; ++n) {
    const double s_next = model_survival(model, n + 1);
    const double mass = s_n - s_next;
    if (mass < 0.0) throw std::invalid_argument("tail model survival is not monotone");
    if (mass > 0.0) {
      ids.push_back(static_cast<std::int64_t>(n));
      masses.push_back(mass);
      roofs.push_back(static_cast<std::uint32_t>(n));
      kept += mass;
    }
    s_n = s_next;
  }
  if (!(kept > 0.0)) throw std::invalid_argument("tail model has no mass below cap");
  for (double& m : masses) m /= kept;
  return TowerSpec(std::move(ids), std::move(masses), std::move(roofs), xi, s_n);
}

TowerSpec build_tower_from_tail(const TailHistogram& hist, double xi) {
  if (hist.total() == 0) throw std::invalid_argument("build_tower_from_tail: empty histogram");
  if (hist.count(0) != 0) throw std::invalid_argument("build_tower_from_tail: roof value 0 observed");
  const std::uint64_t uncensored = hist.total() - hist.censored();
  if (uncensored == 0) throw std::invalid_argument("build_tower_from_tail: every sample is censored");
  if (hist.cap() > 0xfffffffeULL) throw std::invalid_argument("build_tower_from_tail: cap too large");

  std::vector<std::int64_t> ids;
  std::vector<double> weights;
  std::vector<std::uint32_t> roofs;
  for (std::uint64_t n = 1; n <= hist.cap(); ++n) {
    if (hist.count(n) == 0) continue;
    ids.push_back(static_cast<std::int64_t>(n));
    weights.push_back(static_cast<double>(hist.count(n)) / static_cast<double>(uncensored));
    roofs.push_back(static_cast<std::uint32_t>(n));
  }
  return TowerSpec(std::move(ids), std::move(weights), std::move(roofs), xi, hist.censored_fraction());
}

std::int64_t TrajectoryWindow::radius() const {
  return std::min(center - first, last() - center);
}

std::optional<std::int64_t> first_inadmissible(const TowerSpec& spec, const TrajectoryWindow& w) {
  for (std::int64_t t = w.first; t <= w.last(); ++t) {
    const ChainState s = w.at(t);
    if (!spec.valid(s)) return t;
    if (t == w.last()) break;
    const ChainState next = w.at(t + 1);
    if (spec.at_top(s)) {
      if (next.level != 0) return t + 1;
    } else if (!(next.symbol == s.symbol && next.level == s.level + 1)) {
      return t + 1;
    }
  }
  return std::nullopt;
}

Separation separation_time(const TrajectoryWindow& a, const TrajectoryWindow& b) {
  if (a.center != b.center || a.first != b.first || a.states.size() != b.states.size()) {
    throw std::invalid_argument("separation_time: windows must share center and extent");
  }
  const std::int64_t c = a.center;
  if (!a.contains(c)) throw std::invalid_argument("separation_time: center outside window");
  const std::int64_t forward_room = a.last() - c;
  const std::int64_t backward_room = c - a.first;

  Separation out;
  bool plus_limited = true;
  for (std::int64_t l = 0; l <= forward_room; ++l) {
    if (l > 0 && a.at(c + l).level == 0) ++out.s_plus;
    if (!(a.at(c + l) == b.at(c + l))) {
      plus_limited = false;
      if (l == 0) out.s_plus = 0;
      break;
    }
  }
  bool minus_limited = true;
  for (std::int64_t l = 0; l <= backward_room; ++l) {
    if (!(a.at(c - l) == b.at(c - l))) {
      minus_limited = false;
      break;
    }
    if (a.at(c - l).level == 0) ++out.s_minus;
  }

  if (out.s_minus < out.s_plus) {
    out.s = out.s_minus;
    out.window_limited = minus_limited;
  } else if (out.s_plus < out.s_minus) {
    out.s = out.s_plus;
    out.window_limited = plus_limited;
  } else {
    out.s = out.s_plus;
    out.window_limited = plus_limited && minus_limited;
  }
  return out;
}

MetricValue metric(const TrajectoryWindow& a, const TrajectoryWindow& b, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("metric: xi must lie in (0, 1)");
  const Separation sep = separation_time(a, b);
  return {std::pow(xi, static_cast<double>(sep.s)), sep.window_limited};
}

std::uint64_t g0_visits(const TrajectoryWindow& w, std::int64_t from, std::int64_t to) {
  if (from > to) return 0;
  if (!w.contains(from) || !w.contains(to)) throw std::out_of_range("g0_visits: range outside window");
  std::uint64_t count = 0;
  for (std::int64_t t = from; t <= to; ++t) count += w.at(t).level == 0 ? 1 : 0;
  return count;
}

std::vector<double> transition_matrix(const TowerSpec& spec, std::uint64_t max_states) {
  const std::uint64_t n = spec.state_count();
  if (n > max_states) throw std::invalid_argument("transition_matrix: too many states for a dense kernel");
  std::vector<double> kernel(n * n, 0.0);
  for (std::uint64_t i = 0; i < n; ++i) {
    const ChainState s = spec.state_at(i);
    if (!spec.at_top(s)) {
      kernel[i * n + spec.state_index({s.symbol, s.level + 1})] = 1.0;
    } else {
      for (std::uint32_t b = 0; b < spec.size(); ++b) {
        kernel[i * n + spec.state_index({b, 0})] += spec.weight(b);
      }
    }
  }
  return kernel;
}

double kernel_stationarity_error(const TowerSpec& spec, std::uint64_t max_states) {
  const std::vector<double> kernel = transition_matrix(spec, max_states);
  const std::vector<double> nu = nu_vector(spec);
  const std::size_t n = nu.size();
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double pushed = 0.0;
    for (std::size_t i = 0; i < n; ++i) pushed += nu[i] * kernel[i * n + j];
    worst = std::max(worst, std::abs(pushed - nu[j]));
  }
  return worst;
}

void write_tower_spec(std::ostream& out, const TowerSpec& spec) {
  out << "xi = " << format_double(spec.xi()) << '\n';
  out << "symbol weight roof\n";
  for (std::uint32_t a = 0; a < spec.size(); ++a) {
    out << spec.id(a) << ' ' << format_double(spec.weight(a)) << ' ' << spec.roof(a) << '\n';
  }
}

TowerSpec read_tower_spec(std::istream& in) {
  std::string line;
  std::optional<double> xi;
  bool header_seen = false;
  std::vector<std::int64_t> ids;
  std::vector<double> weights;
  std::vector<std::uint32_t> roofs;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = " (line " + std::to_string(line_no) + ")";
    if (!xi) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("tower spec: expected 'xi = <value>'" + where);
      std::istringstream key_stream(line.substr(0, eq));
      std::string key;
      key_stream >> key;
      if (key != "xi") throw std::invalid_argument("tower spec: expected 'xi' header" + where);
      xi = parse_double(line.substr(eq + 1));
      continue;
    }
    std::istringstream fields(line);
    std::string f1, f2, f3, extra;
    fields >> f1 >> f2 >> f3;
    if (f3.empty() || (fields >> extra)) {
      throw std::invalid_argument("tower spec: expected three columns" + where);
    }
    if (!header_seen) {
      if (f1 != "symbol" || f2 != "weight" || f3 != "roof") {
        throw std::invalid_argument("tower spec: expected header 'symbol weight roof'" + where);
      }
      header_seen = true;
      continue;
    }
    try {
      std::size_t used = 0;
      ids.push_back(std::stoll(f1, &used));
      if (used != f1.size()) throw std::invalid_argument(f1);
      weights.push_back(parse_double(f2));
      const unsigned long long roof = std::stoull(f3, &used);
      if (used != f3.size() || roof > 0xffffffffULL) throw std::invalid_argument(f3);
      roofs.push_back(static_cast<std::uint32_t>(roof));
    } catch (const std::exception&) {
      throw std::invalid_argument("tower spec: malformed row" + where);
    }
  }
  if (!xi) throw std::invalid_argument("tower spec: missing 'xi' header");
  return TowerSpec(std::move(ids), std::move(weights), std::move(roofs), *xi);
}

}  // namespace towerlab
