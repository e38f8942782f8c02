#include "towerlab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "towerlab/chain.hpp"
#include "towerlab/parallel.hpp"

namespace towerlab::obs {

BaseFunction zero_function() {
  return {"zero", [](ChainState) { return 0.0; }, 0.0};
}

BaseFunction constant_function(double c) {
  return {"constant", [c](ChainState) { return c; }, std::abs(c)};
}

BaseFunction level_function(const TowerSpec& spec) {
  return {"level", [](ChainState s) { return static_cast<double>(s.level); },
          static_cast<double>(spec.max_roof() - 1)};
}

BaseFunction base_indicator() {
  return {"base_indicator", [](ChainState s) { return s.level == 0 ? 1.0 : 0.0; }, 1.0};
}

BaseFunction short_block_contrast(const TowerSpec& spec) {
  double p1 = 0.0;
  double p2 = 0.0;
  for (std::uint32_t a = 0; a < spec.size(); ++a) {
    if (spec.roof(a) == 1) p1 += spec.weight(a);
    if (spec.roof(a) == 2) p2 += spec.weight(a);
  }
  if (p1 <= 0.0 || p2 <= 0.0) {
    throw std::invalid_argument("short_block_contrast needs symbols with roof 1 and roof 2");
  }
  std::vector<double> f(spec.size(), 0.0);
  for (std::uint32_t a = 0; a < spec.size(); ++a) {
    if (spec.roof(a) == 1) f[a] = p2;
    if (spec.roof(a) == 2) f[a] = -p1;
  }
  return {"short_block_contrast",
          [f = std::move(f)](ChainState s) { return s.level == 0 ? f[s.symbol] : 0.0; },
          std::max(p1, p2)};
}

BaseFunction make_base_function(const std::string& name, const TowerSpec& spec, double constant) {
  if (name == "zero") return zero_function();
  if (name == "constant") return constant_function(constant);
  if (name == "level") return level_function(spec);
  if (name == "base_indicator") return base_indicator();
  if (name == "short_block_contrast") return short_block_contrast(spec);
  throw std::invalid_argument("unknown base function '" + name + "'");
}

ObservableSpec ObservableSpec::geometric(const TowerSpec& spec, BaseFunction phi) {
  ObservableSpec o;
  o.mode_ = Mode::geometric;
  o.name_ = "geometric:" + phi.name;
  o.xi_ = spec.xi();
  double mass = 0.0;
  for (std::uint32_t a = 0; a < spec.size(); ++a) {
    double block = 0.0;
    for (std::uint32_t l = 0; l < spec.roof(a); ++l) block += std::abs(phi.f({a, l}));
    mass = std::max(mass, block);
  }
  o.block_mass_ = mass;
  o.phi_ = std::move(phi);
  return o;
}

ObservableSpec ObservableSpec::finite_window(const TowerSpec& spec, std::string name,
                                             WindowFunction f, std::int64_t width, double sup) {
  if (width < 0) throw std::invalid_argument("finite-window observable: width must be >= 0");
  if (!(sup >= 0.0)) throw std::invalid_argument("finite-window observable: sup must be >= 0");
  ObservableSpec o;
  o.mode_ = Mode::finite_window;
  o.name_ = std::move(name);
  o.xi_ = spec.xi();
  o.width_ = width;
  o.window_sup_ = sup;
  o.window_ = std::move(f);
  return o;
}

ObservableSpec ObservableSpec::center(const TowerSpec& spec, BaseFunction phi) {
  const double sup = phi.sup;
  std::string name = "center:" + phi.name;
  auto f = phi.f;
  ObservableSpec o = finite_window(
      spec, std::move(name),
      [f](const TrajectoryWindow& w, std::int64_t k) { return f(w.at(k)); }, 0, sup);
  o.phi_ = std::move(phi);
  return o;
}

double ObservableSpec::sup_bound() const {
  if (mode_ == Mode::finite_window) return scale_ * window_sup_;
  return scale_ * block_mass_ * (1.0 + xi_) / (1.0 - xi_);
}

double ObservableSpec::lipschitz() const {
  if (mode_ == Mode::finite_window) {
    return scale_ * 2.0 * window_sup_ * std::pow(xi_, -static_cast<double>(width_));
  }
  return scale_ * 4.0 * block_mass_ / (1.0 - xi_);
}

ObservableSpec ObservableSpec::normalized() const {
  const double l = lipschitz();
  return l > 0.0 ? scaled(1.0 / l) : *this;
}

ObservableSpec ObservableSpec::scaled(double factor) const {
  ObservableSpec o = *this;
  o.scale_ *= factor;
  return o;
}

PsiValue eval_psi(const ObservableSpec& obs, const TrajectoryWindow& w) {
  return eval_psi_at(obs, w, w.center);
}

PsiValue eval_psi_at(const ObservableSpec& obs, const TrajectoryWindow& w, std::int64_t k) {
  if (!w.contains(k)) throw std::out_of_range("eval_psi: index outside the window");
  if (obs.mode() == Mode::finite_window) {
    if (!w.contains(k - obs.width()) || !w.contains(k + obs.width())) {
      throw std::out_of_range("eval_psi: window smaller than the observable width");
    }
    return {obs.scale() * obs.window_value(w, k), 0.0};
  }
  const double xi = obs.xi();
  double sum = obs.phi(w.at(k));
  double weight = 1.0;
  std::uint64_t c_plus = 0;
  for (std::int64_t t = k + 1; t <= w.last(); ++t) {
    const ChainState s = w.at(t);
    if (s.level == 0) {
      ++c_plus;
      weight *= xi;
    }
    sum += weight * obs.phi(s);
  }
  weight = 1.0;
  std::uint64_t c_minus = w.at(k).level == 0 ? 1 : 0;
  for (std::int64_t t = k - 1; t >= w.first; --t) {
    if (w.at(t + 1).level == 0) weight *= xi;
    const ChainState s = w.at(t);
    if (s.level == 0) ++c_minus;
    sum += weight * obs.phi(s);
  }
  const double bound =
      2.0 * obs.sup_bound() * std::pow(xi, static_cast<double>(std::min(c_plus, c_minus)));
  return {obs.scale() * sum, obs.block_mass() == 0.0 ? 0.0 : bound};
}

std::vector<double> psi_series(const ObservableSpec& obs, const TrajectoryWindow& w) {
  const std::size_t n = w.states.size();
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  if (obs.mode() == Mode::finite_window) {
    for (std::int64_t k = w.first + obs.width(); k <= w.last() - obs.width(); ++k) {
      out[static_cast<std::size_t>(k - w.first)] = obs.scale() * obs.window_value(w, k);
    }
    return out;
  }
  // Block sums, with a block starting at every base visit and at the first index.
  std::vector<double> block_sum;
  std::vector<std::uint32_t> block_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || w.states[i].level == 0) block_sum.push_back(0.0);
    block_of[i] = static_cast<std::uint32_t>(block_sum.size() - 1);
    block_sum.back() += obs.phi(w.states[i]);
  }
  const std::size_t nb = block_sum.size();
  const double xi = obs.xi();
  std::vector<double> ahead(nb);
  std::vector<double> behind(nb);
  for (std::size_t b = nb; b-- > 0;) {
    ahead[b] = block_sum[b] + (b + 1 < nb ? xi * ahead[b + 1] : 0.0);
  }
  for (std::size_t b = 0; b < nb; ++b) {
    behind[b] = block_sum[b] + (b > 0 ? xi * behind[b - 1] : 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t b = block_of[i];
    out[i] = obs.scale() * (ahead[b] + behind[b] - block_sum[b]);
  }
  return out;
}

double stationary_mean(const ObservableSpec& obs, const TowerSpec& spec) {
  if (obs.mode() != Mode::geometric) {
    throw std::invalid_argument("stationary_mean: only available for geometric observables");
  }
  double mean_p = 0.0;
  double mean_biased = 0.0;
  for (std::uint32_t a = 0; a < spec.size(); ++a) {
    double block = 0.0;
    for (std::uint32_t l = 0; l < spec.roof(a); ++l) block += obs.phi({a, l});
    mean_p += spec.weight(a) * block;
    mean_biased += spec.weight(a) * spec.roof(a) * block;
  }
  mean_biased /= spec.mean_roof();
  const double xi = obs.xi();
  return obs.scale() * (mean_biased + 2.0 * xi / (1.0 - xi) * mean_p);
}

TrajectoryWindow refresh_future(const TowerSpec& spec, const TrajectoryWindow& w, std::int64_t k,
                                std::int64_t m, InnovationStream fresh) {
  if (m < 0) throw std::invalid_argument("refresh_future: m must be >= 0");
  if (!w.contains(k)) throw std::out_of_range("refresh_future: k outside the window");
  TrajectoryWindow out = w;
  for (std::int64_t t = k + m + 1; t <= w.last(); ++t) {
    const std::uint32_t eps =
        chain::innovation_at(spec, fresh, static_cast<std::uint64_t>(t - w.first));
    out.at(t) = chain::step(out.at(t - 1), eps, spec);
    out.innovations[static_cast<std::size_t>(t - w.first)] = eps;
  }
  return out;
}

TrajectoryWindow refresh_past(const TowerSpec& spec, const TrajectoryWindow& w, std::int64_t k,
                              std::int64_t m, InnovationStream fresh) {
  if (m < 0) throw std::invalid_argument("refresh_past: m must be >= 0");
  if (!w.contains(k)) throw std::out_of_range("refresh_past: k outside the window");
  const std::int64_t cut = k - m;
  if (cut <= w.first) return w;
  TrajectoryWindow out = w;
  InnovationStream start_stream = fresh.substream(stream_tag::start_a);
  out.states[0] = chain::sample_stationary(spec, start_stream);
  out.innovations[0] = TrajectoryWindow::kNoInnovation;
  for (std::int64_t t = w.first + 1; t <= w.last(); ++t) {
    const auto i = static_cast<std::size_t>(t - w.first);
    std::uint32_t eps = w.innovations[i];
    if (t < cut) {
      eps = chain::innovation_at(spec, fresh, i);
      out.innovations[i] = eps;
    }
    out.states[i] = chain::step(out.states[i - 1], eps, spec);
  }
  return out;
}

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return m;
}

}  // namespace

ApproxEstimate estimate_Xmk(const ObservableSpec& obs, const TowerSpec& spec,
                            const TrajectoryWindow& w, std::int64_t k, std::int64_t m,
                            std::uint64_t replicates, InnovationStream stream) {
  if (replicates == 0) throw std::invalid_argument("estimate_Xmk: replicates must be >= 1");
  const InnovationStream future = stream.substream(stream_tag::fresh_future);
  std::vector<double> values(replicates);
  ApproxEstimate est;
  for (std::uint64_t r = 0; r < replicates; ++r) {
    const PsiValue v = eval_psi_at(obs, refresh_future(spec, w, k, m, future.substream(r)), k);
    values[r] = v.value;
    est.truncation_bound = std::max(est.truncation_bound, v.truncation_bound);
  }
  const Moments mo = moments(values);
  est.value = mo.mean;
  est.mc_error = mo.se;
  est.outer_error = mo.se;
  return est;
}

ApproxEstimate estimate_tilde_Xmk(const ObservableSpec& obs, const TowerSpec& spec,
                                  const TrajectoryWindow& w, std::int64_t k, std::int64_t m,
                                  std::uint64_t outer, std::uint64_t inner,
                                  InnovationStream stream) {
  if (outer == 0 || inner == 0) {
    throw std::invalid_argument("estimate_tilde_Xmk: replicate counts must be >= 1");
  }
  const InnovationStream past = stream.substream(stream_tag::fresh_past);
  const InnovationStream future = stream.substream(stream_tag::fresh_future);
  std::vector<double> outer_means(outer);
  std::vector<double> inner_values(inner);
  double inner_se_sum = 0.0;
  ApproxEstimate est;
  for (std::uint64_t o = 0; o < outer; ++o) {
    const TrajectoryWindow resampled = refresh_past(spec, w, k, m, past.substream(o));
    const InnovationStream future_o = future.substream(o);
    for (std::uint64_t i = 0; i < inner; ++i) {
      const PsiValue v =
          eval_psi_at(obs, refresh_future(spec, resampled, k, m, future_o.substream(i)), k);
      inner_values[i] = v.value;
      est.truncation_bound = std::max(est.truncation_bound, v.truncation_bound);
    }
    const Moments mi = moments(inner_values);
    outer_means[o] = mi.mean;
    inner_se_sum += mi.se;
  }
  const Moments mo = moments(outer_means);
  est.value = mo.mean;
  est.outer_error = mo.se;
  est.inner_error = inner_se_sum / static_cast<double>(outer);
  est.mc_error = est.outer_error + est.inner_error;
  return est;
}

std::vector<double> decay_chunk(const ObservableSpec& obs, const TowerSpec& spec,
                                const DecayConfig& config, std::uint64_t begin, std::uint64_t end,
                                std::vector<double>* truncation) {
  const std::size_t nm = config.ms.size();
  std::vector<double> out;
  out.reserve((end - begin) * nm);
  for (std::uint64_t i = begin; i < end; ++i) {
    const InnovationStream stream(config.seed, i);
    const TrajectoryWindow w = chain::simulate_window(spec, 0, config.radius, stream);
    const PsiValue x = eval_psi(obs, w);
    const InnovationStream resample = stream.substream(stream_tag::replicate);
    for (std::size_t j = 0; j < nm; ++j) {
      const std::int64_t m = config.ms[j];
      const ApproxEstimate t = estimate_tilde_Xmk(obs, spec, w, 0, m, config.outer, config.inner,
                                                  resample.substream(static_cast<std::uint64_t>(m)));
      out.push_back(std::abs(t.value - x.value));
      if (truncation) {
        (*truncation)[j] += std::max(t.truncation_bound, x.truncation_bound);
      }
    }
  }
  return out;
}

namespace {
constexpr std::uint64_t kSamplesPerChunk = 256;
}

std::vector<DecayPoint> approx_decay_experiment(const ObservableSpec& obs, const TowerSpec& spec,
                                                const DecayConfig& config, int workers) {
  if (config.ms.empty()) throw std::invalid_argument("approx_decay_experiment: ms is empty");
  for (std::int64_t m : config.ms) {
    if (m < 1) throw std::invalid_argument("approx_decay_experiment: every m must be >= 1");
    if (m >= config.radius) {
      throw std::invalid_argument("approx_decay_experiment: every m must be below the radius");
    }
  }
  if (config.samples < 2) throw std::invalid_argument("approx_decay_experiment: samples must be >= 2");
  if (!(config.r > 0.0)) throw std::invalid_argument("approx_decay_experiment: r must be > 0");
  const std::size_t nm = config.ms.size();
  const std::uint64_t chunks = (config.samples + kSamplesPerChunk - 1) / kSamplesPerChunk;
  std::vector<std::vector<double>> parts(chunks);
  std::vector<std::vector<double>> part_trunc(chunks, std::vector<double>(nm, 0.0));
  parallel_for(chunks, resolve_workers(workers), [&](std::size_t c) {
    const std::uint64_t begin = c * kSamplesPerChunk;
    const std::uint64_t end = std::min(config.samples, begin + kSamplesPerChunk);
    parts[c] = decay_chunk(obs, spec, config, begin, end, &part_trunc[c]);
  });

  std::int64_t max_lag = 0;
  for (std::int64_t m : config.ms) {
    max_lag = std::max(max_lag, static_cast<std::int64_t>(std::floor(m / config.r)));
  }
  const auto cap = static_cast<std::uint64_t>(std::max<std::int64_t>(max_lag, 1));
  chain::MeetingTailResult meeting{TailHistogram(cap), {}, {}};
  if (config.meeting_runs > 0) {
    meeting = chain::meeting_tail_experiment(
        spec, config.meeting_runs, cap, derive_seed(config.seed, stream_tag::comparator), workers);
  }

  std::vector<DecayPoint> points(nm);
  for (std::size_t j = 0; j < nm; ++j) {
    std::vector<double> d;
    d.reserve(config.samples);
    for (const auto& part : parts) {
      for (std::size_t i = j; i < part.size(); i += nm) d.push_back(part[i]);
    }
    const Moments mo = moments(d);
    DecayPoint& p = points[j];
    p.m = config.ms[j];
    p.estimate = mo.mean;
    p.mc_error = mo.se;
    const auto lag = static_cast<std::uint64_t>(std::floor(p.m / config.r));
    const double tail = config.meeting_runs > 0 ? meeting.hist.survival(lag) : 0.0;
    p.comparator = std::pow(static_cast<double>(p.m), -config.r / 2.0) + tail;
    p.ratio = p.estimate / p.comparator;
    for (const auto& t : part_trunc) p.truncation_bound += t[j];
    p.truncation_bound /= static_cast<double>(config.samples);
  }
  return points;
}

}  // namespace towerlab::obs
