#include "towerlab/reference.hpp"

#include <stdexcept>

namespace towerlab::reference {

TailHistogram sample_return_tail(const maps::LsvParams& p, const maps::ReturnTailConfig& config) {
  TailHistogram hist(config.cap);
  for (std::uint64_t r = 0; r < config.replicates; ++r) {
    hist.merge(maps::return_tail_replicate(p, config, r));
  }
  return hist;
}

chain::MeetingTimeSample meeting_time(const TowerSpec& spec, InnovationStream stream,
                                      std::uint64_t cap) {
  if (cap == 0) throw std::invalid_argument("meeting_time: cap must be >= 1");
  InnovationStream sa = stream.substream(stream_tag::start_a);
  InnovationStream sb = stream.substream(stream_tag::start_b);
  chain::MeetingTimeSample out;
  out.start_a = chain::sample_stationary(spec, sa);
  out.start_b = chain::sample_stationary(spec, sb);
  ChainState a = out.start_a;
  ChainState b = out.start_b;
  for (std::uint64_t n = 0; n <= cap; ++n) {
    if (n > 0) {
      const std::uint32_t eps = chain::innovation_at(spec, stream, n);
      a = chain::step(a, eps, spec);
      b = chain::step(b, eps, spec);
    }
    if (a == b) {
      out.t = n;
      return out;
    }
  }
  out.t = cap;
  out.censored = true;
  return out;
}

TailHistogram meeting_tail(const TowerSpec& spec, std::uint64_t runs, std::uint64_t cap,
                           std::uint64_t seed) {
  TailHistogram hist(cap);
  for (std::uint64_t r = 0; r < runs; ++r) {
    const auto s = meeting_time(spec, InnovationStream(seed, r), cap);
    if (s.censored) {
      hist.add_censored();
    } else {
      hist.add(s.t);
    }
  }
  return hist;
}

std::vector<double> autocovariance(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (max_lag >= n) throw std::invalid_argument("autocovariance: max lag must be below the length");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> cov(max_lag + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) acc += (series[i] - mean) * (series[i + k] - mean);
    cov[k] = acc / static_cast<double>(n);
  }
  return cov;
}

std::vector<double> psi_series(const obs::ObservableSpec& obs, const TrajectoryWindow& w) {
  std::vector<double> out;
  out.reserve(w.states.size());
  for (std::int64_t k = w.first; k <= w.last(); ++k) out.push_back(obs::eval_psi_at(obs, w, k).value);
  return out;
}

std::vector<double> decay_samples(const obs::ObservableSpec& obs, const TowerSpec& spec,
                                  const obs::DecayConfig& config) {
  return obs::decay_chunk(obs, spec, config, 0, config.samples);
}

}  // namespace towerlab::reference
