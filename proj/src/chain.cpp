#include "towerlab/chain.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "towerlab/parallel.hpp"

namespace towerlab::chain {

ChainState step(ChainState state, std::uint32_t innovation, const TowerSpec& spec) {
  if (!spec.valid(state)) throw std::invalid_argument("step: state not in the tower");
  if (!spec.at_top(state)) return {state.symbol, state.level + 1};
  if (innovation >= spec.size()) throw std::invalid_argument("step: innovation outside the alphabet");
  return {innovation, 0};
}

ChainState sample_stationary(const TowerSpec& spec, InnovationStream& stream) {
  const std::uint32_t a = spec.draw_stationary_symbol(stream.next_uniform());
  const std::uint64_t roof = spec.roof(a);
  const auto level = static_cast<std::uint32_t>(
      (static_cast<unsigned __int128>(stream.next_bits()) * roof) >> 64);
  return {a, level};
}

TrajectoryWindow simulate(const TowerSpec& spec, std::uint64_t n, InnovationStream stream,
                          std::optional<ChainState> start) {
  if (n == 0) throw std::invalid_argument("simulate: path length must be >= 1");
  TrajectoryWindow w;
  w.first = 0;
  w.center = 0;
  w.states.resize(n);
  w.innovations.resize(n);
  if (start) {
    if (!spec.valid(*start)) throw std::invalid_argument("simulate: start state not in the tower");
    w.states[0] = *start;
  } else {
    InnovationStream start_stream = stream.substream(stream_tag::start_a);
    w.states[0] = sample_stationary(spec, start_stream);
  }
  w.innovations[0] = TrajectoryWindow::kNoInnovation;
  for (std::uint64_t t = 1; t < n; ++t) {
    const std::uint32_t eps = innovation_at(spec, stream, t);
    w.innovations[t] = eps;
    w.states[t] = step(w.states[t - 1], eps, spec);
  }
  return w;
}

TrajectoryWindow simulate_window(const TowerSpec& spec, std::int64_t center, std::int64_t radius,
                                 InnovationStream stream) {
  if (radius < 0) throw std::invalid_argument("simulate_window: radius must be >= 0");
  TrajectoryWindow w = simulate(spec, static_cast<std::uint64_t>(2 * radius + 1), stream);
  w.first = center - radius;
  w.center = center;
  return w;
}

void require_aperiodic(const TowerSpec& spec) {
  if (spec.roof_gcd() != 1) {
    throw std::invalid_argument("tower chain is periodic (gcd of roofs = " +
                                std::to_string(spec.roof_gcd()) +
                                "); coupling experiments need an aperiodic chain");
  }
}

MeetingTimeSample meeting_time(const TowerSpec& spec, InnovationStream stream, std::uint64_t cap) {
  if (cap == 0) throw std::invalid_argument("meeting_time: cap must be >= 1");
  InnovationStream sa = stream.substream(stream_tag::start_a);
  InnovationStream sb = stream.substream(stream_tag::start_b);
  MeetingTimeSample out;
  out.start_a = sample_stationary(spec, sa);
  out.start_b = sample_stationary(spec, sb);
  ChainState a = out.start_a;
  ChainState b = out.start_b;
  if (a == b) return out;

  std::uint64_t n = 0;
  for (;;) {
    // Deterministic climbs never create a coincidence, so jump to the next
    // refresh of either chain.
    const std::uint32_t climb =
        std::min(spec.roof(a.symbol) - 1 - a.level, spec.roof(b.symbol) - 1 - b.level);
    n += climb + 1;
    if (n > cap) {
      out.t = cap;
      out.censored = true;
      return out;
    }
    a.level += climb;
    b.level += climb;
    const std::uint32_t eps = innovation_at(spec, stream, n);
    a = spec.at_top(a) ? ChainState{eps, 0} : ChainState{a.symbol, a.level + 1};
    b = spec.at_top(b) ? ChainState{eps, 0} : ChainState{b.symbol, b.level + 1};
    if (a == b) {
      out.t = n;
      return out;
    }
  }
}

TailHistogram meeting_tail_chunk(const TowerSpec& spec, std::uint64_t begin, std::uint64_t end,
                                 std::uint64_t cap, std::uint64_t seed) {
  TailHistogram hist(cap);
  for (std::uint64_t r = begin; r < end; ++r) {
    const MeetingTimeSample s = meeting_time(spec, InnovationStream(seed, r), cap);
    if (s.censored) {
      hist.add_censored();
    } else {
      hist.add(s.t);
    }
  }
  return hist;
}

void fill_comparator(const TowerSpec& spec, MeetingTailResult& result) {
  const std::uint64_t cap = result.hist.cap();
  const auto table = result.hist.survivor_table();
  result.comparator.assign(cap + 1, 0.0);
  result.ratio.assign(cap + 1, 0.0);
  for (std::uint64_t n = 0; n <= cap; ++n) {
    const double excess = spec.roof_excess(n);
    result.comparator[n] = excess;
    if (excess > 0.0 && result.hist.total() > 0) {
      result.ratio[n] = static_cast<double>(table[n]) / static_cast<double>(result.hist.total()) / excess;
    }
  }
}

namespace {
constexpr std::uint64_t kRunsPerChunk = 4096;
}

MeetingTailResult meeting_tail_experiment(const TowerSpec& spec, std::uint64_t runs,
                                          std::uint64_t cap, std::uint64_t seed, int workers) {
  if (runs == 0) throw std::invalid_argument("meeting_tail_experiment: runs must be >= 1");
  if (cap == 0) throw std::invalid_argument("meeting_tail_experiment: cap must be >= 1");
  require_aperiodic(spec);
  const std::uint64_t chunks = (runs + kRunsPerChunk - 1) / kRunsPerChunk;
  std::vector<TailHistogram> parts(chunks);
  parallel_for(chunks, resolve_workers(workers), [&](std::size_t c) {
    const std::uint64_t begin = c * kRunsPerChunk;
    parts[c] = meeting_tail_chunk(spec, begin, std::min(runs, begin + kRunsPerChunk), cap, seed);
  });
  MeetingTailResult result{TailHistogram(cap), {}, {}};
  for (const auto& part : parts) result.hist.merge(part);
  fill_comparator(spec, result);
  return result;
}

std::vector<double> exact_meeting_survival(const TowerSpec& spec, std::uint64_t n_max,
                                           std::uint64_t max_states) {
  const std::uint64_t s = spec.state_count();
  if (s > max_states) throw std::invalid_argument("exact_meeting_survival: state space too large");
  const std::vector<double> nu = nu_vector(spec);
  std::vector<ChainState> states(s);
  std::vector<std::uint64_t> up(s);
  std::vector<bool> top(s);
  for (std::uint64_t i = 0; i < s; ++i) {
    states[i] = spec.state_at(i);
    top[i] = spec.at_top(states[i]);
    up[i] = top[i] ? 0 : spec.state_index({states[i].symbol, states[i].level + 1});
  }
  std::vector<std::uint64_t> base(spec.size());
  for (std::uint32_t a = 0; a < spec.size(); ++a) base[a] = spec.state_index({a, 0});

  std::vector<double> unmet(s * s, 0.0);
  for (std::uint64_t x = 0; x < s; ++x) {
    for (std::uint64_t y = 0; y < s; ++y) {
      if (x != y) unmet[x * s + y] = nu[x] * nu[y];
    }
  }
  std::vector<double> survival(n_max + 1, 0.0);
  survival[0] = 1.0;
  std::vector<double> next(s * s);
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    double mass = 0.0;
    for (double m : unmet) mass += m;
    survival[n] = mass;  // P(T >= n) = P(no meeting at times 0..n-1)
    if (n == n_max) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::uint64_t x = 0; x < s; ++x) {
      for (std::uint64_t y = 0; y < s; ++y) {
        const double m = unmet[x * s + y];
        if (m == 0.0) continue;
        if (top[x] && top[y]) continue;  // both refresh to the same state
        if (!top[x] && !top[y]) {
          next[up[x] * s + up[y]] += m;
        } else if (top[x]) {
          for (std::uint32_t e = 0; e < spec.size(); ++e) next[base[e] * s + up[y]] += m * spec.weight(e);
        } else {
          for (std::uint32_t e = 0; e < spec.size(); ++e) next[up[x] * s + base[e]] += m * spec.weight(e);
        }
      }
    }
    unmet.swap(next);
  }
  return survival;
}

std::vector<std::uint64_t> occupancy(const TowerSpec& spec, std::uint64_t steps,
                                     InnovationStream stream) {
  if (steps == 0) throw std::invalid_argument("occupancy: steps must be >= 1");
  std::vector<std::uint64_t> counts(spec.state_count(), 0);
  InnovationStream start_stream = stream.substream(stream_tag::start_a);
  ChainState g = sample_stationary(spec, start_stream);
  ++counts[spec.state_index(g)];
  for (std::uint64_t t = 1; t < steps; ++t) {
    g = spec.at_top(g) ? ChainState{innovation_at(spec, stream, t), 0}
                       : ChainState{g.symbol, g.level + 1};
    ++counts[spec.state_index(g)];
  }
  return counts;
}

}  // namespace towerlab::chain
