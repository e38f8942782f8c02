#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "towerlab/histogram.hpp"
#include "towerlab/rng.hpp"
#include "towerlab/tower.hpp"

// Stationary tower chain driven by iid innovations:
//   g_{n+1} = U(g_n, eps_{n+1}),  U((a, l), e) = (a, l + 1) if l < h(a) - 1, else (e, 0).
// The innovation eps_n of a path whose first index is t0 is read from stream
// position n - t0, so paths are reproducible from (seed, stream id) alone.
namespace towerlab::chain {

ChainState step(ChainState state, std::uint32_t innovation, const TowerSpec& spec);

// Innovation drawn from P_A at a stream position.
inline std::uint32_t innovation_at(const TowerSpec& spec, InnovationStream& stream,
                                   std::uint64_t position) {
  return spec.draw_innovation(stream.uniform_at(position));
}

// Exact draw from nu: symbol with probability proportional to P_A(a) h_A(a),
// then a uniform level. Consumes two sequential positions of the stream.
ChainState sample_stationary(const TowerSpec& spec, InnovationStream& stream);

// Path g_0 .. g_{n-1} (window with first = center = 0). Without an explicit
// start, g_0 is drawn from nu on stream.substream(stream_tag::start_a).
TrajectoryWindow simulate(const TowerSpec& spec, std::uint64_t n, InnovationStream stream,
                          std::optional<ChainState> start = std::nullopt);

// Stationary window over times center - radius .. center + radius.
TrajectoryWindow simulate_window(const TowerSpec& spec, std::int64_t center, std::int64_t radius,
                                 InnovationStream stream);

// Throws unless the chain is aperiodic (gcd of charged roofs is 1).
void require_aperiodic(const TowerSpec& spec);

struct MeetingTimeSample {
  std::uint64_t t = 0;
  bool censored = false;  // no meeting by time cap; t == cap
  ChainState start_a;
  ChainState start_b;
};

// Two chains started independently from nu (start streams start_a / start_b)
// and driven by the same innovations; returns the first coincidence time.
MeetingTimeSample meeting_time(const TowerSpec& spec, InnovationStream stream, std::uint64_t cap);

struct MeetingTailResult {
  TailHistogram hist;
  // Indexed by n = 0..cap: E_A[(h_A - n)_+] and P^(T >= n) / E_A[(h_A - n)_+]
  // (ratio is 0 where the comparator vanishes).
  std::vector<double> comparator;
  std::vector<double> ratio;
};

// Replicate r uses stream InnovationStream(seed, r).
MeetingTailResult meeting_tail_experiment(const TowerSpec& spec, std::uint64_t runs,
                                          std::uint64_t cap, std::uint64_t seed, int workers = 1);

// Runs [begin, end) of meeting_tail_experiment, accumulated into one histogram.
TailHistogram meeting_tail_chunk(const TowerSpec& spec, std::uint64_t begin, std::uint64_t end,
                                 std::uint64_t cap, std::uint64_t seed);
void fill_comparator(const TowerSpec& spec, MeetingTailResult& result);

// Exact P(T >= n), n = 0..n_max, by propagating the law of the coupled pair on
// the product state space. Small specs only.
std::vector<double> exact_meeting_survival(const TowerSpec& spec, std::uint64_t n_max,
                                           std::uint64_t max_states = 2048);

// Visit counts per state index along a stationary path of `steps` states.
std::vector<std::uint64_t> occupancy(const TowerSpec& spec, std::uint64_t steps,
                                     InnovationStream stream);

}  // namespace towerlab::chain
