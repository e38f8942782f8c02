#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "towerlab/chain.hpp"
#include "towerlab/maps.hpp"
#include "towerlab/observables.hpp"

// Single-threaded reference kernels. They follow the definitions literally
// (no fast-forwarding, no block recursions) and must agree with the parallel
// kernels exactly.
namespace towerlab::reference {

TailHistogram sample_return_tail(const maps::LsvParams& p, const maps::ReturnTailConfig& config);

// Both chains advanced one step at a time.
chain::MeetingTimeSample meeting_time(const TowerSpec& spec, InnovationStream stream,
                                      std::uint64_t cap);
TailHistogram meeting_tail(const TowerSpec& spec, std::uint64_t runs, std::uint64_t cap,
                           std::uint64_t seed);

std::vector<double> autocovariance(std::span<const double> series, std::size_t max_lag);

// eval_psi_at at every index.
std::vector<double> psi_series(const obs::ObservableSpec& obs, const TrajectoryWindow& w);

// All decay samples in one sequential pass (same layout as decay_chunk).
std::vector<double> decay_samples(const obs::ObservableSpec& obs, const TowerSpec& spec,
                                  const obs::DecayConfig& config);

}  // namespace towerlab::reference
