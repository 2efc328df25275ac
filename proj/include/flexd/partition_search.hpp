#pragma once

#include "flexd/comms_metrics.hpp"
#include "flexd/scenario.hpp"
#include "flexd/wmmse_solver.hpp"

#include <vector>

namespace flexd {

// Initializer followed by the inner WMMSE loop for one fixed partition.
// An infeasible initialization yields an outage result.
SolveResult solve_partition(const ChannelSet& channels, const Partition& partition, const Scenario& scenario,
                            const SolverSettings& settings);

// Ordering used to pick the best of several results: feasible before outage,
// then higher sum rate, then fewer DL users, then lexicographic DL set.
bool better_result(const SolveResult& a, const SolveResult& b);

struct SearchStats {
  int solver_calls = 0;
  std::vector<Partition> visited;  // in evaluation order
};

// Starting point of the local search: each user takes the direction with the
// larger Frobenius channel gain; one user is moved if a set ends up empty.
Partition heuristic_partition(const ChannelSet& channels);

// Best-improvement single-flip local search over partitions, at most
// 1 + K^2 solver calls.
SolveResult pattern_search(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings,
                           SearchStats* stats = nullptr);

inline constexpr int kMaxExhaustiveUsers = 12;

// All 2^K partitions. Throws std::invalid_argument when K > 12.
SolveResult exhaustive_search(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings,
                              SearchStats* stats = nullptr);

}  // namespace flexd
