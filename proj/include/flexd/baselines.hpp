#pragma once

#include "flexd/comms_metrics.hpp"
#include "flexd/scenario.hpp"
#include "flexd/wmmse_solver.hpp"

#include <vector>

namespace flexd {

// Fixed split shared by both baselines: the ceil(K/2) users with the largest
// DL channel gain go DL, the rest UL.
Partition baseline_partition(const ChannelSet& channels);

// Channels and scenario restricted to `users` (re-indexed 0..n-1).
struct SubProblem {
  ChannelSet channels;
  Scenario scenario;
  std::vector<int> users;  // original indices
};
SubProblem restrict_users(const ChannelSet& channels, const Scenario& scenario, const std::vector<int>& users);

struct HdPhases {
  SolveResult downlink;  // DL users only, SCNR floor enforced
  SolveResult uplink;  // UL users only, no DL transmission, SCNR floor waived
  SubProblem dl_problem;
  SubProblem ul_problem;
};

// Half duplex with equal time shares: 0.5 * (DL-phase rate + UL-phase rate).
// The returned beams are the per-phase beams mapped back onto the full user
// set; scnr_achieved is the DL-phase SCNR. Outage when the DL phase is.
SolveResult hd_solve(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings,
                     HdPhases* phases = nullptr);

// Simultaneous UL/DL with per-link pseudo-inverse beams at full power (BS power
// split equally across DL users); no WMMSE iterations. Outage when the SCNR
// falls below the floor.
SolveResult zf_solve(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings);

}  // namespace flexd
