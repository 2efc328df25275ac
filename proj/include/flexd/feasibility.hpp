#pragma once

#include "flexd/comms_metrics.hpp"
#include "flexd/scenario.hpp"

#include <string>

namespace flexd {

// Re-evaluation of the SCNR floor and both power budgets from the transmit
// matrices alone. Powers are summed entry by entry and the SCNR comes from
// the generalized-eigenvalue route, so nothing is shared with the solver.
struct ConstraintReport {
  double bs_power = 0.0;
  double worst_user_power_ratio = 0.0;  // max_k P_k / Pmax_k
  double scnr = 0.0;
  bool bs_power_ok = true;
  bool user_power_ok = true;
  bool scnr_ok = true;

  bool ok() const { return bs_power_ok && user_power_ok && scnr_ok; }
  std::string describe() const;
};

ConstraintReport recheck_constraints(const ChannelSet& channels, const BeamformerSet& beams,
                                     const Partition& partition, const Scenario& scenario, bool radar_enforced,
                                     double rel_tol = 1e-6);

}  // namespace flexd
