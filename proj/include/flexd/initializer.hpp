#pragma once

#include "flexd/comms_metrics.hpp"
#include "flexd/scenario.hpp"
#include "flexd/wmmse_solver.hpp"

#include <vector>

namespace flexd {

// Per-link pseudo-inverse of the channel, truncated to the stream count.
// Only transmit matrices are filled. `ranks`, when given, receives the
// numerical rank of each user's active channel.
BeamformerSet zf_beamformers(const ChannelSet& channels, const Partition& partition, const Scenario& scenario,
                             std::vector<int>* ranks = nullptr);

struct InitResult {
  BeamformerSet beams;
  bool feasible = false;
  double scnr = 0.0;
  std::vector<double> scnr_history;  // SCNR after each eigen-beam refresh
  double delta_used = 0.0;
  int iterations = 0;
};

// SCNR-oriented starting point:
//  1. ZF transmit matrices; UL scaled to power P_k / delta.
//  2. Repeat: R from the current beams, Theta = A^H R^{-1} A, DL beams of every
//     DL user rebuilt from the top eigenpairs of Theta (eigenvalues normalized to
//     amplitude sqrt(P_BS / K)), until the SCNR settles.
// If the fixed point misses the SCNR floor while UL users are present, delta is
// raised tenfold (at most settings.max_delta_escalations times) before giving up.
InitResult initialize(const ChannelSet& channels, const Partition& partition, const Scenario& scenario,
                      const SolverSettings& settings);

}  // namespace flexd
