#pragma once

#include "flexd/comms_metrics.hpp"
#include "flexd/scenario.hpp"

#include <vector>

namespace flexd {

// Radar-side quantities for one set of beams.
struct RadarContext {
  CVector a_t0;  // transmit steering at the target
  CVector a_r0;  // receive steering at the target
  CMatrix target_mat;  // A(theta0) = a_r0 a_t0^H
  std::vector<CMatrix> clutter_mats;  // A(theta_m)
  cdouble beta0;
  std::vector<cdouble> beta_clutter;
  CMatrix r_cov;  // interference-plus-clutter covariance (nr x nr)
  CMatrix theta_mat;  // A^H(theta0) R^{-1} A(theta0) (nt x nt)
};

// R = sum_m |beta_m|^2 A_m S A_m^H + sum_{i in U} H_i V_i V_i^H H_i^H + noise I.
CMatrix clutter_covariance(const ChannelSet& channels, const BeamformerSet& beams,
                           const Partition& partition, const Scenario& scenario);

// Theta = A^H R^{-1} A via a Cholesky solve.
CMatrix theta_matrix(const CMatrix& r_cov, const CMatrix& target_mat);

RadarContext make_radar_context(const ChannelSet& channels, const BeamformerSet& beams,
                                const Partition& partition, const Scenario& scenario);

// MVDR output SCNR: |beta0|^2 sum_j Tr(V_j V_j^H Theta).
double scnr(const ChannelSet& channels, const BeamformerSet& beams, const Partition& partition,
            const Scenario& scenario);
double scnr(const RadarContext& radar, const BeamformerSet& beams, const Partition& partition);

// Largest generalized eigenvalue of (|beta0|^2 A S A^H, R): the SCNR of the best
// receive filter, computed without the MVDR closed form.
double scnr_oracle(const ChannelSet& channels, const BeamformerSet& beams,
                   const Partition& partition, const Scenario& scenario);

// Unit-norm q proportional to R^{-1} a_r0.
CVector mvdr_beamformer(const CMatrix& r_cov, const CVector& a_r0);

// SCNR seen through an arbitrary receive filter q.
double scnr_for_filter(const CVector& q, const RadarContext& radar, const BeamformerSet& beams,
                       const Partition& partition, int nt);

}  // namespace flexd
