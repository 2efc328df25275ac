#pragma once

#include "flexd/comms_metrics.hpp"
#include "flexd/scenario.hpp"
#include "flexd/sensing.hpp"

#include <vector>

namespace flexd {

struct SolverSettings {
  double inner_tol = 1e-4;  // nats, absolute change of the sum rate
  int max_inner_iters = 200;
  double multiplier_tol = 1e-10;  // relative bracket width of the multiplier searches
  int max_multiplier_iters = 100;
  double mu_cap = 1e12;  // upper limit of the radar multiplier search
  double delta = 10.0;  // UL power back-off of the initializer
  int max_delta_escalations = 6;  // x10 back-off retries before declaring outage
  bool enforce_radar = true;  // false: SCNR constraint waived (HD uplink phase)
  // Each iteration runs two alternating passes and a squared-extrapolation
  // jump (settled by a third pass), kept only if it beats the plain passes.
  bool accelerate = true;

  void validate() const;
};

struct Multipliers {
  std::vector<double> lambda_ul;  // per user, 0 for DL users
  double lambda_bs = 0.0;
  double mu = 0.0;
};

struct IterationRecord {
  int iter = 0;
  double sum_rate = 0.0;
  double scnr = 0.0;
  double bs_power = 0.0;
  double max_user_power = 0.0;
};

struct SolveResult {
  BeamformerSet beams;
  Partition partition;
  double sum_rate = 0.0;
  double scnr_achieved = 0.0;
  bool feasible = false;
  bool outage = true;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // sum rate of the initial point, then after every pass
  std::vector<IterationRecord> log;
  Multipliers multipliers;  // of the last transmit update
  int retained_steps = 0;  // passes whose update was rejected (previous iterate kept)
  double max_raw_decrease = 0.0;  // largest rate drop proposed by an update, before rejection

  static SolveResult make_outage(const Partition& partition, int num_users);
};

// Tangent lower bound of the SCNR around an anchor point V^t (with R^t = R(V^t)):
//   scnr(V) >= 2 |b0|^2 Re sum_j Tr(V_j^{tH} Theta_t V_j)
//              - |b0|^2 Tr(R(V) Y),   Y = R_t^{-1} A0 S_t A0^H R_t^{-1},
// with equality at V = V^t. The bound is concave in (V_UL, V_DL).
struct RadarMinorant {
  double beta0_sq = 0.0;
  CMatrix theta;  // Theta_t
  CMatrix y_outer;  // Y
  CMatrix clutter_curvature;  // |b0|^2 sum_m |b_m|^2 A_m^H Y A_m   (nt x nt)
  std::vector<CMatrix> ul_curvature;  // |b0|^2 H_k^H Y H_k per UL user
  std::vector<CMatrix> dl_anchor;  // |b0|^2 Theta_t V_j^t per DL user
  double constant = 0.0;  // -|b0|^2 noise Tr(Y)
};

RadarMinorant build_radar_minorant(const ChannelSet& channels, const BeamformerSet& anchor,
                                   const Partition& partition, const Scenario& scenario);
double evaluate_minorant(const RadarMinorant& minorant, const BeamformerSet& beams,
                         const Partition& partition);

// MMSE receivers.
CMatrix update_receive_ul(int k, const ChannelSet& channels, const BeamformerSet& beams,
                          const Partition& partition, const Scenario& scenario);
CMatrix update_receive_dl(int k, const ChannelSet& channels, const BeamformerSet& beams,
                          const Partition& partition, const Scenario& scenario);

// W = (I - U^H H V)^{-1}, symmetrized. Near-singular systems (condition > 1e12)
// are diagonally loaded by 1e-12 and reported through `loaded`.
CMatrix update_weight(const Link& link, const ChannelSet& channels, const BeamformerSet& beams,
                      bool* loaded = nullptr);

// UL transmit closed form for given (lambda, mu):
//   (sum_{i in U} H_k^H U_i W_i U_i^H H_k + sum_{j in D} H_jk^H U_j W_j U_j^H H_jk
//    + lambda I + mu |b0|^2 H_k^H R^{-1} A0 S A0^H R^{-1} H_k)^{-1} H_k^H U_k W_k.
CMatrix update_ul_transmit(int k, const ChannelSet& channels, const BeamformerSet& beams,
                           const RadarMinorant& minorant, double lambda, double mu,
                           const Partition& partition, const Scenario& scenario);

// DL transmit closed form for given (lambda, mu) under the tangent minorant:
//   (sum_{j in D} H_j^H U_j W_j U_j^H H_j + lambda I + mu C)^{-1}
//   (H_k^H U_k W_k + mu |b0|^2 Theta_t V_k^t),
// where C is the clutter curvature of the minorant.
CMatrix update_dl_transmit(int k, const ChannelSet& channels, const BeamformerSet& beams,
                           const RadarMinorant& minorant, double lambda, double mu,
                           const Partition& partition, const Scenario& scenario);

// Frozen-Theta DL closed form
//   (sum_j H_j^H U_j W_j U_j^H H_j + lambda I - mu |b0|^2 Theta)^{-1} H_k^H U_k W_k.
// Throws std::domain_error when the bracket is not positive definite.
CMatrix dl_transmit_frozen_theta(int k, const ChannelSet& channels, const BeamformerSet& beams,
                                 const CMatrix& theta, double lambda, double mu,
                                 const Partition& partition, const Scenario& scenario);
// 0.99 x the largest mu keeping that bracket positive definite.
double dl_mu_cap(const ChannelSet& channels, const BeamformerSet& beams, const CMatrix& theta,
                 double lambda, const Partition& partition, const Scenario& scenario);

struct TransmitUpdate {
  std::vector<CMatrix> v_ul;
  std::vector<CMatrix> v_dl;
  Multipliers multipliers;
  double minorant_value = 0.0;
  bool ok = false;  // false: no multiplier pair reaches the SCNR floor
};

// Joint transmit update: minimizes the WMMSE objective (U, W fixed) subject to
// every power budget and minorant >= scnr_min. Power multipliers come from a
// monotone root search per block; the shared radar multiplier from a monotone
// root search of the minorant value in mu.
TransmitUpdate solve_multipliers(const ChannelSet& channels, const BeamformerSet& beams,
                                 const RadarMinorant& minorant, const Partition& partition,
                                 const Scenario& scenario, const SolverSettings& settings,
                                 double mu_hint = 0.0);

// Refreshes U then W for every active link, in place.
void update_receivers_and_weights(const ChannelSet& channels, BeamformerSet& beams,
                                  const Partition& partition, const Scenario& scenario);

SolveResult inner_optimize(const ChannelSet& channels, const Partition& partition,
                           const BeamformerSet& init_beams, const SolverSettings& settings,
                           const Scenario& scenario);

}  // namespace flexd
