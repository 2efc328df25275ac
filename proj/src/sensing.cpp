#include "flexd/sensing.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <stdexcept>

namespace flexd {

CMatrix clutter_covariance(const ChannelSet& channels, const BeamformerSet& beams,
                           const Partition& partition, const Scenario& scenario) {
  CMatrix r = scenario.noise_bs * CMatrix::Identity(scenario.nr, scenario.nr);
  if (partition.num_dl() > 0) {
    const CMatrix s = dl_transmit_covariance(beams, partition, scenario.nt);
    for (std::size_t m = 0; m < scenario.clutter.size(); ++m) {
      const CMatrix a = steering_matrix(scenario.clutter[m].angle, scenario);
      r.noalias() += std::norm(channels.beta_clutter[m]) * (a * s * a.adjoint());
    }
  }
  for (int i : partition.ul_users()) {
    const CMatrix hv = channels.h_ul[i] * beams.v_ul[i];
    r.noalias() += hv * hv.adjoint();
  }
  return hermitian_part(r);
}

CMatrix theta_matrix(const CMatrix& r_cov, const CMatrix& target_mat) {
  Eigen::LLT<CMatrix> llt(r_cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("theta_matrix: R not positive definite");
  return hermitian_part(target_mat.adjoint() * llt.solve(target_mat));
}

RadarContext make_radar_context(const ChannelSet& channels, const BeamformerSet& beams,
                                const Partition& partition, const Scenario& scenario) {
  RadarContext ctx;
  ctx.a_t0 = steering_vector(scenario.target_angle, scenario.nt, scenario.spacing_tx_over_lambda());
  ctx.a_r0 = steering_vector(scenario.target_angle, scenario.nr, scenario.spacing_rx_over_lambda());
  ctx.target_mat = ctx.a_r0 * ctx.a_t0.adjoint();
  for (const auto& c : scenario.clutter) ctx.clutter_mats.push_back(steering_matrix(c.angle, scenario));
  ctx.beta0 = channels.beta0;
  ctx.beta_clutter = channels.beta_clutter;
  ctx.r_cov = clutter_covariance(channels, beams, partition, scenario);
  ctx.theta_mat = theta_matrix(ctx.r_cov, ctx.target_mat);
  return ctx;
}

double scnr(const RadarContext& radar, const BeamformerSet& beams, const Partition& partition) {
  double acc = 0.0;
  for (int j : partition.dl_users()) {
    const CMatrix& v = beams.v_dl[j];
    acc += (v.adjoint() * radar.theta_mat * v).trace().real();
  }
  return std::max(0.0, std::norm(radar.beta0) * acc);
}

double scnr(const ChannelSet& channels, const BeamformerSet& beams, const Partition& partition,
            const Scenario& scenario) {
  return scnr(make_radar_context(channels, beams, partition, scenario), beams, partition);
}

double scnr_oracle(const ChannelSet& channels, const BeamformerSet& beams,
                   const Partition& partition, const Scenario& scenario) {
  if (partition.num_dl() == 0) return 0.0;
  const CMatrix a0 = steering_matrix(scenario.target_angle, scenario);
  const CMatrix s = dl_transmit_covariance(beams, partition, scenario.nt);
  const CMatrix m = hermitian_part(std::norm(channels.beta0) * (a0 * s * a0.adjoint()));
  const CMatrix r = clutter_covariance(channels, beams, partition, scenario);
  Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> ges(m, r, Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) throw std::runtime_error("scnr_oracle: eigen solver failed");
  return std::max(0.0, ges.eigenvalues().maxCoeff());
}

CVector mvdr_beamformer(const CMatrix& r_cov, const CVector& a_r0) {
  Eigen::LLT<CMatrix> llt(r_cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("mvdr_beamformer: R not positive definite");
  CVector q = llt.solve(a_r0);
  return q / q.norm();
}

double scnr_for_filter(const CVector& q, const RadarContext& radar, const BeamformerSet& beams,
                       const Partition& partition, int nt) {
  const CMatrix s = dl_transmit_covariance(beams, partition, nt);
  const CVector g = radar.target_mat.adjoint() * q;  // A^H q
  const double signal = std::norm(radar.beta0) * (g.adjoint() * s * g)(0, 0).real();
  const double interference = (q.adjoint() * radar.r_cov * q)(0, 0).real();
  return signal / interference;
}

}  // namespace flexd
