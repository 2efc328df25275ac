#include "flexd/initializer.hpp"

#include "flexd/sensing.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace flexd {

namespace {

constexpr int kMaxRefreshes = 50;

CMatrix truncated_pinv(const CMatrix& h, int streams, int* rank) {
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(h);
  if (rank != nullptr) *rank = static_cast<int>(cod.rank());
  const CMatrix p = cod.pseudoInverse();
  return p.leftCols(std::min<Eigen::Index>(streams, p.cols()));
}

// Fits the column count to `streams` (truncate or zero-pad).
CMatrix fit_columns(const CMatrix& v, int streams) {
  CMatrix out = CMatrix::Zero(v.rows(), streams);
  const Eigen::Index n = std::min<Eigen::Index>(streams, v.cols());
  out.leftCols(n) = v.leftCols(n);
  return out;
}

// Eigenpairs of a Hermitian matrix in descending eigenvalue order, each
// eigenvector rotated so its first non-negligible entry is real positive.
void sorted_eigenpairs(const CMatrix& a, Eigen::VectorXd& values, CMatrix& vectors) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
  const Eigen::Index n = a.rows();
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      const cdouble z = vectors(r, c);
      if (std::abs(z) > 1e-12) {
        vectors.col(c) *= std::conj(z) / std::abs(z);
        break;
      }
    }
  }
}

double refresh_dl_beams(const ChannelSet& ch, BeamformerSet& beams, const Partition& part, const Scenario& sc) {
  const RadarContext radar = make_radar_context(ch, beams, part, sc);
  Eigen::VectorXd values;
  CMatrix vectors;
  sorted_eigenpairs(radar.theta_mat, values, vectors);
  const int top = std::min(sc.nr, sc.nt);
  Eigen::VectorXd lam = values.head(top).cwiseMax(0.0);
  const double per_user = sc.bs_power_max / sc.num_users;
  const double norm = lam.norm();
  if (norm > 0.0) lam *= std::sqrt(per_user) / norm;
  const CMatrix shaped = vectors.leftCols(top) * lam.cast<cdouble>().asDiagonal();
  for (int j : part.dl_users()) {
    CMatrix v = fit_columns(shaped, sc.streams_dl[j]);
    const double p = v.squaredNorm();
    if (p > 0.0) v *= std::sqrt(per_user / p);
    beams.v_dl[j] = std::move(v);
  }
  return scnr(ch, beams, part, sc);
}

}  // namespace

BeamformerSet zf_beamformers(const ChannelSet& ch, const Partition& part, const Scenario& sc, std::vector<int>* ranks) {
  BeamformerSet beams = BeamformerSet::empty(part.num_users());
  if (ranks != nullptr) ranks->assign(part.num_users(), 0);
  for (int k = 0; k < part.num_users(); ++k) {
    int rank = 0;
    if (part.is_dl(k)) {
      beams.v_dl[k] = truncated_pinv(ch.h_dl[k], sc.streams_dl[k], &rank);
    } else {
      beams.v_ul[k] = truncated_pinv(ch.h_ul[k], sc.streams_ul[k], &rank);
    }
    if (ranks != nullptr) (*ranks)[k] = rank;
  }
  return beams;
}

InitResult initialize(const ChannelSet& ch, const Partition& part, const Scenario& sc, const SolverSettings& settings) {
  const BeamformerSet zf = zf_beamformers(ch, part, sc);
  const bool has_ul = part.num_ul() > 0;
  double delta = settings.delta;
  InitResult best;

  for (int attempt = 0; attempt <= settings.max_delta_escalations; ++attempt, delta *= 10.0) {
    InitResult res;
    res.delta_used = delta;
    res.beams = zf;
    for (int k : part.ul_users()) {
      CMatrix& v = res.beams.v_ul[k];
      const double p = v.squaredNorm();
      if (p > 0.0) v *= std::sqrt(sc.user_power_max[k] / (delta * p));
    }

    double gamma = 0.0;
    if (part.num_dl() > 0) {
      for (int it = 0; it < std::min(kMaxRefreshes, settings.max_multiplier_iters); ++it) {
        const double previous = gamma;
        gamma = refresh_dl_beams(ch, res.beams, part, sc);
        res.scnr_history.push_back(gamma);
        res.iterations = it + 1;
        if (std::abs(gamma - previous) <= settings.multiplier_tol * std::max(1.0, gamma)) break;
      }
    }
    res.feasible = !settings.enforce_radar || gamma >= sc.scnr_min;
    res.scnr = gamma;
    if (res.feasible || !has_ul || attempt == settings.max_delta_escalations) return res;
    best = std::move(res);
  }
  return best;
}

}  // namespace flexd
