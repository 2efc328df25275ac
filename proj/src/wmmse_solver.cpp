#include "flexd/wmmse_solver.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace flexd {

void SolverSettings::validate() const {
  if (!(inner_tol > 0.0)) throw std::invalid_argument("solver: inner_tol must be > 0");
  if (max_inner_iters < 1) throw std::invalid_argument("solver: max_inner_iters must be >= 1");
  if (!(multiplier_tol > 0.0)) throw std::invalid_argument("solver: multiplier_tol must be > 0");
  if (max_multiplier_iters < 1) throw std::invalid_argument("solver: max_multiplier_iters must be >= 1");
  if (!(mu_cap > 0.0)) throw std::invalid_argument("solver: mu_cap must be > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("solver: delta must be > 0");
  if (max_delta_escalations < 0) throw std::invalid_argument("solver: max_delta_escalations must be >= 0");
}

SolveResult SolveResult::make_outage(const Partition& partition, int num_users) {
  SolveResult r;
  r.partition = partition;
  r.beams = BeamformerSet::empty(num_users);
  r.feasible = false;
  r.outage = true;
  r.multipliers.lambda_ul.assign(static_cast<std::size_t>(num_users), 0.0);
  return r;
}

namespace {

// min Tr(V^H M V) - 2 Re Tr(V^H N)  s.t.  ||V||_F^2 <= budget, with M Hermitian PSD.
// The minimizer for a multiplier lambda is (M + lambda I)^+ N; the power is
// evaluated in the eigenbasis of M so the scalar search is cheap.
class QuadraticBlock {
 public:
  QuadraticBlock(const CMatrix& m, const CMatrix& rhs) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m));
    eigvals_ = es.eigenvalues().cwiseMax(0.0);
    eigvecs_ = es.eigenvectors();
    projected_ = eigvecs_.adjoint() * rhs;
    row_energy_ = projected_.rowwise().squaredNorm();
    total_energy_ = row_energy_.sum();
    const double dmax = eigvals_.size() > 0 ? eigvals_.maxCoeff() : 0.0;
    null_floor_ = 1e-12 * dmax;
    energy_floor_ = 1e-20 * total_energy_;
  }

  double total_energy() const { return total_energy_; }

  double power(double lambda) const {
    double p = 0.0;
    for (Eigen::Index i = 0; i < eigvals_.size(); ++i) {
      const double denom = eigvals_(i) + lambda;
      if (denom <= null_floor_) {
        if (row_energy_(i) > energy_floor_) return std::numeric_limits<double>::infinity();
        continue;
      }
      p += row_energy_(i) / (denom * denom);
    }
    return p;
  }

  CMatrix solve(double lambda) const {
    CMatrix scaled = projected_;
    for (Eigen::Index i = 0; i < eigvals_.size(); ++i) {
      const double denom = eigvals_(i) + lambda;
      scaled.row(i) *= denom <= null_floor_ ? 0.0 : 1.0 / denom;
    }
    return eigvecs_ * scaled;
  }

 private:
  Eigen::VectorXd eigvals_;
  CMatrix eigvecs_;
  CMatrix projected_;
  Eigen::VectorXd row_energy_;
  double total_energy_ = 0.0;
  double null_floor_ = 0.0;
  double energy_floor_ = 0.0;
};

struct RelativeBracket {
  double tol;
  bool operator()(double a, double b) const { return std::abs(b - a) <= tol * std::max(std::abs(a), std::abs(b)); }
};

// Smallest lambda >= 0 with power(lambda) <= budget.
double power_multiplier(const QuadraticBlock& block, double budget, const SolverSettings& settings) {
  if (block.power(0.0) <= budget) return 0.0;
  // power(lambda) <= E / lambda^2, so this end is on the feasible side.
  const double hi = std::sqrt(block.total_energy() / budget) * (1.0 + 1e-12) + 1e-300;
  // Secular form 1/sqrt(p) - 1/sqrt(P) is increasing and close to linear.
  auto phi = [&](double lam) {
    const double p = block.power(lam);
    return (std::isinf(p) ? 0.0 : 1.0 / std::sqrt(p)) - 1.0 / std::sqrt(budget);
  };
  const double f_lo = phi(0.0);
  const double f_hi = phi(hi);
  if (f_hi <= 0.0) return hi;
  std::uintmax_t iters = static_cast<std::uintmax_t>(std::max(settings.max_multiplier_iters, 60));
  const auto bracket = boost::math::tools::toms748_solve(phi, 0.0, hi, f_lo, f_hi, RelativeBracket{1e-15}, iters);
  double lam = bracket.second;
  while (block.power(lam) > budget) lam = std::nextafter(lam * (1.0 + 1e-15), std::numeric_limits<double>::infinity());
  return lam;
}

CMatrix clip_power(CMatrix v, double budget) {
  const double p = v.squaredNorm();
  if (p > budget) v *= std::sqrt(budget / p);
  return v;
}

// Quadratic and linear terms of the transmit update that do not depend on mu.
struct TransmitSystem {
  std::vector<CMatrix> ul_base;  // per UL user
  std::vector<CMatrix> ul_rhs;
  CMatrix dl_base;
  std::vector<CMatrix> dl_rhs;  // per DL user
};

TransmitSystem build_transmit_system(const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                                     const Scenario& sc) {
  const int k_users = part.num_users();
  const auto ul = part.ul_users();
  const auto dl = part.dl_users();
  TransmitSystem sys;
  sys.ul_base.resize(k_users);
  sys.ul_rhs.resize(k_users);
  sys.dl_rhs.resize(k_users);

  // U_i W_i U_i^H at the BS (UL) and at each DL user.
  CMatrix bs_weighted = CMatrix::Zero(sc.nr, sc.nr);
  for (int i : ul) bs_weighted.noalias() += b.u_ul[i] * b.w_ul[i] * b.u_ul[i].adjoint();
  std::vector<CMatrix> user_weighted(k_users);
  for (int j : dl) user_weighted[j] = b.u_dl[j] * b.w_dl[j] * b.u_dl[j].adjoint();

  for (int k : ul) {
    const CMatrix& h = ch.h_ul[k];
    CMatrix m = h.adjoint() * bs_weighted * h;
    for (int j : dl) m.noalias() += ch.h_uu[j][k].adjoint() * user_weighted[j] * ch.h_uu[j][k];
    sys.ul_base[k] = hermitian_part(m);
    sys.ul_rhs[k] = h.adjoint() * b.u_ul[k] * b.w_ul[k];
  }
  sys.dl_base = CMatrix::Zero(sc.nt, sc.nt);
  for (int j : dl) {
    sys.dl_base.noalias() += ch.h_dl[j].adjoint() * user_weighted[j] * ch.h_dl[j];
    sys.dl_rhs[j] = ch.h_dl[j].adjoint() * b.u_dl[j] * b.w_dl[j];
  }
  sys.dl_base = hermitian_part(sys.dl_base);
  return sys;
}

double minorant_value(const RadarMinorant& mn, const std::vector<CMatrix>& v_ul,
                      const std::vector<CMatrix>& v_dl, const Partition& part) {
  double value = mn.constant;
  for (int j : part.dl_users()) {
    const CMatrix& v = v_dl[j];
    value += 2.0 * (mn.dl_anchor[j].adjoint() * v).trace().real();
    value -= (v.adjoint() * mn.clutter_curvature * v).trace().real();
  }
  for (int i : part.ul_users()) {
    const CMatrix& v = v_ul[i];
    value -= (v.adjoint() * mn.ul_curvature[i] * v).trace().real();
  }
  return value;
}

// Per-block solution of the Lagrangian for a fixed radar multiplier.
TransmitUpdate solve_for_mu(const TransmitSystem& sys, const RadarMinorant* mn, double mu, const Partition& part,
                            const Scenario& sc, const SolverSettings& settings) {
  const int k_users = part.num_users();
  TransmitUpdate out;
  out.v_ul.resize(k_users);
  out.v_dl.resize(k_users);
  out.multipliers.lambda_ul.assign(k_users, 0.0);
  out.multipliers.mu = mu;
  const bool radar = mn != nullptr && mu > 0.0;

  for (int k : part.ul_users()) {
    const CMatrix m = radar ? CMatrix(sys.ul_base[k] + mu * mn->ul_curvature[k]) : sys.ul_base[k];
    const QuadraticBlock block(m, sys.ul_rhs[k]);
    const double lam = power_multiplier(block, sc.user_power_max[k], settings);
    out.multipliers.lambda_ul[k] = lam;
    out.v_ul[k] = clip_power(block.solve(lam), sc.user_power_max[k]);
  }

  const auto dl = part.dl_users();
  if (!dl.empty()) {
    Eigen::Index cols = 0;
    for (int j : dl) cols += sys.dl_rhs[j].cols();
    CMatrix rhs(sc.nt, cols);
    Eigen::Index c = 0;
    for (int j : dl) {
      const Eigen::Index w = sys.dl_rhs[j].cols();
      rhs.middleCols(c, w) = radar ? CMatrix(sys.dl_rhs[j] + mu * mn->dl_anchor[j]) : sys.dl_rhs[j];
      c += w;
    }
    const CMatrix m = radar ? CMatrix(sys.dl_base + mu * mn->clutter_curvature) : sys.dl_base;
    const QuadraticBlock block(m, rhs);
    const double lam = power_multiplier(block, sc.bs_power_max, settings);
    out.multipliers.lambda_bs = lam;
    const CMatrix stacked = clip_power(block.solve(lam), sc.bs_power_max);
    c = 0;
    for (int j : dl) {
      const Eigen::Index w = sys.dl_rhs[j].cols();
      out.v_dl[j] = stacked.middleCols(c, w);
      c += w;
    }
  }
  out.minorant_value = mn != nullptr ? minorant_value(*mn, out.v_ul, out.v_dl, part) : 0.0;
  out.ok = true;
  return out;
}

CMatrix receive_mmse(const CMatrix& omega_total, const CMatrix& signal) {
  Eigen::LLT<CMatrix> llt(omega_total);
  return llt.solve(signal);
}

}  // namespace

RadarMinorant build_radar_minorant(const ChannelSet& ch, const BeamformerSet& anchor, const Partition& part,
                                   const Scenario& sc) {
  const RadarContext radar = make_radar_context(ch, anchor, part, sc);
  RadarMinorant mn;
  mn.beta0_sq = std::norm(ch.beta0);
  mn.theta = radar.theta_mat;

  const CMatrix s = dl_transmit_covariance(anchor, part, sc.nt);
  Eigen::LLT<CMatrix> llt(radar.r_cov);
  const CMatrix r_inv_a = llt.solve(radar.target_mat);  // R^{-1} A0
  mn.y_outer = hermitian_part(r_inv_a * s * r_inv_a.adjoint());

  mn.clutter_curvature = CMatrix::Zero(sc.nt, sc.nt);
  for (std::size_t m = 0; m < radar.clutter_mats.size(); ++m) {
    const CMatrix& a = radar.clutter_mats[m];
    mn.clutter_curvature.noalias() += std::norm(ch.beta_clutter[m]) * (a.adjoint() * mn.y_outer * a);
  }
  mn.clutter_curvature = hermitian_part(mn.beta0_sq * mn.clutter_curvature);

  const int k_users = part.num_users();
  mn.ul_curvature.resize(k_users);
  mn.dl_anchor.resize(k_users);
  for (int i : part.ul_users()) {
    const CMatrix& h = ch.h_ul[i];
    mn.ul_curvature[i] = hermitian_part(mn.beta0_sq * (h.adjoint() * mn.y_outer * h));
  }
  for (int j : part.dl_users()) mn.dl_anchor[j] = mn.beta0_sq * (mn.theta * anchor.v_dl[j]);
  mn.constant = -mn.beta0_sq * sc.noise_bs * mn.y_outer.trace().real();
  return mn;
}

double evaluate_minorant(const RadarMinorant& minorant, const BeamformerSet& beams, const Partition& partition) {
  return minorant_value(minorant, beams.v_ul, beams.v_dl, partition);
}

CMatrix update_receive_ul(int k, const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                          const Scenario& sc) {
  if (part.is_dl(k)) throw std::invalid_argument("update_receive_ul: user is in the DL set");
  const CMatrix hv = ch.h_ul[k] * b.v_ul[k];
  CMatrix omega = interference_covariance({Direction::kUplink, k}, ch, b, part, sc);
  omega.noalias() += hv * hv.adjoint();
  return receive_mmse(hermitian_part(omega), hv);
}

CMatrix update_receive_dl(int k, const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                          const Scenario& sc) {
  if (!part.is_dl(k)) throw std::invalid_argument("update_receive_dl: user is in the UL set");
  const CMatrix hv = ch.h_dl[k] * b.v_dl[k];
  CMatrix omega = interference_covariance({Direction::kDownlink, k}, ch, b, part, sc);
  omega.noalias() += hv * hv.adjoint();
  return receive_mmse(hermitian_part(omega), hv);
}

CMatrix update_weight(const Link& link, const ChannelSet& ch, const BeamformerSet& b, bool* loaded) {
  const bool ul = link.direction == Direction::kUplink;
  const CMatrix& u = ul ? b.u_ul[link.user] : b.u_dl[link.user];
  const CMatrix& h = link_channel(link, ch);
  const CMatrix& v = link_transmit(link, b);
  const Eigen::Index t = v.cols();
  CMatrix a = CMatrix::Identity(t, t) - u.adjoint() * h * v;
  Eigen::PartialPivLU<CMatrix> lu(a);
  const bool near_singular = lu.rcond() < 1e-12;
  if (near_singular) {
    a += 1e-12 * CMatrix::Identity(t, t);
    lu.compute(a);
  }
  if (loaded != nullptr) *loaded = near_singular;
  return hermitian_part(lu.inverse());
}

void update_receivers_and_weights(const ChannelSet& ch, BeamformerSet& b, const Partition& part,
                                  const Scenario& sc) {
  for (int k = 0; k < part.num_users(); ++k) {
    if (part.is_dl(k)) {
      b.u_dl[k] = update_receive_dl(k, ch, b, part, sc);
      b.u_ul[k].resize(0, 0);
    } else {
      b.u_ul[k] = update_receive_ul(k, ch, b, part, sc);
      b.u_dl[k].resize(0, 0);
    }
  }
  for (int k = 0; k < part.num_users(); ++k) {
    if (part.is_dl(k)) {
      b.w_dl[k] = update_weight({Direction::kDownlink, k}, ch, b);
      b.w_ul[k].resize(0, 0);
    } else {
      b.w_ul[k] = update_weight({Direction::kUplink, k}, ch, b);
      b.w_dl[k].resize(0, 0);
    }
  }
}

CMatrix update_ul_transmit(int k, const ChannelSet& ch, const BeamformerSet& b, const RadarMinorant& mn,
                           double lambda, double mu, const Partition& part, const Scenario& sc) {
  if (part.is_dl(k)) throw std::invalid_argument("update_ul_transmit: user is in the DL set");
  if (lambda < 0.0 || mu < 0.0) throw std::invalid_argument("update_ul_transmit: multipliers must be >= 0");
  const TransmitSystem sys = build_transmit_system(ch, b, part, sc);
  CMatrix m = sys.ul_base[k] + lambda * CMatrix::Identity(sys.ul_base[k].rows(), sys.ul_base[k].cols());
  if (mu > 0.0) m += mu * mn.ul_curvature[k];
  Eigen::LDLT<CMatrix> ldlt(hermitian_part(m));
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15)
    throw std::domain_error("update_ul_transmit: singular bracket, a positive multiplier is needed");
  return ldlt.solve(sys.ul_rhs[k]);
}

CMatrix update_dl_transmit(int k, const ChannelSet& ch, const BeamformerSet& b, const RadarMinorant& mn,
                           double lambda, double mu, const Partition& part, const Scenario& sc) {
  if (!part.is_dl(k)) throw std::invalid_argument("update_dl_transmit: user is in the UL set");
  if (lambda < 0.0 || mu < 0.0) throw std::invalid_argument("update_dl_transmit: multipliers must be >= 0");
  const TransmitSystem sys = build_transmit_system(ch, b, part, sc);
  CMatrix m = sys.dl_base + lambda * CMatrix::Identity(sc.nt, sc.nt);
  CMatrix rhs = sys.dl_rhs[k];
  if (mu > 0.0) {
    m += mu * mn.clutter_curvature;
    rhs += mu * mn.dl_anchor[k];
  }
  Eigen::LDLT<CMatrix> ldlt(hermitian_part(m));
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-15)
    throw std::domain_error("update_dl_transmit: singular bracket, a positive multiplier is needed");
  return ldlt.solve(rhs);
}

namespace {

CMatrix frozen_bracket(const ChannelSet& ch, const BeamformerSet& b, const Partition& part, const Scenario& sc,
                       double lambda) {
  CMatrix m = lambda * CMatrix::Identity(sc.nt, sc.nt);
  for (int j : part.dl_users()) {
    const CMatrix g = ch.h_dl[j].adjoint() * b.u_dl[j];
    m.noalias() += g * b.w_dl[j] * g.adjoint();
  }
  return hermitian_part(m);
}

}  // namespace

CMatrix dl_transmit_frozen_theta(int k, const ChannelSet& ch, const BeamformerSet& b, const CMatrix& theta,
                                 double lambda, double mu, const Partition& part, const Scenario& sc) {
  if (!part.is_dl(k)) throw std::invalid_argument("dl_transmit_frozen_theta: user is in the UL set");
  const CMatrix m = hermitian_part(frozen_bracket(ch, b, part, sc, lambda) - mu * std::norm(ch.beta0) * theta);
  Eigen::LLT<CMatrix> llt(m);
  if (llt.info() != Eigen::Success) throw std::domain_error("dl_transmit_frozen_theta: bracket not positive definite");
  return llt.solve(ch.h_dl[k].adjoint() * b.u_dl[k] * b.w_dl[k]);
}

double dl_mu_cap(const ChannelSet& ch, const BeamformerSet& b, const CMatrix& theta, double lambda,
                 const Partition& part, const Scenario& sc) {
  // Largest mu with B - mu T > 0 is 1 / lambda_max(B^{-1/2} T B^{-1/2}).
  const CMatrix bracket = frozen_bracket(ch, b, part, sc, lambda);
  const CMatrix t = hermitian_part(std::norm(ch.beta0) * theta);
  Eigen::GeneralizedSelfAdjointEigenSolver<CMatrix> ges(t, bracket, Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) return 0.0;
  const double top = ges.eigenvalues().maxCoeff();
  if (!(top > 0.0)) return std::numeric_limits<double>::infinity();
  return 0.99 / top;
}

TransmitUpdate solve_multipliers(const ChannelSet& ch, const BeamformerSet& b, const RadarMinorant& mn,
                                 const Partition& part, const Scenario& sc, const SolverSettings& settings,
                                 double mu_hint) {
  const TransmitSystem sys = build_transmit_system(ch, b, part, sc);
  const bool radar = settings.enforce_radar;
  const RadarMinorant* mnp = radar ? &mn : nullptr;
  TransmitUpdate base = solve_for_mu(sys, mnp, 0.0, part, sc, settings);
  if (!radar || base.minorant_value >= sc.scnr_min) return base;
  if (part.num_dl() == 0) {
    base.ok = false;
    return base;
  }

  const double gamma = sc.scnr_min;
  auto excess = [&](double mu) { return solve_for_mu(sys, mnp, mu, part, sc, settings).minorant_value - gamma; };

  double lo = 0.0;
  double hi = mu_hint > 0.0 ? mu_hint : 1.0 / gamma;
  double f_hi = excess(hi);
  int growth = 0;
  while (f_hi < 0.0) {
    lo = hi;
    hi *= 8.0;
    if (hi > settings.mu_cap || ++growth > settings.max_multiplier_iters) {
      base.ok = false;
      return base;
    }
    f_hi = excess(hi);
  }
  const double f_lo = lo == 0.0 ? base.minorant_value - gamma : excess(lo);
  double mu = hi;
  if (f_hi > 0.0) {
    std::uintmax_t iters = static_cast<std::uintmax_t>(settings.max_multiplier_iters);
    const auto bracket =
        boost::math::tools::toms748_solve(excess, lo, hi, f_lo, f_hi, RelativeBracket{settings.multiplier_tol}, iters);
    mu = bracket.second;
  }
  TransmitUpdate out = solve_for_mu(sys, mnp, mu, part, sc, settings);
  out.ok = out.minorant_value >= gamma;
  return out;
}

namespace {

struct PassResult {
  BeamformerSet beams;
  Multipliers multipliers;
  double rate = 0.0;
  bool ok = false;
};

// One pass of the alternating update from a feasible anchor: receivers,
// weights, radar minorant, multiplier search, transmit update.
PassResult alternating_pass(const ChannelSet& ch, const BeamformerSet& from, const Partition& part,
                            const Scenario& sc, const SolverSettings& settings, double mu_hint) {
  PassResult out;
  out.beams = from;
  update_receivers_and_weights(ch, out.beams, part, sc);
  RadarMinorant minorant;
  if (settings.enforce_radar) minorant = build_radar_minorant(ch, out.beams, part, sc);
  TransmitUpdate step = solve_multipliers(ch, out.beams, minorant, part, sc, settings, mu_hint);
  if (!step.ok) return out;
  out.beams.v_ul = std::move(step.v_ul);
  out.beams.v_dl = std::move(step.v_dl);
  out.multipliers = std::move(step.multipliers);
  out.rate = sum_rate(ch, out.beams, part, sc);
  out.ok = true;
  return out;
}

// a + ca * (b - a) + cb * (c - 2 b + a) on the transmit matrices only.
BeamformerSet extrapolate(const BeamformerSet& a, const BeamformerSet& b, const BeamformerSet& c, double ca,
                          double cb, const Partition& part) {
  BeamformerSet out = a;
  for (int k = 0; k < part.num_users(); ++k) {
    if (part.is_dl(k)) {
      out.v_dl[k] = a.v_dl[k] + ca * (b.v_dl[k] - a.v_dl[k]) + cb * (c.v_dl[k] - 2.0 * b.v_dl[k] + a.v_dl[k]);
    } else {
      out.v_ul[k] = a.v_ul[k] + ca * (b.v_ul[k] - a.v_ul[k]) + cb * (c.v_ul[k] - 2.0 * b.v_ul[k] + a.v_ul[k]);
    }
  }
  return out;
}

double transmit_distance_sq(const BeamformerSet& a, const BeamformerSet& b, const Partition& part) {
  double d = 0.0;
  for (int k = 0; k < part.num_users(); ++k)
    d += part.is_dl(k) ? (a.v_dl[k] - b.v_dl[k]).squaredNorm() : (a.v_ul[k] - b.v_ul[k]).squaredNorm();
  return d;
}

double second_difference_sq(const BeamformerSet& a, const BeamformerSet& b, const BeamformerSet& c,
                            const Partition& part) {
  double d = 0.0;
  for (int k = 0; k < part.num_users(); ++k)
    d += part.is_dl(k) ? (c.v_dl[k] - 2.0 * b.v_dl[k] + a.v_dl[k]).squaredNorm()
                       : (c.v_ul[k] - 2.0 * b.v_ul[k] + a.v_ul[k]).squaredNorm();
  return d;
}

// Pulls the transmit matrices back onto the power caps by scaling.
void scale_to_power_caps(BeamformerSet& b, const Partition& part, const Scenario& sc) {
  for (int k : part.ul_users()) {
    const double p = b.v_ul[k].squaredNorm();
    if (p > sc.user_power_max[k]) b.v_ul[k] *= std::sqrt(sc.user_power_max[k] / p);
  }
  const double p_bs = bs_power(b, part);
  if (p_bs > sc.bs_power_max)
    for (int j : part.dl_users()) b.v_dl[j] *= std::sqrt(sc.bs_power_max / p_bs);
}

}  // namespace

SolveResult inner_optimize(const ChannelSet& ch, const Partition& part, const BeamformerSet& init,
                           const SolverSettings& settings, const Scenario& sc) {
  settings.validate();
  init.check_transmit(part, sc);
  const int k_users = part.num_users();
  SolveResult res = SolveResult::make_outage(part, k_users);

  BeamformerSet beams = init;
  const bool radar = settings.enforce_radar;
  const double init_scnr = scnr(ch, beams, part, sc);
  if (radar && init_scnr < sc.scnr_min) return res;

  auto record = [&](int iter, double rate) {
    IterationRecord rec;
    rec.iter = iter;
    rec.sum_rate = rate;
    rec.scnr = scnr(ch, beams, part, sc);
    rec.bs_power = bs_power(beams, part);
    for (int i : part.ul_users()) rec.max_user_power = std::max(rec.max_user_power, user_power(beams, i));
    res.log.push_back(rec);
  };
  auto check_pass = [&](const PassResult& p, double anchor_rate, int it) {
    const double drop = anchor_rate - p.rate;
    res.max_raw_decrease = std::max(res.max_raw_decrease, drop);
    if (drop > 1e-6) {
      std::ostringstream os;
      os << "inner_optimize: sum rate decreased by " << drop << " nats at pass " << it << " (" << part.to_string()
         << ")";
      throw InvariantViolation(os.str());
    }
    if (radar) {
      const double s = scnr(ch, p.beams, part, sc);
      if (s < sc.scnr_min * (1.0 - 1e-9)) {
        std::ostringstream os;
        os << "inner_optimize: update left the SCNR region (" << s << " < " << sc.scnr_min << ")";
        throw InvariantViolation(os.str());
      }
    }
  };

  double rate = sum_rate(ch, beams, part, sc);
  res.objective_trace.push_back(rate);
  record(0, rate);

  double mu_hint = 0.0;
  for (int it = 1; it <= settings.max_inner_iters; ++it) {
    PassResult first = alternating_pass(ch, beams, part, sc, settings, mu_hint);
    if (!first.ok) {
      ++res.retained_steps;
      break;
    }
    check_pass(first, rate, it);
    mu_hint = first.multipliers.mu;
    PassResult best = std::move(first);

    if (settings.accelerate) {
      PassResult second = alternating_pass(ch, best.beams, part, sc, settings, mu_hint);
      if (second.ok) {
        check_pass(second, best.rate, it);
        mu_hint = second.multipliers.mu;
        const double r2 = transmit_distance_sq(beams, best.beams, part);
        const double v2 = second_difference_sq(beams, best.beams, second.beams, part);
        const BeamformerSet anchor = beams;
        const BeamformerSet one = best.beams;
        const BeamformerSet two = second.beams;
        best = std::move(second);
        // Squared extrapolation with step a <= -1, halved toward -1 on failure.
        double a = v2 > 0.0 ? -std::sqrt(r2 / v2) : -1.0;
        for (int attempt = 0; attempt < 4 && a < -1.0 - 1e-12; ++attempt, a = 0.5 * (a - 1.0)) {
          BeamformerSet jump = extrapolate(anchor, one, two, -2.0 * a, a * a, part);
          scale_to_power_caps(jump, part, sc);
          if (radar && !(scnr(ch, jump, part, sc) >= sc.scnr_min)) continue;
          PassResult settled = alternating_pass(ch, jump, part, sc, settings, mu_hint);
          if (!settled.ok || !(settled.rate > best.rate)) continue;
          if (radar && scnr(ch, settled.beams, part, sc) < sc.scnr_min * (1.0 - 1e-9)) continue;
          mu_hint = settled.multipliers.mu;
          best = std::move(settled);
          break;
        }
      }
    }

    if (best.rate < rate) {
      // Round-off level drop: the previous iterate is already stationary.
      ++res.retained_steps;
      res.converged = true;
      break;
    }

    beams.v_ul = std::move(best.beams.v_ul);
    beams.v_dl = std::move(best.beams.v_dl);
    const double previous = rate;
    rate = best.rate;
    res.iterations = it;
    res.multipliers = std::move(best.multipliers);
    res.objective_trace.push_back(rate);
    record(it, rate);
    if (std::abs(rate - previous) <= settings.inner_tol) {
      res.converged = true;
      break;
    }
  }
  if (res.multipliers.lambda_ul.empty()) res.multipliers.lambda_ul.assign(k_users, 0.0);

  update_receivers_and_weights(ch, beams, part, sc);
  res.beams = std::move(beams);
  res.sum_rate = rate;
  res.scnr_achieved = scnr(ch, res.beams, part, sc);
  res.feasible = true;
  res.outage = false;
  return res;
}

}  // namespace flexd
