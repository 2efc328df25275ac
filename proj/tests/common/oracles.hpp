#pragma once

// Reference computations for the tests. Everything here is written directly
// from the matrix formulas with explicit inverses and determinants, and does
// not call into the library's metric or solver code.

#include "flexd/comms_metrics.hpp"
#include "flexd/scenario.hpp"
#include "flexd/wmmse_solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using flexd::BeamformerSet;
using flexd::ChannelSet;
using flexd::CMatrix;
using flexd::CVector;
using flexd::Partition;
using flexd::Scenario;
using flexd::cdouble;

inline CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5) * scale);
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = cdouble(n(rng), n(rng));
  return m;
}

inline CMatrix random_unitary(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(n, n, rng));
  return qr.householderQ() * CMatrix::Identity(n, n);
}

// Unit-variance channels and reflection coefficients for a scenario with
// unit powers and noise `noise`; numerically friendlier than the path-loss
// draws for formula checks.
inline Scenario unit_scenario(int k, double noise = 0.1) {
  Scenario sc = Scenario::with_defaults(k);
  sc.bs_power_max = 1.0;
  for (auto& p : sc.user_power_max) p = 1.0;
  sc.noise_bs = noise;
  for (auto& n : sc.noise_user) n = noise;
  sc.scnr_min = 1e-3;
  return sc;
}

inline ChannelSet random_channels(const Scenario& sc, std::mt19937_64& rng) {
  ChannelSet ch;
  const int k = sc.num_users;
  ch.h_ul.resize(k);
  ch.h_dl.resize(k);
  ch.h_uu.assign(k, std::vector<CMatrix>(k));
  ch.user_positions.assign(k, Eigen::Vector2d::Zero());
  for (int i = 0; i < k; ++i) {
    ch.h_ul[i] = random_matrix(sc.nr, sc.user_antennas[i], rng);
    ch.h_dl[i] = random_matrix(sc.user_antennas[i], sc.nt, rng);
  }
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      if (i != j) ch.h_uu[j][i] = random_matrix(sc.user_antennas[j], sc.user_antennas[i], rng, 0.3);
  ch.beta0 = random_matrix(1, 1, rng)(0, 0);
  for (std::size_t m = 0; m < sc.clutter.size(); ++m) ch.beta_clutter.push_back(random_matrix(1, 1, rng)(0, 0));
  return ch;
}

inline Partition random_partition(int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> mask(0, (1u << k) - 1);
  return Partition(k, mask(rng));
}

// Random transmit matrices for the partition, each scaled to a random
// fraction of its power budget (the BS budget is split over DL users).
inline BeamformerSet random_transmit(const Partition& part, const Scenario& sc, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> frac(0.2, 1.0);
  BeamformerSet b = BeamformerSet::empty(sc.num_users);
  const int nd = std::max(part.num_dl(), 1);
  for (int k = 0; k < sc.num_users; ++k) {
    if (part.is_dl(k)) {
      CMatrix v = random_matrix(sc.nt, sc.streams_dl[k], rng);
      b.v_dl[k] = v * std::sqrt(frac(rng) * sc.bs_power_max / nd / v.squaredNorm());
    } else {
      CMatrix v = random_matrix(sc.user_antennas[k], sc.streams_ul[k], rng);
      b.v_ul[k] = v * std::sqrt(frac(rng) * sc.user_power_max[k] / v.squaredNorm());
    }
  }
  return b;
}

inline double log_det(const CMatrix& a) { return std::log(std::abs(a.determinant())); }

// ln det(I + S S^H Omega^{-1}).
inline double link_rate(const CMatrix& s, const CMatrix& omega) {
  const CMatrix m = CMatrix::Identity(omega.rows(), omega.cols()) + s * s.adjoint() * omega.inverse();
  return std::log(std::abs(m.determinant()));
}

inline CMatrix ul_interference(int k, const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                               const Scenario& sc) {
  CMatrix omega = sc.noise_bs * CMatrix::Identity(sc.nr, sc.nr);
  for (int i = 0; i < sc.num_users; ++i)
    if (!part.is_dl(i) && i != k) omega += ch.h_ul[i] * b.v_ul[i] * b.v_ul[i].adjoint() * ch.h_ul[i].adjoint();
  return omega;
}

inline CMatrix dl_interference(int k, const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                               const Scenario& sc) {
  const int l = sc.user_antennas[k];
  CMatrix omega = sc.noise_user[k] * CMatrix::Identity(l, l);
  for (int j = 0; j < sc.num_users; ++j) {
    if (j == k) continue;
    if (part.is_dl(j)) {
      omega += ch.h_dl[k] * b.v_dl[j] * b.v_dl[j].adjoint() * ch.h_dl[k].adjoint();
    } else {
      omega += ch.h_uu[k][j] * b.v_ul[j] * b.v_ul[j].adjoint() * ch.h_uu[k][j].adjoint();
    }
  }
  return omega;
}

inline double uplink_rate(int k, const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                          const Scenario& sc) {
  return link_rate(ch.h_ul[k] * b.v_ul[k], ul_interference(k, ch, b, part, sc));
}

inline double downlink_rate(int k, const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                            const Scenario& sc) {
  return link_rate(ch.h_dl[k] * b.v_dl[k], dl_interference(k, ch, b, part, sc));
}

inline double sum_rate(const ChannelSet& ch, const BeamformerSet& b, const Partition& part, const Scenario& sc) {
  double r = 0.0;
  for (int k = 0; k < sc.num_users; ++k)
    r += part.is_dl(k) ? oracle::downlink_rate(k, ch, b, part, sc) : oracle::uplink_rate(k, ch, b, part, sc);
  return r;
}

inline CVector steering(double theta, int n, double d_over_lambda) {
  CVector a(n);
  for (int i = 0; i < n; ++i)
    a(i) = std::polar(1.0 / std::sqrt(double(n)), 2.0 * flexd::kPi * d_over_lambda * i * std::sin(theta));
  return a;
}

inline CMatrix steering_outer(double theta, const Scenario& sc) {
  return steering(theta, sc.nr, sc.spacing_rx / sc.wavelength) *
         steering(theta, sc.nt, sc.spacing_tx / sc.wavelength).adjoint();
}

inline CMatrix dl_covariance(const BeamformerSet& b, const Partition& part, const Scenario& sc) {
  CMatrix s = CMatrix::Zero(sc.nt, sc.nt);
  for (int j = 0; j < sc.num_users; ++j)
    if (part.is_dl(j)) s += b.v_dl[j] * b.v_dl[j].adjoint();
  return s;
}

inline CMatrix clutter_covariance(const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                                  const Scenario& sc) {
  const CMatrix s = dl_covariance(b, part, sc);
  CMatrix r = sc.noise_bs * CMatrix::Identity(sc.nr, sc.nr);
  for (std::size_t m = 0; m < sc.clutter.size(); ++m) {
    const CMatrix a = steering_outer(sc.clutter[m].angle, sc);
    r += std::norm(ch.beta_clutter[m]) * a * s * a.adjoint();
  }
  for (int i = 0; i < sc.num_users; ++i)
    if (!part.is_dl(i)) r += ch.h_ul[i] * b.v_ul[i] * b.v_ul[i].adjoint() * ch.h_ul[i].adjoint();
  return r;
}

// max_q q^H M q / q^H R q as the largest eigenvalue of R^{-1} M.
inline double scnr(const ChannelSet& ch, const BeamformerSet& b, const Partition& part, const Scenario& sc) {
  const CMatrix a0 = steering_outer(sc.target_angle, sc);
  const CMatrix m = std::norm(ch.beta0) * a0 * dl_covariance(b, part, sc) * a0.adjoint();
  const CMatrix r = oracle::clutter_covariance(ch, b, part, sc);
  Eigen::ComplexEigenSolver<CMatrix> es(r.inverse() * m, false);
  double top = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) top = std::max(top, es.eigenvalues()(i).real());
  return top;
}

struct Constraints {
  double bs_power = 0.0;
  double worst_user_ratio = 0.0;
  double scnr = 0.0;
};

inline Constraints constraints(const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                               const Scenario& sc) {
  Constraints c;
  for (int k = 0; k < sc.num_users; ++k) {
    if (part.is_dl(k)) {
      c.bs_power += (b.v_dl[k].adjoint() * b.v_dl[k]).trace().real();
    } else {
      c.worst_user_ratio =
          std::max(c.worst_user_ratio, (b.v_ul[k].adjoint() * b.v_ul[k]).trace().real() / sc.user_power_max[k]);
    }
  }
  c.scnr = oracle::scnr(ch, b, part, sc);
  return c;
}

// True when the power budgets (and the SCNR floor, if enforced) hold within
// `rel` relative.
inline bool feasible(const ChannelSet& ch, const BeamformerSet& b, const Partition& part, const Scenario& sc,
                     bool radar, double rel = 1e-6) {
  const Constraints c = constraints(ch, b, part, sc);
  return c.bs_power <= sc.bs_power_max * (1.0 + rel) && c.worst_user_ratio <= 1.0 + rel &&
         (!radar || c.scnr >= sc.scnr_min * (1.0 - rel));
}

// Real-coordinate gradient norm of
//   -sum_rate + sum_k lambda_k ||V_k||^2 + lambda_bs sum_j ||V_j||^2 - mu scnr
// by central differences with step h.
inline double lagrangian_gradient_norm(const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                                       const Scenario& sc, const flexd::Multipliers& mult, double h = 1e-6) {
  auto lagrangian = [&](const BeamformerSet& x) {
    double f = -oracle::sum_rate(ch, x, part, sc) - mult.mu * oracle::scnr(ch, x, part, sc);
    for (int k = 0; k < sc.num_users; ++k) {
      if (part.is_dl(k)) {
        f += mult.lambda_bs * x.v_dl[k].squaredNorm();
      } else {
        f += mult.lambda_ul[k] * x.v_ul[k].squaredNorm();
      }
    }
    return f;
  };
  double g2 = 0.0;
  BeamformerSet x = b;
  for (int k = 0; k < sc.num_users; ++k) {
    CMatrix& v = part.is_dl(k) ? x.v_dl[k] : x.v_ul[k];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const cdouble orig = v(i);
      for (const cdouble dir : {cdouble(1.0, 0.0), cdouble(0.0, 1.0)}) {
        v(i) = orig + h * dir;
        const double up = lagrangian(x);
        v(i) = orig - h * dir;
        const double down = lagrangian(x);
        v(i) = orig;
        const double g = (up - down) / (2.0 * h);
        g2 += g * g;
      }
    }
  }
  return std::sqrt(g2);
}

inline double transmit_norm(const BeamformerSet& b, const Partition& part) {
  double n2 = 0.0;
  for (int k = 0; k < part.num_users(); ++k) n2 += part.is_dl(k) ? b.v_dl[k].squaredNorm() : b.v_ul[k].squaredNorm();
  return std::sqrt(n2);
}

struct WmmseReference {
  std::vector<CMatrix> v;
  double rate = 0.0;
  int iterations = 0;
};

// Classical sum-rate WMMSE for a downlink broadcast channel under one sum
// power budget: MMSE receivers, W = E^{-1}, then the transmit step
// (B + lambda I)^{-1} H_k^H U_k W_k with lambda from bisection on the power.
inline WmmseReference plain_wmmse(const std::vector<CMatrix>& h, std::vector<CMatrix> v, double power,
                                  const std::vector<double>& noise, double tol, int max_iters) {
  const std::size_t k_users = h.size();
  const Eigen::Index nt = h[0].cols();
  auto rate = [&](const std::vector<CMatrix>& x) {
    double r = 0.0;
    for (std::size_t k = 0; k < k_users; ++k) {
      CMatrix omega = noise[k] * CMatrix::Identity(h[k].rows(), h[k].rows());
      for (std::size_t j = 0; j < k_users; ++j)
        if (j != k) omega += h[k] * x[j] * x[j].adjoint() * h[k].adjoint();
      r += link_rate(h[k] * x[k], omega);
    }
    return r;
  };

  WmmseReference out;
  double current = rate(v);
  for (int it = 1; it <= max_iters; ++it) {
    std::vector<CMatrix> u(k_users), w(k_users);
    for (std::size_t k = 0; k < k_users; ++k) {
      CMatrix c = noise[k] * CMatrix::Identity(h[k].rows(), h[k].rows());
      for (std::size_t j = 0; j < k_users; ++j) c += h[k] * v[j] * v[j].adjoint() * h[k].adjoint();
      u[k] = c.inverse() * h[k] * v[k];
      const CMatrix e = CMatrix::Identity(v[k].cols(), v[k].cols()) - u[k].adjoint() * h[k] * v[k];
      w[k] = e.inverse();
      w[k] = 0.5 * (w[k] + w[k].adjoint()).eval();
    }
    CMatrix b = CMatrix::Zero(nt, nt);
    for (std::size_t k = 0; k < k_users; ++k) b += h[k].adjoint() * u[k] * w[k] * u[k].adjoint() * h[k];
    auto step = [&](double lambda) {
      // Pseudo-inverse through the eigenbasis so lambda = 0 is allowed.
      Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (b + b.adjoint()));
      const double floor = 1e-12 * es.eigenvalues().cwiseAbs().maxCoeff();
      std::vector<CMatrix> x(k_users);
      for (std::size_t k = 0; k < k_users; ++k) {
        CMatrix p = es.eigenvectors().adjoint() * h[k].adjoint() * u[k] * w[k];
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
          const double d = es.eigenvalues()(i) + lambda;
          p.row(i) *= d <= floor ? 0.0 : 1.0 / d;
        }
        x[k] = es.eigenvectors() * p;
      }
      return x;
    };
    auto total = [&](const std::vector<CMatrix>& x) {
      double p = 0.0;
      for (const auto& m : x) p += m.squaredNorm();
      return p;
    };
    std::vector<CMatrix> next = step(0.0);
    if (total(next) > power) {
      double lo = 0.0, hi = 1.0;
      while (total(step(hi)) > power) hi *= 2.0;
      for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (total(step(mid)) > power ? lo : hi) = mid;
      }
      next = step(hi);
    }
    v = std::move(next);
    const double r = rate(v);
    out.iterations = it;
    const bool done = std::abs(r - current) <= tol;
    current = r;
    if (done) break;
  }
  out.v = std::move(v);
  out.rate = current;
  return out;
}

}  // namespace oracle
