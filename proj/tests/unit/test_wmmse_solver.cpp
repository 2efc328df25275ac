#include "flexd/initializer.hpp"
#include "flexd/wmmse_solver.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <limits>

using namespace flexd;

namespace {

CMatrix scalar(cdouble v) { return CMatrix::Constant(1, 1, v); }

struct Instance {
  Scenario sc;
  ChannelSet ch;
};

Instance scalar_instance(cdouble h, double noise) {
  Instance in;
  in.sc = Scenario::with_defaults(1);
  in.sc.nt = in.sc.nr = 1;
  in.sc.user_antennas = {1};
  in.sc.set_num_users(1);
  in.sc.noise_bs = noise;
  in.sc.noise_user = {noise};
  in.sc.clutter.clear();
  in.ch.h_ul = {scalar(h)};
  in.ch.h_dl = {scalar(h)};
  in.ch.h_uu.assign(1, std::vector<CMatrix>(1));
  in.ch.beta0 = 1.0;
  return in;
}

double total_mse(const Link& link, const ChannelSet& ch, const BeamformerSet& b, const Partition& part,
                 const Scenario& sc) {
  return mse_matrix(link, ch, b, part, sc).trace().real();
}

// Central-difference gradient norm over the entries of one transmit matrix.
double block_gradient(const std::function<double(const BeamformerSet&)>& f, BeamformerSet b, bool dl, int k,
                      double h = 1e-6) {
  CMatrix& v = dl ? b.v_dl[k] : b.v_ul[k];
  double g2 = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const cdouble orig = v(i);
    for (const cdouble dir : {cdouble(1.0, 0.0), cdouble(0.0, 1.0)}) {
      v(i) = orig + h * dir;
      const double up = f(b);
      v(i) = orig - h * dir;
      const double down = f(b);
      v(i) = orig;
      g2 += std::pow((up - down) / (2.0 * h), 2);
    }
  }
  return std::sqrt(g2);
}

}  // namespace

TEST_CASE("scalar MMSE receiver and weight") {
  const cdouble h(0.6, -1.1);
  Instance in = scalar_instance(h, 0.4);
  BeamformerSet b = BeamformerSet::empty(1);
  const cdouble v(0.9, 0.3);
  b.v_ul[0] = scalar(v);
  const Partition ul = Partition::all_uplink(1);
  const CMatrix u = update_receive_ul(0, in.ch, b, ul, in.sc);
  const cdouble want = h * v / (std::norm(h) * std::norm(v) + 0.4);
  CHECK(std::abs(u(0, 0) - want) < 1e-14);

  b.u_ul[0] = u;
  const CMatrix w = update_weight({Direction::kUplink, 0}, in.ch, b);
  CHECK(w(0, 0).real() == doctest::Approx(1.0 + std::norm(h) * std::norm(v) / 0.4).epsilon(1e-12));
  CHECK(std::abs(w(0, 0).imag()) < 1e-14);

  BeamformerSet d = BeamformerSet::empty(1);
  d.v_dl[0] = scalar(v);
  const Partition dl = Partition::all_downlink(1);
  CHECK(std::abs(update_receive_dl(0, in.ch, d, dl, in.sc)(0, 0) - want) < 1e-14);
}

TEST_CASE("receivers vanish with silent transmitters and identity weights follow") {
  std::mt19937_64 rng(1);
  const Scenario sc = oracle::unit_scenario(3);
  const ChannelSet ch = oracle::random_channels(sc, rng);
  const Partition part(3, 0b010);
  BeamformerSet b = oracle::random_transmit(part, sc, rng);
  b.v_ul[0].setZero();
  b.v_dl[1].setZero();
  CHECK(update_receive_ul(0, ch, b, part, sc).norm() == 0.0);
  CHECK(update_receive_dl(1, ch, b, part, sc).norm() == 0.0);
  update_receivers_and_weights(ch, b, part, sc);
  CHECK((b.w_ul[0] - CMatrix::Identity(4, 4)).norm() == 0.0);
  CHECK((b.w_dl[1] - CMatrix::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("MMSE receivers minimize the total MSE") {
  std::mt19937_64 rng(2);
  const Scenario sc = oracle::unit_scenario(4);
  for (int t = 0; t < 5; ++t) {
    const ChannelSet ch = oracle::random_channels(sc, rng);
    const Partition part(4, 0b0101);
    BeamformerSet b = oracle::random_transmit(part, sc, rng);
    update_receivers_and_weights(ch, b, part, sc);
    for (int k = 0; k < 4; ++k) {
      const bool dl = part.is_dl(k);
      const Link link{dl ? Direction::kDownlink : Direction::kUplink, k};
      const double best = total_mse(link, ch, b, part, sc);
      int lower = 0;
      for (int p = 0; p < 100; ++p) {
        BeamformerSet q = b;
        CMatrix& u = dl ? q.u_dl[k] : q.u_ul[k];
        u += oracle::random_matrix(u.rows(), u.cols(), rng, 1e-3 * (1.0 + u.norm()));
        if (total_mse(link, ch, q, part, sc) < best - 1e-13) ++lower;
      }
      CHECK(lower == 0);
    }
  }
}

TEST_CASE("weight update flags near-singular systems") {
  Instance in = scalar_instance(cdouble(1.0, 0.0), 0.1);
  BeamformerSet b = BeamformerSet::empty(1);
  b.v_ul[0] = scalar(1.0);
  b.u_ul[0] = scalar(1.0);  // I - U^H H V = 0
  bool loaded = false;
  const CMatrix w = update_weight({Direction::kUplink, 0}, in.ch, b, &loaded);
  CHECK(loaded);
  CHECK(w.allFinite());
  b.u_ul[0] = scalar(0.5);
  update_weight({Direction::kUplink, 0}, in.ch, b, &loaded);
  CHECK_FALSE(loaded);
}

TEST_CASE("scalar uplink transmit update") {
  const cdouble h(0.7, 0.4);
  Instance in = scalar_instance(h, 0.2);
  BeamformerSet b = BeamformerSet::empty(1);
  b.v_ul[0] = scalar(0.5);
  const Partition ul = Partition::all_uplink(1);
  update_receivers_and_weights(in.ch, b, ul, in.sc);
  const cdouble u = b.u_ul[0](0, 0);
  const double w = b.w_ul[0](0, 0).real();
  const RadarMinorant none;
  for (double lambda : {0.0, 0.3, 4.0}) {
    const CMatrix v = update_ul_transmit(0, in.ch, b, none, lambda, 0.0, ul, in.sc);
    const cdouble want = std::conj(h) * u * w / (std::norm(h) * std::norm(u) * w + lambda);
    CHECK(std::abs(v(0, 0) - want) < 1e-13);
  }
  CHECK(update_ul_transmit(0, in.ch, b, none, 1e12, 0.0, ul, in.sc).norm() < 1e-10);

  b.u_ul[0].setZero();
  CHECK_THROWS_AS(update_ul_transmit(0, in.ch, b, none, 0.0, 0.0, ul, in.sc), std::domain_error);
}

TEST_CASE("transmit updates satisfy their stationarity conditions") {
  std::mt19937_64 rng(3);
  const Scenario sc = oracle::unit_scenario(3);
  for (int t = 0; t < 5; ++t) {
    const ChannelSet ch = oracle::random_channels(sc, rng);
    const Partition part(3, 0b010);
    BeamformerSet b = oracle::random_transmit(part, sc, rng);
    update_receivers_and_weights(ch, b, part, sc);
    const RadarMinorant mn = build_radar_minorant(ch, b, part, sc);
    const double lambda = 0.3, mu = 0.2;

    // UL block: objective + lambda ||V_k||^2 - mu * minorant, other blocks fixed.
    BeamformerSet x = b;
    x.v_ul[0] = update_ul_transmit(0, ch, b, mn, lambda, mu, part, sc);
    auto ul_lagrangian = [&](const BeamformerSet& y) {
      return wmmse_objective(ch, y, part, sc) + lambda * y.v_ul[0].squaredNorm() - mu * evaluate_minorant(mn, y, part);
    };
    CHECK(block_gradient(ul_lagrangian, x, false, 0) <= 1e-6 * (1.0 + x.v_ul[0].norm()));

    BeamformerSet y = b;
    y.v_dl[1] = update_dl_transmit(1, ch, b, mn, lambda, mu, part, sc);
    auto dl_lagrangian = [&](const BeamformerSet& z) {
      return wmmse_objective(ch, z, part, sc) + lambda * z.v_dl[1].squaredNorm() - mu * evaluate_minorant(mn, z, part);
    };
    CHECK(block_gradient(dl_lagrangian, y, true, 1) <= 1e-6 * (1.0 + y.v_dl[1].norm()));
  }
}

TEST_CASE("downlink update without the radar term is the classical WMMSE step") {
  std::mt19937_64 rng(4);
  const Scenario sc = oracle::unit_scenario(3);
  const ChannelSet ch = oracle::random_channels(sc, rng);
  const Partition part = Partition::all_downlink(3);
  BeamformerSet b = oracle::random_transmit(part, sc, rng);
  update_receivers_and_weights(ch, b, part, sc);
  const RadarMinorant mn = build_radar_minorant(ch, b, part, sc);
  const double lambda = 0.05;
  CMatrix bracket = lambda * CMatrix::Identity(sc.nt, sc.nt);
  for (int j = 0; j < 3; ++j) bracket += ch.h_dl[j].adjoint() * b.u_dl[j] * b.w_dl[j] * b.u_dl[j].adjoint() * ch.h_dl[j];
  for (int k = 0; k < 3; ++k) {
    const CMatrix want = bracket.inverse() * ch.h_dl[k].adjoint() * b.u_dl[k] * b.w_dl[k];
    CHECK((update_dl_transmit(k, ch, b, mn, lambda, 0.0, part, sc) - want).norm() < 1e-10 * (1.0 + want.norm()));
    CHECK((dl_transmit_frozen_theta(k, ch, b, mn.theta, lambda, 0.0, part, sc) - want).norm() <
          1e-10 * (1.0 + want.norm()));
  }
  CHECK(update_dl_transmit(0, ch, b, mn, 1e12, 0.0, part, sc).norm() < 1e-9);
}

TEST_CASE("a positive radar multiplier steers power toward the target") {
  std::mt19937_64 rng(5);
  const Scenario sc = oracle::unit_scenario(3);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const ChannelSet ch = oracle::random_channels(sc, rng);
    const Partition part(3, 0b011);
    BeamformerSet b = oracle::random_transmit(part, sc, rng);
    update_receivers_and_weights(ch, b, part, sc);
    const RadarContext radar = make_radar_context(ch, b, part, sc);
    const double lambda = 0.1;
    const double cap = dl_mu_cap(ch, b, radar.theta_mat, lambda, part, sc);
    REQUIRE(cap > 0.0);
    const double mu = std::isfinite(cap) ? 0.5 * cap : 1.0;
    for (int k : part.dl_users()) {
      const CMatrix v0 = dl_transmit_frozen_theta(k, ch, b, radar.theta_mat, lambda, 0.0, part, sc);
      const CMatrix v1 = dl_transmit_frozen_theta(k, ch, b, radar.theta_mat, lambda, mu, part, sc);
      const double t0 = (v0.adjoint() * radar.theta_mat * v0).trace().real();
      const double t1 = (v1.adjoint() * radar.theta_mat * v1).trace().real();
      CHECK(t1 > t0);
      ++checked;
    }
    if (std::isfinite(cap))
      CHECK_THROWS_AS(dl_transmit_frozen_theta(0, ch, b, radar.theta_mat, lambda, 1.5 * cap / 0.99, part, sc),
                      std::domain_error);
  }
  CHECK(checked == 40);
}

TEST_CASE("radar minorant is a tight lower bound") {
  std::mt19937_64 rng(6);
  const Scenario sc = oracle::unit_scenario(4);
  for (int t = 0; t < 20; ++t) {
    const ChannelSet ch = oracle::random_channels(sc, rng);
    Partition part = oracle::random_partition(4, rng);
    if (part.num_dl() == 0) part = part.flipped(1);
    const BeamformerSet anchor = oracle::random_transmit(part, sc, rng);
    const RadarMinorant mn = build_radar_minorant(ch, anchor, part, sc);
    const double at_anchor = scnr(ch, anchor, part, sc);
    CHECK(evaluate_minorant(mn, anchor, part) == doctest::Approx(at_anchor).epsilon(1e-9));
    for (int p = 0; p < 10; ++p) {
      const BeamformerSet other = oracle::random_transmit(part, sc, rng);
      CHECK(evaluate_minorant(mn, other, part) <= scnr(ch, other, part, sc) * (1.0 + 1e-10) + 1e-12);
    }
  }
}

namespace {

void check_radar_slackness(const TransmitUpdate& u, const Scenario& sc) {
  CHECK(u.minorant_value >= sc.scnr_min * (1.0 - 1e-6) - 1e-9);
  if (u.multipliers.mu > 1e-8 / std::max(sc.scnr_min, 1e-3))
    CHECK(u.minorant_value == doctest::Approx(sc.scnr_min).epsilon(1e-4).scale(1e-6));
}

}  // namespace

TEST_CASE("multiplier search") {
  std::mt19937_64 rng(7);
  SolverSettings st;

  SUBCASE("slack constraints give zero multipliers") {
    Scenario sc = oracle::unit_scenario(3);
    sc.bs_power_max = 1e8;
    for (auto& p : sc.user_power_max) p = 1e8;
    sc.scnr_min = 1e-12;
    const ChannelSet ch = oracle::random_channels(sc, rng);
    const Partition part(3, 0b011);
    BeamformerSet b = oracle::random_transmit(part, oracle::unit_scenario(3), rng);
    update_receivers_and_weights(ch, b, part, sc);
    const RadarMinorant mn = build_radar_minorant(ch, b, part, sc);
    const TransmitUpdate u = solve_multipliers(ch, b, mn, part, sc, st);
    REQUIRE(u.ok);
    // The minorant can go negative away from its anchor, so mu may still bind.
    check_radar_slackness(u, sc);
    CHECK(u.multipliers.lambda_bs == 0.0);
    CHECK(u.multipliers.lambda_ul[2] == 0.0);
  }
  SUBCASE("binding power budgets are met with equality") {
    Scenario sc = oracle::unit_scenario(3);
    sc.scnr_min = 1e-12;
    for (int t = 0; t < 10; ++t) {
      const ChannelSet ch = oracle::random_channels(sc, rng);
      const Partition part(3, 0b011);
      BeamformerSet b = oracle::random_transmit(part, sc, rng);
      update_receivers_and_weights(ch, b, part, sc);
      const RadarMinorant mn = build_radar_minorant(ch, b, part, sc);
      const TransmitUpdate u = solve_multipliers(ch, b, mn, part, sc, st);
      REQUIRE(u.ok);
      check_radar_slackness(u, sc);
      double p_bs = 0.0;
      for (int j : part.dl_users()) p_bs += u.v_dl[j].squaredNorm();
      if (u.multipliers.lambda_bs > 0.0) CHECK(p_bs == doctest::Approx(sc.bs_power_max).epsilon(1e-6));
      CHECK(p_bs <= sc.bs_power_max * (1.0 + 1e-12));
      if (u.multipliers.lambda_ul[2] > 0.0)
        CHECK(u.v_ul[2].squaredNorm() == doctest::Approx(sc.user_power_max[2]).epsilon(1e-6));
      CHECK(u.v_ul[2].squaredNorm() <= sc.user_power_max[2] * (1.0 + 1e-12));
    }
  }
  SUBCASE("a binding SCNR floor is reproduced") {
    const Scenario base = Scenario::with_defaults(4);
    int binding = 0;
    for (std::uint64_t t = 0; t < 10; ++t) {
      const ChannelSet ch = generate_channels(base, t);
      const Partition part(4, 0b0011);
      const InitResult init = initialize(ch, part, base, st);
      if (!init.feasible) continue;
      BeamformerSet b = init.beams;
      update_receivers_and_weights(ch, b, part, base);
      Scenario sc = base;
      sc.scnr_min = init.scnr;  // the unconstrained step typically drops below this
      const RadarMinorant mn = build_radar_minorant(ch, b, part, sc);
      const TransmitUpdate u = solve_multipliers(ch, b, mn, part, sc, st);
      REQUIRE(u.ok);
      if (u.multipliers.mu == 0.0) continue;
      // A singular rate block leaves rate-free radar gain in its null space;
      // then the search ends at mu -> 0+ with the floor slack.
      if (u.multipliers.mu < 1e-8 / sc.scnr_min) {
        CHECK(u.minorant_value >= sc.scnr_min);
        continue;
      }
      ++binding;
      CHECK(u.minorant_value == doctest::Approx(sc.scnr_min).epsilon(1e-4));
      BeamformerSet x = b;
      x.v_ul = u.v_ul;
      x.v_dl = u.v_dl;
      CHECK(scnr(ch, x, part, sc) >= sc.scnr_min * (1.0 - 1e-9));
    }
    CHECK(binding > 0);
  }
}

TEST_CASE("inner loop basics") {
  const Scenario sc = Scenario::with_defaults(4);
  const ChannelSet ch = generate_channels(sc, std::uint64_t{1});
  const Partition part(4, 0b0110);
  SolverSettings st;
  const InitResult init = initialize(ch, part, sc, st);
  REQUIRE(init.feasible);

  SUBCASE("infinite tolerance stops after one iteration") {
    SolverSettings once = st;
    once.inner_tol = std::numeric_limits<double>::infinity();
    const SolveResult r = inner_optimize(ch, part, init.beams, once, sc);
    CHECK(r.iterations == 1);
    CHECK(r.converged);
    CHECK(r.feasible);
    CHECK_FALSE(r.outage);
    CHECK(oracle::feasible(ch, r.beams, part, sc, true));
  }
  SUBCASE("trace is non-decreasing and the result satisfies every constraint") {
    SolverSettings short_run = st;
    short_run.max_inner_iters = 40;
    const SolveResult r = inner_optimize(ch, part, init.beams, short_run, sc);
    REQUIRE(r.feasible);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      CHECK(r.objective_trace[i] >= r.objective_trace[i - 1] - 1e-9);
    CHECK(r.objective_trace.size() == static_cast<std::size_t>(r.iterations) + 1);
    CHECK(r.log.size() == r.objective_trace.size());
    CHECK(oracle::feasible(ch, r.beams, part, sc, true));
    CHECK(r.sum_rate == doctest::Approx(oracle::sum_rate(ch, r.beams, part, sc)).epsilon(1e-10));

    double log_det_w = 0.0;
    for (int k = 0; k < 4; ++k) log_det_w += oracle::log_det(part.is_dl(k) ? r.beams.w_dl[k] : r.beams.w_ul[k]);
    CHECK(log_det_w == doctest::Approx(r.sum_rate).epsilon(1e-6));
  }
  SUBCASE("the plain map behaves the same way") {
    SolverSettings plain = st;
    plain.accelerate = false;
    plain.max_inner_iters = 40;
    const SolveResult r = inner_optimize(ch, part, init.beams, plain, sc);
    REQUIRE(r.feasible);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      CHECK(r.objective_trace[i] >= r.objective_trace[i - 1] - 1e-9);
    CHECK(oracle::feasible(ch, r.beams, part, sc, true));
  }
  SUBCASE("an infeasible start is an outage") {
    BeamformerSet weak = init.beams;
    for (int j : part.dl_users()) weak.v_dl[j] *= 1e-3;
    const SolveResult r = inner_optimize(ch, part, weak, st, sc);
    CHECK(r.outage);
    CHECK_FALSE(r.feasible);
    CHECK(r.sum_rate == 0.0);
  }
  SUBCASE("mis-keyed beams are rejected") {
    CHECK_THROWS(inner_optimize(ch, Partition(4, 0b1001), init.beams, st, sc));
  }
}

TEST_CASE("radar-free downlink matches an independent WMMSE implementation") {
  Scenario sc = Scenario::with_defaults(2);
  sc.noise_bs = dbm_to_watts(-60.0);
  for (auto& n : sc.noise_user) n = sc.noise_bs;
  sc.scnr_min = 1e-12;
  sc.clutter.clear();
  SolverSettings st;
  st.inner_tol = 1e-10;
  st.max_inner_iters = 5000;
  const Partition part = Partition::all_downlink(2);
  for (std::uint64_t t = 0; t < 5; ++t) {
    const ChannelSet ch = generate_channels(sc, t);
    const InitResult init = initialize(ch, part, sc, st);
    REQUIRE(init.feasible);
    const SolveResult r = inner_optimize(ch, part, init.beams, st, sc);
    REQUIRE(r.converged);
    const auto ref = oracle::plain_wmmse({ch.h_dl[0], ch.h_dl[1]}, {init.beams.v_dl[0], init.beams.v_dl[1]},
                                         sc.bs_power_max, sc.noise_user, 1e-10, 20000);
    CHECK(std::abs(r.sum_rate - ref.rate) <= 1e-4);
  }
}

TEST_CASE("solver settings validation") {
  SolverSettings s;
  CHECK_NOTHROW(s.validate());
  s.inner_tol = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = {};
  s.max_inner_iters = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = {};
  s.delta = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
