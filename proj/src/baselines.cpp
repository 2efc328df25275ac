#include "flexd/baselines.hpp"

#include "flexd/initializer.hpp"
#include "flexd/partition_search.hpp"
#include "flexd/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flexd {

Partition baseline_partition(const ChannelSet& channels) {
  const int k_users = channels.num_users();
  std::vector<int> order(k_users);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return channels.h_dl[a].squaredNorm() > channels.h_dl[b].squaredNorm();
  });
  order.resize(static_cast<std::size_t>((k_users + 1) / 2));
  return Partition::from_dl_users(k_users, order);
}

SubProblem restrict_users(const ChannelSet& ch, const Scenario& sc, const std::vector<int>& users) {
  SubProblem sub;
  sub.users = users;
  sub.scenario = sc;
  const int n = static_cast<int>(users.size());
  sub.scenario.num_users = n;
  auto pick = [&](const auto& v) {
    std::remove_cvref_t<decltype(v)> out;
    for (int u : users) out.push_back(v[u]);
    return out;
  };
  sub.scenario.user_antennas = pick(sc.user_antennas);
  sub.scenario.streams_ul = pick(sc.streams_ul);
  sub.scenario.streams_dl = pick(sc.streams_dl);
  sub.scenario.user_power_max = pick(sc.user_power_max);
  sub.scenario.noise_user = pick(sc.noise_user);

  sub.channels.h_ul = pick(ch.h_ul);
  sub.channels.h_dl = pick(ch.h_dl);
  sub.channels.user_positions = pick(ch.user_positions);
  sub.channels.h_uu.assign(n, std::vector<CMatrix>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) sub.channels.h_uu[a][b] = ch.h_uu[users[a]][users[b]];
  sub.channels.beta0 = ch.beta0;
  sub.channels.beta_clutter = ch.beta_clutter;
  return sub;
}

SolveResult hd_solve(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings,
                     HdPhases* phases) {
  const int k_users = scenario.num_users;
  if (k_users < 2) throw std::invalid_argument("hd_solve: needs at least 2 users");
  const Partition part = baseline_partition(channels);

  HdPhases local;
  HdPhases& ph = phases != nullptr ? *phases : local;
  ph.dl_problem = restrict_users(channels, scenario, part.dl_users());
  ph.ul_problem = restrict_users(channels, scenario, part.ul_users());
  const int n_dl = ph.dl_problem.scenario.num_users;
  const int n_ul = ph.ul_problem.scenario.num_users;

  ph.downlink = solve_partition(ph.dl_problem.channels, Partition::all_downlink(n_dl), ph.dl_problem.scenario, settings);
  SolverSettings ul_settings = settings;
  ul_settings.enforce_radar = false;
  ph.uplink = solve_partition(ph.ul_problem.channels, Partition::all_uplink(n_ul), ph.ul_problem.scenario, ul_settings);

  if (!ph.downlink.feasible) return SolveResult::make_outage(part, k_users);

  SolveResult out = SolveResult::make_outage(part, k_users);
  out.feasible = true;
  out.outage = false;
  out.sum_rate = 0.5 * (ph.downlink.sum_rate + ph.uplink.sum_rate);
  out.scnr_achieved = ph.downlink.scnr_achieved;
  out.iterations = ph.downlink.iterations + ph.uplink.iterations;
  out.converged = ph.downlink.converged && ph.uplink.converged;
  for (int a = 0; a < n_dl; ++a) {
    const int k = ph.dl_problem.users[a];
    out.beams.v_dl[k] = ph.downlink.beams.v_dl[a];
    out.beams.u_dl[k] = ph.downlink.beams.u_dl[a];
    out.beams.w_dl[k] = ph.downlink.beams.w_dl[a];
  }
  for (int a = 0; a < n_ul; ++a) {
    const int k = ph.ul_problem.users[a];
    out.beams.v_ul[k] = ph.uplink.beams.v_ul[a];
    out.beams.u_ul[k] = ph.uplink.beams.u_ul[a];
    out.beams.w_ul[k] = ph.uplink.beams.w_ul[a];
  }
  return out;
}

SolveResult zf_solve(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings) {
  const int k_users = scenario.num_users;
  if (k_users < 2) throw std::invalid_argument("zf_solve: needs at least 2 users");
  const Partition part = baseline_partition(channels);
  BeamformerSet beams = zf_beamformers(channels, part, scenario);
  const double per_dl = scenario.bs_power_max / part.num_dl();
  for (int k = 0; k < k_users; ++k) {
    CMatrix& v = part.is_dl(k) ? beams.v_dl[k] : beams.v_ul[k];
    const double budget = part.is_dl(k) ? per_dl : scenario.user_power_max[k];
    const double p = v.squaredNorm();
    if (p > 0.0) v *= std::sqrt(budget / p);
  }
  update_receivers_and_weights(channels, beams, part, scenario);

  SolveResult out = SolveResult::make_outage(part, k_users);
  out.scnr_achieved = scnr(channels, beams, part, scenario);
  const bool radar_ok = !settings.enforce_radar || out.scnr_achieved >= scenario.scnr_min;
  out.beams = std::move(beams);
  out.converged = true;
  if (!radar_ok) return out;
  out.feasible = true;
  out.outage = false;
  out.sum_rate = sum_rate(channels, out.beams, part, scenario);
  out.objective_trace = {out.sum_rate};
  return out;
}

}  // namespace flexd
