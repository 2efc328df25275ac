#include "flexd/partition_search.hpp"

#include "flexd/initializer.hpp"

#include <map>
#include <optional>
#include <stdexcept>

namespace flexd {

SolveResult solve_partition(const ChannelSet& channels, const Partition& partition, const Scenario& scenario,
                            const SolverSettings& settings) {
  const InitResult init = initialize(channels, partition, scenario, settings);
  if (!init.feasible) return SolveResult::make_outage(partition, partition.num_users());
  return inner_optimize(channels, partition, init.beams, settings, scenario);
}

bool better_result(const SolveResult& a, const SolveResult& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.sum_rate != b.sum_rate) return a.sum_rate > b.sum_rate;
  return a.partition.canonical_less(b.partition);
}

Partition heuristic_partition(const ChannelSet& channels) {
  const int k_users = channels.num_users();
  std::vector<double> ratio(k_users);
  std::uint32_t mask = 0;
  for (int k = 0; k < k_users; ++k) {
    const double dl = channels.h_dl[k].squaredNorm();
    const double ul = channels.h_ul[k].squaredNorm();
    ratio[k] = dl / ul;
    if (dl > ul) mask |= 1u << k;
  }
  auto extreme = [&](bool largest) {
    int pick = 0;
    for (int k = 1; k < k_users; ++k)
      if (largest ? ratio[k] > ratio[pick] : ratio[k] < ratio[pick]) pick = k;
    return pick;
  };
  const std::uint32_t all = (1u << k_users) - 1u;
  if (mask == 0u) mask |= 1u << extreme(true);
  if (mask == all) mask &= ~(1u << extreme(false));
  return {k_users, mask};
}

SolveResult pattern_search(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings,
                           SearchStats* stats) {
  const int k_users = scenario.num_users;
  if (k_users < 2) throw std::invalid_argument("pattern_search: needs at least 2 users");
  const int max_calls = 1 + k_users * k_users;

  std::map<std::uint32_t, SolveResult> cache;
  int calls = 0;
  auto evaluate = [&](const Partition& p) -> const SolveResult* {
    if (auto it = cache.find(p.dl_mask()); it != cache.end()) return &it->second;
    if (calls >= max_calls) return nullptr;
    ++calls;
    if (stats != nullptr) stats->visited.push_back(p);
    return &cache.emplace(p.dl_mask(), solve_partition(channels, p, scenario, settings)).first->second;
  };

  const SolveResult* current = evaluate(heuristic_partition(channels));
  while (true) {
    const SolveResult* best_neighbor = nullptr;
    for (int k = 0; k < k_users; ++k) {
      const SolveResult* r = evaluate(current->partition.flipped(k));
      if (r == nullptr) break;
      if (best_neighbor == nullptr || better_result(*r, *best_neighbor)) best_neighbor = r;
    }
    const bool improves = best_neighbor != nullptr &&
                          ((best_neighbor->feasible && !current->feasible) ||
                           (best_neighbor->feasible && best_neighbor->sum_rate > current->sum_rate));
    if (!improves) break;
    current = best_neighbor;
  }
  if (stats != nullptr) stats->solver_calls = calls;

  const SolveResult* best = nullptr;
  for (const auto& [mask, r] : cache)
    if (best == nullptr || better_result(r, *best)) best = &r;
  if (!best->feasible) return SolveResult::make_outage(best->partition, k_users);
  return *best;
}

SolveResult exhaustive_search(const ChannelSet& channels, const Scenario& scenario, const SolverSettings& settings,
                              SearchStats* stats) {
  const int k_users = scenario.num_users;
  if (k_users > kMaxExhaustiveUsers)
    throw std::invalid_argument("exhaustive_search: refusing K > 12 (2^K partitions)");
  std::optional<SolveResult> best;
  const std::uint32_t count = 1u << k_users;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    const Partition p(k_users, mask);
    SolveResult r = solve_partition(channels, p, scenario, settings);
    if (stats != nullptr) {
      ++stats->solver_calls;
      stats->visited.push_back(p);
    }
    if (!best || better_result(r, *best)) best = std::move(r);
  }
  return *best;
}

}  // namespace flexd
