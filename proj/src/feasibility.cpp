#include "flexd/feasibility.hpp"

#include "flexd/sensing.hpp"

#include <algorithm>
#include <sstream>

namespace flexd {

namespace {

double entry_energy(const CMatrix& v) {
  double e = 0.0;
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    for (Eigen::Index r = 0; r < v.rows(); ++r) e += std::norm(v(r, c));
  return e;
}

}  // namespace

std::string ConstraintReport::describe() const {
  std::ostringstream os;
  os << "bs_power=" << bs_power << (bs_power_ok ? "" : " (VIOLATED)") << " worst_user_power_ratio="
     << worst_user_power_ratio << (user_power_ok ? "" : " (VIOLATED)") << " scnr=" << scnr
     << (scnr_ok ? "" : " (VIOLATED)");
  return os.str();
}

ConstraintReport recheck_constraints(const ChannelSet& channels, const BeamformerSet& beams,
                                     const Partition& partition, const Scenario& scenario, bool radar_enforced,
                                     double rel_tol) {
  ConstraintReport rep;
  for (int k = 0; k < partition.num_users(); ++k) {
    if (partition.is_dl(k)) {
      rep.bs_power += entry_energy(beams.v_dl[k]);
    } else {
      const double ratio = entry_energy(beams.v_ul[k]) / scenario.user_power_max[k];
      rep.worst_user_power_ratio = std::max(rep.worst_user_power_ratio, ratio);
    }
  }
  rep.bs_power_ok = rep.bs_power <= scenario.bs_power_max * (1.0 + rel_tol);
  rep.user_power_ok = rep.worst_user_power_ratio <= 1.0 + rel_tol;
  rep.scnr = scnr_oracle(channels, beams, partition, scenario);
  rep.scnr_ok = !radar_enforced || rep.scnr >= scenario.scnr_min * (1.0 - rel_tol);
  return rep;
}

}  // namespace flexd
