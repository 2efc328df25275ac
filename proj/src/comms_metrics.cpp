#include "flexd/comms_metrics.hpp"

#include <bit>
#include <sstream>
#include <stdexcept>

namespace flexd {

Partition::Partition(int num_users, std::uint32_t dl_mask) : num_users_(num_users), dl_mask_(dl_mask) {
  if (num_users < 0 || num_users > 31) throw std::invalid_argument("Partition: num_users out of range");
  const std::uint32_t all = num_users == 0 ? 0u : ((1u << num_users) - 1u);
  if ((dl_mask & ~all) != 0u) throw std::invalid_argument("Partition: mask has bits beyond num_users");
}

Partition Partition::from_dl_users(int num_users, const std::vector<int>& dl_users) {
  std::uint32_t mask = 0;
  for (int k : dl_users) {
    if (k < 0 || k >= num_users) throw std::invalid_argument("Partition: user index out of range");
    mask |= 1u << k;
  }
  return {num_users, mask};
}

Partition Partition::all_downlink(int num_users) { return {num_users, (1u << num_users) - 1u}; }

std::vector<int> Partition::dl_users() const {
  std::vector<int> out;
  for (int k = 0; k < num_users_; ++k)
    if (is_dl(k)) out.push_back(k);
  return out;
}

std::vector<int> Partition::ul_users() const {
  std::vector<int> out;
  for (int k = 0; k < num_users_; ++k)
    if (!is_dl(k)) out.push_back(k);
  return out;
}

int Partition::num_dl() const { return std::popcount(dl_mask_); }

Partition Partition::flipped(int k) const { return {num_users_, dl_mask_ ^ (1u << k)}; }

bool Partition::canonical_less(const Partition& other) const {
  if (num_dl() != other.num_dl()) return num_dl() < other.num_dl();
  return dl_users() < other.dl_users();
}

std::string Partition::to_string() const {
  std::ostringstream os;
  os << "D={";
  bool first = true;
  for (int k : dl_users()) {
    os << (first ? "" : ",") << k;
    first = false;
  }
  os << "}";
  return os.str();
}

BeamformerSet BeamformerSet::empty(int num_users) {
  BeamformerSet b;
  const auto n = static_cast<std::size_t>(num_users);
  b.v_ul.resize(n);
  b.v_dl.resize(n);
  b.u_ul.resize(n);
  b.u_dl.resize(n);
  b.w_ul.resize(n);
  b.w_dl.resize(n);
  return b;
}

void BeamformerSet::check_transmit(const Partition& partition, const Scenario& scenario) const {
  if (num_users() != partition.num_users()) throw std::invalid_argument("beams: user count mismatch");
  for (int k = 0; k < num_users(); ++k) {
    const int l = scenario.user_antennas[k];
    if (partition.is_dl(k)) {
      if (v_ul[k].size() != 0) throw std::invalid_argument("beams: UL transmit set for DL user");
      if (v_dl[k].rows() != scenario.nt || v_dl[k].cols() != scenario.streams_dl[k])
        throw std::invalid_argument("beams: DL transmit shape mismatch");
    } else {
      if (v_dl[k].size() != 0) throw std::invalid_argument("beams: DL transmit set for UL user");
      if (v_ul[k].rows() != l || v_ul[k].cols() != scenario.streams_ul[k])
        throw std::invalid_argument("beams: UL transmit shape mismatch");
    }
  }
}

double user_power(const BeamformerSet& beams, int k) { return beams.v_ul[k].squaredNorm(); }

double bs_power(const BeamformerSet& beams, const Partition& partition) {
  double p = 0.0;
  for (int j : partition.dl_users()) p += beams.v_dl[j].squaredNorm();
  return p;
}

CMatrix dl_transmit_covariance(const BeamformerSet& beams, const Partition& partition, int nt) {
  CMatrix s = CMatrix::Zero(nt, nt);
  for (int j : partition.dl_users()) s.noalias() += beams.v_dl[j] * beams.v_dl[j].adjoint();
  return hermitian_part(s);
}

const CMatrix& link_channel(const Link& link, const ChannelSet& channels) {
  return link.direction == Direction::kUplink ? channels.h_ul[link.user] : channels.h_dl[link.user];
}

const CMatrix& link_transmit(const Link& link, const BeamformerSet& beams) {
  return link.direction == Direction::kUplink ? beams.v_ul[link.user] : beams.v_dl[link.user];
}

CMatrix interference_covariance(const Link& link, const ChannelSet& channels,
                                const BeamformerSet& beams, const Partition& partition,
                                const Scenario& scenario) {
  const int k = link.user;
  if (link.direction == Direction::kUplink) {
    CMatrix omega = scenario.noise_bs * CMatrix::Identity(scenario.nr, scenario.nr);
    for (int i : partition.ul_users()) {
      if (i == k) continue;
      const CMatrix hv = channels.h_ul[i] * beams.v_ul[i];
      omega.noalias() += hv * hv.adjoint();
    }
    return hermitian_part(omega);
  }
  const int l = scenario.user_antennas[k];
  CMatrix omega = scenario.noise_user[k] * CMatrix::Identity(l, l);
  for (int j : partition.dl_users()) {
    if (j == k) continue;
    const CMatrix hv = channels.h_dl[k] * beams.v_dl[j];
    omega.noalias() += hv * hv.adjoint();
  }
  for (int i : partition.ul_users()) {
    const CMatrix hv = channels.h_uu[k][i] * beams.v_ul[i];
    omega.noalias() += hv * hv.adjoint();
  }
  return hermitian_part(omega);
}

double log_det_hpd(const CMatrix& a) {
  Eigen::LLT<CMatrix> llt(a);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("log_det_hpd: matrix not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
}

namespace {

double link_rate(const Link& link, const ChannelSet& channels, const BeamformerSet& beams,
                 const Partition& partition, const Scenario& scenario) {
  const CMatrix s = link_channel(link, channels) * link_transmit(link, beams);
  const CMatrix omega = interference_covariance(link, channels, beams, partition, scenario);
  Eigen::LLT<CMatrix> llt(omega);
  const CMatrix whitened = llt.matrixL().solve(s);
  const CMatrix gram = CMatrix::Identity(s.cols(), s.cols()) + whitened.adjoint() * whitened;
  return std::max(0.0, log_det_hpd(hermitian_part(gram)));
}

}  // namespace

double uplink_rate(int k, const ChannelSet& channels, const BeamformerSet& beams,
                   const Partition& partition, const Scenario& scenario) {
  if (partition.is_dl(k)) throw std::invalid_argument("uplink_rate: user is in the DL set");
  return link_rate({Direction::kUplink, k}, channels, beams, partition, scenario);
}

double downlink_rate(int k, const ChannelSet& channels, const BeamformerSet& beams,
                     const Partition& partition, const Scenario& scenario) {
  if (!partition.is_dl(k)) throw std::invalid_argument("downlink_rate: user is in the UL set");
  return link_rate({Direction::kDownlink, k}, channels, beams, partition, scenario);
}

double sum_rate(const ChannelSet& channels, const BeamformerSet& beams, const Partition& partition,
                const Scenario& scenario) {
  double total = 0.0;
  for (int k = 0; k < partition.num_users(); ++k) {
    total += partition.is_dl(k) ? downlink_rate(k, channels, beams, partition, scenario)
                                : uplink_rate(k, channels, beams, partition, scenario);
  }
  return total;
}

CMatrix mse_matrix(const Link& link, const ChannelSet& channels, const BeamformerSet& beams,
                   const Partition& partition, const Scenario& scenario) {
  const int k = link.user;
  const bool ul = link.direction == Direction::kUplink;
  const CMatrix& u = ul ? beams.u_ul[k] : beams.u_dl[k];
  const CMatrix& h = link_channel(link, channels);
  const CMatrix& v = link_transmit(link, beams);
  const double noise = ul ? scenario.noise_bs : scenario.noise_user[k];

  const CMatrix eye = CMatrix::Identity(v.cols(), v.cols());
  const CMatrix residual = eye - u.adjoint() * h * v;
  CMatrix e = residual * residual.adjoint() + noise * u.adjoint() * u;

  auto add_interferer = [&](const CMatrix& h_int, const CMatrix& v_int) {
    const CMatrix uhv = u.adjoint() * h_int * v_int;
    e.noalias() += uhv * uhv.adjoint();
  };
  if (ul) {
    for (int i : partition.ul_users())
      if (i != k) add_interferer(channels.h_ul[i], beams.v_ul[i]);
  } else {
    for (int j : partition.dl_users())
      if (j != k) add_interferer(channels.h_dl[k], beams.v_dl[j]);
    for (int i : partition.ul_users()) add_interferer(channels.h_uu[k][i], beams.v_ul[i]);
  }
  return hermitian_part(e);
}

double wmmse_objective(const ChannelSet& channels, const BeamformerSet& beams,
                       const Partition& partition, const Scenario& scenario) {
  double total = 0.0;
  for (int k = 0; k < partition.num_users(); ++k) {
    const Link link{partition.is_dl(k) ? Direction::kDownlink : Direction::kUplink, k};
    const CMatrix& w = partition.is_dl(k) ? beams.w_dl[k] : beams.w_ul[k];
    if ((w - w.adjoint()).norm() > 1e-10 * std::max(1.0, w.norm()))
      throw std::invalid_argument("wmmse_objective: weight matrix not Hermitian");
    Eigen::LLT<CMatrix> llt(hermitian_part(w));
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("wmmse_objective: weight matrix not positive definite");
    const CMatrix e = mse_matrix(link, channels, beams, partition, scenario);
    total += (w * e).trace().real() - log_det_hpd(hermitian_part(w));
  }
  return total;
}

}  // namespace flexd
