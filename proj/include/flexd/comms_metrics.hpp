#pragma once

#include "flexd/scenario.hpp"
#include "flexd/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace flexd {

// UL/DL split of the users. Bit k of the mask set <=> user k is in the DL set.
class Partition {
 public:
  Partition() = default;
  Partition(int num_users, std::uint32_t dl_mask);

  static Partition from_dl_users(int num_users, const std::vector<int>& dl_users);
  static Partition all_uplink(int num_users) { return {num_users, 0u}; }
  static Partition all_downlink(int num_users);

  int num_users() const { return num_users_; }
  std::uint32_t dl_mask() const { return dl_mask_; }
  bool is_dl(int k) const { return (dl_mask_ >> k) & 1u; }
  std::vector<int> dl_users() const;
  std::vector<int> ul_users() const;
  int num_dl() const;
  int num_ul() const { return num_users_ - num_dl(); }
  Partition flipped(int k) const;

  // Tie-break order: fewer DL users first, then lexicographic DL set.
  bool canonical_less(const Partition& other) const;

  std::string to_string() const;

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.num_users_ == b.num_users_ && a.dl_mask_ == b.dl_mask_;
  }

 private:
  int num_users_ = 0;
  std::uint32_t dl_mask_ = 0;
};

enum class Direction { kUplink, kDownlink };

struct Link {
  Direction direction;
  int user;
};

// Transmit (v), receive (u) and weight (w) matrices indexed by user. Entries
// belonging to the inactive direction of a user are empty (0 x 0).
struct BeamformerSet {
  std::vector<CMatrix> v_ul, v_dl;
  std::vector<CMatrix> u_ul, u_dl;
  std::vector<CMatrix> w_ul, w_dl;

  static BeamformerSet empty(int num_users);
  int num_users() const { return static_cast<int>(v_ul.size()); }

  // Transmit matrices keyed exactly by the partition; throws otherwise.
  void check_transmit(const Partition& partition, const Scenario& scenario) const;
};

double user_power(const BeamformerSet& beams, int k);
double bs_power(const BeamformerSet& beams, const Partition& partition);
CMatrix dl_transmit_covariance(const BeamformerSet& beams, const Partition& partition, int nt);

// Interference-plus-noise covariance seen by the receiver of `link`
// (all other active transmissions through their channels to that receiver).
CMatrix interference_covariance(const Link& link, const ChannelSet& channels,
                                const BeamformerSet& beams, const Partition& partition,
                                const Scenario& scenario);

// Channel and effective signal matrix of a link.
const CMatrix& link_channel(const Link& link, const ChannelSet& channels);
const CMatrix& link_transmit(const Link& link, const BeamformerSet& beams);

// ln det(I + S^H Omega^{-1} S), S = H V, in nats.
double uplink_rate(int k, const ChannelSet& channels, const BeamformerSet& beams,
                   const Partition& partition, const Scenario& scenario);
// DL rate; interference includes other DL beams and every UL user's signal
// through the user-user channels.
double downlink_rate(int k, const ChannelSet& channels, const BeamformerSet& beams,
                     const Partition& partition, const Scenario& scenario);
double sum_rate(const ChannelSet& channels, const BeamformerSet& beams,
                const Partition& partition, const Scenario& scenario);

CMatrix mse_matrix(const Link& link, const ChannelSet& channels, const BeamformerSet& beams,
                   const Partition& partition, const Scenario& scenario);

// Sum over active links of Tr(W E) - ln det W. Throws std::invalid_argument
// when a weight matrix is not positive definite.
double wmmse_objective(const ChannelSet& channels, const BeamformerSet& beams,
                       const Partition& partition, const Scenario& scenario);

// ln det of a Hermitian positive definite matrix; throws when not PD.
double log_det_hpd(const CMatrix& a);

}  // namespace flexd
