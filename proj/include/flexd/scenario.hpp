#pragma once

#include "flexd/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace flexd {

struct ClutterSource {
  double angle = 0.0;  // radians
  double range = 80.0;  // meters
  double rcs = 1.0;  // m^2
};

// Static problem instance. All powers and noise variances in watts, ratios
// linear, angles in radians, lengths in meters.
struct Scenario {
  int num_users = 4;
  int nt = 6;
  int nr = 4;
  std::vector<int> user_antennas;
  std::vector<int> streams_ul;
  std::vector<int> streams_dl;

  double area_side = 1000.0;
  double bs_x = 500.0;
  double bs_y = 500.0;

  double target_angle = kPi / 4.0;
  double target_range = 40.0;
  double rcs = 1.0;
  std::vector<ClutterSource> clutter{{0.0, 80.0, 1.0}, {kPi / 2.0, 80.0, 1.0}};

  double wavelength = kSpeedOfLight / 3.5e9;
  double spacing_rx = 0.5 * kSpeedOfLight / 3.5e9;
  double spacing_tx = 0.5 * kSpeedOfLight / 3.5e9;

  double bs_power_max = dbm_to_watts(30.0);
  std::vector<double> user_power_max;
  double scnr_min = db_to_linear(4.0);
  double noise_bs = dbm_to_watts(-90.0);
  std::vector<double> noise_user;
  double antenna_gain = db_to_linear(10.0);

  std::uint64_t seed = 1;

  // Defaults for K users: L_k = 4, P_k = 30 dBm, noise -90 dBm and the
  // stream counts min(L_k, nr) / min(L_k, nt).
  static Scenario with_defaults(int num_users);

  // Resizes every per-user vector to K, replicating the first entry (or the
  // default when empty). Stream counts are re-derived when `reset_streams`.
  void set_num_users(int k, bool reset_streams = true);

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  double spacing_rx_over_lambda() const { return spacing_rx / wavelength; }
  double spacing_tx_over_lambda() const { return spacing_tx / wavelength; }
};

struct ChannelSet {
  std::vector<CMatrix> h_ul;  // [k]: nr x L_k, user k -> BS
  std::vector<CMatrix> h_dl;  // [k]: L_k x nt, BS -> user k
  // [j][k]: L_j x L_k, user k -> user j. Diagonal entries are empty.
  std::vector<std::vector<CMatrix>> h_uu;
  cdouble beta0{0.0, 0.0};
  std::vector<cdouble> beta_clutter;
  std::vector<Eigen::Vector2d> user_positions;

  int num_users() const { return static_cast<int>(h_ul.size()); }
};

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// (1/sqrt(n)) exp(j 2 pi (d/lambda) i sin(theta)), i = 0..n-1.
CVector steering_vector(double theta, int n, double spacing_over_lambda);

// a_r(theta) a_t(theta)^H (nr x nt).
CMatrix steering_matrix(double theta, const Scenario& scenario);

// beta a_r(theta) a_t(theta)^H.
CMatrix reflection_channel(double theta, cdouble beta, const Scenario& scenario);

// One-way free-space power gain G (lambda / (4 pi d))^2, d floored at 1 m.
double path_gain(const Scenario& scenario, double distance);

// Two-way radar equation G^2 lambda^2 rcs / ((4 pi)^3 d^4).
double radar_gain(const Scenario& scenario, double range, double rcs);

ChannelSet generate_channels(const Scenario& scenario, Rng& rng);

// Convenience: channels for (scenario.seed, trial).
ChannelSet generate_channels(const Scenario& scenario, std::uint64_t trial);

}  // namespace flexd
