#include "flexd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flexd {

namespace {

constexpr double kMinLinkDistance = 1.0;

template <typename T>
void resize_replicating(std::vector<T>& v, int k, T fallback) {
  const T fill = v.empty() ? fallback : v.front();
  v.resize(static_cast<std::size_t>(k), fill);
}

[[noreturn]] void invalid(const std::string& msg) { throw std::invalid_argument("scenario: " + msg); }

bool angle_ok(double a) { return std::isfinite(a) && std::abs(a) <= kPi / 2.0 + 1e-12; }

// Circularly-symmetric complex Gaussian entries with per-entry variance `var`.
CMatrix rayleigh(int rows, int cols, double var, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(var / 2.0));
  CMatrix h(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      h(r, c) = cdouble(re, im);
    }
  }
  return h;
}

cdouble random_phase(double magnitude, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  return std::polar(magnitude, phase(rng));
}

}  // namespace

Scenario Scenario::with_defaults(int num_users) {
  Scenario s;
  s.user_antennas = {4};
  s.user_power_max = {dbm_to_watts(30.0)};
  s.noise_user = {dbm_to_watts(-90.0)};
  s.set_num_users(num_users);
  return s;
}

void Scenario::set_num_users(int k, bool reset_streams) {
  num_users = k;
  if (k <= 0) return;
  resize_replicating(user_antennas, k, 4);
  resize_replicating(user_power_max, k, dbm_to_watts(30.0));
  resize_replicating(noise_user, k, dbm_to_watts(-90.0));
  if (reset_streams || streams_ul.empty() || streams_dl.empty()) {
    streams_ul.assign(static_cast<std::size_t>(k), 0);
    streams_dl.assign(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < k; ++i) {
      streams_ul[i] = std::min(user_antennas[i], nr);
      streams_dl[i] = std::min(user_antennas[i], nt);
    }
  } else {
    resize_replicating(streams_ul, k, std::min(user_antennas[0], nr));
    resize_replicating(streams_dl, k, std::min(user_antennas[0], nt));
  }
}

void Scenario::validate() const {
  if (num_users < 1) invalid("num_users must be >= 1");
  if (nt < 1) invalid("nt must be >= 1");
  if (nr < 1) invalid("nr must be >= 1");
  const auto k = static_cast<std::size_t>(num_users);
  if (user_antennas.size() != k || streams_ul.size() != k || streams_dl.size() != k ||
      user_power_max.size() != k || noise_user.size() != k) {
    invalid("per-user vectors must have num_users entries");
  }
  for (std::size_t i = 0; i < k; ++i) {
    std::ostringstream who;
    who << "user " << i << ": ";
    if (user_antennas[i] < 1) invalid(who.str() + "user_antennas must be >= 1");
    if (streams_ul[i] < 1 || streams_ul[i] > std::min(user_antennas[i], nr))
      invalid(who.str() + "streams_ul must be in [1, min(L_k, nr)]");
    if (streams_dl[i] < 1 || streams_dl[i] > std::min(user_antennas[i], nt))
      invalid(who.str() + "streams_dl must be in [1, min(L_k, nt)]");
    if (!(user_power_max[i] > 0.0)) invalid(who.str() + "user_power_max must be > 0");
    if (!(noise_user[i] > 0.0)) invalid(who.str() + "noise_user must be > 0");
  }
  if (!(bs_power_max > 0.0)) invalid("bs_power_max must be > 0");
  if (!(scnr_min > 0.0)) invalid("scnr_min must be > 0");
  if (!(noise_bs > 0.0)) invalid("noise_bs must be > 0");
  if (!(wavelength > 0.0)) invalid("wavelength must be > 0");
  if (!(spacing_rx > 0.0) || !(spacing_tx > 0.0)) invalid("element spacing must be > 0");
  if (!(area_side > 0.0)) invalid("area_side must be > 0");
  if (!(antenna_gain > 0.0)) invalid("antenna_gain must be > 0");
  if (!(rcs > 0.0) || !(target_range > 0.0)) invalid("target rcs and range must be > 0");
  if (!angle_ok(target_angle)) invalid("target_angle must lie in [-pi/2, pi/2]");
  for (const auto& c : clutter) {
    if (!angle_ok(c.angle)) invalid("clutter angle must lie in [-pi/2, pi/2]");
    if (!(c.range > 0.0) || !(c.rcs > 0.0)) invalid("clutter range and rcs must be > 0");
  }
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

CVector steering_vector(double theta, int n, double spacing_over_lambda) {
  if (!std::isfinite(theta)) throw std::invalid_argument("steering_vector: non-finite angle");
  if (n < 1) throw std::invalid_argument("steering_vector: n must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double step = 2.0 * kPi * spacing_over_lambda * std::sin(theta);
  CVector a(n);
  for (int i = 0; i < n; ++i) a(i) = std::polar(scale, step * i);
  return a;
}

CMatrix steering_matrix(double theta, const Scenario& scenario) {
  const CVector ar = steering_vector(theta, scenario.nr, scenario.spacing_rx_over_lambda());
  const CVector at = steering_vector(theta, scenario.nt, scenario.spacing_tx_over_lambda());
  return ar * at.adjoint();
}

CMatrix reflection_channel(double theta, cdouble beta, const Scenario& scenario) {
  return beta * steering_matrix(theta, scenario);
}

double path_gain(const Scenario& scenario, double distance) {
  const double d = std::max(distance, kMinLinkDistance);
  const double ratio = scenario.wavelength / (4.0 * kPi * d);
  return scenario.antenna_gain * ratio * ratio;
}

double radar_gain(const Scenario& scenario, double range, double rcs) {
  const double d = std::max(range, kMinLinkDistance);
  const double g = scenario.antenna_gain;
  const double lam = scenario.wavelength;
  return g * g * lam * lam * rcs / (std::pow(4.0 * kPi, 3) * std::pow(d, 4));
}

ChannelSet generate_channels(const Scenario& scenario, Rng& rng) {
  scenario.validate();
  const int k = scenario.num_users;
  ChannelSet ch;
  ch.user_positions.resize(k);

  std::uniform_real_distribution<double> coord(0.0, scenario.area_side);
  const Eigen::Vector2d bs(scenario.bs_x, scenario.bs_y);
  for (int i = 0; i < k; ++i) {
    Eigen::Vector2d p;
    do {
      p = Eigen::Vector2d(coord(rng), coord(rng));
    } while ((p - bs).norm() < kMinLinkDistance);
    ch.user_positions[i] = p;
  }

  ch.h_ul.resize(k);
  ch.h_dl.resize(k);
  for (int i = 0; i < k; ++i) {
    const double g = path_gain(scenario, (ch.user_positions[i] - bs).norm());
    const int l = scenario.user_antennas[i];
    ch.h_ul[i] = rayleigh(scenario.nr, l, g, rng);
    ch.h_dl[i] = rayleigh(l, scenario.nt, g, rng);
  }

  // User-user links are reciprocal: H_{k,j} = H_{j,k}^T.
  ch.h_uu.assign(k, std::vector<CMatrix>(k));
  for (int j = 0; j < k; ++j) {
    for (int i = j + 1; i < k; ++i) {
      const double g = path_gain(scenario, (ch.user_positions[j] - ch.user_positions[i]).norm());
      ch.h_uu[j][i] = rayleigh(scenario.user_antennas[j], scenario.user_antennas[i], g, rng);
      ch.h_uu[i][j] = ch.h_uu[j][i].transpose();
    }
  }

  ch.beta0 = random_phase(std::sqrt(radar_gain(scenario, scenario.target_range, scenario.rcs)), rng);
  ch.beta_clutter.reserve(scenario.clutter.size());
  for (const auto& c : scenario.clutter) {
    ch.beta_clutter.push_back(random_phase(std::sqrt(radar_gain(scenario, c.range, c.rcs)), rng));
  }
  return ch;
}

ChannelSet generate_channels(const Scenario& scenario, std::uint64_t trial) {
  Rng rng(derive_seed(scenario.seed, trial));
  return generate_channels(scenario, rng);
}

}  // namespace flexd
