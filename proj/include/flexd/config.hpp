#pragma once

#include "flexd/scenario.hpp"
#include "flexd/wmmse_solver.hpp"

#include <cstdlib>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexd {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& msg) : std::runtime_error(compose(key, msg)), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  static std::string compose(const std::string& key, const std::string& msg) {
    return key.empty() || msg.find(key) != std::string::npos ? msg : key + ": " + msg;
  }
  std::string key_;
};

enum class SweepKind { kNone, kBsPower, kUserPower, kScnrFloor, kNumUsers };
enum class Scheme { kFlexd, kHd, kZf, kExhaustive };

// "none", "bs-power", "user-power", "scnr", "users" (underscored forms and
// "scnr-floor" / "num-users" also accepted when parsing).
std::string to_string(SweepKind kind);
SweepKind parse_sweep_kind(const std::string& text);
std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& text);
std::vector<Scheme> parse_schemes(const std::string& comma_list);

// Everything a run needs. Per-user lists hold either one entry (replicated to
// K users) or exactly K entries.
struct Config {
  int num_users = 4;
  int nt = 6;
  int nr = 4;
  std::vector<int> user_antennas{4};
  std::vector<int> streams_ul;  // empty: min(L_k, nr)
  std::vector<int> streams_dl;  // empty: min(L_k, nt)
  double area_side = 1000.0;
  double bs_x = 500.0;
  double bs_y = 500.0;
  double target_angle_deg = 45.0;
  double target_range = 40.0;
  double rcs = 1.0;
  std::vector<double> clutter_angles_deg{0.0, 90.0};
  std::vector<double> clutter_ranges{80.0};
  std::vector<double> clutter_rcs{1.0};
  double carrier_hz = 3.5e9;
  double spacing_rx_wavelengths = 0.5;
  double spacing_tx_wavelengths = 0.5;
  double bs_power_dbm = 30.0;
  std::vector<double> user_power_dbm{30.0};
  double scnr_min_db = 4.0;
  double noise_bs_dbm = -90.0;
  std::vector<double> noise_user_dbm{-90.0};
  double antenna_gain_db = 10.0;
  std::uint64_t seed = 1;

  SolverSettings solver;

  SweepKind sweep_kind = SweepKind::kNone;
  double sweep_from = 0.0;
  double sweep_to = 0.0;
  double sweep_step = 1.0;
  int trials = 200;
  std::vector<Scheme> schemes{Scheme::kFlexd, Scheme::kHd, Scheme::kZf};
  int threads = 0;  // 0: hardware concurrency
  bool common_channels = true;  // same channel draw for a trial at every sweep point
  bool record_wall_time = false;

  // Sets one dotted key from its textual value. Throws ConfigError.
  void set(const std::string& key, const std::string& value);
  // Current value of a key in the same textual form `set` accepts.
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Scenario with K users (K = num_users unless given); ConfigError on
  // per-user list length mismatches or invalid values.
  Scenario scenario(int k = -1) const;
  // Sweep points from/to/step ({0} for kind none); ConfigError when empty or
  // not strictly increasing.
  std::vector<double> sweep_values() const;
  // Full check: scenario, solver settings, sweep values, trials.
  void validate() const;

  std::string dump() const;  // "key = value" per line, in keys() order
};

// FLEXD_ + key upper-cased with '.' replaced by '_', e.g. FLEXD_SCENARIO_NT.
std::string env_name(const std::string& key);

// Flat text, one "key = value" per line; '#' starts a comment.
void apply_config_text(Config& config, std::istream& in, const std::string& source);
void load_config_file(Config& config, const std::string& path);
// `lookup` returns nullptr for unset variables (std::getenv by default).
void apply_env_overrides(Config& config,
                         const std::function<const char*(const char*)>& lookup = [](const char* n) {
                           return static_cast<const char*>(std::getenv(n));
                         });

}  // namespace flexd
