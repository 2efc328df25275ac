#include "flexd/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

namespace flexd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError(key, "expected a finite number, got '" + text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < -1000000000LL || v > 1000000000LL) throw ConfigError(key, "integer out of range: " + text);
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(key, "expected a non-negative 64-bit integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& key, const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.empty() || std::any_of(out.begin(), out.end(), [](const std::string& s) { return s.empty(); }))
    throw ConfigError(key, "expected a comma-separated list, got '" + text + "'");
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(key, text)) out.push_back(parse_double(key, s));
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& s : split_list(key, text)) out.push_back(parse_int(key, s));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::string fmt_schemes(const std::vector<Scheme>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i > 0 ? "," : "") + to_string(v[i]);
  return out;
}

struct KeyHandler {
  std::function<void(Config&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const Config&)> get;
};

#define FLEXD_DOUBLE(name, field)                                                                       \
  {                                                                                                     \
    name, {                                                                                             \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); },     \
          [](const Config& c) { return fmt(c.field); }                                                  \
    }                                                                                                   \
  }
#define FLEXD_INT(name, field)                                                                          \
  {                                                                                                     \
    name, {                                                                                             \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_int(k, v); },        \
          [](const Config& c) { return std::to_string(c.field); }                                       \
    }                                                                                                   \
  }
#define FLEXD_BOOL(name, field)                                                                         \
  {                                                                                                     \
    name, {                                                                                             \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); },       \
          [](const Config& c) { return std::string(c.field ? "true" : "false"); }                       \
    }                                                                                                   \
  }
#define FLEXD_DOUBLES(name, field)                                                                      \
  {                                                                                                     \
    name, {                                                                                             \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_double_list(k, v); }, \
          [](const Config& c) { return fmt_list(c.field); }                                             \
    }                                                                                                   \
  }
#define FLEXD_INTS(name, field)                                                                         \
  {                                                                                                     \
    name, {                                                                                             \
      [](Config& c, const std::string& k, const std::string& v) { c.field = parse_int_list(k, v); },   \
          [](const Config& c) { return fmt_list(c.field); }                                             \
    }                                                                                                   \
  }

// Ordered so that dump() reads top-down like a config file.
const std::vector<std::pair<std::string, KeyHandler>>& key_table() {
  static const std::vector<std::pair<std::string, KeyHandler>> table = {
      FLEXD_INT("scenario.num_users", num_users),
      FLEXD_INT("scenario.nt", nt),
      FLEXD_INT("scenario.nr", nr),
      FLEXD_INTS("scenario.user_antennas", user_antennas),
      {"scenario.streams_ul",
       {[](Config& c, const std::string& k, const std::string& v) {
          c.streams_ul = trim(v) == "auto" ? std::vector<int>{} : parse_int_list(k, v);
        },
        [](const Config& c) { return c.streams_ul.empty() ? std::string("auto") : fmt_list(c.streams_ul); }}},
      {"scenario.streams_dl",
       {[](Config& c, const std::string& k, const std::string& v) {
          c.streams_dl = trim(v) == "auto" ? std::vector<int>{} : parse_int_list(k, v);
        },
        [](const Config& c) { return c.streams_dl.empty() ? std::string("auto") : fmt_list(c.streams_dl); }}},
      FLEXD_DOUBLE("scenario.area_side", area_side),
      FLEXD_DOUBLE("scenario.bs_x", bs_x),
      FLEXD_DOUBLE("scenario.bs_y", bs_y),
      FLEXD_DOUBLE("scenario.target_angle_deg", target_angle_deg),
      FLEXD_DOUBLE("scenario.target_range", target_range),
      FLEXD_DOUBLE("scenario.rcs", rcs),
      FLEXD_DOUBLES("scenario.clutter_angles_deg", clutter_angles_deg),
      FLEXD_DOUBLES("scenario.clutter_ranges", clutter_ranges),
      FLEXD_DOUBLES("scenario.clutter_rcs", clutter_rcs),
      FLEXD_DOUBLE("scenario.carrier_hz", carrier_hz),
      FLEXD_DOUBLE("scenario.spacing_rx_wavelengths", spacing_rx_wavelengths),
      FLEXD_DOUBLE("scenario.spacing_tx_wavelengths", spacing_tx_wavelengths),
      FLEXD_DOUBLE("scenario.bs_power_dbm", bs_power_dbm),
      FLEXD_DOUBLES("scenario.user_power_dbm", user_power_dbm),
      FLEXD_DOUBLE("scenario.scnr_min_db", scnr_min_db),
      FLEXD_DOUBLE("scenario.noise_bs_dbm", noise_bs_dbm),
      FLEXD_DOUBLES("scenario.noise_user_dbm", noise_user_dbm),
      FLEXD_DOUBLE("scenario.antenna_gain_db", antenna_gain_db),
      {"scenario.seed",
       {[](Config& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
        [](const Config& c) { return std::to_string(c.seed); }}},
      FLEXD_DOUBLE("solver.inner_tol", solver.inner_tol),
      FLEXD_INT("solver.max_inner_iters", solver.max_inner_iters),
      FLEXD_DOUBLE("solver.multiplier_tol", solver.multiplier_tol),
      FLEXD_INT("solver.max_multiplier_iters", solver.max_multiplier_iters),
      FLEXD_DOUBLE("solver.mu_cap", solver.mu_cap),
      FLEXD_DOUBLE("solver.delta", solver.delta),
      FLEXD_INT("solver.max_delta_escalations", solver.max_delta_escalations),
      FLEXD_BOOL("solver.enforce_radar", solver.enforce_radar),
      FLEXD_BOOL("solver.accelerate", solver.accelerate),
      {"sweep.kind",
       {[](Config& c, const std::string& k, const std::string& v) {
          try {
            c.sweep_kind = parse_sweep_kind(v);
          } catch (const ConfigError& e) {
            throw ConfigError(k, e.what());
          }
        },
        [](const Config& c) { return to_string(c.sweep_kind); }}},
      FLEXD_DOUBLE("sweep.from", sweep_from),
      FLEXD_DOUBLE("sweep.to", sweep_to),
      FLEXD_DOUBLE("sweep.step", sweep_step),
      FLEXD_INT("sweep.trials", trials),
      {"sweep.schemes",
       {[](Config& c, const std::string& k, const std::string& v) {
          try {
            c.schemes = parse_schemes(v);
          } catch (const ConfigError& e) {
            throw ConfigError(k, e.what());
          }
        },
        [](const Config& c) { return fmt_schemes(c.schemes); }}},
      FLEXD_INT("sweep.threads", threads),
      FLEXD_BOOL("sweep.common_channels", common_channels),
      FLEXD_BOOL("sweep.record_wall_time", record_wall_time),
  };
  return table;
}

#undef FLEXD_DOUBLE
#undef FLEXD_INT
#undef FLEXD_BOOL
#undef FLEXD_DOUBLES
#undef FLEXD_INTS

const KeyHandler& handler(const std::string& key) {
  static const std::map<std::string, const KeyHandler*> index = [] {
    std::map<std::string, const KeyHandler*> m;
    for (const auto& [name, h] : key_table()) m[name] = &h;
    return m;
  }();
  const auto it = index.find(key);
  if (it == index.end()) throw ConfigError(key, "unknown configuration key");
  return *it->second;
}

template <typename T>
std::vector<T> per_user(const std::string& key, const std::vector<T>& v, int k) {
  if (v.size() == 1) return std::vector<T>(static_cast<std::size_t>(k), v.front());
  if (v.size() == static_cast<std::size_t>(k)) return v;
  throw ConfigError(key, "needs 1 or " + std::to_string(k) + " entries, got " + std::to_string(v.size()));
}

}  // namespace

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::kNone: return "none";
    case SweepKind::kBsPower: return "bs-power";
    case SweepKind::kUserPower: return "user-power";
    case SweepKind::kScnrFloor: return "scnr";
    case SweepKind::kNumUsers: return "users";
  }
  return "none";
}

SweepKind parse_sweep_kind(const std::string& text) {
  std::string t = lower(trim(text));
  std::replace(t.begin(), t.end(), '_', '-');
  if (t == "none") return SweepKind::kNone;
  if (t == "bs-power") return SweepKind::kBsPower;
  if (t == "user-power") return SweepKind::kUserPower;
  if (t == "scnr" || t == "scnr-floor") return SweepKind::kScnrFloor;
  if (t == "users" || t == "num-users") return SweepKind::kNumUsers;
  throw ConfigError("", "unknown sweep kind '" + text + "' (none, bs-power, user-power, scnr, users)");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kFlexd: return "flexd";
    case Scheme::kHd: return "hd";
    case Scheme::kZf: return "zf";
    case Scheme::kExhaustive: return "exhaustive";
  }
  return "flexd";
}

Scheme parse_scheme(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "flexd") return Scheme::kFlexd;
  if (t == "hd") return Scheme::kHd;
  if (t == "zf") return Scheme::kZf;
  if (t == "exhaustive") return Scheme::kExhaustive;
  throw ConfigError("", "unknown scheme '" + text + "' (flexd, hd, zf, exhaustive)");
}

std::vector<Scheme> parse_schemes(const std::string& comma_list) {
  std::vector<Scheme> out;
  for (const auto& s : split_list("", comma_list)) {
    const Scheme sc = parse_scheme(s);
    if (std::find(out.begin(), out.end(), sc) != out.end()) throw ConfigError("", "duplicate scheme '" + s + "'");
    out.push_back(sc);
  }
  return out;
}

void Config::set(const std::string& key, const std::string& value) { handler(key).set(*this, key, value); }

std::string Config::get(const std::string& key) const { return handler(key).get(*this); }

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, h] : key_table()) n.push_back(name);
    return n;
  }();
  return names;
}

Scenario Config::scenario(int k) const {
  if (k < 0) k = num_users;
  if (k < 1) throw ConfigError("scenario.num_users", "must be >= 1");
  Scenario s;
  s.num_users = k;
  s.nt = nt;
  s.nr = nr;
  s.user_antennas = per_user("scenario.user_antennas", user_antennas, k);
  s.area_side = area_side;
  s.bs_x = bs_x;
  s.bs_y = bs_y;
  s.target_angle = deg_to_rad(target_angle_deg);
  s.target_range = target_range;
  s.rcs = rcs;
  const std::size_t m = clutter_angles_deg.size();
  const auto ranges = per_user("scenario.clutter_ranges", clutter_ranges, static_cast<int>(m));
  const auto rcss = per_user("scenario.clutter_rcs", clutter_rcs, static_cast<int>(m));
  s.clutter.clear();
  for (std::size_t i = 0; i < m; ++i) s.clutter.push_back({deg_to_rad(clutter_angles_deg[i]), ranges[i], rcss[i]});
  if (!(carrier_hz > 0.0)) throw ConfigError("scenario.carrier_hz", "must be > 0");
  s.wavelength = kSpeedOfLight / carrier_hz;
  s.spacing_rx = spacing_rx_wavelengths * s.wavelength;
  s.spacing_tx = spacing_tx_wavelengths * s.wavelength;
  s.bs_power_max = dbm_to_watts(bs_power_dbm);
  s.user_power_max.clear();
  for (double p : per_user("scenario.user_power_dbm", user_power_dbm, k)) s.user_power_max.push_back(dbm_to_watts(p));
  s.scnr_min = db_to_linear(scnr_min_db);
  s.noise_bs = dbm_to_watts(noise_bs_dbm);
  s.noise_user.clear();
  for (double n : per_user("scenario.noise_user_dbm", noise_user_dbm, k)) s.noise_user.push_back(dbm_to_watts(n));
  s.antenna_gain = db_to_linear(antenna_gain_db);
  s.seed = seed;
  s.set_num_users(k, /*reset_streams=*/true);
  if (!streams_ul.empty()) s.streams_ul = per_user("scenario.streams_ul", streams_ul, k);
  if (!streams_dl.empty()) s.streams_dl = per_user("scenario.streams_dl", streams_dl, k);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", e.what());
  }
  return s;
}

std::vector<double> Config::sweep_values() const {
  if (sweep_kind == SweepKind::kNone) return {0.0};
  if (!(sweep_step > 0.0)) throw ConfigError("sweep.step", "must be > 0");
  if (sweep_to < sweep_from) throw ConfigError("sweep.to", "must be >= sweep.from");
  std::vector<double> values;
  const double span = (sweep_to - sweep_from) / sweep_step;
  const long long n = static_cast<long long>(std::floor(span + 1e-9));
  if (n > 100000) throw ConfigError("sweep.step", "too many sweep points");
  for (long long i = 0; i <= n; ++i) values.push_back(sweep_from + static_cast<double>(i) * sweep_step);
  if (sweep_kind == SweepKind::kNumUsers) {
    for (double v : values)
      if (v != std::round(v) || v < 2.0) throw ConfigError("sweep.from", "user counts must be integers >= 2");
  }
  return values;
}

void Config::validate() const {
  const auto values = sweep_values();
  if (sweep_kind == SweepKind::kNumUsers) {
    for (double v : values) scenario(static_cast<int>(v));
  } else {
    const Scenario s = scenario();
    if (s.num_users < 2) throw ConfigError("scenario.num_users", "schemes need at least 2 users");
  }
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("solver", e.what());
  }
  if (trials < 1) throw ConfigError("sweep.trials", "must be >= 1");
  if (threads < 0) throw ConfigError("sweep.threads", "must be >= 0");
  if (schemes.empty()) throw ConfigError("sweep.schemes", "must not be empty");
  const bool exhaustive = std::find(schemes.begin(), schemes.end(), Scheme::kExhaustive) != schemes.end();
  if (exhaustive) {
    const int k_max = sweep_kind == SweepKind::kNumUsers ? static_cast<int>(values.back()) : num_users;
    if (k_max > 12) throw ConfigError("sweep.schemes", "exhaustive search is limited to K <= 12");
  }
}

std::string Config::dump() const {
  std::ostringstream os;
  for (const auto& key : keys()) os << key << " = " << get(key) << "\n";
  return os.str();
}

std::string env_name(const std::string& key) {
  std::string out = "FLEXD_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void apply_config_text(Config& config, std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      config.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.key(), source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void load_config_file(Config& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  apply_config_text(config, in, path);
}

void apply_env_overrides(Config& config, const std::function<const char*(const char*)>& lookup) {
  for (const auto& key : Config::keys()) {
    const std::string name = env_name(key);
    const char* value = lookup(name.c_str());
    if (value == nullptr) continue;
    try {
      config.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key, "from " + name + ": " + e.what());
    }
  }
}

}  // namespace flexd
