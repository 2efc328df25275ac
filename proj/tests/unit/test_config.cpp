#include "flexd/config.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace flexd;

TEST_CASE("config text sets keys and ignores comments") {
  Config c;
  std::istringstream in(
      "# comment\n"
      "scenario.num_users = 5   # trailing\n"
      "\n"
      "scenario.bs_power_dbm = 25.5\n"
      "scenario.user_power_dbm = 10, 11, 12, 13, 14\n"
      "solver.accelerate = false\n"
      "sweep.kind = bs-power\n"
      "sweep.schemes = flexd,hd\n");
  apply_config_text(c, in, "test");
  CHECK(c.num_users == 5);
  CHECK(c.bs_power_dbm == 25.5);
  CHECK(c.user_power_dbm.size() == 5);
  CHECK_FALSE(c.solver.accelerate);
  CHECK(c.sweep_kind == SweepKind::kBsPower);
  CHECK(c.schemes == std::vector<Scheme>{Scheme::kFlexd, Scheme::kHd});
  const Scenario sc = c.scenario();
  CHECK(sc.num_users == 5);
  CHECK(sc.user_power_max[4] == doctest::Approx(dbm_to_watts(14.0)));
  CHECK(sc.bs_power_max == doctest::Approx(dbm_to_watts(25.5)));
}

TEST_CASE("set and get round-trip every key") {
  const Config c;
  Config d;
  for (const auto& key : Config::keys()) d.set(key, c.get(key));
  CHECK(d.dump() == c.dump());
}

TEST_CASE("errors name the offending key") {
  Config c;
  auto key_of = [&](const std::string& key, const std::string& value) {
    try {
      c.set(key, value);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  CHECK(key_of("scenario.nt", "six") == "scenario.nt");
  CHECK(key_of("scenario.bogus", "1") == "scenario.bogus");
  CHECK(key_of("solver.accelerate", "maybe") == "solver.accelerate");

  std::istringstream in("scenario.nr\n");
  CHECK_THROWS_AS(apply_config_text(c, in, "test"), ConfigError);
}

TEST_CASE("per-user lists must have one or K entries") {
  Config c;
  c.num_users = 3;
  c.user_power_dbm = {20.0, 21.0};
  try {
    c.scenario();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "scenario.user_power_dbm");
  }
  c.user_power_dbm = {20.0};
  CHECK(c.scenario().user_power_max.size() == 3);
}

TEST_CASE("environment overrides use prefixed upper-case names") {
  CHECK(env_name("scenario.num_users") == "FLEXD_SCENARIO_NUM_USERS");
  std::map<std::string, std::string> env{{"FLEXD_SCENARIO_NUM_USERS", "6"}, {"FLEXD_SOLVER_DELTA", "100"}};
  Config c;
  apply_env_overrides(c, [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.num_users == 6);
  CHECK(c.solver.delta == 100.0);
  CHECK(c.nt == 6);
}

TEST_CASE("sweep values") {
  Config c;
  CHECK(c.sweep_values() == std::vector<double>{0.0});
  c.sweep_kind = SweepKind::kBsPower;
  c.sweep_from = 20.0;
  c.sweep_to = 40.0;
  c.sweep_step = 5.0;
  CHECK(c.sweep_values() == std::vector<double>{20.0, 25.0, 30.0, 35.0, 40.0});
  c.sweep_to = 41.0;
  CHECK(c.sweep_values().back() == 40.0);
  c.sweep_step = 0.0;
  CHECK_THROWS_AS(c.sweep_values(), ConfigError);
  c.sweep_step = 1.0;
  c.sweep_kind = SweepKind::kNumUsers;
  c.sweep_from = 1.0;
  CHECK_THROWS_AS(c.sweep_values(), ConfigError);
}

TEST_CASE("sweep kinds and schemes parse") {
  CHECK(parse_sweep_kind("scnr") == SweepKind::kScnrFloor);
  CHECK(parse_sweep_kind("users") == SweepKind::kNumUsers);
  CHECK(parse_sweep_kind("user_power") == SweepKind::kUserPower);
  CHECK(parse_scheme("exhaustive") == Scheme::kExhaustive);
  CHECK_THROWS(parse_sweep_kind("nope"));
  CHECK_THROWS(parse_schemes(""));
  CHECK(to_string(SweepKind::kBsPower) == "bs-power");
}

TEST_CASE("validation") {
  Config c;
  CHECK_NOTHROW(c.validate());
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.trials = 1;
  c.num_users = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
