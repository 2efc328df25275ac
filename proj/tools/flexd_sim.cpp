// flexd_sim: Monte Carlo driver for the FlexD-ISAC solver.
//
//   flexd_sim run      --config <file> --out <csv>
//   flexd_sim sweep    --kind {bs-power|user-power|scnr|users} --from <v> --to <v> --step <v>
//                      --trials N --schemes flexd,hd,zf --out <csv> [--config <file>]
//   flexd_sim validate --config <file>
//   flexd_sim trace    --config <file> [--trial N] [--dl 0,2] [--out <csv>]
//
// Any config key can be overridden through the environment, e.g.
// FLEXD_SCENARIO_NUM_USERS=5. Exit codes: 0 ok, 1 config error, 2 runtime or
// solver invariant failure.

#include "flexd/config.hpp"
#include "flexd/partition_search.hpp"
#include "flexd/sweep.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace {

using namespace flexd;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

Config load(const std::string& path) {
  Config config;
  if (!path.empty()) load_config_file(config, path);
  apply_env_overrides(config);
  return config;
}

void print_summary(const std::vector<TrialRecord>& records) {
  std::printf("%-10s %-11s %7s %14s %10s %8s %9s\n", "sweep", "value", "scheme", "mean_rate", "std_err", "outage",
              "mean_its");
  for (const auto& row : summarize(records)) {
    std::printf("%-10s %-11.4g %7s %14.6f %10.6f %8.3f %9.1f\n", to_string(row.kind).c_str(), row.sweep_value,
                to_string(row.scheme).c_str(), row.mean_rate, row.std_error, row.outage_fraction, row.mean_iterations);
  }
}

int execute(const Config& config, const std::string& out_path, bool progress) {
  const SweepSpec spec = SweepSpec::from_config(config);
  std::function<void(std::size_t, std::size_t)> report;
  if (progress) {
    report = [](std::size_t done, std::size_t total) {
      std::fprintf(stderr, "\r%zu/%zu trials", done, total);
      if (done == total) std::fprintf(stderr, "\n");
    };
  }
  const auto records = run_sweep(spec, report);
  write_records(records, out_path);
  print_summary(records);
  int failures = 0;
  for (const auto& r : records) {
    if (r.error.empty()) continue;
    std::fprintf(stderr, "error: %s\n", r.error.c_str());
    ++failures;
  }
  if (failures > 0) {
    std::fprintf(stderr, "%d scheme run(s) aborted; see diagnostics above\n", failures);
    return kExitRuntime;
  }
  return kExitOk;
}

int trace(const Config& config, int trial, const std::string& dl_list, const std::string& out_path) {
  config.validate();
  const Scenario sc = config.scenario();
  const ChannelSet ch = generate_channels(sc, static_cast<std::uint64_t>(trial));
  Partition part;
  if (dl_list.empty()) {
    part = pattern_search(ch, sc, config.solver).partition;
  } else {
    std::vector<int> users;
    std::stringstream ss(dl_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      int k = -1;
      try {
        k = std::stoi(item);
      } catch (const std::exception&) {
        throw ConfigError("--dl", "bad user index '" + item + "'");
      }
      if (k < 0 || k >= sc.num_users) throw ConfigError("--dl", "user index out of range: " + item);
      users.push_back(k);
    }
    part = Partition::from_dl_users(sc.num_users, users);
  }
  const SolveResult r = solve_partition(ch, part, sc, config.solver);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open '" + out_path + "' for writing");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "iter,sum_rate,scnr,bs_power,max_user_power\n";
  for (const auto& rec : r.log) {
    out << rec.iter << ',' << format_float(rec.sum_rate) << ',' << format_float(rec.scnr) << ','
        << format_float(rec.bs_power) << ',' << format_float(rec.max_user_power) << '\n';
  }
  std::fprintf(stderr, "partition %s: %s, rate %.6f nats, scnr %.3f dB, %d iterations, converged %s\n",
               part.to_string().c_str(), r.outage ? "outage" : "feasible", r.sum_rate,
               r.scnr_achieved > 0.0 ? linear_to_db(r.scnr_achieved) : -std::numeric_limits<double>::infinity(), r.iterations,
               r.converged ? "yes" : "no");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FlexD-ISAC Monte Carlo simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  int threads = -1;
  bool progress = false;

  auto* run = app.add_subcommand("run", "Run the sweep described by a config file");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out_path, "Output CSV")->required();
  run->add_option("--threads", threads, "Worker threads (0: all cores)");
  run->add_flag("--progress", progress, "Report progress on stderr");

  std::string kind;
  double from = 0.0, to = 0.0, step = 1.0;
  int trials = 0;
  std::string schemes = "flexd,hd,zf";
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter");
  sweep->add_option("--kind", kind, "bs-power | user-power | scnr | users")->required();
  sweep->add_option("--from", from, "First sweep value")->required();
  sweep->add_option("--to", to, "Last sweep value")->required();
  sweep->add_option("--step", step, "Sweep step")->required();
  sweep->add_option("--trials", trials, "Trials per sweep value")->required();
  sweep->add_option("--schemes", schemes, "Comma list of flexd, hd, zf, exhaustive");
  sweep->add_option("--out", out_path, "Output CSV")->required();
  sweep->add_option("--config", config_path, "Base config file");
  sweep->add_option("--threads", threads, "Worker threads (0: all cores)");
  sweep->add_flag("--progress", progress, "Report progress on stderr");

  auto* validate = app.add_subcommand("validate", "Check a config file and print the resolved settings");
  validate->add_option("--config", config_path, "Config file")->required();

  int trial = 0;
  std::string dl_list;
  auto* trace_cmd = app.add_subcommand("trace", "Dump the inner-loop iterations of one trial");
  trace_cmd->add_option("--config", config_path, "Config file")->required();
  trace_cmd->add_option("--trial", trial, "Trial index");
  trace_cmd->add_option("--dl", dl_list, "DL user set, e.g. 0,2 (default: pattern search result)");
  trace_cmd->add_option("--out", out_path, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Config config = load(config_path);
    if (threads >= 0) config.threads = threads;
    if (*validate) {
      config.validate();
      const SweepSpec spec = SweepSpec::from_config(config);
      spec.validate();
      generate_channels(spec.base, std::uint64_t{0});
      std::cout << config.dump();
      std::fprintf(stderr, "config ok: %zu sweep value(s), %d trial(s)\n", spec.values.size(), spec.trials);
      return kExitOk;
    }
    if (*trace_cmd) return trace(config, trial, dl_list, out_path);
    if (*sweep) {
      config.sweep_kind = parse_sweep_kind(kind);
      config.sweep_from = from;
      config.sweep_to = to;
      config.sweep_step = step;
      config.trials = trials;
      config.schemes = parse_schemes(schemes);
    }
    return execute(config, out_path, progress);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
