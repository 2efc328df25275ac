#include "flexd/sweep.hpp"

#include "flexd/baselines.hpp"
#include "flexd/partition_search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace flexd {

namespace {

int scheme_rank(Scheme s) { return static_cast<int>(s); }

double to_db_or_neg_inf(double linear) {
  return linear > 0.0 ? linear_to_db(linear) : -std::numeric_limits<double>::infinity();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell_double(const std::string& cell, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size())
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad number '" + cell + "'");
  return v;
}

long long parse_cell_integer(const std::string& cell, int line_no) {
  char* end = nullptr;
  const long long v = std::strtoll(cell.c_str(), &end, 10);
  if (cell.empty() || end != cell.c_str() + cell.size())
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad integer '" + cell + "'");
  return v;
}

}  // namespace

SweepSpec SweepSpec::from_config(const Config& config) {
  config.validate();
  SweepSpec spec;
  spec.kind = config.sweep_kind;
  spec.values = config.sweep_values();
  spec.trials = config.trials;
  spec.schemes = config.schemes;
  spec.base = config.scenario();
  spec.settings = config.solver;
  spec.threads = config.threads;
  spec.common_channels = config.common_channels;
  spec.record_wall_time = config.record_wall_time;
  return spec;
}

void SweepSpec::validate() const {
  if (values.empty()) throw std::invalid_argument("sweep: no sweep values");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw std::invalid_argument("sweep: values must be strictly increasing");
  if (trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  if (schemes.empty()) throw std::invalid_argument("sweep: no schemes");
  if (threads < 0) throw std::invalid_argument("sweep: threads must be >= 0");
  settings.validate();
  for (double v : values) {
    const Scenario s = scenario_at(*this, v);
    s.validate();
    if (s.num_users < 2) throw std::invalid_argument("sweep: schemes need at least 2 users");
    const bool exhaustive = std::find(schemes.begin(), schemes.end(), Scheme::kExhaustive) != schemes.end();
    if (exhaustive && s.num_users > kMaxExhaustiveUsers)
      throw std::invalid_argument("sweep: exhaustive search is limited to K <= 12");
  }
}

Scenario scenario_at(const SweepSpec& spec, double value) {
  Scenario s = spec.base;
  switch (spec.kind) {
    case SweepKind::kNone:
      break;
    case SweepKind::kBsPower:
      s.bs_power_max = dbm_to_watts(value);
      break;
    case SweepKind::kUserPower:
      std::fill(s.user_power_max.begin(), s.user_power_max.end(), dbm_to_watts(value));
      break;
    case SweepKind::kScnrFloor:
      s.scnr_min = db_to_linear(value);
      break;
    case SweepKind::kNumUsers:
      if (value != std::round(value) || value < 1.0) throw std::invalid_argument("sweep: user count must be integral");
      s.set_num_users(static_cast<int>(value), /*reset_streams=*/false);
      break;
  }
  return s;
}

std::uint64_t trial_seed(const SweepSpec& spec, std::size_t point, int trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  return spec.common_channels ? derive_seed(spec.base.seed, t) : derive_seed(spec.base.seed, t, point + 1);
}

SolveResult run_scheme(Scheme scheme, const ChannelSet& channels, const Scenario& scenario,
                       const SolverSettings& settings) {
  switch (scheme) {
    case Scheme::kFlexd:
      return pattern_search(channels, scenario, settings);
    case Scheme::kExhaustive:
      return exhaustive_search(channels, scenario, settings);
    case Scheme::kHd:
      return hd_solve(channels, scenario, settings);
    case Scheme::kZf:
      return zf_solve(channels, scenario, settings);
  }
  throw std::invalid_argument("run_scheme: unknown scheme");
}

std::vector<TrialRecord> run_sweep(const SweepSpec& spec,
                                   const std::function<void(std::size_t, std::size_t)>& progress) {
  spec.validate();
  const std::size_t n_points = spec.values.size();
  const std::size_t n_tasks = n_points * static_cast<std::size_t>(spec.trials);
  std::vector<std::vector<TrialRecord>> slots(n_tasks);

  auto run_task = [&](std::size_t task) {
    const std::size_t point = task / static_cast<std::size_t>(spec.trials);
    const int trial = static_cast<int>(task % static_cast<std::size_t>(spec.trials));
    const double value = spec.values[point];
    const Scenario sc = scenario_at(spec, value);
    const std::uint64_t seed = trial_seed(spec, point, trial);
    Rng rng(seed);
    const ChannelSet channels = generate_channels(sc, rng);

    for (Scheme scheme : spec.schemes) {
      TrialRecord rec;
      rec.kind = spec.kind;
      rec.sweep_value = value;
      rec.trial = trial;
      rec.seed = seed;
      rec.scheme = scheme;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const SolveResult r = run_scheme(scheme, channels, sc, spec.settings);
        rec.outage = r.outage || !r.feasible;
        rec.sum_rate_nats = rec.outage ? 0.0 : r.sum_rate;
        rec.scnr_db = to_db_or_neg_inf(r.scnr_achieved);
        rec.iterations = r.iterations;
      } catch (const std::exception& e) {
        rec.outage = true;
        rec.sum_rate_nats = 0.0;
        rec.scnr_db = -std::numeric_limits<double>::infinity();
        rec.error = std::string(to_string(scheme)) + " at " + format_float(value) + ", trial " +
                    std::to_string(trial) + ": " + e.what();
      }
      if (spec.record_wall_time)
        rec.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      slots[task].push_back(std::move(rec));
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      std::min<std::size_t>(n_tasks, spec.threads > 0 ? static_cast<std::size_t>(spec.threads) : hw);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  std::size_t done = 0;
  auto worker = [&] {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      run_task(task);
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(++done, n_tasks);
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<TrialRecord> out;
  out.reserve(n_tasks * spec.schemes.size());
  for (auto& slot : slots)
    for (auto& r : slot) out.push_back(std::move(r));
  std::stable_sort(out.begin(), out.end(), [](const TrialRecord& a, const TrialRecord& b) {
    if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
    if (a.trial != b.trial) return a.trial < b.trial;
    return scheme_rank(a.scheme) < scheme_rank(b.scheme);
  });
  return out;
}

std::string format_float(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0.0 ? "inf" : "-inf";
  if (value == 0.0) return "0.000000000";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.8e", value);
  const int exponent = std::atoi(std::strchr(buf, 'e') + 1);
  if (exponent > 8) return buf;
  std::snprintf(buf, sizeof buf, "%.*f", 8 - exponent, value);
  return buf;
}

std::string csv_row(const TrialRecord& r) {
  std::ostringstream os;
  os << to_string(r.kind) << ',' << format_float(r.sweep_value) << ',' << r.trial << ',' << r.seed << ','
     << to_string(r.scheme) << ',' << format_float(r.sum_rate_nats) << ',' << format_float(r.scnr_db) << ','
     << (r.outage ? 1 : 0) << ',' << r.iterations << ',' << format_float(r.wall_time_ms);
  return os.str();
}

void write_records(const std::vector<TrialRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
}

void write_records(const std::vector<TrialRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("write_records: no records to write");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_records: cannot open '" + path + "' for writing");
  write_records(records, out);
  out.flush();
  if (!out) throw std::runtime_error("write_records: write to '" + path + "' failed");
}

std::vector<TrialRecord> parse_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw std::runtime_error("csv: unexpected header '" + line + "'");
  std::vector<TrialRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 10)
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 10 fields, got " +
                               std::to_string(cells.size()));
    TrialRecord r;
    try {
      r.kind = parse_sweep_kind(cells[0]);
      r.scheme = parse_scheme(cells[4]);
    } catch (const ConfigError& e) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": " + e.what());
    }
    r.sweep_value = parse_cell_double(cells[1], line_no);
    r.trial = static_cast<int>(parse_cell_integer(cells[2], line_no));
    char* end = nullptr;
    r.seed = std::strtoull(cells[3].c_str(), &end, 10);
    if (cells[3].empty() || end != cells[3].c_str() + cells[3].size())
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad seed '" + cells[3] + "'");
    r.sum_rate_nats = parse_cell_double(cells[5], line_no);
    r.scnr_db = parse_cell_double(cells[6], line_no);
    r.outage = parse_cell_integer(cells[7], line_no) != 0;
    r.iterations = static_cast<int>(parse_cell_integer(cells[8], line_no));
    r.wall_time_ms = parse_cell_double(cells[9], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrialRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_records: cannot open '" + path + "'");
  return parse_records(in);
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  std::vector<SummaryRow> rows;
  std::map<std::pair<double, int>, std::size_t> index;
  std::vector<std::vector<double>> rates;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.sweep_value, scheme_rank(r.scheme));
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      SummaryRow row;
      row.kind = r.kind;
      row.sweep_value = r.sweep_value;
      row.scheme = r.scheme;
      rows.push_back(row);
      rates.emplace_back();
    }
    SummaryRow& row = rows[it->second];
    ++row.trials;
    rates[it->second].push_back(r.outage ? 0.0 : r.sum_rate_nats);
    if (r.outage) row.outage_fraction += 1.0;
    row.mean_iterations += r.iterations;
    if (!r.error.empty()) ++row.errors;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    SummaryRow& row = rows[i];
    const auto& v = rates[i];
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    row.mean_rate = mean;
    row.std_error = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    row.outage_fraction /= n;
    row.mean_iterations /= n;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
    return scheme_rank(a.scheme) < scheme_rank(b.scheme);
  });
  return rows;
}

std::vector<double> mean_rates(const std::vector<SummaryRow>& rows, Scheme scheme) {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.scheme == scheme) out.push_back(r.mean_rate);
  return out;
}

}  // namespace flexd
