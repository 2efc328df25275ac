#pragma once

#include "flexd/config.hpp"
#include "flexd/scenario.hpp"
#include "flexd/wmmse_solver.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace flexd {

struct SweepSpec {
  SweepKind kind = SweepKind::kNone;
  std::vector<double> values{0.0};  // dBm (powers), dB (SCNR floor) or user count
  int trials = 1;
  std::vector<Scheme> schemes{Scheme::kFlexd};
  Scenario base;
  SolverSettings settings;
  int threads = 0;  // 0: hardware concurrency
  bool common_channels = true;
  bool record_wall_time = false;

  static SweepSpec from_config(const Config& config);
  // Throws std::invalid_argument.
  void validate() const;
};

struct TrialRecord {
  SweepKind kind = SweepKind::kNone;
  double sweep_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;  // channel substream seed
  Scheme scheme = Scheme::kFlexd;
  double sum_rate_nats = 0.0;
  double scnr_db = 0.0;  // -inf when nothing is transmitted
  bool outage = true;
  int iterations = 0;
  double wall_time_ms = 0.0;
  std::string error;  // non-empty when the scheme aborted; not written to CSV
};

// Scenario for one sweep point (the swept quantity overwritten on `base`).
Scenario scenario_at(const SweepSpec& spec, double value);

// Channel substream seed. With common channels a trial sees the same draw at
// every sweep point.
std::uint64_t trial_seed(const SweepSpec& spec, std::size_t point, int trial);

// One scheme on one channel draw.
SolveResult run_scheme(Scheme scheme, const ChannelSet& channels, const Scenario& scenario,
                       const SolverSettings& settings);

// All (point, trial) pairs on a worker pool; every scheme of a pair sees the
// same ChannelSet. Output is sorted canonically (point, trial, scheme order).
std::vector<TrialRecord> run_sweep(const SweepSpec& spec,
                                   const std::function<void(std::size_t done, std::size_t total)>& progress = {});

// 9 significant digits in fixed notation ("0.000000000" for zero).
std::string format_float(double value);

inline constexpr const char* kCsvHeader =
    "sweep_kind,sweep_value,trial,seed,scheme,sum_rate_nats,scnr_db,outage,iterations,wall_time_ms";

std::string csv_row(const TrialRecord& record);
void write_records(const std::vector<TrialRecord>& records, std::ostream& out);
// Throws std::invalid_argument for an empty list, std::runtime_error naming
// the path on I/O failure.
void write_records(const std::vector<TrialRecord>& records, const std::string& path);

std::vector<TrialRecord> parse_records(std::istream& in);
std::vector<TrialRecord> read_records(const std::string& path);

struct SummaryRow {
  SweepKind kind = SweepKind::kNone;
  double sweep_value = 0.0;
  Scheme scheme = Scheme::kFlexd;
  int trials = 0;
  double mean_rate = 0.0;  // outages count as zero
  double std_error = 0.0;
  double outage_fraction = 0.0;
  double mean_iterations = 0.0;
  int errors = 0;
};

// One row per (sweep value, scheme), in record order.
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);

// Mean rate of `scheme` at each sweep value, in increasing sweep order.
std::vector<double> mean_rates(const std::vector<SummaryRow>& rows, Scheme scheme);

}  // namespace flexd
