#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cnmt/netsim.hpp"
#include "cnmt/policy.hpp"
#include "cnmt/workload.hpp"

namespace cnmt {

/// Closed loop: each request is issued when the previous one completes.
struct SerialMode {};

/// Open loop with exponential inter-arrival times and one FIFO queue per
/// device. Charged latency includes queueing.
struct PoissonMode {
  double rate = 10.0;  ///< requests per second
  std::uint64_t seed = 1;
};

using ArrivalMode = std::variant<SerialMode, PoissonMode>;

struct SimConfig {
  Corpus corpus;
  DeviceOracle edge_oracle;
  DeviceOracle cloud_oracle;
  RttTrace trace = RttTrace::constant(50.0);
  BandwidthModel bandwidth;
  PolicyConfig policy;
  TxEstimator estimator_init;
  ArrivalMode mode = SerialMode{};
  double probe_interval_s = 0.0;  ///< synthetic RTT probe period; 0 disables
};

struct RequestRecord {
  std::string request_id;
  int n = 0;
  Decision decision;
  double realized_edge = 0.0;        ///< ms
  double realized_cloud_exec = 0.0;  ///< ms
  double realized_tx = 0.0;          ///< ms
  double queue_delay = 0.0;          ///< ms, zero in serial mode
  double charged = 0.0;              ///< ms
  double clock_at_dispatch = 0.0;    ///< s
  double rtt_estimate = 0.0;         ///< ms, estimator value the decision used
};

/// Latency of the path the record's decision took, excluding queueing.
inline double path_latency(const RequestRecord& r) {
  return r.decision.target == Target::Edge ? r.realized_edge
                                           : r.realized_tx + r.realized_cloud_exec;
}

struct SeedProvenance {
  std::uint64_t edge_seed = 0;
  std::uint64_t cloud_seed = 0;
  std::uint64_t arrival_seed = 0;
};

struct RunResult {
  std::vector<RequestRecord> records;
  double total = 0.0;  ///< ms
  PolicyKind policy = PolicyKind::CNmt;
  SeedProvenance seeds;
  std::string trace_id;
};

/// Throws ConfigError when the policy cannot run online (Oracle) or its
/// parameters are inconsistent.
RunResult run_simulation(const SimConfig& cfg);

/// Re-routes every record to its faster realized path.
RunResult oracle_from_records(std::span<const RequestRecord> records);

/// 100 * (t_policy - t_ref) / t_ref.
inline double percent_variation(double t_policy, double t_ref) {
  return 100.0 * (t_policy - t_ref) / t_ref;
}

struct ReportRow {
  PolicyKind policy = PolicyKind::CNmt;
  double total = 0.0;
  double vs_edge = 0.0;    ///< percent vs StaticEdge
  double vs_cloud = 0.0;   ///< percent vs StaticCloud
  double vs_oracle = 0.0;  ///< percent vs Oracle
  std::size_t edge_count = 0;
  std::size_t cloud_count = 0;
};

struct Report {
  std::string trace_id;
  std::string language_pair;
  std::size_t request_count = 0;
  std::string mode;  ///< "serial" or "poisson"
  std::string note;
  std::vector<ReportRow> rows;  ///< requested policies, then static baselines, then Oracle
  std::vector<RunResult> runs;  ///< one per non-Oracle row, same order

  const ReportRow& row(PolicyKind kind) const;
};

/// Runs every policy on the same corpus, seeds and trace, adds the static
/// baselines when missing, and derives the Oracle from the recorded runs.
/// The Oracle total is the smallest oracle_from_records total over all runs,
/// so it bounds every policy from below.
Report compare_report(const SimConfig& base, std::span<const PolicyKind> policies);

void save_records(const RunResult& run, const std::string& path);
std::vector<RequestRecord> load_records(const std::string& path);

void save_report_csv(const Report& report, const std::string& path);

}  // namespace cnmt
