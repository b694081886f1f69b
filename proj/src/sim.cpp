#include "cnmt/sim.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <limits>
#include <queue>
#include <random>

#include "cnmt/error.hpp"
#include "cnmt/text_io.hpp"

namespace cnmt {

namespace {

void check_config(const SimConfig& cfg) {
  if (cfg.policy.kind == PolicyKind::Oracle) {
    throw ConfigError("run_simulation: the Oracle is computed from records, not simulated");
  }
  if (cfg.policy.kind == PolicyKind::Naive && !(cfg.policy.m_avg >= 1.0)) {
    throw ConfigError("run_simulation: Naive policy requires m_avg >= 1");
  }
  if (cfg.corpus.requests.empty()) throw ConfigError("run_simulation: empty corpus");
  if (const auto* p = std::get_if<PoissonMode>(&cfg.mode); p && !(p->rate > 0.0)) {
    throw ConfigError("run_simulation: Poisson rate must be positive");
  }
  if (cfg.probe_interval_s < 0.0) throw ConfigError("run_simulation: negative probe interval");
  try {
    validate(cfg.estimator_init);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// Routes and realizes one request; queueing is filled in by the caller.
RequestRecord dispatch(const SimConfig& cfg, const TxEstimator& est, const Request& req,
                       double clock) {
  const double m_hat = assumed_output_length(cfg.policy, req.n);
  RequestRecord rec;
  rec.request_id = std::to_string(req.id);
  rec.n = req.n;
  rec.rtt_estimate = rtt_estimate(est);
  rec.decision = decide(cfg.policy, req.n, rec.rtt_estimate + payload_ms(cfg.bandwidth, req.n, m_hat));
  rec.realized_edge = realize_latency(cfg.edge_oracle, req);
  rec.realized_cloud_exec = realize_latency(cfg.cloud_oracle, req);
  rec.realized_tx = realized_tx(cfg.trace, cfg.bandwidth, clock, req.n, req.m_true);
  rec.clock_at_dispatch = clock;
  return rec;
}

class Prober {
 public:
  explicit Prober(double interval) : interval_(interval) {}

  void maybe_probe(const RttTrace& trace, TxEstimator& est, double now) {
    if (interval_ <= 0.0) return;
    if (last_ && now - *last_ < interval_) return;
    est = observe_roundtrip(est, rtt_at(trace, now), now);
    last_ = now;
  }

 private:
  double interval_;
  std::optional<double> last_;
};

RunResult run_serial(const SimConfig& cfg) {
  RunResult run;
  run.records.reserve(cfg.corpus.requests.size());
  TxEstimator est = cfg.estimator_init;
  Prober prober(cfg.probe_interval_s);
  double clock = 0.0;

  for (const auto& req : cfg.corpus.requests) {
    prober.maybe_probe(cfg.trace, est, clock);
    RequestRecord rec = dispatch(cfg, est, req, clock);
    rec.charged = path_latency(rec);
    if (rec.decision.target == Target::Cloud) {
      est = observe_roundtrip(est, rtt_at(cfg.trace, clock), clock + rec.charged / 1000.0);
    }
    clock += rec.charged / 1000.0;
    run.total += rec.charged;
    run.records.push_back(std::move(rec));
  }
  return run;
}

RunResult run_poisson(const SimConfig& cfg, const PoissonMode& mode) {
  struct Observation {
    double at;
    std::size_t seq;
    double rtt;
    bool operator>(const Observation& o) const {
      return at != o.at ? at > o.at : seq > o.seq;
    }
  };
  std::priority_queue<Observation, std::vector<Observation>, std::greater<>> pending;

  RunResult run;
  run.records.reserve(cfg.corpus.requests.size());
  TxEstimator est = cfg.estimator_init;
  Prober prober(cfg.probe_interval_s);
  std::mt19937_64 rng(mode.seed);
  std::exponential_distribution<double> gap(mode.rate);
  double arrival = 0.0;
  double edge_free = 0.0;
  double cloud_free = 0.0;

  for (const auto& req : cfg.corpus.requests) {
    arrival += gap(rng);
    while (!pending.empty() && pending.top().at <= arrival) {
      est = observe_roundtrip(est, pending.top().rtt, pending.top().at);
      pending.pop();
    }
    prober.maybe_probe(cfg.trace, est, arrival);

    RequestRecord rec = dispatch(cfg, est, req, arrival);
    if (rec.decision.target == Target::Edge) {
      const double start = std::max(arrival, edge_free);
      edge_free = start + rec.realized_edge / 1000.0;
      rec.queue_delay = (start - arrival) * 1000.0;
    } else {
      const double start = std::max(arrival, cloud_free);
      cloud_free = start + rec.realized_cloud_exec / 1000.0;
      rec.queue_delay = (start - arrival) * 1000.0;
    }
    rec.charged = rec.queue_delay + path_latency(rec);
    if (rec.decision.target == Target::Cloud) {
      pending.push({arrival + rec.charged / 1000.0, run.records.size(), rtt_at(cfg.trace, arrival)});
    }
    run.total += rec.charged;
    run.records.push_back(std::move(rec));
  }
  return run;
}

}  // namespace

RunResult run_simulation(const SimConfig& cfg) {
  check_config(cfg);
  RunResult run;
  std::uint64_t arrival_seed = 0;
  if (const auto* p = std::get_if<PoissonMode>(&cfg.mode)) {
    run = run_poisson(cfg, *p);
    arrival_seed = p->seed;
  } else {
    run = run_serial(cfg);
  }
  run.policy = cfg.policy.kind;
  run.seeds = {cfg.edge_oracle.seed, cfg.cloud_oracle.seed, arrival_seed};
  run.trace_id = cfg.trace.id();
  return run;
}

RunResult oracle_from_records(std::span<const RequestRecord> records) {
  RunResult run;
  run.policy = PolicyKind::Oracle;
  run.records.reserve(records.size());
  for (const auto& r : records) {
    RequestRecord rec = r;
    rec.decision = oracle_decide(r.realized_edge, r.realized_cloud_exec, r.realized_tx);
    rec.queue_delay = 0.0;
    rec.charged = path_latency(rec);
    run.total += rec.charged;
    run.records.push_back(std::move(rec));
  }
  return run;
}

const ReportRow& Report::row(PolicyKind kind) const {
  for (const auto& r : rows) {
    if (r.policy == kind) return r;
  }
  throw Error("report has no row for " + std::string(to_string(kind)));
}

Report compare_report(const SimConfig& base, std::span<const PolicyKind> policies) {
  if (policies.empty()) throw ConfigError("compare_report: no policies given");

  std::vector<PolicyKind> kinds;
  const auto add = [&kinds](PolicyKind k) {
    if (k != PolicyKind::Oracle && std::find(kinds.begin(), kinds.end(), k) == kinds.end()) {
      kinds.push_back(k);
    }
  };
  for (auto k : policies) add(k);
  add(PolicyKind::StaticEdge);
  add(PolicyKind::StaticCloud);

  std::vector<std::future<RunResult>> futures;
  for (auto k : kinds) {
    futures.push_back(std::async(std::launch::async, [&base, k] {
      SimConfig cfg = base;
      cfg.policy.kind = k;
      return run_simulation(cfg);
    }));
  }

  Report report;
  for (auto& f : futures) report.runs.push_back(f.get());

  RunResult best_oracle;
  best_oracle.total = std::numeric_limits<double>::infinity();
  for (const auto& run : report.runs) {
    RunResult o = oracle_from_records(run.records);
    if (o.total < best_oracle.total) best_oracle = std::move(o);
  }

  const auto total_of = [&](PolicyKind k) {
    for (const auto& run : report.runs) {
      if (run.policy == k) return run.total;
    }
    return best_oracle.total;
  };
  const double t_edge = total_of(PolicyKind::StaticEdge);
  const double t_cloud = total_of(PolicyKind::StaticCloud);
  const double t_oracle = best_oracle.total;

  const auto make_row = [&](PolicyKind k, const RunResult& run) {
    ReportRow row;
    row.policy = k;
    row.total = run.total;
    row.vs_edge = percent_variation(run.total, t_edge);
    row.vs_cloud = percent_variation(run.total, t_cloud);
    row.vs_oracle = percent_variation(run.total, t_oracle);
    for (const auto& r : run.records) {
      (r.decision.target == Target::Edge ? row.edge_count : row.cloud_count) += 1;
    }
    return row;
  };
  for (const auto& run : report.runs) report.rows.push_back(make_row(run.policy, run));
  report.rows.push_back(make_row(PolicyKind::Oracle, best_oracle));

  report.trace_id = base.trace.id();
  report.language_pair = base.corpus.language_pair;
  report.request_count = base.corpus.requests.size();
  if (std::holds_alternative<SerialMode>(base.mode)) {
    report.mode = "serial";
    report.note = "serial closed-loop replay; no server-side queueing is modeled";
  } else {
    report.mode = "poisson";
    report.note = "open-loop Poisson arrivals with per-device FIFO queues";
  }
  return report;
}

namespace {

const std::vector<std::string> kRecordHeader = {
    "request_id",        "decision",       "est_edge_ms", "est_cloud_ms",
    "realized_edge_ms",  "realized_cloud_ms", "realized_tx_ms", "charged_ms",
    "clock_s",           "n",              "rtt_estimate_ms", "queue_ms"};

}  // namespace

void save_records(const RunResult& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < kRecordHeader.size(); ++i) out << (i ? "," : "") << kRecordHeader[i];
  out << '\n';
  for (const auto& r : run.records) {
    out << r.request_id << ',' << to_string(r.decision.target) << ','
        << format_double(r.decision.est_edge) << ',' << format_double(r.decision.est_cloud_total)
        << ',' << format_double(r.realized_edge) << ',' << format_double(r.realized_cloud_exec)
        << ',' << format_double(r.realized_tx) << ',' << format_double(r.charged) << ','
        << format_double(r.clock_at_dispatch) << ',' << r.n << ','
        << format_double(r.rtt_estimate) << ',' << format_double(r.queue_delay) << '\n';
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

std::vector<RequestRecord> load_records(const std::string& path) {
  const auto table = read_table(path, ',', kRecordHeader);
  std::vector<RequestRecord> records;
  records.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    const auto num = [&](std::size_t i) { return parse_optional_double(f[i], path, row.line); };
    RequestRecord r;
    r.request_id = f[0];
    try {
      r.decision.target = parse_target(f[1]);
    } catch (const ConfigError& e) {
      throw ParseError(path, row.line, e.what());
    }
    r.decision.est_edge = num(2);
    r.decision.est_cloud_total = num(3);
    r.realized_edge = num(4);
    r.realized_cloud_exec = num(5);
    r.realized_tx = num(6);
    r.charged = num(7);
    r.clock_at_dispatch = num(8);
    const auto n = parse_int(f[9], path, row.line);
    if (n < 1) throw ParseError(path, row.line, "n must be >= 1");
    r.n = static_cast<int>(n);
    r.rtt_estimate = parse_double(f[10], path, row.line);
    r.queue_delay = num(11);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw EmptyFile(path + ": no records");
  return records;
}

void save_report_csv(const Report& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "policy,total_ms,vs_edge_pct,vs_cloud_pct,vs_oracle_pct,edge_count,cloud_count\n";
  for (const auto& r : report.rows) {
    out << to_string(r.policy) << ',' << format_double(r.total) << ','
        << format_fixed(r.vs_edge, 2) << ',' << format_fixed(r.vs_cloud, 2) << ','
        << format_fixed(r.vs_oracle, 2) << ',' << r.edge_count << ',' << r.cloud_count << '\n';
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace cnmt
