#include <random>

#include "doctest.h"
#include "cnmt/error.hpp"
#include "cnmt/sim.hpp"
#include "helpers.hpp"

using namespace cnmt;

namespace {

SimConfig hand_config() {
  SimConfig cfg;
  cfg.corpus = make_corpus({{0, 10, 10}, {1, 30, 28}, {2, 60, 55}});
  cfg.edge_oracle = {DeviceProfile(0.2, 1.5, 8), 0, 1};
  cfg.cloud_oracle = {DeviceProfile(0.05, 0.4, 3), 0, 2};
  cfg.trace = RttTrace::constant(20);
  cfg.policy.kind = PolicyKind::CNmt;
  cfg.policy.edge = cfg.edge_oracle.true_profile;
  cfg.policy.cloud = cfg.cloud_oracle.true_profile;
  cfg.policy.length_model = LengthModel(0.9, 1);
  cfg.policy.m_avg = cfg.corpus.m_avg;
  cfg.estimator_init.initial_rtt = 20;
  return cfg;
}

// Independent replay of serial mode for constant traces: no estimator state
// is needed because every observation returns the same RTT.
double straight_line_total(const SimConfig& cfg, double rtt) {
  double total = 0;
  double estimate = cfg.estimator_init.initial_rtt;
  for (const auto& r : cfg.corpus.requests) {
    const double m_hat = cfg.policy.kind == PolicyKind::Naive
                             ? cfg.policy.m_avg
                             : std::max(1.0, cfg.policy.length_model.gamma * r.n + cfg.policy.length_model.delta);
    const double bits_per_ms = cfg.bandwidth.mbps * 1000.0;
    const double est_edge = cfg.policy.edge.alpha_n * r.n + cfg.policy.edge.alpha_m * m_hat + cfg.policy.edge.beta;
    const double est_cloud = estimate + (r.n + m_hat) * cfg.bandwidth.bytes_per_token * 8 / bits_per_ms +
                             cfg.policy.cloud.alpha_n * r.n + cfg.policy.cloud.alpha_m * m_hat + cfg.policy.cloud.beta;
    bool edge = est_edge <= est_cloud;
    if (cfg.policy.kind == PolicyKind::StaticEdge) edge = true;
    if (cfg.policy.kind == PolicyKind::StaticCloud) edge = false;
    if (edge) {
      total += realize_latency(cfg.edge_oracle, r);
    } else {
      total += rtt + (r.n + r.m_true) * cfg.bandwidth.bytes_per_token * 8 / bits_per_ms +
               realize_latency(cfg.cloud_oracle, r);
      estimate = rtt;
    }
  }
  return total;
}

SimConfig random_config(std::mt19937_64& rng, std::size_t count) {
  std::uniform_real_distribution<double> c(0, 2), rtt(1, 150), noise(0, 3);
  std::uniform_int_distribution<int> len(1, 100);
  std::uniform_int_distribution<int> kind(0, 3);
  SimConfig cfg;
  std::vector<Request> reqs;
  for (std::uint64_t i = 0; i < count; ++i) reqs.push_back({i, len(rng), len(rng)});
  cfg.corpus = make_corpus(reqs);
  cfg.edge_oracle = {DeviceProfile(c(rng), c(rng), 10 * c(rng)), noise(rng), rng()};
  cfg.cloud_oracle = {DeviceProfile(c(rng) / 5, c(rng) / 5, 5 * c(rng)), noise(rng), rng()};
  cfg.trace = RttTrace::constant(rtt(rng));
  cfg.policy.kind = static_cast<PolicyKind>(kind(rng));
  cfg.policy.edge = DeviceProfile(c(rng), c(rng), 10 * c(rng));
  cfg.policy.cloud = DeviceProfile(c(rng) / 5, c(rng) / 5, 5 * c(rng));
  cfg.policy.length_model = LengthModel(0.5 + c(rng) / 2, c(rng));
  cfg.policy.m_avg = cfg.corpus.m_avg;
  cfg.estimator_init.initial_rtt = rtt(rng);
  return cfg;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("run_simulation: single request under StaticEdge") {
  SimConfig cfg = hand_config();
  cfg.corpus = make_corpus({{0, 12, 9}});
  cfg.policy.kind = PolicyKind::StaticEdge;
  const RunResult run = run_simulation(cfg);
  CHECK(run.total == exec_time(cfg.edge_oracle.true_profile, 12, 9));
  CHECK(run.records.size() == 1);
}

TEST_CASE("run_simulation: three hand-computed requests") {
  // n=10: edge 25.0 vs cloud 27.5032 -> Edge, 25
  // n=30: edge 56.0 vs cloud 35.70928 -> Cloud, 20.00928 + 15.7
  // n=60: edge 102.5 vs cloud 48.0184 -> Cloud, 20.0184 + 28
  const RunResult run = run_simulation(hand_config());
  REQUIRE(run.records.size() == 3);
  CHECK(run.records[0].decision.target == Target::Edge);
  CHECK(run.records[1].decision.target == Target::Cloud);
  CHECK(run.records[2].decision.target == Target::Cloud);
  CHECK(run.records[0].charged == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(run.records[1].charged == doctest::Approx(35.70928).epsilon(1e-12));
  CHECK(run.records[2].charged == doctest::Approx(48.0184).epsilon(1e-12));
  CHECK(run.total == doctest::Approx(108.72768).epsilon(1e-12));
  CHECK(run.records[1].clock_at_dispatch == doctest::Approx(0.025));
  CHECK(run.trace_id == "constant");
  CHECK(run.seeds.edge_seed == 1);
}

TEST_CASE("run_simulation is deterministic") {
  std::mt19937_64 rng(3);
  SimConfig cfg = random_config(rng, 2000);
  cfg.trace = synth_trace(cp1_spec());
  cfg.policy.kind = PolicyKind::CNmt;
  const RunResult a = run_simulation(cfg), b = run_simulation(cfg);
  CHECK(a.total == b.total);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].charged == b.records[i].charged);
    CHECK(a.records[i].decision.target == b.records[i].decision.target);
  }
}

TEST_CASE("run_simulation rejects inconsistent configs") {
  SimConfig cfg = hand_config();
  cfg.policy.kind = PolicyKind::Oracle;
  CHECK_THROWS_AS(run_simulation(cfg), ConfigError);
  cfg.policy.kind = PolicyKind::Naive;
  cfg.policy.m_avg = 0.5;
  CHECK_THROWS_AS(run_simulation(cfg), ConfigError);
  cfg = hand_config();
  cfg.mode = PoissonMode{0.0, 1};
  CHECK_THROWS_AS(run_simulation(cfg), ConfigError);
  cfg = hand_config();
  cfg.estimator_init.ewma_alpha = 0;
  CHECK_THROWS_AS(run_simulation(cfg), ConfigError);
}

TEST_CASE("serial-mode invariants") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    SimConfig cfg = random_config(rng, 300);
    TraceSpec spec = cp1_spec();
    spec.seed = rng();
    spec.step_s = 5;
    cfg.trace = synth_trace(spec);
    const RunResult run = run_simulation(cfg);
    double total = 0, clock = -1;
    for (const auto& r : run.records) {
      CHECK(r.charged == path_latency(r));
      CHECK(r.queue_delay == 0);
      CHECK(r.clock_at_dispatch >= clock);
      clock = r.clock_at_dispatch;
      total += r.charged;
    }
    CHECK(run.total == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("run_simulation matches a straight-line recomputation on small corpora") {
  std::mt19937_64 rng(73);
  std::uniform_int_distribution<std::size_t> size(1, 10);
  for (int trial = 0; trial < 500; ++trial) {
    const SimConfig cfg = random_config(rng, size(rng));
    const double rtt = cfg.trace.samples().front().rtt;
    CHECK(run_simulation(cfg).total == doctest::Approx(straight_line_total(cfg, rtt)).epsilon(1e-9));
  }
}

TEST_CASE("estimator observes only cloud round trips") {
  SimConfig cfg = hand_config();
  cfg.trace = RttTrace({{0, 20}, {0.03, 90}});
  cfg.estimator_init.initial_rtt = 20;
  const RunResult run = run_simulation(cfg);
  // Request 1 is dispatched at 25 ms and offloaded at RTT 20; request 2 at
  // ~60.7 ms sees the estimate from request 1 but is charged RTT 90.
  CHECK(run.records[1].rtt_estimate == 20);
  CHECK(run.records[2].rtt_estimate == 20);
  CHECK(run.records[2].realized_tx == doctest::Approx(90.0184).epsilon(1e-12));
}

TEST_CASE("probes refresh the estimate without offloading") {
  SimConfig cfg = hand_config();
  cfg.policy.kind = PolicyKind::StaticEdge;
  cfg.trace = RttTrace({{0, 70}, {0.02, 33}});
  cfg.estimator_init.initial_rtt = 5;
  CHECK(run_simulation(cfg).records.back().rtt_estimate == 5);
  cfg.probe_interval_s = 0.01;
  const RunResult run = run_simulation(cfg);
  CHECK(run.records[0].rtt_estimate == 70);
  CHECK(run.records.back().rtt_estimate == 33);
}

TEST_CASE("Poisson mode queues requests per device") {
  std::mt19937_64 rng(79);
  SimConfig cfg = random_config(rng, 3000);
  cfg.policy.kind = PolicyKind::CNmt;
  cfg.mode = PoissonMode{40.0, 5};
  const RunResult a = run_simulation(cfg);
  const RunResult b = run_simulation(cfg);
  CHECK(a.total == b.total);
  CHECK(a.seeds.arrival_seed == 5);
  double queued = 0, clock = -1;
  for (const auto& r : a.records) {
    CHECK(r.queue_delay >= 0);
    CHECK(r.charged == doctest::Approx(r.queue_delay + path_latency(r)).epsilon(1e-12));
    CHECK(r.clock_at_dispatch > clock);
    clock = r.clock_at_dispatch;
    queued += r.queue_delay;
  }
  CHECK(queued > 0);
  CHECK(oracle_from_records(a.records).total <= a.total);
}

TEST_CASE("oracle_from_records") {
  SUBCASE("single record takes the per-request minimum") {
    RequestRecord r;
    r.realized_edge = 30;
    r.realized_cloud_exec = 25;
    r.realized_tx = 10;
    const std::vector<RequestRecord> records{r};
    const RunResult o = oracle_from_records(records);
    CHECK(o.total == 30);
    CHECK(o.policy == PolicyKind::Oracle);
  }
  SUBCASE("edge always faster equals StaticEdge") {
    SimConfig cfg = hand_config();
    cfg.trace = RttTrace::constant(1000);
    cfg.policy.kind = PolicyKind::StaticEdge;
    const RunResult edge = run_simulation(cfg);
    CHECK(oracle_from_records(edge.records).total == edge.total);
  }
}

TEST_CASE("percent_variation") {
  CHECK(percent_variation(86.45, 100) == doctest::Approx(-13.55));
  CHECK(percent_variation(100, 100) == 0);
  CHECK(percent_variation(144.32, 100) == doctest::Approx(44.32));
}

TEST_CASE("compare_report") {
  SUBCASE("self comparison") {
    const std::vector<PolicyKind> p{PolicyKind::StaticEdge};
    const Report r = compare_report(hand_config(), p);
    CHECK(r.row(PolicyKind::StaticEdge).vs_edge == 0);
    CHECK(r.rows.size() == 3);
    CHECK(r.rows.back().policy == PolicyKind::Oracle);
  }
  SUBCASE("perfect information makes C-NMT the Oracle") {
    SimConfig cfg = hand_config();
    SynthSpec spec;
    spec.count = 3000;
    spec.n_distribution = UniformLengths{1, 100};
    spec.gamma = 1;
    spec.delta = 2;
    cfg.corpus = synth_corpus(spec);
    cfg.policy.length_model = LengthModel(1, 2);
    cfg.policy.m_avg = cfg.corpus.m_avg;
    cfg.trace = RttTrace::constant(45);
    cfg.estimator_init.initial_rtt = 45;
    const std::vector<PolicyKind> p{PolicyKind::CNmt, PolicyKind::Naive};
    const Report r = compare_report(cfg, p);
    CHECK(r.row(PolicyKind::CNmt).vs_oracle == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.row(PolicyKind::CNmt).total <= r.row(PolicyKind::StaticEdge).total);
    CHECK(r.row(PolicyKind::CNmt).total <= r.row(PolicyKind::StaticCloud).total);
    CHECK(r.row(PolicyKind::Naive).total >= r.row(PolicyKind::Oracle).total);
  }
  SUBCASE("oracle bounds every policy") {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 10; ++trial) {
      SimConfig cfg = random_config(rng, 500);
      TraceSpec spec = cp2_spec();
      spec.seed = rng();
      spec.step_s = 2;
      cfg.trace = synth_trace(spec);
      const std::vector<PolicyKind> p{PolicyKind::CNmt, PolicyKind::Naive};
      const Report r = compare_report(cfg, p);
      for (const auto& row : r.rows) CHECK(r.row(PolicyKind::Oracle).total <= row.total);
    }
  }
  CHECK_THROWS_AS(compare_report(hand_config(), std::vector<PolicyKind>{}), ConfigError);
}

TEST_CASE("records round-trip through CSV") {
  testing::TempDir dir("sim");
  std::mt19937_64 rng(89);
  SimConfig cfg = random_config(rng, 400);
  cfg.mode = PoissonMode{30, 2};
  const RunResult run = run_simulation(cfg);
  save_records(run, dir.file("r.csv"));
  const auto loaded = load_records(dir.file("r.csv"));
  REQUIRE(loaded.size() == run.records.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const auto& a = loaded[i];
    const auto& b = run.records[i];
    CHECK(a.request_id == b.request_id);
    CHECK(a.n == b.n);
    CHECK(a.decision.target == b.decision.target);
    CHECK(a.decision.est_edge == b.decision.est_edge);
    CHECK(a.decision.est_cloud_total == b.decision.est_cloud_total);
    CHECK(a.realized_edge == b.realized_edge);
    CHECK(a.realized_cloud_exec == b.realized_cloud_exec);
    CHECK(a.realized_tx == b.realized_tx);
    CHECK(a.queue_delay == b.queue_delay);
    CHECK(a.charged == b.charged);
    CHECK(a.clock_at_dispatch == b.clock_at_dispatch);
    CHECK(a.rtt_estimate == b.rtt_estimate);
  }
  CHECK(testing::slurp(dir.file("r.csv")).rfind(
            "request_id,decision,est_edge_ms,est_cloud_ms,realized_edge_ms,realized_cloud_ms,"
            "realized_tx_ms,charged_ms,clock_s,", 0) == 0);
  CHECK_THROWS_AS(load_records(dir.write("bad.csv", "request_id,decision\n")), ParseError);
}

}  // TEST_SUITE
