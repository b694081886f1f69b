#include <random>

#include "doctest.h"
#include "cnmt/policy.hpp"

using namespace cnmt;

namespace {

PolicyConfig example_config(PolicyKind kind = PolicyKind::CNmt) {
  PolicyConfig cfg;
  cfg.kind = kind;
  cfg.edge = DeviceProfile(0.2, 1.5, 8);
  cfg.cloud = DeviceProfile(0.05, 0.4, 3);
  cfg.length_model = LengthModel(0.9, 1);
  cfg.m_avg = 20;
  return cfg;
}

DeviceProfile random_profile(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0, 3);
  return DeviceProfile(c(rng), c(rng), c(rng) * 5);
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("cnmt_decide") {
  SUBCASE("identical devices with a positive transmission cost stay at the edge") {
    PolicyConfig cfg = example_config();
    cfg.cloud = cfg.edge;
    CHECK(cnmt_decide(cfg, 40, 10).target == Target::Edge);
  }
  SUBCASE("strictly faster cloud with free transmission offloads") {
    CHECK(cnmt_decide(example_config(), 40, 0).target == Target::Cloud);
  }
  SUBCASE("hand-evaluated crossover") {
    // m_hat = 28; edge 6 + 42 + 8 = 56; cloud 1.5 + 11.2 + 3 + 40 = 55.7
    const Decision d = cnmt_decide(example_config(), 30, 40);
    CHECK(d.est_edge == doctest::Approx(56.0));
    CHECK(d.est_cloud_total == doctest::Approx(55.7));
    CHECK(d.target == Target::Cloud);
    CHECK(d.rationale == PolicyKind::CNmt);
    CHECK(cnmt_decide(example_config(), 30, 41).target == Target::Edge);
  }
  SUBCASE("exact tie goes to the edge") {
    PolicyConfig cfg;
    cfg.edge = DeviceProfile(0, 1, 0);
    cfg.cloud = DeviceProfile(0, 0.5, 0);
    cfg.length_model = LengthModel(1, 0);
    CHECK(cnmt_decide(cfg, 8, 4).target == Target::Edge);
    CHECK(cnmt_decide(cfg, 8, 3.5).target == Target::Cloud);
  }
}

TEST_CASE("naive_decide") {
  SUBCASE("coincides with cnmt when m_avg equals the prediction") {
    PolicyConfig cfg = example_config(PolicyKind::Naive);
    cfg.m_avg = predict_len(cfg.length_model, 30);
    const Decision a = naive_decide(cfg, 30, 40);
    const Decision b = cnmt_decide(cfg, 30, 40);
    CHECK(a.target == b.target);
    CHECK(a.est_edge == b.est_edge);
    CHECK(a.est_cloud_total == b.est_cloud_total);
    CHECK(a.rationale == PolicyKind::Naive);
  }
  SUBCASE("independent of n when per-input slopes vanish") {
    PolicyConfig cfg = example_config(PolicyKind::Naive);
    cfg.edge = DeviceProfile(0, 1, 0);
    cfg.cloud = DeviceProfile(0, 0.1, 0);
    cfg.m_avg = 10;
    for (int n : {1, 10, 50, 500}) {
      const Decision d = naive_decide(cfg, n, 9.5);
      CHECK(d.est_edge == doctest::Approx(10));
      CHECK(d.est_cloud_total == doctest::Approx(10.5));
      CHECK(d.target == Target::Edge);
    }
  }
  SUBCASE("misroutes long sentences that C-NMT offloads") {
    PolicyConfig cfg = example_config(PolicyKind::Naive);
    cfg.edge = DeviceProfile(0, 1, 0);
    cfg.cloud = DeviceProfile(0, 0.1, 0);
    cfg.length_model = LengthModel(1, 0);
    cfg.m_avg = 10;
    // A long sentence whose true output length is 50.
    CHECK(naive_decide(cfg, 50, 9.5).target == Target::Edge);
    CHECK(exec_time(cfg.edge, 50, 50) == doctest::Approx(50));
    CHECK(9.5 + exec_time(cfg.cloud, 50, 50) == doctest::Approx(14.5));
    CHECK(cnmt_decide(cfg, 50, 9.5).target == Target::Cloud);
  }
}

TEST_CASE("static_decide") {
  CHECK(static_decide(example_config(PolicyKind::StaticEdge)).target == Target::Edge);
  CHECK(static_decide(example_config(PolicyKind::StaticCloud)).target == Target::Cloud);
  for (int n : {1, 30, 1000}) {
    for (double tx : {0.0, 40.0, 1e6}) {
      const Decision d = static_decide(example_config(PolicyKind::StaticEdge), n, tx);
      CHECK(d.target == Target::Edge);
      CHECK(d.est_edge == cnmt_decide(example_config(), n, tx).est_edge);
      CHECK(static_decide(example_config(PolicyKind::StaticCloud), n, tx).target == Target::Cloud);
    }
  }
  CHECK_THROWS_AS(static_decide(example_config(PolicyKind::CNmt)), ConfigError);
}

TEST_CASE("oracle_decide") {
  CHECK(oracle_decide(30, 25, 10).target == Target::Edge);
  CHECK(oracle_decide(30, 25, 0).target == Target::Cloud);
  CHECK(oracle_decide(30, 20, 10).target == Target::Edge);
  CHECK(oracle_decide(30, 20, 10).rationale == PolicyKind::Oracle);
}

TEST_CASE("decide dispatches on kind and refuses the Oracle") {
  CHECK(decide(example_config(PolicyKind::StaticCloud), 5, 1e9).target == Target::Cloud);
  CHECK(decide(example_config(PolicyKind::Naive), 30, 40).rationale == PolicyKind::Naive);
  CHECK_THROWS_AS(decide(example_config(PolicyKind::Oracle), 30, 40), ConfigError);
  CHECK(parse_policy_kind("cnmt") == PolicyKind::CNmt);
  CHECK(parse_policy_kind(to_string(PolicyKind::StaticCloud)) == PolicyKind::StaticCloud);
  CHECK_THROWS_AS(parse_policy_kind("fastest"), ConfigError);
}

TEST_CASE("cnmt_decide crosses the t_tx threshold once") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> len(1, 150);
  std::uniform_real_distribution<double> g(0.3, 1.5), d(-2, 4);
  for (int trial = 0; trial < 300; ++trial) {
    PolicyConfig cfg;
    cfg.edge = random_profile(rng);
    cfg.cloud = random_profile(rng);
    cfg.length_model = LengthModel(g(rng), d(rng));
    const int n = len(rng);
    bool seen_edge = false;
    for (double tx = 0; tx <= 400; tx += 0.5) {
      const bool edge = cnmt_decide(cfg, n, tx).target == Target::Edge;
      if (seen_edge) CHECK(edge);
      seen_edge = seen_edge || edge;
    }
  }
}

TEST_CASE("cnmt_decide has a single length threshold when the edge is steeper") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> g(0.3, 1.5), d(0, 4), tx(0, 200);
  int checked = 0;
  while (checked < 200) {
    PolicyConfig cfg;
    cfg.edge = random_profile(rng);
    cfg.cloud = random_profile(rng);
    cfg.length_model = LengthModel(g(rng), d(rng));
    const double gamma = cfg.length_model.gamma;
    if (!(cfg.edge.alpha_n + cfg.edge.alpha_m * gamma > cfg.cloud.alpha_n + cfg.cloud.alpha_m * gamma)) continue;
    ++checked;
    const double t = tx(rng);
    bool seen_cloud = false;
    for (int n = 1; n <= 2000; ++n) {
      const bool cloud = cnmt_decide(cfg, n, t).target == Target::Cloud;
      if (seen_cloud) CHECK(cloud);
      seen_cloud = seen_cloud || cloud;
    }
  }
}

TEST_CASE("estimates are the exact plane evaluations") {
  std::mt19937_64 rng(47);
  std::uniform_int_distribution<int> len(1, 150);
  std::uniform_real_distribution<double> g(0.3, 1.5), d(-2, 4), tx(0, 200);
  for (int trial = 0; trial < 1000; ++trial) {
    PolicyConfig cfg;
    cfg.edge = random_profile(rng);
    cfg.cloud = random_profile(rng);
    cfg.length_model = LengthModel(g(rng), d(rng));
    const int n = len(rng);
    const double t = tx(rng);
    const Decision dec = cnmt_decide(cfg, n, t);
    const double m_hat = predict_len(cfg.length_model, n);
    CHECK(dec.est_edge == exec_time(cfg.edge, n, m_hat));
    CHECK(dec.est_cloud_total == t + exec_time(cfg.cloud, n, m_hat));
    CHECK((dec.target == Target::Edge) == (dec.est_edge <= dec.est_cloud_total));
  }
}

TEST_CASE("oracle dominates every policy per request and matches C-NMT under exact information") {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<int> len(1, 120), gi(1, 2), di(0, 3);
  std::uniform_real_distribution<double> tx(0, 150), jitter(-20, 20);
  for (int trial = 0; trial < 2000; ++trial) {
    PolicyConfig cfg;
    cfg.edge = random_profile(rng);
    cfg.cloud = random_profile(rng);
    cfg.length_model = LengthModel(gi(rng), di(rng));
    cfg.m_avg = 30;
    const int n = len(rng);
    const double m = predict_len(cfg.length_model, n);
    const double t = tx(rng);
    const double realized_edge = exec_time(cfg.edge, n, m);
    const double realized_cloud = exec_time(cfg.cloud, n, m);
    const auto charged = [&](Target target) {
      return target == Target::Edge ? realized_edge : t + realized_cloud;
    };
    const Decision oracle = oracle_decide(realized_edge, realized_cloud, t);
    const double best = std::min(charged(Target::Edge), charged(Target::Cloud));
    CHECK(charged(oracle.target) == best);
    CHECK(cnmt_decide(cfg, n, t).target == oracle.target);

    // With a wrong transmission estimate the oracle still wins.
    const double stale = std::max(0.0, t + jitter(rng));
    CHECK(charged(oracle.target) <= charged(cnmt_decide(cfg, n, stale).target));
    CHECK(charged(oracle.target) <= charged(naive_decide(cfg, n, stale).target));
  }
}

}  // TEST_SUITE
