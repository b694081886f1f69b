#include "cnmt/policy.hpp"

#include <string>

namespace cnmt {

std::string_view to_string(Target target) {
  return target == Target::Edge ? "Edge" : "Cloud";
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::CNmt: return "C-NMT";
    case PolicyKind::Naive: return "Naive";
    case PolicyKind::StaticEdge: return "StaticEdge";
    case PolicyKind::StaticCloud: return "StaticCloud";
    case PolicyKind::Oracle: return "Oracle";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "C-NMT" || name == "cnmt") return PolicyKind::CNmt;
  if (name == "Naive" || name == "naive") return PolicyKind::Naive;
  if (name == "StaticEdge" || name == "static_edge") return PolicyKind::StaticEdge;
  if (name == "StaticCloud" || name == "static_cloud") return PolicyKind::StaticCloud;
  if (name == "Oracle" || name == "oracle") return PolicyKind::Oracle;
  throw ConfigError("unknown policy kind '" + std::string(name) + "'");
}

Target parse_target(std::string_view name) {
  if (name == "Edge") return Target::Edge;
  if (name == "Cloud") return Target::Cloud;
  throw ConfigError("unknown target '" + std::string(name) + "'");
}

double assumed_output_length(const PolicyConfig& cfg, int n) {
  if (cfg.kind == PolicyKind::Naive) return cfg.m_avg;
  return predict_len(cfg.length_model, n);
}

namespace {

Decision estimate(const PolicyConfig& cfg, int n, double m_hat, double t_tx, PolicyKind why) {
  Decision d;
  d.est_edge = exec_time(cfg.edge, n, m_hat);
  d.est_cloud_total = t_tx + exec_time(cfg.cloud, n, m_hat);
  d.target = d.est_edge <= d.est_cloud_total ? Target::Edge : Target::Cloud;
  d.rationale = why;
  return d;
}

}  // namespace

Decision cnmt_decide(const PolicyConfig& cfg, int n, double t_tx) {
  return estimate(cfg, n, predict_len(cfg.length_model, n), t_tx, PolicyKind::CNmt);
}

Decision naive_decide(const PolicyConfig& cfg, int n, double t_tx) {
  return estimate(cfg, n, cfg.m_avg, t_tx, PolicyKind::Naive);
}

Decision static_decide(const PolicyConfig& cfg) {
  if (cfg.kind != PolicyKind::StaticEdge && cfg.kind != PolicyKind::StaticCloud) {
    throw ConfigError("static_decide: policy kind is not static");
  }
  Decision d;
  d.target = cfg.kind == PolicyKind::StaticEdge ? Target::Edge : Target::Cloud;
  d.rationale = cfg.kind;
  return d;
}

Decision static_decide(const PolicyConfig& cfg, int n, double t_tx) {
  Decision d = estimate(cfg, n, predict_len(cfg.length_model, n), t_tx, cfg.kind);
  d.target = static_decide(cfg).target;
  return d;
}

Decision oracle_decide(double realized_edge, double realized_cloud_exec, double realized_tx) {
  Decision d;
  d.est_edge = realized_edge;
  d.est_cloud_total = realized_tx + realized_cloud_exec;
  d.target = d.est_edge <= d.est_cloud_total ? Target::Edge : Target::Cloud;
  d.rationale = PolicyKind::Oracle;
  return d;
}

Decision decide(const PolicyConfig& cfg, int n, double t_tx) {
  switch (cfg.kind) {
    case PolicyKind::CNmt: return cnmt_decide(cfg, n, t_tx);
    case PolicyKind::Naive: return naive_decide(cfg, n, t_tx);
    case PolicyKind::StaticEdge:
    case PolicyKind::StaticCloud: return static_decide(cfg, n, t_tx);
    case PolicyKind::Oracle: break;
  }
  throw ConfigError("decide: the Oracle policy requires realized quantities");
}

}  // namespace cnmt
