#pragma once

#include <string_view>

#include "cnmt/model.hpp"

namespace cnmt {

enum class Target { Edge, Cloud };

enum class PolicyKind { CNmt, Naive, StaticEdge, StaticCloud, Oracle };

std::string_view to_string(Target target);
std::string_view to_string(PolicyKind kind);
/// Accepts the names produced by to_string plus the lower-case config
/// spellings ("cnmt", "naive", "static_edge", "static_cloud", "oracle").
PolicyKind parse_policy_kind(std::string_view name);
Target parse_target(std::string_view name);

struct Decision {
  Target target = Target::Edge;
  double est_edge = 0.0;         ///< ms
  double est_cloud_total = 0.0;  ///< ms, execution plus transmission
  PolicyKind rationale = PolicyKind::CNmt;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::CNmt;
  DeviceProfile edge;
  DeviceProfile cloud;
  LengthModel length_model;
  double m_avg = 1.0;  ///< used by Naive only
};

/// Output length the policy plugs into the execution-time planes.
/// Naive uses m_avg; every other kind uses the length model.
double assumed_output_length(const PolicyConfig& cfg, int n);

/// Edge iff the edge estimate does not exceed transmission plus cloud
/// execution. Ties go to the edge.
Decision cnmt_decide(const PolicyConfig& cfg, int n, double t_tx);

/// cnmt_decide with the predicted output length replaced by cfg.m_avg.
Decision naive_decide(const PolicyConfig& cfg, int n, double t_tx);

/// Constant routing. The single-argument form leaves the estimates at zero;
/// the three-argument form fills them from the length model for reporting.
Decision static_decide(const PolicyConfig& cfg);
Decision static_decide(const PolicyConfig& cfg, int n, double t_tx);

/// Post-hoc choice on realized quantities.
Decision oracle_decide(double realized_edge, double realized_cloud_exec, double realized_tx);

/// Dispatches on cfg.kind. Throws ConfigError for Oracle, which needs
/// realized rather than estimated quantities.
Decision decide(const PolicyConfig& cfg, int n, double t_tx);

}  // namespace cnmt
