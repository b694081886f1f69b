#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cnmt/sim.hpp"

namespace cnmt {

using json = nlohmann::json;

// Model files. Fitted models embed their FitReport under "fit".
json to_json(const DeviceProfile& p, const std::optional<FitReport>& fit = std::nullopt);
json to_json(const LengthModel& lm, const std::optional<FitReport>& fit = std::nullopt);
json to_json(const FitReport& r);
json to_json(const Report& report);

DeviceProfile profile_from_json(const json& j);
LengthModel length_model_from_json(const json& j);
FilterRules filter_rules_from_json(const json& j);
BandwidthModel bandwidth_from_json(const json& j);
TxEstimator estimator_from_json(const json& j);
LengthDistribution length_distribution_from_json(const json& j);
SynthSpec synth_spec_from_json(const json& j);
TraceSpec trace_spec_from_json(const json& j);

json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const json& j, const std::filesystem::path& path);

/// Everything needed to evaluate a routing decision offline: policy
/// coefficients, bandwidth and the estimator prior.
struct DispatchModel {
  PolicyConfig policy;
  BandwidthModel bandwidth;
  TxEstimator estimator;
};

/// Reads "edge", "cloud", "length_model", "policy", "m_avg", "bandwidth" and
/// "estimator". Profile and length-model entries may be inline objects or
/// paths (relative to base_dir) of model files written by the fit commands.
DispatchModel dispatch_model_from_json(const json& j, const std::filesystem::path& base_dir);

struct ReplaySummary {
  std::size_t matched = 0;
  std::size_t total = 0;
  std::vector<std::string> mismatched_ids;
};

/// Recomputes each logged decision from (n, logged rtt estimate) and checks
/// that target and both estimates reproduce exactly.
ReplaySummary replay_check(const DispatchModel& model, std::span<const RequestRecord> records);

/// A resolved comparison experiment.
struct Experiment {
  SimConfig base;
  std::vector<PolicyKind> policies;
  std::filesystem::path output_dir;
  std::optional<FitReport> edge_fit;
  std::optional<FitReport> cloud_fit;
  std::optional<FitReport> length_fit;
};

/// Resolves an experiment config. Relative paths are taken from base_dir.
/// Throws ConfigError on schema violations.
Experiment experiment_from_json(const json& j, const std::filesystem::path& base_dir);
Experiment load_experiment(const std::filesystem::path& path);

}  // namespace cnmt
