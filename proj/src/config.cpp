#include "cnmt/config.hpp"

#include <fstream>
#include <random>

#include "cnmt/error.hpp"

namespace cnmt {

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string("missing required key '") + key + "'");
  }
  return j.at(key).get<T>();
}

// Wraps json type errors and invariant violations as ConfigError.
template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const FitReport& r) {
  return {{"r2", r.r2}, {"mse", r.mse}, {"sample_count", r.sample_count}};
}

json to_json(const DeviceProfile& p, const std::optional<FitReport>& fit) {
  json j = {{"kind", "device_profile"},
            {"device_id", p.device_id},
            {"alpha_n", p.alpha_n},
            {"alpha_m", p.alpha_m},
            {"beta", p.beta}};
  if (fit) j["fit"] = to_json(*fit);
  return j;
}

json to_json(const LengthModel& lm, const std::optional<FitReport>& fit) {
  json j = {{"kind", "length_model"},
            {"language_pair", lm.language_pair},
            {"gamma", lm.gamma},
            {"delta", lm.delta}};
  if (fit) j["fit"] = to_json(*fit);
  return j;
}

json to_json(const Report& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"policy", to_string(r.policy)},
                    {"total_ms", r.total},
                    {"vs_edge_pct", r.vs_edge},
                    {"vs_cloud_pct", r.vs_cloud},
                    {"vs_oracle_pct", r.vs_oracle},
                    {"edge_count", r.edge_count},
                    {"cloud_count", r.cloud_count}});
  }
  return {{"trace_id", report.trace_id},
          {"language_pair", report.language_pair},
          {"request_count", report.request_count},
          {"mode", report.mode},
          {"note", report.note},
          {"rows", rows}};
}

DeviceProfile profile_from_json(const json& j) {
  return guarded("device profile", [&] {
    return DeviceProfile(require<double>(j, "alpha_n"), require<double>(j, "alpha_m"),
                         require<double>(j, "beta"), get_or<std::string>(j, "device_id", ""));
  });
}

LengthModel length_model_from_json(const json& j) {
  return guarded("length model", [&] {
    return LengthModel(require<double>(j, "gamma"), require<double>(j, "delta"),
                       get_or<std::string>(j, "language_pair", ""));
  });
}

FilterRules filter_rules_from_json(const json& j) {
  return guarded("filter rules", [&] {
    FilterRules r;
    r.min_len = get_or(j, "min_len", r.min_len);
    r.max_len = get_or(j, "max_len", r.max_len);
    r.max_ratio = get_or(j, "max_ratio", r.max_ratio);
    r.validate();
    return r;
  });
}

BandwidthModel bandwidth_from_json(const json& j) {
  return guarded("bandwidth", [&] {
    BandwidthModel bw;
    bw.mbps = get_or(j, "mbps", bw.mbps);
    bw.bytes_per_token = get_or(j, "bytes_per_token", bw.bytes_per_token);
    if (!(bw.mbps > 0.0) || !(bw.bytes_per_token >= 1.0)) {
      throw ConfigError("bandwidth: need mbps > 0 and bytes_per_token >= 1");
    }
    return bw;
  });
}

TxEstimator estimator_from_json(const json& j) {
  return guarded("estimator", [&] {
    TxEstimator est;
    est.ewma_alpha = get_or(j, "ewma_alpha", est.ewma_alpha);
    est.initial_rtt = get_or(j, "initial_rtt_ms", est.initial_rtt);
    validate(est);
    return est;
  });
}

LengthDistribution length_distribution_from_json(const json& j) {
  return guarded("n_distribution", [&]() -> LengthDistribution {
    const auto kind = require<std::string>(j, "kind");
    if (kind == "uniform") return UniformLengths{require<int>(j, "lo"), require<int>(j, "hi")};
    if (kind == "lognormal") {
      return LogNormalLengths{require<double>(j, "mu"), require<double>(j, "sigma"),
                              get_or(j, "max_len", 100)};
    }
    if (kind == "mixture") {
      MixtureLengths mix;
      for (const auto& c : require<json>(j, "components")) {
        mix.components.push_back({require<int>(c, "lo"), require<int>(c, "hi")});
        mix.weights.push_back(get_or(c, "weight", 1.0));
      }
      return mix;
    }
    throw ConfigError("n_distribution: unknown kind '" + kind + "'");
  });
}

SynthSpec synth_spec_from_json(const json& j) {
  return guarded("synthetic corpus", [&] {
    SynthSpec s;
    s.count = require<std::size_t>(j, "count");
    if (j.contains("n_distribution")) s.n_distribution = length_distribution_from_json(j["n_distribution"]);
    s.gamma = get_or(j, "gamma", s.gamma);
    s.delta = get_or(j, "delta", s.delta);
    s.length_noise_sd = get_or(j, "length_noise_sd", s.length_noise_sd);
    s.seed = require<std::uint64_t>(j, "seed");
    s.language_pair = get_or<std::string>(j, "language_pair", s.language_pair);
    return s;
  });
}

TraceSpec trace_spec_from_json(const json& j) {
  return guarded("synthetic trace", [&] {
    TraceSpec s;
    if (j.contains("preset")) {
      const auto preset = j["preset"].get<std::string>();
      if (preset == "cp1") s = cp1_spec();
      else if (preset == "cp2") s = cp2_spec();
      else throw ConfigError("unknown trace preset '" + preset + "'");
    }
    s.trace_id = get_or(j, "trace_id", s.trace_id);
    s.duration_s = get_or(j, "duration_s", s.duration_s);
    s.step_s = get_or(j, "step_s", s.step_s);
    s.base_rtt = get_or(j, "base_rtt_ms", s.base_rtt);
    s.walk_sd = get_or(j, "walk_sd_ms", s.walk_sd);
    s.reversion = get_or(j, "reversion", s.reversion);
    s.spike_prob = get_or(j, "spike_prob", s.spike_prob);
    s.spike_rtt = get_or(j, "spike_rtt_ms", s.spike_rtt);
    s.spike_steps = get_or(j, "spike_steps", s.spike_steps);
    s.floor_rtt = get_or(j, "floor_rtt_ms", s.floor_rtt);
    s.seed = get_or(j, "seed", s.seed);
    return s;
  });
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

// An inline object or the path of a JSON file holding one.
json inline_or_file(const json& j, const std::filesystem::path& base_dir) {
  if (j.is_string()) return read_json(resolve(base_dir, j.get<std::string>()));
  return j;
}

}  // namespace

DispatchModel dispatch_model_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("dispatch model", [&] {
    DispatchModel m;
    m.policy.kind = parse_policy_kind(get_or<std::string>(j, "policy", "cnmt"));
    m.policy.edge = profile_from_json(inline_or_file(require<json>(j, "edge"), base_dir));
    m.policy.cloud = profile_from_json(inline_or_file(require<json>(j, "cloud"), base_dir));
    m.policy.length_model =
        length_model_from_json(inline_or_file(require<json>(j, "length_model"), base_dir));
    m.policy.m_avg = get_or(j, "m_avg", m.policy.m_avg);
    if (m.policy.kind == PolicyKind::Naive && !(m.policy.m_avg >= 1.0)) {
      throw ConfigError("Naive policy requires m_avg >= 1");
    }
    if (m.policy.kind == PolicyKind::Oracle) {
      throw ConfigError("the Oracle policy cannot dispatch live requests");
    }
    if (j.contains("bandwidth")) m.bandwidth = bandwidth_from_json(j["bandwidth"]);
    if (j.contains("estimator")) m.estimator = estimator_from_json(j["estimator"]);
    return m;
  });
}

ReplaySummary replay_check(const DispatchModel& model, std::span<const RequestRecord> records) {
  ReplaySummary s;
  s.total = records.size();
  for (const auto& r : records) {
    const double m_hat = assumed_output_length(model.policy, r.n);
    const double t_tx = r.rtt_estimate + payload_ms(model.bandwidth, r.n, m_hat);
    const Decision d = decide(model.policy, r.n, t_tx);
    const bool same = d.target == r.decision.target && d.est_edge == r.decision.est_edge &&
                      d.est_cloud_total == r.decision.est_cloud_total;
    if (same) {
      ++s.matched;
    } else {
      s.mismatched_ids.push_back(r.request_id);
    }
  }
  return s;
}

namespace {

DeviceOracle device_oracle_from_json(const json& j) {
  DeviceOracle o;
  o.true_profile = profile_from_json(require<json>(j, "true_profile"));
  o.noise_sd = get_or(j, "noise_sd", 0.0);
  o.seed = require<std::uint64_t>(j, "seed");
  if (!(o.noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
  return o;
}

// Held-out characterization run: independent uniform n and m, request ids
// disjoint from any corpus so the noise draws do not overlap.
LatencyFit characterize_and_fit(const DeviceOracle& oracle, const json& spec,
                                const std::string& device_id) {
  const auto count = get_or<std::size_t>(spec, "count", 10000);
  std::mt19937_64 rng(require<std::uint64_t>(spec, "seed"));
  std::uniform_int_distribution<int> n_dist(get_or(spec, "n_lo", 1), get_or(spec, "n_hi", 100));
  std::uniform_int_distribution<int> m_dist(get_or(spec, "m_lo", 1), get_or(spec, "m_hi", 100));
  constexpr std::uint64_t kHeldOutIds = 1ULL << 40;
  std::vector<Request> reqs;
  reqs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int n = n_dist(rng);
    reqs.push_back({kHeldOutIds + i, n, m_dist(rng)});
  }
  const auto samples = characterize(oracle, make_corpus(std::move(reqs)));
  return fit_latency(samples, device_id);
}

}  // namespace

Experiment experiment_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("experiment", [&] {
    Experiment ex;
    SimConfig& cfg = ex.base;

    const json corpus = require<json>(j, "corpus");
    if (corpus.contains("path")) {
      cfg.corpus = load_corpus(resolve(base_dir, corpus["path"].get<std::string>()).string());
    } else {
      cfg.corpus = synth_corpus(synth_spec_from_json(require<json>(corpus, "synthetic")));
    }

    const json trace = require<json>(j, "trace");
    if (trace.contains("path")) {
      cfg.trace = load_trace(resolve(base_dir, trace["path"].get<std::string>()).string());
    } else if (trace.contains("constant_rtt_ms")) {
      cfg.trace = RttTrace::constant(trace["constant_rtt_ms"].get<double>());
    } else {
      cfg.trace = synth_trace(trace_spec_from_json(trace.contains("synthetic") ? trace["synthetic"] : trace));
    }

    if (j.contains("bandwidth")) cfg.bandwidth = bandwidth_from_json(j["bandwidth"]);

    const json devices = require<json>(j, "devices");
    cfg.edge_oracle = device_oracle_from_json(require<json>(devices, "edge"));
    cfg.cloud_oracle = device_oracle_from_json(require<json>(devices, "cloud"));
    cfg.edge_oracle.true_profile.device_id = "edge";
    cfg.cloud_oracle.true_profile.device_id = "cloud";

    // Profiles the policies believe in: ground truth, explicit, or fitted on
    // a held-out characterization run.
    const json profiles = get_or<json>(j, "profiles", json("true"));
    if (profiles.is_string() && profiles.get<std::string>() == "true") {
      cfg.policy.edge = cfg.edge_oracle.true_profile;
      cfg.policy.cloud = cfg.cloud_oracle.true_profile;
    } else if (profiles.contains("fit")) {
      const json& fit = profiles["fit"];
      auto edge = characterize_and_fit(cfg.edge_oracle, fit, "edge");
      auto cloud = characterize_and_fit(cfg.cloud_oracle, fit, "cloud");
      cfg.policy.edge = edge.profile;
      cfg.policy.cloud = cloud.profile;
      ex.edge_fit = edge.report;
      ex.cloud_fit = cloud.report;
    } else {
      cfg.policy.edge = profile_from_json(inline_or_file(require<json>(profiles, "edge"), base_dir));
      cfg.policy.cloud = profile_from_json(inline_or_file(require<json>(profiles, "cloud"), base_dir));
    }

    const json lm = require<json>(j, "length_model");
    if (lm.is_object() && lm.contains("fit")) {
      const json& fit = lm["fit"];
      const FilterRules rules = fit.contains("rules") ? filter_rules_from_json(fit["rules"]) : FilterRules{};
      std::vector<LengthPair> pairs;
      if (fit.contains("pairs")) {
        pairs = length_pairs(load_corpus(resolve(base_dir, fit["pairs"].get<std::string>()).string()));
      } else {
        pairs = length_pairs(cfg.corpus);
      }
      auto fitted = fit_length(pairs, rules, cfg.corpus.language_pair);
      cfg.policy.length_model = fitted.model;
      ex.length_fit = fitted.report;
    } else {
      cfg.policy.length_model = length_model_from_json(inline_or_file(lm, base_dir));
    }
    cfg.policy.m_avg = cfg.corpus.m_avg;

    if (j.contains("estimator")) {
      cfg.estimator_init = estimator_from_json(j["estimator"]);
      cfg.probe_interval_s = get_or(j["estimator"], "probe_interval_s", 0.0);
    }

    if (j.contains("mode")) {
      const json& mode = j["mode"];
      if (mode.is_string() && mode.get<std::string>() == "serial") {
        cfg.mode = SerialMode{};
      } else if (mode.is_object() && mode.contains("poisson")) {
        cfg.mode = PoissonMode{require<double>(mode["poisson"], "rate"),
                               require<std::uint64_t>(mode["poisson"], "seed")};
      } else {
        throw ConfigError("mode must be \"serial\" or {\"poisson\": {...}}");
      }
    }

    for (const auto& p : get_or<json>(j, "policies", json::array({"cnmt", "naive"}))) {
      ex.policies.push_back(parse_policy_kind(p.get<std::string>()));
    }
    if (ex.policies.empty()) throw ConfigError("policies must not be empty");
    cfg.policy.kind = ex.policies.front();
    ex.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "out"));
    return ex;
  });
}

Experiment load_experiment(const std::filesystem::path& path) {
  return experiment_from_json(read_json(path), path.parent_path());
}

}  // namespace cnmt
