#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cnmt/config.hpp"
#include "cnmt/error.hpp"
#include "cnmt/gateway.hpp"
#include "cnmt/text_io.hpp"

namespace cnmt::cli {

namespace {

namespace fs = std::filesystem;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void emit_json(const json& j, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_json(j, out_path);
  }
}

std::string records_name(PolicyKind k) {
  std::string name(to_string(k));
  for (auto& c : name) {
    if (c == '-') c = '_';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return "records_" + name + ".csv";
}

void print_report(const Report& report, std::ostream& out) {
  out << "trace " << report.trace_id << ", " << report.request_count << " requests, "
      << report.mode << " (" << report.note << ")\n";
  out << std::left << std::setw(12) << "policy" << std::right << std::setw(16) << "total_ms"
      << std::setw(10) << "vs GW" << std::setw(10) << "vs Server" << std::setw(11) << "vs Oracle"
      << std::setw(8) << "edge" << std::setw(8) << "cloud" << '\n';
  for (const auto& r : report.rows) {
    out << std::left << std::setw(12) << to_string(r.policy) << std::right << std::setw(16)
        << format_fixed(r.total, 3) << std::setw(10) << format_fixed(r.vs_edge, 2) << std::setw(10)
        << format_fixed(r.vs_cloud, 2) << std::setw(11) << format_fixed(r.vs_oracle, 2)
        << std::setw(8) << r.edge_count << std::setw(8) << r.cloud_count << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collaborative edge/cloud dispatch for sequence-to-sequence inference", "cnmt"};
  app.require_subcommand(1);

  // fit-latency
  std::string samples_path, device_id, out_path;
  auto* fit_lat = app.add_subcommand("fit-latency", "Fit an execution-time plane to measurements");
  fit_lat->add_option("--samples", samples_path, "CSV with header n,m,t_ms")->required();
  fit_lat->add_option("--device-id", device_id, "Identifier stored in the model");
  fit_lat->add_option("--out", out_path, "Model JSON path (stdout if omitted)");

  // fit-length
  std::string pairs_path, language_pair;
  FilterRules rules;
  auto* fit_len = app.add_subcommand("fit-length", "Fit the output-length model to length pairs");
  fit_len->add_option("--pairs", pairs_path, "TSV with header n<TAB>m_real")->required();
  fit_len->add_option("--min-len", rules.min_len, "Drop pairs with a side shorter than this")
      ->capture_default_str();
  fit_len->add_option("--max-len", rules.max_len, "Drop pairs with a side longer than this")
      ->capture_default_str();
  fit_len->add_option("--max-ratio", rules.max_ratio, "Drop pairs whose length ratio exceeds this")
      ->capture_default_str();
  fit_len->add_option("--language-pair", language_pair);
  fit_len->add_option("--out", out_path, "Model JSON path (stdout if omitted)");

  // gen-corpus
  std::string synth_config;
  SynthSpec synth;
  int lo = 3, hi = 100;
  auto* gen_corpus = app.add_subcommand("gen-corpus", "Generate a synthetic length-pair corpus");
  gen_corpus->add_option("--config", synth_config, "JSON synthetic corpus spec (overrides flags)");
  gen_corpus->add_option("--count", synth.count)->capture_default_str();
  gen_corpus->add_option("--lo", lo, "Smallest input length")->capture_default_str();
  gen_corpus->add_option("--hi", hi, "Largest input length")->capture_default_str();
  gen_corpus->add_option("--gamma", synth.gamma)->capture_default_str();
  gen_corpus->add_option("--delta", synth.delta)->capture_default_str();
  gen_corpus->add_option("--noise", synth.length_noise_sd, "Length noise sd in tokens")
      ->capture_default_str();
  gen_corpus->add_option("--seed", synth.seed)->capture_default_str();
  gen_corpus->add_option("--out", out_path, "Output TSV")->required();

  // gen-measurements
  double alpha_n = 0, alpha_m = 0, beta = 0, noise_sd = 0;
  std::uint64_t seed = 1;
  std::size_t count = 10000;
  auto* gen_meas = app.add_subcommand("gen-measurements",
                                      "Characterize a synthetic device into a measurement CSV");
  gen_meas->add_option("--alpha-n", alpha_n)->required();
  gen_meas->add_option("--alpha-m", alpha_m)->required();
  gen_meas->add_option("--beta", beta)->required();
  gen_meas->add_option("--noise-sd", noise_sd)->capture_default_str();
  gen_meas->add_option("--count", count)->capture_default_str();
  gen_meas->add_option("--seed", seed)->capture_default_str();
  gen_meas->add_option("--out", out_path, "Output CSV")->required();

  // gen-trace
  std::string preset, trace_config;
  double constant_rtt = 0;
  std::optional<std::uint64_t> trace_seed;
  auto* gen_trace = app.add_subcommand("gen-trace", "Generate a connection profile");
  auto* preset_opt = gen_trace->add_option("--preset", preset, "cp1 or cp2")
                         ->check(CLI::IsMember({"cp1", "cp2"}));
  auto* const_opt = gen_trace->add_option("--constant-rtt", constant_rtt, "Flat RTT in ms");
  auto* cfg_opt = gen_trace->add_option("--config", trace_config, "JSON trace spec");
  preset_opt->excludes(const_opt)->excludes(cfg_opt);
  const_opt->excludes(cfg_opt);
  gen_trace->add_option("--seed", trace_seed, "Override the generator seed");
  gen_trace->add_option("--out", out_path, "Output CSV")->required();

  // simulate
  std::string config_path, policy_name, out_dir;
  auto* simulate = app.add_subcommand("simulate", "Run one policy over an experiment");
  simulate->add_option("--config", config_path, "Experiment JSON")->required();
  simulate->add_option("--policy", policy_name, "Policy (defaults to the first listed)");
  simulate->add_option("--out", out_path, "RunResult CSV path");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare policies against static and Oracle baselines");
  compare->add_option("--config", config_path, "Experiment JSON")->required();
  compare->add_option("--out-dir", out_dir, "Overrides the config's output_dir");

  // serve
  double max_seconds = 0;
  auto* serve = app.add_subcommand("serve", "Run the dispatch gateway");
  serve->add_option("--config", config_path, "Gateway JSON")->required();
  serve->add_option("--max-seconds", max_seconds, "Stop after this long (0 runs until signalled)");

  // cloud-stub
  auto* stub = app.add_subcommand("cloud-stub", "Run the stand-in cloud executor");
  stub->add_option("--config", config_path, "Cloud stub JSON")->required();
  stub->add_option("--max-seconds", max_seconds, "Stop after this long (0 runs until signalled)");

  // send
  std::string address, corpus_path;
  bool with_m_true = false;
  auto* send = app.add_subcommand("send", "Send a corpus to a running gateway");
  send->add_option("--address", address, "host:port")->required();
  send->add_option("--corpus", corpus_path, "TSV with header n<TAB>m_real")->required();
  send->add_flag("--with-m-true", with_m_true, "Include ground-truth output lengths");

  // replay-check
  std::string log_path, model_path;
  auto* replay = app.add_subcommand("replay-check", "Re-derive logged decisions offline");
  replay->add_option("--log", log_path, "Decision log CSV")->required();
  replay->add_option("--model", model_path, "Gateway or dispatch-model JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (*gen_trace && !*preset_opt && !*const_opt && !*cfg_opt) {
      throw CLI::RequiredError("gen-trace needs one of --preset, --constant-rtt or --config");
    }
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream diag;
    app.exit(e, diag, diag);
    err << "cnmt: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*fit_lat) {
      const auto fit = fit_latency(load_measurements(samples_path), device_id);
      emit_json(to_json(fit.profile, fit.report), out_path, out);
    } else if (*fit_len) {
      const auto corpus = load_corpus(pairs_path);
      const auto fit = fit_length(length_pairs(corpus), rules,
                                  language_pair.empty() ? corpus.language_pair : language_pair);
      emit_json(to_json(fit.model, fit.report), out_path, out);
    } else if (*gen_corpus) {
      if (!synth_config.empty()) {
        synth = synth_spec_from_json(read_json(synth_config));
      } else {
        synth.n_distribution = UniformLengths{lo, hi};
      }
      save_corpus(synth_corpus(synth), out_path);
    } else if (*gen_meas) {
      DeviceOracle oracle{DeviceProfile(alpha_n, alpha_m, beta), noise_sd, seed};
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> len(1, 100);
      std::vector<Request> reqs;
      for (std::size_t i = 0; i < count; ++i) {
        const int n = len(rng);
        reqs.push_back({i, n, len(rng)});
      }
      save_measurements(characterize(oracle, make_corpus(std::move(reqs))), out_path);
    } else if (*gen_trace) {
      if (*const_opt) {
        save_trace(RttTrace::constant(constant_rtt), out_path);
      } else {
        TraceSpec spec = !trace_config.empty() ? trace_spec_from_json(read_json(trace_config))
                         : preset == "cp2"      ? cp2_spec()
                                                : cp1_spec();
        if (trace_seed) spec.seed = *trace_seed;
        save_trace(synth_trace(spec), out_path);
      }
    } else if (*simulate) {
      Experiment ex = load_experiment(config_path);
      if (!policy_name.empty()) ex.base.policy.kind = parse_policy_kind(policy_name);
      const RunResult run = run_simulation(ex.base);
      if (!out_path.empty()) save_records(run, out_path);
      std::size_t cloud = 0;
      for (const auto& r : run.records) cloud += r.decision.target == Target::Cloud;
      out << to_string(run.policy) << ": total_ms=" << format_fixed(run.total, 3)
          << " requests=" << run.records.size() << " cloud=" << cloud << '\n';
    } else if (*compare) {
      const Experiment ex = load_experiment(config_path);
      const fs::path dir = out_dir.empty() ? ex.output_dir : fs::path(out_dir);
      fs::create_directories(dir);
      const Report report = compare_report(ex.base, ex.policies);
      json j = to_json(report);
      if (ex.edge_fit) j["edge_fit"] = to_json(*ex.edge_fit);
      if (ex.cloud_fit) j["cloud_fit"] = to_json(*ex.cloud_fit);
      if (ex.length_fit) j["length_fit"] = to_json(*ex.length_fit);
      j["models"] = {{"edge", to_json(ex.base.policy.edge)},
                     {"cloud", to_json(ex.base.policy.cloud)},
                     {"length_model", to_json(ex.base.policy.length_model)},
                     {"m_avg", ex.base.policy.m_avg}};
      write_json(j, dir / "report.json");
      save_report_csv(report, (dir / "report.csv").string());
      for (const auto& run : report.runs) save_records(run, (dir / records_name(run.policy)).string());
      print_report(report, out);
    } else if (*serve || *stub) {
      const fs::path path(config_path);
      const json j = read_json(path);
      std::unique_ptr<Gateway> gateway;
      std::unique_ptr<CloudStub> cloud_stub;
      std::uint16_t port = 0;
      if (*serve) {
        gateway = std::make_unique<Gateway>(gateway_config_from_json(j, path.parent_path()));
        gateway->start();
        port = gateway->port();
      } else {
        cloud_stub = std::make_unique<CloudStub>(cloud_stub_config_from_json(j, path.parent_path()));
        cloud_stub->start();
        port = cloud_stub->port();
      }
      out << (*serve ? "gateway" : "cloud stub") << " listening on port " << port << std::endl;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const auto start = std::chrono::steady_clock::now();
      while (!g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (max_seconds > 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= max_seconds) {
          break;
        }
      }
      if (gateway) {
        gateway->stop();
        out << to_json(gateway->stats()).dump() << '\n';
      }
      if (cloud_stub) cloud_stub->stop();
    } else if (*send) {
      const Corpus corpus = load_corpus(corpus_path);
      GatewayClient client(parse_endpoint(address));
      std::size_t edge = 0, cloud = 0, unreachable = 0;
      double total = 0;
      for (const auto& r : corpus.requests) {
        WireRequest req{std::to_string(r.id), r.n, std::nullopt};
        if (with_m_true) req.m_true = r.m_true;
        const WireResponse resp = client.call(req);
        (resp.target == Target::Edge ? edge : cloud) += 1;
        unreachable += resp.cloud_unreachable;
        total += resp.charged_ms;
      }
      out << "sent " << corpus.requests.size() << " requests: edge=" << edge << " cloud=" << cloud
          << " cloud_unreachable=" << unreachable << " charged_ms=" << format_fixed(total, 3) << '\n';
    } else if (*replay) {
      const fs::path path(model_path);
      const DispatchModel model = dispatch_model_from_json(read_json(path), path.parent_path());
      const auto records = load_records(log_path);
      const ReplaySummary s = replay_check(model, records);
      out << s.matched << "/" << s.total << " decisions match\n";
      if (s.matched != s.total) {
        err << "cnmt: first mismatch at request '" << s.mismatched_ids.front() << "'\n";
        return 1;
      }
    }
  } catch (const std::exception& e) {
    err << "cnmt: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cnmt::cli
