#include "cnmt/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cnmt/error.hpp"
#include "cnmt/text_io.hpp"

namespace cnmt {

RttTrace::RttTrace(std::vector<RttSample> samples, std::string trace_id)
    : samples_(std::move(samples)), id_(std::move(trace_id)) {
  if (samples_.empty()) throw std::invalid_argument("RttTrace: trace is empty");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!(samples_[i].rtt > 0.0)) throw std::invalid_argument("RttTrace: rtt must be positive");
    if (i > 0 && !(samples_[i].t_offset > samples_[i - 1].t_offset)) {
      throw std::invalid_argument("RttTrace: offsets must be strictly increasing");
    }
  }
}

RttTrace RttTrace::constant(double rtt_ms, std::string trace_id) {
  return RttTrace({{0.0, rtt_ms}}, std::move(trace_id));
}

double RttTrace::mean_rtt() const {
  const double sum = std::accumulate(samples_.begin(), samples_.end(), 0.0,
                                     [](double acc, const RttSample& s) { return acc + s.rtt; });
  return sum / static_cast<double>(samples_.size());
}

double rtt_at(const RttTrace& trace, double t) {
  const auto& s = trace.samples();
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double value, const RttSample& x) { return value < x.t_offset; });
  if (it == s.begin()) return s.front().rtt;
  return std::prev(it)->rtt;
}

double payload_ms(const BandwidthModel& bw, double n, double m) {
  // bits / (Mbit/s) = microseconds; divide by 1000 for ms.
  return (n + m) * bw.bytes_per_token * 8.0 / (bw.mbps * 1000.0);
}

void validate(const TxEstimator& est) {
  if (!(est.ewma_alpha > 0.0 && est.ewma_alpha <= 1.0)) {
    throw std::invalid_argument("TxEstimator: ewma_alpha must lie in (0, 1]");
  }
  if (!(est.initial_rtt >= 0.0)) throw std::invalid_argument("TxEstimator: negative initial_rtt");
  if (est.last_rtt && !(*est.last_rtt > 0.0)) {
    throw std::invalid_argument("TxEstimator: last_rtt must be positive");
  }
}

TxEstimator observe_roundtrip(const TxEstimator& est, double measured_rtt, double now) {
  TxEstimator next = est;
  const double previous = est.last_rtt.value_or(measured_rtt);
  next.last_rtt = est.ewma_alpha * measured_rtt + (1.0 - est.ewma_alpha) * previous;
  next.last_update = now;
  return next;
}

double current_tx_estimate(const TxEstimator& est, const BandwidthModel& bw, double n,
                           double m_hat) {
  return rtt_estimate(est) + payload_ms(bw, n, m_hat);
}

double realized_tx(const RttTrace& trace, const BandwidthModel& bw, double t, double n, double m) {
  return rtt_at(trace, t) + payload_ms(bw, n, m);
}

TraceSpec cp1_spec() {
  TraceSpec s;
  s.trace_id = "cp1";
  s.duration_s = 4 * 3600.0;
  s.base_rtt = 95.0;
  s.walk_sd = 8.0;
  s.spike_prob = 0.08;
  s.spike_rtt = 90.0;
  s.seed = 1437285;
  return s;
}

TraceSpec cp2_spec() {
  TraceSpec s;
  s.trace_id = "cp2";
  s.duration_s = 5 * 3600.0;
  s.base_rtt = 35.0;
  s.walk_sd = 3.0;
  s.spike_prob = 0.03;
  s.spike_rtt = 40.0;
  s.seed = 6222;
  return s;
}

RttTrace synth_trace(const TraceSpec& spec) {
  if (!(spec.step_s > 0.0) || !(spec.duration_s >= 0.0)) {
    throw std::invalid_argument("TraceSpec: step and duration must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> walk(0.0, spec.walk_sd);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<RttSample> samples;
  double level = spec.base_rtt;
  int congested = 0;
  const auto steps = static_cast<std::size_t>(std::floor(spec.duration_s / spec.step_s)) + 1;
  samples.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    level += spec.reversion * (spec.base_rtt - level) + walk(rng);
    level = std::max(level, spec.floor_rtt);
    if (congested > 0) {
      --congested;
    } else if (coin(rng) < spec.spike_prob) {
      congested = spec.spike_steps;
    }
    const double rtt = level + (congested > 0 ? spec.spike_rtt : 0.0);
    samples.push_back({static_cast<double>(i) * spec.step_s, rtt});
  }
  return RttTrace(std::move(samples), spec.trace_id);
}

RttTrace load_trace(const std::string& path) {
  const auto table = read_table(path, ',', {"t_offset_s", "rtt_ms"});
  std::vector<RttSample> samples;
  samples.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    RttSample s{parse_double(row.fields[0], path, row.line), parse_double(row.fields[1], path, row.line)};
    if (!(s.rtt > 0.0)) throw ParseError(path, row.line, "rtt_ms must be positive");
    if (!samples.empty() && !(s.t_offset > samples.back().t_offset)) {
      throw ParseError(path, row.line, "t_offset_s must be strictly increasing");
    }
    samples.push_back(s);
  }
  if (samples.empty()) throw EmptyFile(path + ": trace has no samples");
  return RttTrace(std::move(samples), std::filesystem::path(path).stem().string());
}

void save_trace(const RttTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "t_offset_s,rtt_ms\n";
  for (const auto& s : trace.samples()) {
    out << format_double(s.t_offset) << ',' << format_double(s.rtt) << '\n';
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace cnmt
