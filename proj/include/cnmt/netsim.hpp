#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cnmt {

struct RttSample {
  double t_offset = 0.0;  ///< seconds from trace start
  double rtt = 0.0;       ///< ms

  bool operator==(const RttSample&) const = default;
};

/// Replayable round-trip-time profile. Offsets are strictly increasing and
/// every RTT is positive; construction throws std::invalid_argument otherwise.
class RttTrace {
 public:
  RttTrace(std::vector<RttSample> samples, std::string trace_id = {});

  /// A single-sample trace with a fixed RTT.
  static RttTrace constant(double rtt_ms, std::string trace_id = "constant");

  const std::vector<RttSample>& samples() const noexcept { return samples_; }
  const std::string& id() const noexcept { return id_; }
  double mean_rtt() const;

  bool operator==(const RttTrace&) const = default;

 private:
  std::vector<RttSample> samples_;
  std::string id_;
};

/// Zero-order hold: RTT of the latest sample at or before t, clamped to the
/// first and last samples outside the trace.
double rtt_at(const RttTrace& trace, double t);

struct BandwidthModel {
  double mbps = 100.0;
  double bytes_per_token = 2.0;
};

/// Serialization time of n + m tokens, in ms.
double payload_ms(const BandwidthModel& bw, double n, double m);

/// The gateway's belief about the current round-trip time, refreshed from
/// timestamped cloud round trips.
struct TxEstimator {
  std::optional<double> last_rtt;     ///< ms
  std::optional<double> last_update;  ///< simulation seconds
  double ewma_alpha = 1.0;
  double initial_rtt = 50.0;  ///< ms, used until the first observation
};

/// Throws std::invalid_argument on an out-of-range alpha or prior.
void validate(const TxEstimator& est);

TxEstimator observe_roundtrip(const TxEstimator& est, double measured_rtt, double now);

inline double rtt_estimate(const TxEstimator& est) {
  return est.last_rtt.value_or(est.initial_rtt);
}

double current_tx_estimate(const TxEstimator& est, const BandwidthModel& bw, double n,
                           double m_hat);

/// Ground-truth transmission cost of a request offloaded at time t.
double realized_tx(const RttTrace& trace, const BandwidthModel& bw, double t, double n, double m);

/// Parameters of a synthetic connection profile: a mean-reverting random walk
/// around base_rtt with occasional congestion episodes.
struct TraceSpec {
  std::string trace_id = "synthetic";
  double duration_s = 14400.0;
  double step_s = 60.0;
  double base_rtt = 60.0;     ///< ms
  double walk_sd = 4.0;       ///< ms per step
  double reversion = 0.1;     ///< pull toward base_rtt per step, in [0, 1]
  double spike_prob = 0.05;   ///< per-step probability of entering congestion
  double spike_rtt = 60.0;    ///< ms added while congested
  int spike_steps = 5;
  double floor_rtt = 5.0;     ///< ms
  std::uint64_t seed = 1;
};

/// Emulation of the slower of the two evaluation profiles (higher mean RTT).
TraceSpec cp1_spec();
/// Emulation of the faster profile (lower mean RTT).
TraceSpec cp2_spec();

RttTrace synth_trace(const TraceSpec& spec);

RttTrace load_trace(const std::string& path);
void save_trace(const RttTrace& trace, const std::string& path);

}  // namespace cnmt
