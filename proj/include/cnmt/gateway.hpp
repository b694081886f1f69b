#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cnmt/config.hpp"

namespace cnmt {

struct WireRequest {
  std::string id;
  int n = 1;
  std::optional<int> m_true;
};

struct WireResponse {
  std::string id;
  Target target = Target::Edge;  ///< where the request was served
  double est_edge_ms = 0.0;
  double est_cloud_ms = 0.0;
  double charged_ms = 0.0;
  double rtt_estimate_ms = 0.0;
  bool cloud_unreachable = false;
};

/// Parses one request frame. Throws ProtocolError on malformed JSON, missing
/// or mistyped fields, or n < 1.
WireRequest parse_request(std::string_view frame);
/// Frames carry no trailing newline.
std::string encode(const WireResponse& resp);
std::string encode_error(const std::optional<std::string>& id, std::string_view message);
WireResponse parse_response(std::string_view frame);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  ///< 0 picks an ephemeral port when listening
};

/// "host:port"
Endpoint parse_endpoint(std::string_view text);

struct GatewayConfig {
  DispatchModel model;
  /// Executes edge-routed requests; defaults to the model's edge profile.
  std::optional<DeviceProfile> edge_executor;
  Endpoint listen;
  Endpoint cloud;
  double time_scale = 1.0;  ///< wall-clock seconds slept per modeled second
  double cloud_timeout_ms = 2000.0;
  std::filesystem::path decision_log;  ///< written on stop() when non-empty
};

GatewayConfig gateway_config_from_json(const json& j, const std::filesystem::path& base_dir);

struct GatewayStats {
  std::size_t completed = 0;
  std::size_t edge_count = 0;
  std::size_t cloud_count = 0;
  std::size_t cloud_unreachable = 0;
  std::size_t protocol_errors = 0;
  double rtt_estimate_ms = 0.0;
  double total_charged_ms = 0.0;
};

json to_json(const GatewayStats& s);

/// Sole owner of the estimator, the counters and the decision log. Every
/// mutation goes through one mutex, so estimator updates follow a single
/// serial order of completed round trips.
class Coordinator {
 public:
  explicit Coordinator(TxEstimator init);

  double rtt_estimate() const;
  /// Records a finished request; a measured RTT (ms) is folded into the
  /// estimator at time `now_s`.
  void complete(RequestRecord record, Target served, bool cloud_unreachable,
                std::optional<double> measured_rtt, double now_s);
  void protocol_error();

  GatewayStats stats() const;
  std::vector<RequestRecord> decision_log() const;
  /// Estimator value after each observation, in application order.
  std::vector<double> estimate_history() const;

 private:
  mutable std::mutex mutex_;
  TxEstimator estimator_;
  GatewayStats stats_;
  std::vector<RequestRecord> log_;
  std::vector<double> history_;
};

/// Blocking client for the cloud stub; one per gateway connection.
class CloudClient {
 public:
  CloudClient(Endpoint endpoint, double timeout_ms);
  ~CloudClient();
  CloudClient(const CloudClient&) = delete;
  CloudClient& operator=(const CloudClient&) = delete;

  /// Returns the stub's modeled service time in ms. Throws CloudUnreachable.
  double execute(const std::string& id, int n, int m);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class Gateway {
 public:
  explicit Gateway(GatewayConfig cfg);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and starts accepting connections.
  void start();
  /// Stops accepting, closes connections and writes the decision log.
  void stop();
  std::uint16_t port() const;

  /// Routes and executes one request. Safe to call from any thread.
  WireResponse handle_request(const WireRequest& req, CloudClient& cloud);

  GatewayStats stats() const { return coordinator_.stats(); }
  std::vector<RequestRecord> decision_log() const { return coordinator_.decision_log(); }
  const Coordinator& coordinator() const { return coordinator_; }
  const GatewayConfig& config() const { return cfg_; }

 private:
  struct Server;
  std::string handle_frame(std::string_view frame, CloudClient& cloud);

  GatewayConfig cfg_;
  Coordinator coordinator_;
  std::unique_ptr<Server> server_;
  double epoch_ = 0.0;
};

/// Blocking NDJSON client for the gateway.
class GatewayClient {
 public:
  explicit GatewayClient(const Endpoint& endpoint);
  ~GatewayClient();
  GatewayClient(const GatewayClient&) = delete;
  GatewayClient& operator=(const GatewayClient&) = delete;

  /// Sends one frame (a newline is appended) and returns the reply line.
  std::string call_raw(std::string_view frame);
  /// Throws ProtocolError when the gateway answers with an error frame.
  WireResponse call(const WireRequest& req);
  GatewayStats stats();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CloudStubConfig {
  Endpoint listen;
  DeviceProfile profile;
  double injected_rtt_ms = 0.0;
  double time_scale = 1.0;
};

CloudStubConfig cloud_stub_config_from_json(const json& j, const std::filesystem::path& base_dir);

/// Stand-in cloud server: sleeps the modeled service time plus an injected
/// round-trip delay, then replies with the service time.
class CloudStub {
 public:
  explicit CloudStub(CloudStubConfig cfg);
  ~CloudStub();
  CloudStub(const CloudStub&) = delete;
  CloudStub& operator=(const CloudStub&) = delete;

  void start();
  void stop();
  std::uint16_t port() const;
  /// Changes the injected delay for subsequent requests.
  void set_injected_rtt(double ms);

 private:
  struct Server;
  std::string handle_frame(std::string_view frame);

  CloudStubConfig cfg_;
  std::atomic<double> injected_rtt_;
  std::unique_ptr<Server> server_;
};

}  // namespace cnmt
