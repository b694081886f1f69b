#include "cnmt/gateway.hpp"

#include <sys/socket.h>

#include <boost/asio.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <fstream>
#include <thread>

#include "cnmt/error.hpp"

namespace cnmt {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxFrameBytes = 1 << 16;

double steady_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void sleep_ms(double ms) {
  if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

WireRequest request_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("frame is not a JSON object");
  WireRequest req;
  if (!j.contains("id") || !j["id"].is_string()) throw ProtocolError("'id' must be a string");
  req.id = j["id"].get<std::string>();
  if (!j.contains("n") || !j["n"].is_number_integer()) throw ProtocolError("'n' must be an integer");
  const auto n = j["n"].get<long long>();
  if (n < 1 || n > 1'000'000) throw ProtocolError("'n' must be in [1, 1000000]");
  req.n = static_cast<int>(n);
  if (j.contains("m_true") && !j["m_true"].is_null()) {
    if (!j["m_true"].is_number_integer()) throw ProtocolError("'m_true' must be an integer");
    const auto m = j["m_true"].get<long long>();
    if (m < 1 || m > 1'000'000) throw ProtocolError("'m_true' must be in [1, 1000000]");
    req.m_true = static_cast<int>(m);
  }
  return req;
}

json parse_frame(std::string_view frame) {
  try {
    return json::parse(frame);
  } catch (const json::parse_error&) {
    throw ProtocolError("malformed JSON frame");
  }
}

}  // namespace

WireRequest parse_request(std::string_view frame) { return request_from_json(parse_frame(frame)); }

std::string encode(const WireResponse& resp) {
  ordered_json j = {{"id", resp.id},
                    {"target", to_string(resp.target)},
                    {"est_edge_ms", resp.est_edge_ms},
                    {"est_cloud_ms", resp.est_cloud_ms},
                    {"charged_ms", resp.charged_ms},
                    {"rtt_estimate_ms", resp.rtt_estimate_ms}};
  if (resp.cloud_unreachable) j["cloud_unreachable"] = true;
  return j.dump();
}

std::string encode_error(const std::optional<std::string>& id, std::string_view message) {
  ordered_json j;
  if (id) j["id"] = *id;
  j["error"] = message;
  return j.dump();
}

WireResponse parse_response(std::string_view frame) {
  const json j = parse_frame(frame);
  if (j.contains("error")) throw ProtocolError(j["error"].get<std::string>());
  try {
    WireResponse r;
    r.id = j.at("id").get<std::string>();
    r.target = parse_target(j.at("target").get<std::string>());
    r.est_edge_ms = j.at("est_edge_ms").get<double>();
    r.est_cloud_ms = j.at("est_cloud_ms").get<double>();
    r.charged_ms = j.at("charged_ms").get<double>();
    r.rtt_estimate_ms = j.at("rtt_estimate_ms").get<double>();
    r.cloud_unreachable = j.value("cloud_unreachable", false);
    return r;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
}

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError("endpoint must be host:port");
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  const std::string port(text.substr(colon + 1));
  try {
    const int p = std::stoi(port);
    if (p < 0 || p > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw ConfigError("bad port in endpoint '" + std::string(text) + "'");
  }
  return ep;
}

GatewayConfig gateway_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  GatewayConfig cfg;
  cfg.model = dispatch_model_from_json(j, base_dir);
  try {
    if (j.contains("edge_executor")) cfg.edge_executor = profile_from_json(j["edge_executor"]);
    cfg.listen = parse_endpoint(j.value("listen", "127.0.0.1:7000"));
    cfg.cloud = parse_endpoint(j.value("cloud_stub", "127.0.0.1:7001"));
    cfg.time_scale = j.value("time_scale", 1.0);
    cfg.cloud_timeout_ms = j.value("cloud_timeout_ms", 2000.0);
    if (j.contains("decision_log")) {
      const std::filesystem::path p(j["decision_log"].get<std::string>());
      cfg.decision_log = p.is_absolute() ? p : base_dir / p;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gateway config: ") + e.what());
  }
  if (!(cfg.time_scale > 0.0)) throw ConfigError("gateway config: time_scale must be > 0");
  return cfg;
}

json to_json(const GatewayStats& s) {
  return {{"completed", s.completed},
          {"edge_count", s.edge_count},
          {"cloud_count", s.cloud_count},
          {"cloud_unreachable", s.cloud_unreachable},
          {"protocol_errors", s.protocol_errors},
          {"rtt_estimate_ms", s.rtt_estimate_ms},
          {"total_charged_ms", s.total_charged_ms}};
}

// ---------------------------------------------------------------------------
// Coordinator

Coordinator::Coordinator(TxEstimator init) : estimator_(std::move(init)) {
  validate(estimator_);
  stats_.rtt_estimate_ms = cnmt::rtt_estimate(estimator_);
}

double Coordinator::rtt_estimate() const {
  std::lock_guard lock(mutex_);
  return cnmt::rtt_estimate(estimator_);
}

void Coordinator::complete(RequestRecord record, Target served, bool cloud_unreachable,
                           std::optional<double> measured_rtt, double now_s) {
  std::lock_guard lock(mutex_);
  if (measured_rtt) {
    const double now = std::max(now_s, estimator_.last_update.value_or(now_s));
    estimator_ = observe_roundtrip(estimator_, *measured_rtt, now);
    history_.push_back(*estimator_.last_rtt);
  }
  ++stats_.completed;
  (served == Target::Edge ? stats_.edge_count : stats_.cloud_count) += 1;
  if (cloud_unreachable) ++stats_.cloud_unreachable;
  stats_.total_charged_ms += record.charged;
  stats_.rtt_estimate_ms = cnmt::rtt_estimate(estimator_);
  log_.push_back(std::move(record));
}

void Coordinator::protocol_error() {
  std::lock_guard lock(mutex_);
  ++stats_.protocol_errors;
}

GatewayStats Coordinator::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::vector<RequestRecord> Coordinator::decision_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::vector<double> Coordinator::estimate_history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

// ---------------------------------------------------------------------------
// Line-oriented TCP server: one thread per connection, frames handled in
// arrival order so responses keep per-connection request order.

namespace {

class LineServer {
 public:
  using Handler = std::function<std::string(std::string_view)>;
  using HandlerFactory = std::function<Handler()>;

  LineServer(const Endpoint& ep, HandlerFactory factory)
      : acceptor_(io_), factory_(std::move(factory)) {
    const tcp::endpoint endpoint(asio::ip::make_address(ep.host), ep.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(tcp::acceptor::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  ~LineServer() { stop(); }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    boost::system::error_code ec;
    acceptor_.close(ec);

    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mutex_);
      for (auto& s : sockets_) ::shutdown(s->native_handle(), SHUT_RDWR);
      workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
  }

 private:
  void accept_loop() {
    while (!stopping_) {
      auto socket = std::make_shared<tcp::socket>(io_);
      boost::system::error_code ec;
      acceptor_.accept(*socket, ec);
      if (ec) {
        if (stopping_) break;
        continue;
      }
      socket->set_option(tcp::no_delay(true), ec);
      std::lock_guard lock(mutex_);
      if (stopping_) break;
      sockets_.push_back(socket);
      workers_.emplace_back([this, socket] { serve(*socket); });
    }
  }

  void serve(tcp::socket& socket) {
    Handler handler = factory_();
    asio::streambuf buffer(kMaxFrameBytes);
    std::istream in(&buffer);
    std::string line;
    while (true) {
      boost::system::error_code ec;
      asio::read_until(socket, buffer, '\n', ec);
      if (ec == asio::error::not_found) {
        const std::string reply = encode_error(std::nullopt, "frame exceeds size limit") + "\n";
        asio::write(socket, asio::buffer(reply), ec);
        break;
      }
      if (ec) break;
      std::getline(in, line);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string reply = handler(line) + "\n";
      asio::write(socket, asio::buffer(reply), ec);
      if (ec) break;
    }
    boost::system::error_code ignored;
    socket.shutdown(tcp::socket::shutdown_both, ignored);
  }

  asio::io_context io_;
  tcp::acceptor acceptor_;
  HandlerFactory factory_;
  std::thread accept_thread_;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::vector<std::shared_ptr<tcp::socket>> sockets_;
  std::vector<std::thread> workers_;
};

}  // namespace

// ---------------------------------------------------------------------------
// CloudClient

struct CloudClient::Impl {
  Endpoint endpoint;
  double timeout_ms;
  asio::io_context io;
  std::optional<tcp::socket> socket;
  asio::streambuf buffer{kMaxFrameBytes};

  // Runs queued async work; closes the socket if it does not finish in time.
  bool run_with_timeout() {
    io.restart();
    io.run_for(std::chrono::microseconds(static_cast<long long>(timeout_ms * 1000.0)));
    if (io.stopped()) return true;
    close();
    io.restart();
    io.run();
    return false;
  }

  void close() {
    if (!socket) return;
    boost::system::error_code ec;
    socket->close(ec);
  }

  void connect() {
    socket.emplace(io);
    buffer.consume(buffer.size());
    boost::system::error_code result = asio::error::timed_out;
    tcp::resolver resolver(io);
    boost::system::error_code rec;
    const auto endpoints = resolver.resolve(endpoint.host, std::to_string(endpoint.port), rec);
    if (rec) throw CloudUnreachable("cannot resolve cloud endpoint: " + rec.message());
    asio::async_connect(*socket, endpoints,
                        [&result](const boost::system::error_code& ec, const tcp::endpoint&) { result = ec; });
    if (!run_with_timeout() || result) {
      socket.reset();
      throw CloudUnreachable("cannot connect to cloud: " + result.message());
    }
    socket->set_option(tcp::no_delay(true));
  }

  std::string round_trip(const std::string& frame) {
    if (!socket) connect();
    boost::system::error_code write_ec = asio::error::timed_out;
    boost::system::error_code read_ec = asio::error::timed_out;
    asio::async_write(*socket, asio::buffer(frame),
                      [&](const boost::system::error_code& ec, std::size_t) {
                        write_ec = ec;
                        if (ec) return;
                        asio::async_read_until(*socket, buffer, '\n',
                                               [&](const boost::system::error_code& rec, std::size_t) {
                                                 read_ec = rec;
                                               });
                      });
    if (!run_with_timeout() || write_ec || read_ec) {
      socket.reset();
      throw CloudUnreachable("cloud round trip failed");
    }
    std::istream in(&buffer);
    std::string line;
    std::getline(in, line);
    return line;
  }
};

CloudClient::CloudClient(Endpoint endpoint, double timeout_ms)
    : impl_(std::make_unique<Impl>()) {
  impl_->endpoint = std::move(endpoint);
  impl_->timeout_ms = timeout_ms;
}

CloudClient::~CloudClient() = default;

double CloudClient::execute(const std::string& id, int n, int m) {
  const std::string frame = ordered_json{{"id", id}, {"n", n}, {"m", m}}.dump() + "\n";
  const std::string reply = impl_->round_trip(frame);
  try {
    const json j = json::parse(reply);
    if (j.contains("error")) throw CloudUnreachable("cloud error: " + j["error"].get<std::string>());
    return j.at("service_ms").get<double>();
  } catch (const json::exception&) {
    throw CloudUnreachable("malformed cloud reply");
  }
}

// ---------------------------------------------------------------------------
// Gateway

struct Gateway::Server {
  Server(const Endpoint& ep, LineServer::HandlerFactory factory) : lines(ep, std::move(factory)) {}
  LineServer lines;
};

Gateway::Gateway(GatewayConfig cfg)
    : cfg_(std::move(cfg)), coordinator_(cfg_.model.estimator), epoch_(steady_seconds()) {
  if (cfg_.model.policy.kind == PolicyKind::Oracle) {
    throw ConfigError("gateway: the Oracle policy cannot dispatch live requests");
  }
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (server_) return;
  auto factory = [this]() -> LineServer::Handler {
    auto cloud = std::make_shared<CloudClient>(cfg_.cloud, cfg_.cloud_timeout_ms);
    return [this, cloud](std::string_view frame) { return handle_frame(frame, *cloud); };
  };
  server_ = std::make_unique<Server>(cfg_.listen, factory);
}

void Gateway::stop() {
  if (!server_) return;
  server_->lines.stop();
  server_.reset();
  if (!cfg_.decision_log.empty()) {
    RunResult run;
    run.records = coordinator_.decision_log();
    save_records(run, cfg_.decision_log.string());
  }
}

std::uint16_t Gateway::port() const {
  if (!server_) throw Error("gateway is not running");
  return server_->lines.port();
}

WireResponse Gateway::handle_request(const WireRequest& req, CloudClient& cloud) {
  const PolicyConfig& policy = cfg_.model.policy;
  const double rtt = coordinator_.rtt_estimate();
  const double m_hat = assumed_output_length(policy, req.n);
  const Decision decision = decide(policy, req.n, rtt + payload_ms(cfg_.model.bandwidth, req.n, m_hat));
  const int m_exec = req.m_true.value_or(static_cast<int>(std::max(1.0, std::round(m_hat))));
  const DeviceProfile& edge = cfg_.edge_executor ? *cfg_.edge_executor : policy.edge;

  RequestRecord rec;
  rec.request_id = req.id;
  rec.n = req.n;
  rec.decision = decision;
  rec.rtt_estimate = rtt;
  rec.realized_edge = rec.realized_cloud_exec = rec.realized_tx = std::nan("");
  rec.queue_delay = 0.0;

  const double t0 = steady_seconds();
  rec.clock_at_dispatch = t0 - epoch_;
  Target served = decision.target;
  bool unreachable = false;
  std::optional<double> measured_rtt;

  if (decision.target == Target::Cloud) {
    try {
      const double service_ms = cloud.execute(req.id, req.n, m_exec);
      const double total_ms = (steady_seconds() - t0) * 1000.0 / cfg_.time_scale;
      rec.realized_cloud_exec = service_ms;
      rec.realized_tx = std::max(total_ms - service_ms, 1e-6);
      rec.charged = total_ms;
      measured_rtt = rec.realized_tx;
    } catch (const CloudUnreachable&) {
      served = Target::Edge;
      unreachable = true;
    }
  }
  if (served == Target::Edge) {
    const double t_edge = steady_seconds();
    sleep_ms(exec_time(edge, req.n, m_exec) * cfg_.time_scale);
    rec.realized_edge = (steady_seconds() - t_edge) * 1000.0 / cfg_.time_scale;
    rec.charged = (steady_seconds() - t0) * 1000.0 / cfg_.time_scale;
  }

  WireResponse resp;
  resp.id = req.id;
  resp.target = served;
  resp.est_edge_ms = decision.est_edge;
  resp.est_cloud_ms = decision.est_cloud_total;
  resp.charged_ms = rec.charged;
  resp.rtt_estimate_ms = rtt;
  resp.cloud_unreachable = unreachable;

  coordinator_.complete(std::move(rec), served, unreachable, measured_rtt, steady_seconds() - epoch_);
  return resp;
}

std::string Gateway::handle_frame(std::string_view frame, CloudClient& cloud) {
  std::optional<std::string> id;
  try {
    const json j = parse_frame(frame);
    if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
    if (j.is_object() && j.contains("cmd")) {
      if (j["cmd"] == "stats") return to_json(stats()).dump();
      throw ProtocolError("unknown command");
    }
    return encode(handle_request(request_from_json(j), cloud));
  } catch (const ProtocolError& e) {
    coordinator_.protocol_error();
    return encode_error(id, e.what());
  }
}

// ---------------------------------------------------------------------------
// GatewayClient

struct GatewayClient::Impl {
  asio::io_context io;
  tcp::socket socket{io};
  asio::streambuf buffer{kMaxFrameBytes};
};

GatewayClient::GatewayClient(const Endpoint& endpoint) : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->io);
  boost::system::error_code ec;
  asio::connect(impl_->socket, resolver.resolve(endpoint.host, std::to_string(endpoint.port)), ec);
  if (ec) throw Error("cannot connect to " + endpoint.host + ":" + std::to_string(endpoint.port));
  impl_->socket.set_option(tcp::no_delay(true));
}

GatewayClient::~GatewayClient() = default;

std::string GatewayClient::call_raw(std::string_view frame) {
  std::string out(frame);
  out += '\n';
  boost::system::error_code ec;
  asio::write(impl_->socket, asio::buffer(out), ec);
  if (!ec) asio::read_until(impl_->socket, impl_->buffer, '\n', ec);
  if (ec) throw Error("gateway connection failed: " + ec.message());
  std::istream in(&impl_->buffer);
  std::string line;
  std::getline(in, line);
  return line;
}

WireResponse GatewayClient::call(const WireRequest& req) {
  ordered_json j = {{"id", req.id}, {"n", req.n}};
  if (req.m_true) j["m_true"] = *req.m_true;
  return parse_response(call_raw(j.dump()));
}

GatewayStats GatewayClient::stats() {
  const json j = parse_frame(call_raw(R"({"cmd":"stats"})"));
  try {
    GatewayStats s;
    s.completed = j.at("completed").get<std::size_t>();
    s.edge_count = j.at("edge_count").get<std::size_t>();
    s.cloud_count = j.at("cloud_count").get<std::size_t>();
    s.cloud_unreachable = j.at("cloud_unreachable").get<std::size_t>();
    s.protocol_errors = j.at("protocol_errors").get<std::size_t>();
    s.rtt_estimate_ms = j.at("rtt_estimate_ms").get<double>();
    s.total_charged_ms = j.at("total_charged_ms").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed stats frame: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CloudStub

CloudStubConfig cloud_stub_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  CloudStubConfig cfg;
  try {
    cfg.listen = parse_endpoint(j.value("listen", "127.0.0.1:7001"));
    json profile = j.at("profile");
    if (profile.is_string()) {
      const std::filesystem::path p(profile.get<std::string>());
      profile = read_json(p.is_absolute() ? p : base_dir / p);
    }
    cfg.profile = profile_from_json(profile);
    cfg.injected_rtt_ms = j.value("injected_rtt_ms", 0.0);
    cfg.time_scale = j.value("time_scale", 1.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cloud stub config: ") + e.what());
  }
  if (!(cfg.injected_rtt_ms >= 0.0) || !(cfg.time_scale > 0.0)) {
    throw ConfigError("cloud stub config: delays must be >= 0 and time_scale > 0");
  }
  return cfg;
}

struct CloudStub::Server {
  Server(const Endpoint& ep, LineServer::HandlerFactory factory) : lines(ep, std::move(factory)) {}
  LineServer lines;
};

CloudStub::CloudStub(CloudStubConfig cfg) : cfg_(std::move(cfg)), injected_rtt_(cfg_.injected_rtt_ms) {}

CloudStub::~CloudStub() { stop(); }

void CloudStub::start() {
  if (server_) return;
  auto factory = [this]() -> LineServer::Handler {
    return [this](std::string_view frame) { return handle_frame(frame); };
  };
  server_ = std::make_unique<Server>(cfg_.listen, factory);
}

void CloudStub::stop() {
  if (!server_) return;
  server_->lines.stop();
  server_.reset();
}

std::uint16_t CloudStub::port() const {
  if (!server_) throw Error("cloud stub is not running");
  return server_->lines.port();
}

void CloudStub::set_injected_rtt(double ms) { injected_rtt_ = ms; }

std::string CloudStub::handle_frame(std::string_view frame) {
  std::optional<std::string> id;
  try {
    const json j = parse_frame(frame);
    if (j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
    const int n = j.at("n").get<int>();
    const int m = j.at("m").get<int>();
    if (n < 1 || m < 1) throw ProtocolError("n and m must be >= 1");
    const double service = exec_time(cfg_.profile, n, m);
    sleep_ms((service + injected_rtt_.load()) * cfg_.time_scale);
    return ordered_json{{"id", id.value_or("")}, {"service_ms", service}}.dump();
  } catch (const ProtocolError& e) {
    return encode_error(id, e.what());
  } catch (const json::exception&) {
    return encode_error(id, "malformed request");
  }
}

}  // namespace cnmt
