#include "chimera/mock_device.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>

#include "chimera/sentinel.hpp"
#include "httplib.h"

namespace chimera {
namespace {

double steady_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

double query_double(const httplib::Request& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return std::stod(req.get_param_value(key));
  } catch (const std::exception&) {
    return fallback;
  }
}

}  // namespace

void MockConfig::validate() const {
  if (!(time_scale > 0.0)) throw InvalidArgument("mock time_scale must be > 0");
  if (!(restart_s >= 0.0)) throw InvalidArgument("mock restart_s must be >= 0");
  if (batch_size == 0) throw InvalidArgument("mock batch_size must be >= 1");
  if (!(reorder_probability >= 0.0 && reorder_probability <= 1.0)) {
    throw InvalidArgument("mock reorder_probability must lie in [0, 1]");
  }
  if (!(max_step_s > 0.0)) throw InvalidArgument("mock max_step_s must be > 0");
  if (!(reference_mhz > 0.0)) throw InvalidArgument("mock reference_mhz must be > 0");
  substrate.landau.validate();
  substrate.initial.validate();
}

MockConfig MockConfig::from_json(const nlohmann::json& j) {
  MockConfig c;
  c.time_scale = j.value("time_scale", c.time_scale);
  c.restart_s = j.value("restart_s", c.restart_s);
  c.ambient_c = j.value("ambient_c", c.ambient_c);
  c.nominal_power_w = j.value("nominal_power_w", c.nominal_power_w);
  if (j.contains("fixed_power_w")) c.fixed_power_w = j.at("fixed_power_w").get<double>();
  c.hashrate_ghs_per_mhz = j.value("hashrate_ghs_per_mhz", c.hashrate_ghs_per_mhz);
  c.reference_mhz = j.value("reference_mhz", c.reference_mhz);
  if (j.contains("heartbeat")) {
    const auto& hb = j.at("heartbeat");
    c.heartbeat = Heartbeat{hb.value("freq_hz", 2.4), hb.value("depth", 0.0)};
  }
  if (j.contains("heartbeat_below_mv")) c.heartbeat_below_mv = j.at("heartbeat_below_mv").get<double>();
  c.batch_size = j.value("batch_size", c.batch_size);
  c.reorder_probability = j.value("reorder_probability", c.reorder_probability);
  c.delivery_seed = j.value("delivery_seed", c.delivery_seed);
  if (j.contains("initial_op")) {
    c.initial_op.frequency_mhz = j.at("initial_op").value("frequency", c.initial_op.frequency_mhz);
    c.initial_op.core_mv = j.at("initial_op").value("volts", c.initial_op.core_mv);
  }
  if (j.contains("substrate")) {
    const auto& s = j.at("substrate");
    auto& sc = c.substrate;
    sc.seed = s.value("seed", sc.seed);
    sc.dt = s.value("dt", sc.dt);
    sc.device_id = s.value("device_id", sc.device_id);
    sc.initial.base_rate = s.value("base_rate", sc.initial.base_rate);
    sc.initial.temp_c = s.value("temp_c", sc.initial.temp_c);
    sc.coupling.c_psi = s.value("c_psi", sc.coupling.c_psi);
    sc.coupling.lambda_min_fraction = s.value("lambda_min_fraction", sc.coupling.lambda_min_fraction);
    sc.thermal.r_th = s.value("r_th", sc.thermal.r_th);
    sc.thermal.tau_th = s.value("tau_th", sc.thermal.tau_th);
    if (s.contains("landau")) {
      const auto& l = s.at("landau");
      sc.landau.f0 = l.value("f0", sc.landau.f0);
      sc.landau.a_slope = l.value("a_slope", sc.landau.a_slope);
      sc.landau.b = l.value("b", sc.landau.b);
      sc.landau.gamma = l.value("gamma", sc.landau.gamma);
      sc.landau.v_crit_mv = l.value("v_crit_mv", sc.landau.v_crit_mv);
      sc.landau.noise_sigma = l.value("noise_sigma", sc.landau.noise_sigma);
    }
  }
  c.validate();
  return c;
}

MockDevice::MockDevice(MockConfig cfg, Clock clock)
    : cfg_(std::move(cfg)),
      clock_(clock ? std::move(clock) : Clock(steady_seconds)),
      wall_start_(clock_()),
      substrate_((cfg_.validate(), cfg_.substrate)),
      op_(cfg_.initial_op),
      delivery_rng_(cfg_.delivery_seed) {
  substrate_.set_operating_point(op_.frequency_mhz, op_.core_mv);
  substrate_.set_base_rate(cfg_.substrate.initial.base_rate * op_.frequency_mhz / cfg_.reference_mhz);
  apply_heartbeat_gate_locked();
}

double MockDevice::sim_now() {
  std::lock_guard lock(mu_);
  return (clock_() - wall_start_) * cfg_.time_scale;
}

bool MockDevice::restarting() {
  std::lock_guard lock(mu_);
  advance_locked((clock_() - wall_start_) * cfg_.time_scale);
  return restart_until_.has_value();
}

OperatingPoint MockDevice::operating_point() {
  std::lock_guard lock(mu_);
  return op_;
}

void MockDevice::apply_heartbeat_gate_locked() {
  if (!cfg_.heartbeat) {
    substrate_.set_heartbeat(std::nullopt);
    return;
  }
  const bool active = !cfg_.heartbeat_below_mv || op_.core_mv < *cfg_.heartbeat_below_mv;
  substrate_.set_heartbeat(active ? cfg_.heartbeat : std::nullopt);
}

double MockDevice::power_locked() const {
  if (cfg_.fixed_power_w) return *cfg_.fixed_power_w;
  const double v = op_.core_mv / 900.0;
  return cfg_.nominal_power_w * (op_.frequency_mhz / cfg_.reference_mhz) * v * v;
}

void MockDevice::deliver_locked(std::vector<ShareEvent> events) {
  for (auto& ev : events) undelivered_.push_back(std::move(ev));
  std::size_t release = (undelivered_.size() / cfg_.batch_size) * cfg_.batch_size;
  const bool reorder = cfg_.reorder_probability > 0.0;
  if (reorder && release == undelivered_.size() && release > 0) --release;
  if (release == 0) return;

  if (reorder) {
    std::bernoulli_distribution swap(cfg_.reorder_probability);
    for (std::size_t i = 0; i + 1 < release; ++i) {
      if (swap(delivery_rng_)) {
        std::swap(undelivered_[i], undelivered_[i + 1]);
        ++i;
      }
    }
  }
  for (std::size_t i = 0; i < release; ++i) delivered_.push_back(std::move(undelivered_[i]));
  undelivered_.erase(undelivered_.begin(), undelivered_.begin() + static_cast<std::ptrdiff_t>(release));
  while (delivered_.size() > cfg_.max_buffered_events) {
    delivered_.pop_front();
    ++delivered_base_;
  }
}

void MockDevice::simulate_chunk_locked(double dt) {
  apply_heartbeat_gate_locked();
  substrate_.thermal_step(power_locked(), cfg_.ambient_c, dt);
  auto events = substrate_.sample_shares(dt);
  if (!restart_until_) deliver_locked(std::move(events));
}

void MockDevice::advance_locked(double sim_t) {
  while (substrate_.now() < sim_t) {
    double target = sim_t;
    if (restart_until_) target = std::min(target, *restart_until_);
    while (substrate_.now() < target) {
      simulate_chunk_locked(std::min(cfg_.max_step_s, target - substrate_.now()));
    }
    if (restart_until_ && substrate_.now() >= *restart_until_) {
      if (pending_op_) {
        op_ = *pending_op_;
        pending_op_.reset();
        substrate_.set_operating_point(op_.frequency_mhz, op_.core_mv);
        substrate_.set_base_rate(cfg_.substrate.initial.base_rate * op_.frequency_mhz /
                                 cfg_.reference_mhz);
      }
      restart_until_.reset();
    }
  }
}

wire::SystemInfo MockDevice::system_info() {
  std::lock_guard lock(mu_);
  advance_locked((clock_() - wall_start_) * cfg_.time_scale);
  if (restart_until_) throw DeviceUnavailable("device restarting");
  wire::SystemInfo info;
  info.core_mv = op_.core_mv;
  info.core_mv_actual = op_.core_mv;
  info.frequency_mhz = op_.frequency_mhz;
  info.temp_c = substrate_.state().temp_c;
  info.power_w = power_locked();
  info.hashrate_ghs = cfg_.hashrate_ghs_per_mhz * op_.frequency_mhz;
  info.uptime_s = substrate_.now();
  info.simulated = true;
  info.time_scale = cfg_.time_scale;
  return info;
}

MockDevice::Reply MockDevice::patch_settings(std::string_view body) {
  wire::SettingsPatch patch;
  try {
    patch = wire::parse_settings_patch(body);
  } catch (const ProtocolError& e) {
    return {400, nlohmann::json{{"error", e.what()}}.dump()};
  }
  std::lock_guard lock(mu_);
  advance_locked((clock_() - wall_start_) * cfg_.time_scale);
  OperatingPoint next = pending_op_.value_or(op_);
  if (patch.frequency_mhz) next.frequency_mhz = *patch.frequency_mhz;
  if (patch.core_mv) next.core_mv = *patch.core_mv;
  const auto verdict = enforce_limits(next);
  if (!verdict.accepted()) return {422, nlohmann::json{{"error", verdict.reason()}}.dump()};
  pending_op_ = next;
  return {200, R"({"status":"ok","restartRequired":true})"};
}

MockDevice::Reply MockDevice::restart() {
  std::lock_guard lock(mu_);
  const double now = (clock_() - wall_start_) * cfg_.time_scale;
  advance_locked(now);
  restart_until_ = std::max(now, substrate_.now()) + cfg_.restart_s;
  if (cfg_.restart_s == 0.0) advance_locked(*restart_until_);
  return {200, R"({"status":"restarting"})"};
}

std::vector<ShareEvent> MockDevice::shares(double since, double until, std::size_t max_events) {
  std::lock_guard lock(mu_);
  advance_locked((clock_() - wall_start_) * cfg_.time_scale);
  std::vector<ShareEvent> out;
  for (const auto& ev : delivered_) {
    if (ev.t > since && ev.t <= until) {
      out.push_back(ev);
      if (out.size() >= max_events) break;
    }
  }
  return out;
}

std::size_t MockDevice::cursor_after(double since) {
  std::lock_guard lock(mu_);
  advance_locked((clock_() - wall_start_) * cfg_.time_scale);
  const auto it = std::partition_point(delivered_.begin(), delivered_.end(),
                                       [&](const ShareEvent& ev) { return ev.t <= since; });
  return delivered_base_ + static_cast<std::size_t>(it - delivered_.begin());
}

std::vector<ShareEvent> MockDevice::shares_from(std::size_t& cursor) {
  std::lock_guard lock(mu_);
  advance_locked((clock_() - wall_start_) * cfg_.time_scale);
  cursor = std::max(cursor, delivered_base_);
  const std::size_t end = delivered_base_ + delivered_.size();
  std::vector<ShareEvent> out;
  for (std::size_t i = cursor; i < end; ++i) out.push_back(delivered_[i - delivered_base_]);
  cursor = end;
  return out;
}

struct MockServer::Impl {
  httplib::Server server;
  std::atomic<bool> stopping{false};
};

MockServer::MockServer(MockConfig cfg, std::string host, int port, MockDevice::Clock clock)
    : impl_(std::make_unique<Impl>()),
      device_(std::make_shared<MockDevice>(std::move(cfg), std::move(clock))),
      host_(std::move(host)) {
  auto& svr = impl_->server;
  auto device = device_;
  Impl* impl = impl_.get();

  svr.Get(std::string(wire::kInfoPath), [device](const httplib::Request&, httplib::Response& res) {
    try {
      res.set_content(wire::system_info_json(device->system_info()).dump(), "application/json");
    } catch (const DeviceUnavailable& e) {
      res.status = 503;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });
  svr.Patch(std::string(wire::kSettingsPath),
            [device](const httplib::Request& req, httplib::Response& res) {
              const auto reply = device->patch_settings(req.body);
              res.status = reply.status;
              res.set_content(reply.body, "application/json");
            });
  svr.Post(std::string(wire::kRestartPath), [device](const httplib::Request&, httplib::Response& res) {
    const auto reply = device->restart();
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  svr.Get(std::string(wire::kSharesPath), [device](const httplib::Request& req, httplib::Response& res) {
    const double since = query_double(req, "since", -std::numeric_limits<double>::infinity());
    const double until = query_double(req, "until", std::numeric_limits<double>::infinity());
    std::string body;
    for (const auto& ev : device->shares(since, until)) {
      body += wire::share_event_json(ev);
      body += '\n';
    }
    res.set_content(body, "application/x-ndjson");
  });
  svr.Get(std::string(wire::kShareStreamPath),
          [device, impl](const httplib::Request& req, httplib::Response& res) {
            const double since = query_double(req, "since", -std::numeric_limits<double>::infinity());
            auto cursor = std::make_shared<std::size_t>(device->cursor_after(since));
            auto idle_since = std::make_shared<double>(steady_seconds());
            res.set_chunked_content_provider(
                "application/x-ndjson",
                [device, impl, cursor, idle_since](std::size_t, httplib::DataSink& sink) {
                  if (impl->stopping.load()) {
                    sink.done();
                    return true;
                  }
                  std::string chunk;
                  for (const auto& ev : device->shares_from(*cursor)) {
                    chunk += wire::share_event_json(ev);
                    chunk += '\n';
                  }
                  const double now = steady_seconds();
                  if (chunk.empty() && now - *idle_since > 0.1) chunk = "\n";
                  if (!chunk.empty()) {
                    *idle_since = now;
                    if (!sink.write(chunk.data(), chunk.size())) return false;
                  }
                  std::this_thread::sleep_for(std::chrono::milliseconds(10));
                  return true;
                });
          });

  if (port == 0) {
    port_ = svr.bind_to_any_port(host_);
  } else {
    port_ = svr.bind_to_port(host_, port) ? port : -1;
  }
  if (port_ <= 0) throw Error("mock server could not bind " + host_ + ":" + std::to_string(port));
  listener_ = std::thread([impl] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

std::string MockServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void MockServer::stop() {
  if (!impl_) return;
  impl_->stopping.store(true);
  impl_->server.stop();
  if (listener_.joinable()) listener_.join();
}

void MockServer::wait() {
  if (listener_.joinable()) listener_.join();
}

}  // namespace chimera
