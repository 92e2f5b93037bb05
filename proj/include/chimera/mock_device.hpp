#pragma once

// Simulated miner exposing the same HTTP surface the client consumes, backed
// by one Substrate instance. Simulated time runs at time_scale x the supplied
// wall clock; the substrate is advanced lazily whenever a request observes
// the device.

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "chimera/device.hpp"
#include "chimera/substrate.hpp"
#include "chimera/wire.hpp"

namespace chimera {

struct MockConfig {
  SubstrateConfig substrate;
  OperatingPoint initial_op{400, 900};
  double time_scale = 1.0;
  double restart_s = 2.0;  // simulated telemetry blackout per restart
  double ambient_c = 25.0;
  double nominal_power_w = 10.0;  // at 400 MHz / 900 mV; scales with f * V^2
  std::optional<double> fixed_power_w;
  double hashrate_ghs_per_mhz = 1.2;
  double reference_mhz = 400.0;  // share rate scales with frequency / reference
  std::optional<Heartbeat> heartbeat;
  std::optional<double> heartbeat_below_mv;  // gate: active only below this voltage
  std::size_t batch_size = 1;                // firmware batching confound
  double reorder_probability = 0.0;          // adversarial delivery order
  std::uint64_t delivery_seed = 7;
  std::size_t max_buffered_events = 2'000'000;
  double max_step_s = 0.5;  // simulation chunk length

  void validate() const;
  static MockConfig from_json(const nlohmann::json& j);
};

/// Thread-safe simulated device; every public member takes the device lock.
class MockDevice {
 public:
  using Clock = std::function<double()>;  // wall seconds

  explicit MockDevice(MockConfig cfg, Clock clock = {});

  /// Simulated seconds since start.
  double sim_now();
  bool restarting();

  /// Throws TransportError-like DeviceUnavailable during a restart blackout.
  wire::SystemInfo system_info();

  struct Reply {
    int status = 200;
    std::string body;
  };
  Reply patch_settings(std::string_view body);
  Reply restart();

  /// Delivered events with device time in (since, until], in delivery order.
  std::vector<ShareEvent> shares(double since, double until, std::size_t max_events = SIZE_MAX);
  /// Delivered events at positions >= cursor; cursor is advanced.
  std::vector<ShareEvent> shares_from(std::size_t& cursor);
  /// First delivery position whose event time exceeds `since`.
  std::size_t cursor_after(double since);

  OperatingPoint operating_point();
  const MockConfig& config() const { return cfg_; }

 private:
  void advance_locked(double sim_t);
  void simulate_chunk_locked(double dt);
  void apply_heartbeat_gate_locked();
  double power_locked() const;
  void deliver_locked(std::vector<ShareEvent> events);

  MockConfig cfg_;
  Clock clock_;
  double wall_start_;
  std::mutex mu_;
  Substrate substrate_;
  OperatingPoint op_;
  std::optional<OperatingPoint> pending_op_;
  std::optional<double> restart_until_;
  std::vector<ShareEvent> undelivered_;
  std::deque<ShareEvent> delivered_;
  std::size_t delivered_base_ = 0;  // delivery index of delivered_.front()
  Rng delivery_rng_;
};

class DeviceUnavailable : public Error {
 public:
  using Error::Error;
};

/// HTTP front end for a MockDevice on its own listener thread.
class MockServer {
 public:
  explicit MockServer(MockConfig cfg, std::string host = "127.0.0.1", int port = 0,
                      MockDevice::Clock clock = {});
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const;
  MockDevice& device() { return *device_; }
  void stop();
  /// Blocks until stop() is called from another thread or the listener exits.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<MockDevice> device_;
  std::string host_;
  int port_ = 0;
  std::thread listener_;
};

}  // namespace chimera
