#pragma once

// Client side of the device HTTP API: telemetry polling, operating-point
// control with restart verification, and the share-event stream.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <string>

#include "chimera/device.hpp"
#include "chimera/sentinel.hpp"
#include "chimera/substrate.hpp"
#include "chimera/wire.hpp"

namespace chimera {

/// Connection-level failure; the request may be retried.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The device never reported the commanded point within the wait bound.
class VerificationError : public Error {
 public:
  using Error::Error;
};

/// Refused locally before any request was sent.
class RejectedOperatingPoint : public Error {
 public:
  explicit RejectedOperatingPoint(LimitVerdict verdict)
      : Error("operating point rejected: " + verdict.reason()), verdict_(verdict) {}
  const LimitVerdict& verdict() const { return verdict_; }

 private:
  LimitVerdict verdict_;
};

/// The share stream dropped; resume with since = last_device_t().
class StreamDisconnected : public Error {
 public:
  StreamDisconnected(const std::string& what, double last_device_t)
      : Error(what), last_t_(last_device_t) {}
  double last_device_t() const { return last_t_; }

 private:
  double last_t_;
};

struct DeviceEndpoint {
  std::string base_url = "http://127.0.0.1:8080";
  double poll_interval_s = 3.0;
  double timeout_s = 5.0;
  std::string device_id = "device-0";

  void validate() const;
  /// Overrides from CHIMERA_ENDPOINT and CHIMERA_POLL_INTERVAL when set.
  static DeviceEndpoint from_env(DeviceEndpoint defaults);
  static DeviceEndpoint from_env();
};

enum class TimestampSource {
  Receipt,  // local monotonic clock at receipt, microsecond resolution
  Device,   // timestamp carried in the event payload (simulated devices)
};

/// Drops events whose timestamp does not advance past the last accepted one
/// from the same source.
class ShareSequencer {
 public:
  bool accept(const ShareEvent& ev);
  std::size_t dropped() const { return dropped_; }

 private:
  std::map<std::string, double> last_t_;
  std::size_t dropped_ = 0;
};

struct ControlOptions {
  Limits limits;
  double verify_timeout_s = 15.0;
  double verify_poll_s = 0.02;
};

struct ControlAck {
  OperatingPoint op;
  bool changed = false;
  double verify_wait_s = 0.0;
};

struct StreamSummary {
  std::size_t delivered = 0;
  std::size_t dropped = 0;  // non-monotone events
  double last_device_t = 0.0;
};

class GhostClient {
 public:
  explicit GhostClient(DeviceEndpoint ep);

  const DeviceEndpoint& endpoint() const { return ep_; }

  wire::SystemInfo system_info();
  Telemetry poll_telemetry();

  /// Validates locally, PATCHes {"frequency","volts"}, requests a restart and
  /// waits until telemetry reports the new point. Re-sending the current
  /// point is a no-op. Control commands are serialized.
  ControlAck set_operating_point(const OperatingPoint& op, const ControlOptions& opts = {});

  /// Streams events with device timestamp > since_device_t until `stop` is set
  /// (returns normally) or the connection drops (throws StreamDisconnected).
  StreamSummary subscribe_shares(const std::function<void(const ShareEvent&)>& on_event,
                                 const std::atomic<bool>& stop, double since_device_t = -1.0,
                                 TimestampSource stamping = TimestampSource::Receipt);

  /// One-shot NDJSON fetch of events with device timestamp in (since, until].
  std::vector<ShareEvent> fetch_shares(double since_device_t, double until_device_t);

  /// Seconds on the client's monotonic clock.
  double local_now() const;

 private:
  DeviceEndpoint ep_;
  std::mutex control_mutex_;
  std::chrono::steady_clock::time_point epoch_;
};

}  // namespace chimera
