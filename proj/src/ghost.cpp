#include "chimera/ghost.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

namespace chimera {
namespace {

httplib::Client make_client(const DeviceEndpoint& ep, double read_timeout_s) {
  httplib::Client cli(ep.base_url);
  const auto to_parts = [](double s) {
    const auto sec = static_cast<time_t>(s);
    return std::pair{sec, static_cast<time_t>((s - static_cast<double>(sec)) * 1e6)};
  };
  const auto [cs, cus] = to_parts(ep.timeout_s);
  const auto [rs, rus] = to_parts(read_timeout_s);
  cli.set_connection_timeout(cs, cus);
  cli.set_read_timeout(rs, rus);
  cli.set_write_timeout(cs, cus);
  return cli;
}

[[noreturn]] void throw_transport(const char* what, httplib::Error err) {
  throw TransportError(fmt::format("{}: {}", what, httplib::to_string(err)));
}

}  // namespace

void DeviceEndpoint::validate() const {
  if (!(poll_interval_s > 0.0)) throw InvalidArgument("poll interval must be > 0");
  if (!(timeout_s > 0.0)) throw InvalidArgument("request timeout must be > 0");
  if (base_url.empty()) throw InvalidArgument("endpoint base URL is empty");
}

DeviceEndpoint DeviceEndpoint::from_env(DeviceEndpoint defaults) {
  if (const char* url = std::getenv("CHIMERA_ENDPOINT"); url && *url) defaults.base_url = url;
  if (const char* poll = std::getenv("CHIMERA_POLL_INTERVAL"); poll && *poll) {
    defaults.poll_interval_s = std::stod(poll);
  }
  return defaults;
}

DeviceEndpoint DeviceEndpoint::from_env() { return from_env(DeviceEndpoint{}); }

bool ShareSequencer::accept(const ShareEvent& ev) {
  auto [it, inserted] = last_t_.try_emplace(ev.source, ev.t);
  if (inserted) return true;
  if (!(ev.t > it->second)) {
    ++dropped_;
    return false;
  }
  it->second = ev.t;
  return true;
}

GhostClient::GhostClient(DeviceEndpoint ep) : ep_(std::move(ep)), epoch_(std::chrono::steady_clock::now()) {
  ep_.validate();
}

double GhostClient::local_now() const {
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - epoch_);
  return static_cast<double>(us.count()) * 1e-6;
}

wire::SystemInfo GhostClient::system_info() {
  auto cli = make_client(ep_, ep_.timeout_s);
  auto res = cli.Get(std::string(wire::kInfoPath));
  if (!res) throw_transport("telemetry request failed", res.error());
  if (res->status == 503) throw TransportError("device unavailable (restarting)");
  if (res->status != 200) {
    throw ProtocolError(fmt::format("telemetry request returned HTTP {}", res->status), res->body);
  }
  return wire::parse_system_info(res->body);
}

Telemetry GhostClient::poll_telemetry() {
  const auto info = system_info();
  Telemetry t;
  t.t = local_now();
  t.core_mv_actual = info.core_mv_actual;
  t.temp_c = info.temp_c;
  t.power_w = info.power_w;
  t.hashrate_ghs = info.hashrate_ghs;
  t.frequency_mhz = info.frequency_mhz;
  t.device_uptime_s = info.uptime_s;
  if (!t.valid()) throw ProtocolError("telemetry contains non-finite or non-positive values", "");
  return t;
}

ControlAck GhostClient::set_operating_point(const OperatingPoint& op, const ControlOptions& opts) {
  const auto verdict = enforce_limits(op, opts.limits);
  if (!verdict.accepted()) throw RejectedOperatingPoint(verdict);

  std::lock_guard lock(control_mutex_);
  const auto matches = [&](const wire::SystemInfo& info) {
    return info.core_mv == op.core_mv && info.frequency_mhz == op.frequency_mhz &&
           std::abs(info.core_mv_actual - op.core_mv) <= 5.0;
  };
  if (matches(system_info())) return ControlAck{op, false, 0.0};

  auto cli = make_client(ep_, ep_.timeout_s);
  auto patched = cli.Patch(std::string(wire::kSettingsPath), wire::settings_patch_body(op),
                           "application/json");
  if (!patched) throw_transport("settings PATCH failed", patched.error());
  if (patched->status / 100 != 2) {
    throw ProtocolError(fmt::format("device rejected settings with HTTP {}", patched->status),
                        patched->body);
  }
  auto restarted = cli.Post(std::string(wire::kRestartPath), "", "application/json");
  if (!restarted) throw_transport("restart request failed", restarted.error());
  if (restarted->status / 100 != 2) {
    throw ProtocolError(fmt::format("restart returned HTTP {}", restarted->status), restarted->body);
  }

  const double start = local_now();
  const auto poll_gap = std::chrono::duration<double>(opts.verify_poll_s);
  while (local_now() - start < opts.verify_timeout_s) {
    try {
      if (matches(system_info())) return ControlAck{op, true, local_now() - start};
    } catch (const TransportError&) {
      // blackout while the device restarts
    }
    std::this_thread::sleep_for(poll_gap);
  }
  throw VerificationError(fmt::format("device did not report {} MHz / {} mV within {} s",
                                      op.frequency_mhz, op.core_mv, opts.verify_timeout_s));
}

StreamSummary GhostClient::subscribe_shares(const std::function<void(const ShareEvent&)>& on_event,
                                            const std::atomic<bool>& stop, double since_device_t,
                                            TimestampSource stamping) {
  StreamSummary summary;
  summary.last_device_t = since_device_t;
  ShareSequencer sequencer;
  std::string pending;
  double last_stamp = -1.0;

  const auto handle_line = [&](std::string_view line) {
    if (line.empty()) return;
    ShareEvent ev = wire::parse_share_event(line);
    if (!sequencer.accept(ev)) return;
    summary.last_device_t = ev.t;
    if (stamping == TimestampSource::Receipt) {
      double now = local_now();
      if (!(now > last_stamp)) now = std::nextafter(last_stamp, INFINITY);
      ev.t = now;
      last_stamp = now;
    }
    ++summary.delivered;
    on_event(ev);
  };

  auto cli = make_client(ep_, std::max(ep_.timeout_s, 5.0));
  const auto path = fmt::format("{}?since={}", wire::kShareStreamPath, since_device_t);
  auto res = cli.Get(path, [&](const char* data, std::size_t len) {
    pending.append(data, len);
    std::size_t start = 0;
    for (std::size_t nl; (nl = pending.find('\n', start)) != std::string::npos; start = nl + 1) {
      handle_line(std::string_view(pending).substr(start, nl - start));
    }
    pending.erase(0, start);
    return !stop.load();
  });
  summary.dropped = sequencer.dropped();
  if (stop.load()) return summary;
  if (!res) {
    throw StreamDisconnected("share stream lost: " + httplib::to_string(res.error()),
                             summary.last_device_t);
  }
  throw StreamDisconnected(fmt::format("share stream closed by device (HTTP {})", res->status),
                           summary.last_device_t);
}

std::vector<ShareEvent> GhostClient::fetch_shares(double since_device_t, double until_device_t) {
  auto cli = make_client(ep_, ep_.timeout_s);
  const auto path =
      fmt::format("{}?since={}&until={}", wire::kSharesPath, since_device_t, until_device_t);
  auto res = cli.Get(path);
  if (!res) throw_transport("share fetch failed", res.error());
  if (res->status != 200) {
    throw ProtocolError(fmt::format("share fetch returned HTTP {}", res->status), res->body);
  }
  std::vector<ShareEvent> out;
  ShareSequencer sequencer;
  std::string_view body = res->body;
  while (!body.empty()) {
    const auto nl = body.find('\n');
    const auto line = body.substr(0, nl);
    if (!line.empty()) {
      auto ev = wire::parse_share_event(line);
      if (sequencer.accept(ev)) out.push_back(std::move(ev));
    }
    if (nl == std::string_view::npos) break;
    body.remove_prefix(nl + 1);
  }
  return out;
}

}  // namespace chimera
