#include "chimera/orchestrator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

namespace chimera {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double get_num(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return v.get<double>();
}

ordered_json op_json(const OperatingPoint& op) {
  ordered_json j;
  j["frequency"] = op.frequency_mhz;
  j["volts"] = op.core_mv;
  return j;
}

OperatingPoint op_from_json(const json& j) {
  return OperatingPoint{j.at("frequency").get<int>(), j.at("volts").get<int>()};
}

ordered_json timing_json(const TimingStats& s) {
  ordered_json j;
  j["n"] = s.n;
  j["mean_s"] = num(s.mean_s);
  j["std_s"] = num(s.std_s);
  j["cv"] = num(s.cv);
  j["paper_entropy"] = num(s.paper_entropy);
  j["shannon_entropy_corrected"] = num(s.shannon_entropy_corrected);
  return j;
}

TimingStats timing_from_json(const json& j) {
  TimingStats s;
  s.n = j.at("n").get<std::size_t>();
  s.mean_s = get_num(j, "mean_s");
  s.std_s = get_num(j, "std_s");
  s.cv = get_num(j, "cv");
  s.paper_entropy = get_num(j, "paper_entropy");
  s.shannon_entropy_corrected = get_num(j, "shannon_entropy_corrected");
  return s;
}

ordered_json alarm_json(const Alarm& a) {
  ordered_json j;
  j["kind"] = alarm_kind_name(a.kind);
  j["severity"] = a.severity == Severity::Critical ? "critical" : "warning";
  j["t"] = num(a.t);
  j["value"] = num(a.value);
  j["threshold"] = num(a.threshold);
  return j;
}

Alarm alarm_from_json(const json& j) {
  Alarm a;
  const auto kind = parse_alarm_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error("unknown alarm kind in record");
  a.kind = *kind;
  a.severity = j.at("severity").get<std::string>() == "critical" ? Severity::Critical : Severity::Warning;
  a.t = get_num(j, "t");
  a.value = get_num(j, "value");
  a.threshold = get_num(j, "threshold");
  return a;
}

ordered_json telemetry_line(const Telemetry& t) {
  ordered_json j;
  j["t"] = t.t;
  j["core_mv_actual"] = t.core_mv_actual;
  j["temp_c"] = t.temp_c;
  j["power_w"] = t.power_w;
  j["hashrate_ghs"] = t.hashrate_ghs;
  j["frequency_mhz"] = t.frequency_mhz;
  j["device_uptime_s"] = t.device_uptime_s;
  return j;
}

Telemetry telemetry_from_line(const json& j) {
  Telemetry t;
  t.t = j.at("t").get<double>();
  t.core_mv_actual = j.at("core_mv_actual").get<double>();
  t.temp_c = j.at("temp_c").get<double>();
  t.power_w = j.at("power_w").get<double>();
  t.hashrate_ghs = j.at("hashrate_ghs").get<double>();
  t.frequency_mhz = j.at("frequency_mhz").get<int>();
  t.device_uptime_s = j.at("device_uptime_s").get<double>();
  return t;
}

ShareEvent share_from_line(const json& j) {
  ShareEvent ev;
  ev.t = j.at("t").get<double>();
  ev.hash = Hash256::from_hex(j.at("hash").get<std::string>());
  ev.nonce = j.at("nonce").get<std::uint32_t>();
  ev.valid = j.at("valid").get<bool>();
  ev.source = j.at("source").get<std::string>();
  return ev;
}

double mean_of(const std::vector<Telemetry>& v, double Telemetry::*field) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : v) s += t.*field;
  return s / static_cast<double>(v.size());
}

/// Single writer for the JSONL log; every line is flushed before returning.
class LogWriter {
 public:
  explicit LogWriter(const std::filesystem::path& path) : out_(path, std::ios::app) {
    if (!out_) throw Error("cannot open sweep log " + path.string());
  }

  void write(std::string_view kind, const ordered_json& body) {
    ordered_json line;
    line["schema_version"] = kLogSchemaVersion;
    line["kind"] = kind;
    for (const auto& [k, v] : body.items()) line[k] = v;
    std::lock_guard lock(mu_);
    out_ << line.dump() << '\n';
    out_.flush();
    if (!out_) throw Error("write to sweep log failed");
  }

 private:
  std::ofstream out_;
  std::mutex mu_;
};

ordered_json point_tag(std::size_t index, int attempt) {
  ordered_json j;
  j["point"] = index;
  j["attempt"] = attempt;
  return j;
}

void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const ordered_json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read sweep log " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(fmt::format("{}:{}: malformed log line ({})", path.string(), lineno, e.what()));
    }
    if (j.value("schema_version", 0) != kLogSchemaVersion) {
      throw Error(fmt::format("{}:{}: unsupported schema_version", path.string(), lineno));
    }
    fn(j);
  }
}

std::string fmt_opt(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "";
  return fmt::format("{}", *v);
}

}  // namespace

std::string_view axis_name(SweepAxis a) { return a == SweepAxis::Voltage ? "voltage" : "frequency"; }

std::optional<SweepAxis> parse_axis(std::string_view name) {
  if (name == "voltage") return SweepAxis::Voltage;
  if (name == "frequency") return SweepAxis::Frequency;
  return std::nullopt;
}

std::string SweepPlan::direction() const {
  if (points.size() < 2) return "single";
  const auto value = [&](const OperatingPoint& p) {
    return axis == SweepAxis::Voltage ? p.core_mv : p.frequency_mhz;
  };
  bool up = true;
  bool down = true;
  for (std::size_t i = 1; i < points.size(); ++i) {
    up = up && value(points[i]) > value(points[i - 1]);
    down = down && value(points[i]) < value(points[i - 1]);
  }
  return up ? "ascending" : down ? "descending" : "mixed";
}

void SweepPlan::validate(const Limits& limits) const {
  if (points.empty()) throw InvalidPlan("sweep plan has no points");
  if (!(dwell_s > 0.0) || !std::isfinite(dwell_s)) throw InvalidPlan("dwell_s must be > 0");
  if (!(time_scale > 0.0) || !std::isfinite(time_scale)) throw InvalidPlan("time_scale must be > 0");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto verdict = enforce_limits(points[i], limits);
    if (!verdict.accepted()) {
      throw InvalidPlan(fmt::format("point {} ({} MHz, {} mV) rejected: {}", i, points[i].frequency_mhz,
                                    points[i].core_mv, verdict.reason()));
    }
  }
}

ordered_json SweepPlan::to_json() const {
  ordered_json j;
  j["axis"] = axis_name(axis);
  j["direction"] = direction();
  j["dwell_s"] = dwell_s;
  j["time_scale"] = time_scale;
  j["seed"] = seed;
  j["points"] = ordered_json::array();
  for (const auto& p : points) j["points"].push_back(op_json(p));
  return j;
}

SweepPlan SweepPlan::from_json(const json& j) {
  SweepPlan p;
  const auto axis = parse_axis(j.at("axis").get<std::string>());
  if (!axis) throw InvalidPlan("unknown sweep axis");
  p.axis = *axis;
  p.dwell_s = j.at("dwell_s").get<double>();
  p.time_scale = j.value("time_scale", 1.0);
  p.seed = j.value("seed", std::uint64_t{1});
  for (const auto& pt : j.at("points")) p.points.push_back(op_from_json(pt));
  return p;
}

SweepPlan default_voltage_plan(int step_mv) {
  if (step_mv <= 0) throw InvalidArgument("voltage step must be positive");
  SweepPlan p;
  p.axis = SweepAxis::Voltage;
  p.dwell_s = 60.0;
  for (int mv = 990; mv >= 850; mv -= step_mv) p.points.push_back({400, mv});
  return p;
}

SweepPlan default_frequency_plan() {
  SweepPlan p;
  p.axis = SweepAxis::Frequency;
  p.dwell_s = 40.0;
  for (int f = 300; f <= 500; f += 20) p.points.push_back({f, 900});
  return p;
}

ordered_json AnalysisOptions::to_json() const {
  ordered_json j;
  j["rate_bin_s"] = rate_bin_s;
  j["segment_length"] = welch.segment_length;
  j["overlap"] = welch.overlap;
  j["heartbeat_lo_hz"] = heartbeat_lo_hz;
  j["heartbeat_hi_hz"] = heartbeat_hi_hz;
  j["heartbeat_min_db"] = heartbeat_min_db;
  j["low_confidence_events"] = low_confidence_events;
  j["max_temp_c"] = rules.max_temp_c;
  j["max_temp_step_c"] = rules.max_temp_step_c;
  j["max_hashrate_drop"] = rules.max_hashrate_drop;
  j["poll_interval_s"] = rules.poll_interval_s;
  j["gap_factor"] = rules.gap_factor;
  return j;
}

AnalysisOptions AnalysisOptions::from_json(const json& j) {
  AnalysisOptions o;
  o.rate_bin_s = j.at("rate_bin_s").get<double>();
  o.welch.segment_length = j.at("segment_length").get<std::size_t>();
  o.welch.overlap = j.at("overlap").get<double>();
  o.heartbeat_lo_hz = j.at("heartbeat_lo_hz").get<double>();
  o.heartbeat_hi_hz = j.at("heartbeat_hi_hz").get<double>();
  o.heartbeat_min_db = j.at("heartbeat_min_db").get<double>();
  o.low_confidence_events = j.at("low_confidence_events").get<std::size_t>();
  o.rules.max_temp_c = j.at("max_temp_c").get<double>();
  o.rules.max_temp_step_c = j.at("max_temp_step_c").get<double>();
  o.rules.max_hashrate_drop = j.at("max_hashrate_drop").get<double>();
  o.rules.poll_interval_s = j.at("poll_interval_s").get<double>();
  o.rules.gap_factor = j.at("gap_factor").get<double>();
  return o;
}

ordered_json SweepRecord::to_json() const {
  ordered_json j;
  j["index"] = index;
  j["op"] = op_json(op);
  j["regime"] = regime_name(regime);
  j["window_start"] = num(window_start);
  j["window_s"] = num(window_s);
  j["event_count"] = event_count;
  j["timing"] = timing ? timing_json(*timing) : ordered_json(nullptr);
  j["low_confidence"] = low_confidence;
  if (spectrum) {
    ordered_json s;
    s["resolution_hz"] = num(spectrum->resolution_hz);
    s["segments"] = spectrum->segments;
    s["mean_rate_hz"] = num(spectrum->mean_rate_hz);
    if (spectrum->peak) {
      s["peak"] = {{"freq_hz", num(spectrum->peak->freq_hz)},
                   {"prominence_db", num(spectrum->peak->prominence_db)}};
    } else {
      s["peak"] = nullptr;
    }
    if (spectrum->heartbeat) {
      const auto& h = *spectrum->heartbeat;
      ordered_json hb;
      hb["freq_hz"] = num(h.freq_hz);
      hb["prominence_db"] = num(h.prominence_db);
      hb["peak_density"] = num(h.peak_density);
      hb["reference_density"] = num(h.reference_density);
      s["heartbeat"] = hb;
    } else {
      s["heartbeat"] = nullptr;
    }
    j["spectrum"] = s;
  } else {
    j["spectrum"] = nullptr;
  }
  ordered_json t;
  t["samples"] = telemetry.samples;
  t["temp_mean_c"] = num(telemetry.temp_mean_c);
  t["temp_max_c"] = num(telemetry.temp_max_c);
  t["power_mean_w"] = num(telemetry.power_mean_w);
  t["hashrate_mean_ghs"] = num(telemetry.hashrate_mean_ghs);
  t["core_mv_actual_mean"] = num(telemetry.core_mv_actual_mean);
  j["telemetry"] = t;
  j["alarms"] = ordered_json::array();
  for (const auto& a : alarms) j["alarms"].push_back(alarm_json(a));
  j["aborted"] = aborted;
  return j;
}

SweepRecord SweepRecord::from_json(const json& j) {
  SweepRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.op = op_from_json(j.at("op"));
  const auto regime = parse_regime(j.at("regime").get<std::string>());
  if (!regime) throw Error("unknown regime in record");
  r.regime = *regime;
  r.window_start = get_num(j, "window_start");
  r.window_s = get_num(j, "window_s");
  r.event_count = j.at("event_count").get<std::size_t>();
  if (!j.at("timing").is_null()) r.timing = timing_from_json(j.at("timing"));
  r.low_confidence = j.at("low_confidence").get<bool>();
  if (const auto& s = j.at("spectrum"); !s.is_null()) {
    SpectralSummary sum;
    sum.resolution_hz = get_num(s, "resolution_hz");
    sum.segments = s.at("segments").get<std::size_t>();
    sum.mean_rate_hz = get_num(s, "mean_rate_hz");
    if (const auto& p = s.at("peak"); !p.is_null()) {
      sum.peak = SpectralPeak{get_num(p, "freq_hz"), get_num(p, "prominence_db")};
    }
    if (const auto& h = s.at("heartbeat"); !h.is_null()) {
      sum.heartbeat = HeartbeatDetection{get_num(h, "freq_hz"), get_num(h, "prominence_db"),
                                         get_num(h, "peak_density"), get_num(h, "reference_density")};
    }
    r.spectrum = sum;
  }
  const auto& t = j.at("telemetry");
  r.telemetry.samples = t.at("samples").get<std::size_t>();
  r.telemetry.temp_mean_c = get_num(t, "temp_mean_c");
  r.telemetry.temp_max_c = get_num(t, "temp_max_c");
  r.telemetry.power_mean_w = get_num(t, "power_mean_w");
  r.telemetry.hashrate_mean_ghs = get_num(t, "hashrate_mean_ghs");
  r.telemetry.core_mv_actual_mean = get_num(t, "core_mv_actual_mean");
  for (const auto& a : j.at("alarms")) r.alarms.push_back(alarm_from_json(a));
  r.aborted = j.at("aborted").get<bool>();
  return r;
}

SweepRecord compute_record(const PointCapture& cap, const AnalysisOptions& opts) {
  SweepRecord r;
  r.index = cap.index;
  r.op = cap.op;
  r.regime = classify_regime(cap.op.core_mv);
  r.window_start = cap.window_start;
  r.window_s = cap.window_end - cap.window_start;
  r.event_count = cap.events.size();
  r.low_confidence = r.event_count < opts.low_confidence_events;
  r.aborted = cap.aborted;

  if (cap.events.size() >= kMinTimestamps) {
    std::vector<double> times;
    times.reserve(cap.events.size());
    for (const auto& ev : cap.events) times.push_back(ev.t);
    try {
      r.timing = interarrival_stats(times, times.size());
    } catch (const Error&) {
      r.timing.reset();
    }
  }

  const auto rate = rate_series(cap.events, opts.rate_bin_s, cap.window_start, cap.window_end);
  if (rate.counts.size() >= 2 * opts.welch.segment_length) {
    const auto est = psd_estimate(rate.counts, rate.fs(), opts.welch);
    SpectralSummary s;
    s.resolution_hz = est.resolution_hz();
    s.segments = est.segments;
    s.mean_rate_hz = static_cast<double>(r.event_count) / (static_cast<double>(rate.counts.size()) * rate.bin_s);
    s.peak = est.peak;
    s.heartbeat = detect_heartbeat(est, opts.heartbeat_lo_hz, opts.heartbeat_hi_hz, opts.heartbeat_min_db);
    r.spectrum = s;
  }

  const auto& tel = cap.telemetry;
  r.telemetry.samples = tel.size();
  r.telemetry.temp_mean_c = mean_of(tel, &Telemetry::temp_c);
  r.telemetry.power_mean_w = mean_of(tel, &Telemetry::power_w);
  r.telemetry.hashrate_mean_ghs = mean_of(tel, &Telemetry::hashrate_ghs);
  r.telemetry.core_mv_actual_mean = mean_of(tel, &Telemetry::core_mv_actual);
  for (const auto& t : tel) r.telemetry.temp_max_c = std::max(r.telemetry.temp_max_c, t.temp_c);
  r.alarms = detect_anomaly(tel, opts.rules);
  return r;
}

namespace {

struct SweepContext {
  const SweepPlan& plan;
  GhostClient& client;
  LogWriter& log;
  const SweepOptions& opts;
  bool simulated = false;
  double time_scale = 1.0;
};

SweepRecord run_point(SweepContext& ctx, std::size_t index, int attempt) {
  const auto& op = ctx.plan.points[index];
  auto& client = ctx.client;
  const auto stamping = ctx.simulated ? TimestampSource::Device : TimestampSource::Receipt;
  {
    auto j = point_tag(index, attempt);
    j["op"] = op_json(op);
    ctx.log.write("point_begin", j);
  }
  client.set_operating_point(op, ctx.opts.control);
  const auto info = client.system_info();

  PointCapture cap;
  cap.index = index;
  cap.attempt = attempt;
  cap.op = op;
  cap.window_start = ctx.simulated ? info.uptime_s : client.local_now();
  cap.window_end = cap.window_start + ctx.plan.dwell_s;
  {
    auto j = point_tag(index, attempt);
    j["t_start"] = cap.window_start;
    j["t_end"] = cap.window_end;
    j["stamping"] = stamping == TimestampSource::Device ? "device" : "receipt";
    ctx.log.write("window", j);
  }

  std::mutex cap_mu;
  double last_event_t = cap.window_start;
  const auto take = [&](const ShareEvent& ev) {
    if (!(ev.t > cap.window_start) || ev.t > cap.window_end) return;
    std::lock_guard lock(cap_mu);
    auto j = point_tag(index, attempt);
    j["t"] = ev.t;
    j["hash"] = ev.hash.hex();
    j["nonce"] = ev.nonce;
    j["valid"] = ev.valid;
    j["source"] = ev.source;
    ctx.log.write("share", j);
    cap.events.push_back(ev);
    last_event_t = ev.t;
  };

  std::atomic<bool> stop{false};
  std::atomic<bool> stream_failed{false};
  std::exception_ptr stream_error;
  std::thread streamer([&] {
    try {
      client.subscribe_shares(take, stop, info.uptime_s, stamping);
    } catch (...) {
      stream_error = std::current_exception();
      stream_failed.store(true);
    }
  });
  const auto finish_stream = [&] {
    stop.store(true);
    if (streamer.joinable()) streamer.join();
  };

  const double poll_wall = client.endpoint().poll_interval_s / ctx.time_scale;
  int failures = 0;
  try {
    while (!stream_failed.load()) {
      double now = 0.0;
      try {
        auto tel = client.poll_telemetry();
        failures = 0;
        if (ctx.simulated) tel.t = tel.device_uptime_s;
        now = ctx.simulated ? tel.device_uptime_s : client.local_now();
        auto j = point_tag(index, attempt);
        const auto fields = telemetry_line(tel);
        for (const auto& [k, v] : fields.items()) j[k] = v;
        ctx.log.write("telemetry", j);
        cap.telemetry.push_back(tel);
      } catch (const TransportError&) {
        if (++failures >= ctx.opts.max_transport_failures) throw;
        std::this_thread::sleep_for(std::chrono::duration<double>(poll_wall));
        continue;
      }
      if (has_critical(detect_anomaly(cap.telemetry, ctx.opts.analysis.rules))) {
        cap.aborted = true;
        break;
      }
      if (now >= cap.window_end) break;
      const double remaining_wall = (cap.window_end - now) / ctx.time_scale;
      std::this_thread::sleep_for(std::chrono::duration<double>(std::min(poll_wall, remaining_wall)));
    }
  } catch (...) {
    finish_stream();
    throw;
  }
  finish_stream();
  if (stream_error) std::rethrow_exception(stream_error);

  if (ctx.simulated && !cap.aborted) {
    // events produced before the window closed but not yet streamed
    for (const auto& ev : client.fetch_shares(last_event_t, cap.window_end)) take(ev);
  }

  {
    auto j = point_tag(index, attempt);
    j["aborted"] = cap.aborted;
    j["events"] = cap.events.size();
    j["telemetry"] = cap.telemetry.size();
    ctx.log.write("point_end", j);
  }
  auto record = compute_record(cap, ctx.opts.analysis);
  auto j = point_tag(index, attempt);
  j["record"] = record.to_json();
  ctx.log.write("record", j);
  return record;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const SweepPlan& plan, GhostClient& client,
                                   const std::filesystem::path& log_path, const SweepOptions& opts) {
  plan.validate(opts.control.limits);

  std::map<std::size_t, SweepRecord> done;
  std::map<std::size_t, int> attempts;
  const bool existing = std::filesystem::exists(log_path) && std::filesystem::file_size(log_path) > 0;
  if (existing) {
    if (!opts.resume) {
      throw InvalidArgument("sweep log " + log_path.string() + " already exists; resume or pick a new path");
    }
    const auto expected = plan.to_json().at("points");
    for_each_line(log_path, [&](const ordered_json& j) {
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "sweep_begin") {
        if (j.at("plan").at("points") != expected) {
          throw InvalidPlan("existing log was written for a different plan");
        }
      } else if (kind == "point_begin") {
        auto& a = attempts[j.at("point").get<std::size_t>()];
        a = std::max(a, j.at("attempt").get<int>());
      } else if (kind == "record") {
        auto r = SweepRecord::from_json(j.at("record"));
        done[r.index] = std::move(r);
      }
    });
  }

  if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
  LogWriter log(log_path);

  wire::SystemInfo info;
  try {
    info = client.system_info();
  } catch (const TransportError& e) {
    throw SweepInterrupted(std::string("endpoint unavailable: ") + e.what(), done.size());
  }

  SweepContext ctx{plan, client, log, opts};
  ctx.simulated = info.simulated;
  ctx.time_scale = info.simulated ? info.time_scale : 1.0;
  {
    ordered_json j;
    j["plan"] = plan.to_json();
    j["analysis"] = opts.analysis.to_json();
    j["endpoint"] = client.endpoint().base_url;
    j["simulated"] = ctx.simulated;
    j["device_time_scale"] = info.time_scale;
    j["effective_time_scale"] = ctx.time_scale;
    j["resumed"] = existing;
    j["completed_before"] = done.size();
    log.write("sweep_begin", j);
  }

  for (std::size_t i = 0; i < plan.points.size(); ++i) {
    if (done.count(i)) continue;
    const int attempt = attempts[i] + 1;
    attempts[i] = attempt;
    try {
      auto record = run_point(ctx, i, attempt);
      if (opts.on_record) opts.on_record(record);
      done[i] = std::move(record);
    } catch (const Error& e) {
      const bool endpoint_lost = dynamic_cast<const TransportError*>(&e) ||
                                 dynamic_cast<const StreamDisconnected*>(&e) ||
                                 dynamic_cast<const VerificationError*>(&e) ||
                                 dynamic_cast<const ProtocolError*>(&e);
      if (!endpoint_lost) throw;
      auto j = point_tag(i, attempt);
      j["reason"] = e.what();
      log.write("point_interrupted", j);
      throw SweepInterrupted(fmt::format("sweep interrupted at point {}: {}", i, e.what()), done.size());
    }
  }

  {
    ordered_json j;
    j["records"] = done.size();
    log.write("sweep_end", j);
  }
  std::vector<SweepRecord> out;
  out.reserve(done.size());
  for (auto& [_, r] : done) out.push_back(std::move(r));
  return out;
}

ReplayResult replay_log(const std::filesystem::path& log_path) {
  using Key = std::pair<std::size_t, int>;
  std::map<Key, PointCapture> caps;
  std::map<Key, AnalysisOptions> analysis_for;
  std::map<Key, bool> ended;
  std::map<Key, ordered_json> logged;
  AnalysisOptions current;

  const auto key_of = [](const ordered_json& j) {
    return Key{j.at("point").get<std::size_t>(), j.at("attempt").get<int>()};
  };
  const auto capture_for = [&](const ordered_json& j) -> PointCapture& {
    const auto it = caps.find(key_of(j));
    if (it == caps.end()) throw Error("log line refers to a point that was never begun");
    return it->second;
  };

  for_each_line(log_path, [&](const ordered_json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "sweep_begin") {
      current = AnalysisOptions::from_json(j.at("analysis"));
    } else if (kind == "point_begin") {
      const auto key = key_of(j);
      auto& cap = caps[key];
      cap.index = key.first;
      cap.attempt = key.second;
      cap.op = op_from_json(j.at("op"));
      analysis_for[key] = current;
    } else if (kind == "window") {
      auto& cap = capture_for(j);
      cap.window_start = j.at("t_start").get<double>();
      cap.window_end = j.at("t_end").get<double>();
    } else if (kind == "share") {
      capture_for(j).events.push_back(share_from_line(j));
    } else if (kind == "telemetry") {
      capture_for(j).telemetry.push_back(telemetry_from_line(j));
    } else if (kind == "point_end") {
      capture_for(j).aborted = j.at("aborted").get<bool>();
      ended[key_of(j)] = true;
    } else if (kind == "record") {
      logged[key_of(j)] = j.at("record");
    }
  });

  ReplayResult result;
  for (const auto& [key, cap] : caps) {
    if (!ended.count(key)) {
      ++result.incomplete_attempts;
      continue;
    }
    auto recomputed = compute_record(cap, analysis_for[key]);
    const auto it = logged.find(key);
    if (it == logged.end() || it->second.dump() != recomputed.to_json().dump()) {
      result.mismatched.push_back(key.first);
    }
    if (it != logged.end()) result.logged.push_back(SweepRecord::from_json(it->second));
    result.recomputed.push_back(std::move(recomputed));
  }
  return result;
}

SweepReport export_report(std::span<const SweepRecord> records) {
  if (records.empty()) throw InvalidArgument("no records to report");
  SweepReport rep;
  rep.csv =
      "index,frequency_mhz,core_mv,regime,events,cv,paper_entropy,peak_hz,heartbeat_hz,heartbeat_db,"
      "temp_mean_c,power_mean_w,alarms,low_confidence,aborted\n";
  rep.table = fmt::format("{:>5} {:>6} {:>6} {:<18} {:>7} {:>7} {:>8} {:>8} {:>10} {:>7}\n", "point", "MHz",
                          "mV", "regime", "events", "CV", "entropy", "peak Hz", "heartbeat", "alarms");
  for (const auto& r : records) {
    const std::optional<double> cv = r.timing ? std::optional(r.timing->cv) : std::nullopt;
    const std::optional<double> ent = r.timing ? std::optional(r.timing->paper_entropy) : std::nullopt;
    std::optional<double> peak;
    std::optional<double> hb_hz;
    std::optional<double> hb_db;
    if (r.spectrum && r.spectrum->peak) peak = r.spectrum->peak->freq_hz;
    if (r.spectrum && r.spectrum->heartbeat) {
      hb_hz = r.spectrum->heartbeat->freq_hz;
      hb_db = r.spectrum->heartbeat->prominence_db;
    }
    rep.csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.index, r.op.frequency_mhz,
                           r.op.core_mv, regime_name(r.regime), r.event_count, fmt_opt(cv), fmt_opt(ent),
                           fmt_opt(peak), fmt_opt(hb_hz), fmt_opt(hb_db),
                           fmt_opt(r.telemetry.temp_mean_c), fmt_opt(r.telemetry.power_mean_w),
                           r.alarms.size(), r.low_confidence ? 1 : 0, r.aborted ? 1 : 0);
    const auto cell = [](std::optional<double> v, int prec) {
      return v && std::isfinite(*v) ? fmt::format("{:.{}f}", *v, prec) : std::string("-");
    };
    std::string flags;
    if (r.low_confidence) flags += " low-confidence";
    if (r.aborted) flags += " aborted";
    rep.table += fmt::format("{:>5} {:>6} {:>6} {:<18} {:>7} {:>7} {:>8} {:>8} {:>10} {:>7}{}\n", r.index,
                             r.op.frequency_mhz, r.op.core_mv, regime_name(r.regime), r.event_count,
                             cell(cv, 3), cell(ent, 3), cell(peak, 2), cell(hb_hz, 2), r.alarms.size(),
                             flags);
  }
  return rep;
}

}  // namespace chimera
