#pragma once

// Operating-point sweeps against a device endpoint, with an append-only JSONL
// log from which every per-point record can be recomputed offline.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chimera/device.hpp"
#include "chimera/ghost.hpp"
#include "chimera/muse.hpp"
#include "chimera/sentinel.hpp"
#include "chimera/spectral.hpp"
#include "json.hpp"

namespace chimera {

inline constexpr int kLogSchemaVersion = 1;
inline constexpr std::size_t kLowConfidenceEvents = 1000;

enum class SweepAxis { Voltage, Frequency };
std::string_view axis_name(SweepAxis a);
std::optional<SweepAxis> parse_axis(std::string_view name);

class InvalidPlan : public Error {
 public:
  using Error::Error;
};

struct SweepPlan {
  SweepAxis axis = SweepAxis::Voltage;
  std::vector<OperatingPoint> points;
  double dwell_s = 60.0;
  double time_scale = 1.0;  // only honoured by simulated endpoints
  std::uint64_t seed = 1;

  /// "ascending", "descending" or "mixed" along the swept axis.
  std::string direction() const;
  /// Throws InvalidPlan naming the first offending point.
  void validate(const Limits& limits = Limits{}) const;

  nlohmann::ordered_json to_json() const;
  static SweepPlan from_json(const nlohmann::json& j);
};

SweepPlan default_voltage_plan(int step_mv = 10);
SweepPlan default_frequency_plan();

struct AnalysisOptions {
  double rate_bin_s = kDefaultRateBinSeconds;
  WelchConfig welch{256, 0.5};
  double heartbeat_lo_hz = kDefaultHeartbeatLoHz;
  double heartbeat_hi_hz = kDefaultHeartbeatHiHz;
  double heartbeat_min_db = kDefaultHeartbeatProminenceDb;
  std::size_t low_confidence_events = kLowConfidenceEvents;
  AnomalyRules rules;

  nlohmann::ordered_json to_json() const;
  static AnalysisOptions from_json(const nlohmann::json& j);
};

struct SpectralSummary {
  double resolution_hz = 0.0;
  std::size_t segments = 0;
  double mean_rate_hz = 0.0;
  std::optional<SpectralPeak> peak;
  std::optional<HeartbeatDetection> heartbeat;
};

struct TelemetrySummary {
  std::size_t samples = 0;
  double temp_mean_c = 0.0;
  double temp_max_c = 0.0;
  double power_mean_w = 0.0;
  double hashrate_mean_ghs = 0.0;
  double core_mv_actual_mean = 0.0;
};

struct SweepRecord {
  std::size_t index = 0;
  OperatingPoint op;
  Regime regime = Regime::Transitional;
  double window_start = 0.0;
  double window_s = 0.0;
  std::size_t event_count = 0;
  std::optional<TimingStats> timing;  // over every event in the window
  bool low_confidence = true;
  std::optional<SpectralSummary> spectrum;
  TelemetrySummary telemetry;
  std::vector<Alarm> alarms;
  bool aborted = false;

  nlohmann::ordered_json to_json() const;
  static SweepRecord from_json(const nlohmann::json& j);
};

/// Everything captured at one point; compute_record is a pure function of it.
struct PointCapture {
  std::size_t index = 0;
  int attempt = 1;
  OperatingPoint op;
  double window_start = 0.0;
  double window_end = 0.0;
  std::vector<ShareEvent> events;
  std::vector<Telemetry> telemetry;
  bool aborted = false;
};

SweepRecord compute_record(const PointCapture& capture, const AnalysisOptions& opts = AnalysisOptions{});

/// The endpoint went away mid-sweep. Completed points are in the log and a
/// rerun with resume = true continues after them.
class SweepInterrupted : public Error {
 public:
  SweepInterrupted(const std::string& what, std::size_t completed)
      : Error(what), completed_(completed) {}
  std::size_t completed() const { return completed_; }

 private:
  std::size_t completed_;
};

struct SweepOptions {
  ControlOptions control;
  AnalysisOptions analysis;
  bool resume = false;
  int max_transport_failures = 3;  // consecutive telemetry failures before giving up
  std::function<void(const SweepRecord&)> on_record;
};

/// Runs the plan point by point, appending every share, telemetry sample and
/// record to log_path. Returns records for all completed points (including
/// ones recovered from the log on resume) in plan order.
std::vector<SweepRecord> run_sweep(const SweepPlan& plan, GhostClient& client,
                                   const std::filesystem::path& log_path,
                                   const SweepOptions& opts = SweepOptions{});

struct ReplayResult {
  std::vector<SweepRecord> logged;
  std::vector<SweepRecord> recomputed;
  std::vector<std::size_t> mismatched;  // plan indices whose serializations differ
  std::size_t incomplete_attempts = 0;

  bool identical() const { return mismatched.empty() && logged.size() == recomputed.size(); }
};

/// Recomputes every completed point from the raw lines of a sweep log.
ReplayResult replay_log(const std::filesystem::path& log_path);

struct SweepReport {
  std::string table;
  std::string csv;
};

/// Throws InvalidArgument for an empty record list.
SweepReport export_report(std::span<const SweepRecord> records);

}  // namespace chimera
