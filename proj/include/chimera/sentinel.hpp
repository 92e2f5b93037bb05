#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chimera/device.hpp"

namespace chimera {

struct PidGains {
  double kp = 2.0;
  double ki = 0.1;
  double kd = 0.5;
};

/// Positional PID on (setpoint - measured). The output is a net heating
/// power adjustment in W: positive raises junction temperature, negative
/// stands for active cooling. While the output is saturated and the error
/// pushes further into saturation the integral is frozen.
class PidController {
 public:
  PidController() = default;
  PidController(PidGains gains, double out_min, double out_max, double integral_clamp);

  double update(double setpoint, double measured, double dt);
  void reset();

  const PidGains& gains() const { return gains_; }
  double integral() const { return integral_; }
  double output_min() const { return out_min_; }
  double output_max() const { return out_max_; }
  double integral_clamp() const { return integral_clamp_; }

 private:
  PidGains gains_;
  double out_min_ = -30.0;
  double out_max_ = 30.0;
  double integral_clamp_ = 300.0;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool primed_ = false;
};

enum class Regime { Deterministic, Transitional, ResonantCandidate, Unstable };

std::string_view regime_name(Regime r);
std::optional<Regime> parse_regime(std::string_view name);
/// 0 = Deterministic ... 3 = Unstable.
int regime_severity(Regime r);

// Regime edges in mV. Exactly 950 and 870 are Transitional, 850 is ResonantCandidate.
inline constexpr double kDeterministicAboveMv = 950.0;
inline constexpr double kTransitionalFromMv = 870.0;
inline constexpr double kResonantFromMv = 850.0;

Regime classify_regime(double core_mv);

struct Limits {
  int min_core_mv = 850;
  int max_core_mv = 990;
  int min_frequency_mhz = 300;
  int max_frequency_mhz = 500;
  int frequency_step_mhz = 20;
  double max_temp_c = 85.0;
  double max_power_w = 20.0;

  void validate() const;
};

enum class Violation {
  VoltageBelowFloor,
  VoltageAboveCeiling,
  FrequencyBelowFloor,
  FrequencyAboveCeiling,
  FrequencyOffStep,
};

std::string_view violation_name(Violation v);

struct LimitVerdict {
  std::optional<Violation> violation;
  int bound = 0;  // the violated bound (mV, MHz or step)

  bool accepted() const { return !violation.has_value(); }
  std::string reason() const;
};

LimitVerdict enforce_limits(const OperatingPoint& op, const Limits& limits = {});

struct AnomalyRules {
  double max_temp_c = 85.0;
  double max_temp_step_c = 2.0;      // per consecutive sample
  double max_hashrate_drop = 0.5;    // fraction of the window maximum
  double poll_interval_s = 3.0;
  double gap_factor = 3.0;           // gap alarm above gap_factor * poll_interval_s
};

enum class AlarmKind { TempOverMax, TempSlope, HashrateDrop, TelemetryGap };
enum class Severity { Warning, Critical };

std::string_view alarm_kind_name(AlarmKind k);
std::optional<AlarmKind> parse_alarm_kind(std::string_view name);

struct Alarm {
  AlarmKind kind = AlarmKind::TempOverMax;
  Severity severity = Severity::Warning;
  double t = 0.0;
  double value = 0.0;
  double threshold = 0.0;

  friend bool operator==(const Alarm&, const Alarm&) = default;
};

/// Rules evaluated over the history in order; rate rules need two samples.
std::vector<Alarm> detect_anomaly(std::span<const Telemetry> history,
                                  const AnomalyRules& rules = {});

bool has_critical(std::span<const Alarm> alarms);

}  // namespace chimera
