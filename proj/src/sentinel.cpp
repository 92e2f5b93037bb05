#include "chimera/sentinel.hpp"

#include <algorithm>
#include <cmath>

#include "chimera/errors.hpp"

namespace chimera {

bool Telemetry::valid() const {
  return std::isfinite(t) && std::isfinite(core_mv_actual) && std::isfinite(temp_c) &&
         std::isfinite(power_w) && std::isfinite(hashrate_ghs) && core_mv_actual > 0.0;
}

PidController::PidController(PidGains gains, double out_min, double out_max,
                             double integral_clamp)
    : gains_(gains), out_min_(out_min), out_max_(out_max), integral_clamp_(integral_clamp) {
  if (!(out_min < out_max)) throw InvalidArgument("PID output limits must satisfy min < max");
  if (!(integral_clamp >= 0.0)) throw InvalidArgument("integral clamp must be >= 0");
}

double PidController::update(double setpoint, double measured, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("pid update requires dt > 0");
  const double error = setpoint - measured;
  const double derivative = primed_ ? (error - prev_error_) / dt : 0.0;
  prev_error_ = error;
  primed_ = true;

  const double candidate =
      std::clamp(integral_ + error * dt, -integral_clamp_, integral_clamp_);
  const double raw = gains_.kp * error + gains_.ki * candidate + gains_.kd * derivative;
  const bool pushes_high = raw > out_max_ && error > 0.0;
  const bool pushes_low = raw < out_min_ && error < 0.0;
  if (!pushes_high && !pushes_low) integral_ = candidate;

  const double out = gains_.kp * error + gains_.ki * integral_ + gains_.kd * derivative;
  return std::clamp(out, out_min_, out_max_);
}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  primed_ = false;
}

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::Deterministic: return "Deterministic";
    case Regime::Transitional: return "Transitional";
    case Regime::ResonantCandidate: return "ResonantCandidate";
    case Regime::Unstable: return "Unstable";
  }
  return "Unknown";
}

std::optional<Regime> parse_regime(std::string_view name) {
  for (auto r : {Regime::Deterministic, Regime::Transitional, Regime::ResonantCandidate,
                 Regime::Unstable}) {
    if (regime_name(r) == name) return r;
  }
  return std::nullopt;
}

int regime_severity(Regime r) { return static_cast<int>(r); }

Regime classify_regime(double core_mv) {
  if (core_mv > kDeterministicAboveMv) return Regime::Deterministic;
  if (core_mv >= kTransitionalFromMv) return Regime::Transitional;
  if (core_mv >= kResonantFromMv) return Regime::ResonantCandidate;
  return Regime::Unstable;
}

void Limits::validate() const {
  if (!(min_core_mv < max_core_mv)) throw InvalidArgument("voltage limits must satisfy lo < hi");
  if (!(min_frequency_mhz < max_frequency_mhz)) {
    throw InvalidArgument("frequency limits must satisfy lo < hi");
  }
  if (frequency_step_mhz <= 0) throw InvalidArgument("frequency step must be > 0");
}

std::string_view violation_name(Violation v) {
  switch (v) {
    case Violation::VoltageBelowFloor: return "voltage-below-floor";
    case Violation::VoltageAboveCeiling: return "voltage-above-ceiling";
    case Violation::FrequencyBelowFloor: return "frequency-below-floor";
    case Violation::FrequencyAboveCeiling: return "frequency-above-ceiling";
    case Violation::FrequencyOffStep: return "frequency-off-step";
  }
  return "unknown";
}

std::string LimitVerdict::reason() const {
  if (!violation) return "accepted";
  return std::string(violation_name(*violation)) + " (bound " + std::to_string(bound) + ")";
}

LimitVerdict enforce_limits(const OperatingPoint& op, const Limits& limits) {
  if (op.core_mv < limits.min_core_mv) return {Violation::VoltageBelowFloor, limits.min_core_mv};
  if (op.core_mv > limits.max_core_mv) return {Violation::VoltageAboveCeiling, limits.max_core_mv};
  if (op.frequency_mhz < limits.min_frequency_mhz) {
    return {Violation::FrequencyBelowFloor, limits.min_frequency_mhz};
  }
  if (op.frequency_mhz > limits.max_frequency_mhz) {
    return {Violation::FrequencyAboveCeiling, limits.max_frequency_mhz};
  }
  if (op.frequency_mhz % limits.frequency_step_mhz != 0) {
    return {Violation::FrequencyOffStep, limits.frequency_step_mhz};
  }
  return {};
}

std::string_view alarm_kind_name(AlarmKind k) {
  switch (k) {
    case AlarmKind::TempOverMax: return "temp-over-max";
    case AlarmKind::TempSlope: return "temp-slope";
    case AlarmKind::HashrateDrop: return "hashrate-drop";
    case AlarmKind::TelemetryGap: return "telemetry-gap";
  }
  return "unknown";
}

std::optional<AlarmKind> parse_alarm_kind(std::string_view name) {
  for (auto k : {AlarmKind::TempOverMax, AlarmKind::TempSlope, AlarmKind::HashrateDrop,
                 AlarmKind::TelemetryGap}) {
    if (alarm_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::vector<Alarm> detect_anomaly(std::span<const Telemetry> history, const AnomalyRules& rules) {
  std::vector<Alarm> alarms;
  double peak_hashrate = 0.0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& s = history[i];
    if (s.temp_c > rules.max_temp_c) {
      alarms.push_back({AlarmKind::TempOverMax, Severity::Critical, s.t, s.temp_c, rules.max_temp_c});
    }
    if (i > 0) {
      const auto& prev = history[i - 1];
      const double step = s.temp_c - prev.temp_c;
      if (step > rules.max_temp_step_c) {
        alarms.push_back({AlarmKind::TempSlope, Severity::Warning, s.t, step, rules.max_temp_step_c});
      }
      const double gap = s.t - prev.t;
      const double max_gap = rules.gap_factor * rules.poll_interval_s;
      if (gap > max_gap) {
        alarms.push_back({AlarmKind::TelemetryGap, Severity::Warning, s.t, gap, max_gap});
      }
      if (peak_hashrate > 0.0) {
        const double drop = (peak_hashrate - s.hashrate_ghs) / peak_hashrate;
        if (drop > rules.max_hashrate_drop) {
          alarms.push_back(
              {AlarmKind::HashrateDrop, Severity::Warning, s.t, drop, rules.max_hashrate_drop});
        }
      }
    }
    peak_hashrate = std::max(peak_hashrate, s.hashrate_ghs);
  }
  return alarms;
}

bool has_critical(std::span<const Alarm> alarms) {
  return std::any_of(alarms.begin(), alarms.end(),
                     [](const Alarm& a) { return a.severity == Severity::Critical; });
}

}  // namespace chimera
