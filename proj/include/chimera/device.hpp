#pragma once

#include <string>

namespace chimera {

/// Commanded PLL frequency and core voltage.
struct OperatingPoint {
  int frequency_mhz = 400;
  int core_mv = 900;

  friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

struct Telemetry {
  double t = 0.0;  // local receipt time, s
  double core_mv_actual = 0.0;
  double temp_c = 0.0;
  double power_w = 0.0;
  double hashrate_ghs = 0.0;
  int frequency_mhz = 0;
  double device_uptime_s = 0.0;

  bool valid() const;
};

}  // namespace chimera
