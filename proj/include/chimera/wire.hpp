#pragma once

// JSON schema shared by the device client and the mock device.

#include <optional>
#include <string>
#include <string_view>

#include "chimera/device.hpp"
#include "chimera/errors.hpp"
#include "chimera/substrate.hpp"
#include "json.hpp"

namespace chimera {

/// Malformed or rejected device payload; keeps the raw body.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}
  const std::string& raw_payload() const { return raw_; }

 private:
  std::string raw_;
};

namespace wire {

inline constexpr std::string_view kInfoPath = "/api/system/info";
inline constexpr std::string_view kSettingsPath = "/api/system";
inline constexpr std::string_view kRestartPath = "/api/system/restart";
inline constexpr std::string_view kSharesPath = "/api/shares";
inline constexpr std::string_view kShareStreamPath = "/api/shares/stream";

/// Exactly {"frequency":<MHz>,"volts":<mV>}.
std::string settings_patch_body(const OperatingPoint& op);

struct SettingsPatch {
  std::optional<int> frequency_mhz;
  std::optional<int> core_mv;
};

/// Accepts only the "frequency" and "volts" keys with integer values.
SettingsPatch parse_settings_patch(std::string_view body);

/// {"t":..,"hash":"<64 hex>","nonce":..,"valid":true,"source":".."}
std::string share_event_json(const ShareEvent& ev);
ShareEvent parse_share_event(std::string_view line);

struct SystemInfo {
  int core_mv = 0;  // commanded
  double core_mv_actual = 0.0;
  int frequency_mhz = 0;
  double temp_c = 0.0;
  double power_w = 0.0;
  double hashrate_ghs = 0.0;
  double uptime_s = 0.0;
  bool simulated = false;
  double time_scale = 1.0;
};

nlohmann::json system_info_json(const SystemInfo& info);
SystemInfo parse_system_info(std::string_view body);

}  // namespace wire
}  // namespace chimera
