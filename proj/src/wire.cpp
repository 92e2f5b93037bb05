#include "chimera/wire.hpp"

namespace chimera::wire {

using nlohmann::json;
using nlohmann::ordered_json;

std::string settings_patch_body(const OperatingPoint& op) {
  ordered_json j;
  j["frequency"] = op.frequency_mhz;
  j["volts"] = op.core_mv;
  return j.dump();
}

SettingsPatch parse_settings_patch(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("settings body is not JSON: ") + e.what(), std::string(body));
  }
  if (!j.is_object()) throw ProtocolError("settings body must be a JSON object", std::string(body));
  SettingsPatch patch;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number_integer()) {
      throw ProtocolError("settings value for '" + key + "' must be an integer", std::string(body));
    }
    if (key == "frequency") {
      patch.frequency_mhz = value.get<int>();
    } else if (key == "volts") {
      patch.core_mv = value.get<int>();
    } else {
      throw ProtocolError("unknown settings key '" + key + "'", std::string(body));
    }
  }
  return patch;
}

std::string share_event_json(const ShareEvent& ev) {
  ordered_json j;
  j["t"] = ev.t;
  j["hash"] = ev.hash.hex();
  j["nonce"] = ev.nonce;
  j["valid"] = ev.valid;
  j["source"] = ev.source;
  return j.dump();
}

ShareEvent parse_share_event(std::string_view line) {
  try {
    const auto j = json::parse(line);
    ShareEvent ev;
    ev.t = j.at("t").get<double>();
    ev.hash = Hash256::from_hex(j.at("hash").get<std::string>());
    ev.nonce = j.at("nonce").get<std::uint32_t>();
    ev.valid = j.at("valid").get<bool>();
    ev.source = j.at("source").get<std::string>();
    return ev;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed share event: ") + e.what(), std::string(line));
  } catch (const InvalidArgument& e) {
    throw ProtocolError(std::string("malformed share event: ") + e.what(), std::string(line));
  }
}

json system_info_json(const SystemInfo& info) {
  ordered_json j;
  j["coreVoltage"] = info.core_mv;
  j["coreVoltageActual"] = info.core_mv_actual;
  j["frequency"] = info.frequency_mhz;
  j["temp"] = info.temp_c;
  j["power"] = info.power_w;
  j["hashRate"] = info.hashrate_ghs;
  j["uptimeSeconds"] = info.uptime_s;
  j["simulated"] = info.simulated;
  j["timeScale"] = info.time_scale;
  return j;
}

SystemInfo parse_system_info(std::string_view body) {
  try {
    const auto j = json::parse(body);
    SystemInfo info;
    info.core_mv = j.at("coreVoltage").get<int>();
    info.core_mv_actual = j.at("coreVoltageActual").get<double>();
    info.frequency_mhz = j.at("frequency").get<int>();
    info.temp_c = j.at("temp").get<double>();
    info.power_w = j.at("power").get<double>();
    info.hashrate_ghs = j.at("hashRate").get<double>();
    info.uptime_s = j.value("uptimeSeconds", 0.0);
    info.simulated = j.value("simulated", false);
    info.time_scale = j.value("timeScale", 1.0);
    return info;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed system info: ") + e.what(), std::string(body));
  }
}

}  // namespace chimera::wire
