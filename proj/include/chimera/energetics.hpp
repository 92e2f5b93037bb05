#pragma once

// Energy-scaling comparison between exhaustive state switching,
//   E_vN  = k  * 2^n * E_switch,
// and hierarchical encoding,
//   E_HNS = k' * log(n) * E_switch.
// 2^n overflows every native type for realistic n, so everything that
// involves it stays in the log2 domain.

#include <optional>
#include <string>
#include <string_view>

namespace chimera {

enum class LogBase { Two, E, Ten };

std::string_view log_base_name(LogBase b);
/// Accepts "2", "e", "10".
std::optional<LogBase> parse_log_base(std::string_view s);
double log_in_base(double x, LogBase b);

struct EnergeticsParams {
  double n = 16.0;  // state bits
  double k = 1.0;
  double k_prime = 1.0;
  double e_switch = 1.0;  // J
  LogBase log_base = LogBase::Two;

  void validate() const;
};

double log2_energy_vn(const EnergeticsParams& p);
double energy_hns(const EnergeticsParams& p);
double log2_eta(const EnergeticsParams& p);

inline constexpr double kHeadlineEfficiencyClaim = 1e4;

struct EfficiencyReport {
  EnergeticsParams params;
  double log2_energy_vn = 0.0;
  double energy_hns = 0.0;
  double log2_eta = 0.0;
  double log10_eta = 0.0;
  std::optional<double> eta;  // when representable as a double
  double headline_eta = kHeadlineEfficiencyClaim;
  double log10_headline_eta = 4.0;
  double log10_discrepancy = 0.0;  // log10(eta) - log10(headline)
  std::string note;
};

EfficiencyReport efficiency_report(const EnergeticsParams& p);
std::string efficiency_report_json(const EfficiencyReport& r);

}  // namespace chimera
