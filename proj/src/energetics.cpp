#include "chimera/energetics.hpp"

#include <cmath>
#include <limits>
#include "json.hpp"

#include "chimera/errors.hpp"

namespace chimera {

std::string_view log_base_name(LogBase b) {
  switch (b) {
    case LogBase::Two: return "2";
    case LogBase::E: return "e";
    case LogBase::Ten: return "10";
  }
  return "?";
}

std::optional<LogBase> parse_log_base(std::string_view s) {
  if (s == "2") return LogBase::Two;
  if (s == "e") return LogBase::E;
  if (s == "10") return LogBase::Ten;
  return std::nullopt;
}

double log_in_base(double x, LogBase b) {
  switch (b) {
    case LogBase::Two: return std::log2(x);
    case LogBase::E: return std::log(x);
    case LogBase::Ten: return std::log10(x);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void EnergeticsParams::validate() const {
  if (!(n >= 2.0)) throw InvalidArgument("n must be >= 2");
  if (!(k > 0.0 && k_prime > 0.0 && e_switch > 0.0)) {
    throw InvalidArgument("k, k' and E_switch must be > 0");
  }
}

double log2_energy_vn(const EnergeticsParams& p) {
  p.validate();
  return p.n + std::log2(p.k * p.e_switch);
}

double energy_hns(const EnergeticsParams& p) {
  p.validate();
  return p.k_prime * log_in_base(p.n, p.log_base) * p.e_switch;
}

double log2_eta(const EnergeticsParams& p) {
  p.validate();
  // E_switch cancels; keeping k/k' as one ratio makes k == k' contribute exactly 0.
  return p.n + std::log2(p.k / p.k_prime) - std::log2(log_in_base(p.n, p.log_base));
}

EfficiencyReport efficiency_report(const EnergeticsParams& p) {
  EfficiencyReport r;
  r.params = p;
  r.log2_energy_vn = log2_energy_vn(p);
  r.energy_hns = energy_hns(p);
  r.log2_eta = log2_eta(p);
  r.log10_eta = r.log2_eta * std::log10(2.0);
  if (r.log2_eta < 1023.0) r.eta = std::exp2(r.log2_eta);
  r.log10_headline_eta = std::log10(r.headline_eta);
  r.log10_discrepancy = r.log10_eta - r.log10_headline_eta;
  if (std::abs(r.log10_discrepancy) < 1.0) {
    r.note = "literal ratio is within one order of magnitude of the 10^4 headline";
  } else {
    r.note = "literal ratio (k/k') 2^n / log(n) differs from the 10^4 headline by " +
             std::to_string(r.log10_discrepancy) +
             " orders of magnitude; the two are reported side by side, not reconciled";
  }
  return r;
}

std::string efficiency_report_json(const EfficiencyReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.params.n;
  j["k"] = r.params.k;
  j["k_prime"] = r.params.k_prime;
  j["e_switch_j"] = r.params.e_switch;
  j["log_base"] = std::string(log_base_name(r.params.log_base));
  j["log2_energy_vn"] = r.log2_energy_vn;
  j["energy_hns_j"] = r.energy_hns;
  j["literal"] = {{"log2_eta", r.log2_eta}, {"log10_eta", r.log10_eta}};
  j["literal"]["eta"] = r.eta ? nlohmann::ordered_json(*r.eta) : nlohmann::ordered_json(nullptr);
  j["headline"] = {{"eta", r.headline_eta}, {"log10_eta", r.log10_headline_eta}};
  j["log10_discrepancy"] = r.log10_discrepancy;
  j["note"] = r.note;
  return j.dump(2);
}

}  // namespace chimera
