#pragma once

// Stochastic model of a voltage-stressed SHA-256 ASIC.
//
// The order parameter psi follows 0-D Landau dynamics
//   dpsi = -(2 a (V - V_crit) psi + 4 b psi^3) dt + sigma dW
// and modulates the share arrival rate
//   lambda(t) = base_rate (1 + c_psi psi^2) (1 + depth sin(2 pi f t)),
// clamped below at lambda_min. Arrivals are drawn by Ogata thinning.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chimera/sha256.hpp"

namespace chimera {

using Rng = std::mt19937_64;

struct LandauParams {
  double f0 = 0.0;
  double a_slope = 0.01;  // 1/mV
  double b = 1.0;
  double gamma = 0.0;  // gradient stiffness; unused in 0-D mode
  double v_crit_mv = 870.0;
  double noise_sigma = 0.05;

  /// Throws InvalidArgument when b <= 0, noise_sigma < 0 or V_crit leaves [850, 990].
  void validate() const;
  /// F(psi, V) without the gradient term.
  double free_energy(double psi, double core_mv) const;
};

struct Heartbeat {
  double freq_hz = 2.4;
  double depth = 0.0;  // [0, 1]
};

struct SubstrateState {
  double psi = 0.0;
  double temp_c = 25.0;
  double base_rate = 50.0;  // events/s
  double clock_mhz = 400.0;
  double core_mv = 900.0;
  std::optional<Heartbeat> heartbeat;

  void validate() const;
};

struct RateCoupling {
  double c_psi = 0.5;
  double lambda_min_fraction = 0.01;  // lambda_min = fraction * base_rate
};

struct ThermalParams {
  double r_th = 4.0;     // degC / W
  double tau_th = 20.0;  // s
};

struct ShareEvent {
  double t = 0.0;  // seconds
  Hash256 hash;
  std::uint32_t nonce = 0;
  bool valid = true;  // reserved; the simulator never produces invalid shares
  std::string source;

  friend bool operator==(const ShareEvent&, const ShareEvent&) = default;
};

/// -dF/dpsi in 0-D mode.
double landau_drift(double psi, double core_mv, const LandauParams& p);

/// Non-zero stable equilibrium magnitude below V_crit, 0 otherwise.
double landau_equilibrium(double core_mv, const LandauParams& p);

/// One Euler-Maruyama step of psi; other fields are copied unchanged.
SubstrateState landau_step(const SubstrateState& s, const LandauParams& p, double dt, Rng& rng);

double instantaneous_rate(const SubstrateState& s, double t, const RateCoupling& coupling = {});

/// First-order RC junction model; temperature is kept inside [0, 120] degC.
SubstrateState thermal_step(const SubstrateState& s, double power_w, double ambient_c, double dt,
                            const ThermalParams& thermal = {});

/// Clock, nonce counter and identity threaded through successive sample_shares calls.
struct SamplerContext {
  double t = 0.0;
  std::uint64_t counter = 0;
  std::string device_id = "sim-0";
  double dt = 1e-3;
  RateCoupling coupling;
};

/// Hash attached to the share with the given counter: SHA-256(device_id || counter as u64 BE).
Hash256 share_hash(const std::string& device_id, std::uint64_t counter);

/// Samples arrivals over [ctx.t, ctx.t + horizon) and advances psi on a dt grid.
/// Within each grid slice psi is frozen, so the slice bound
/// base_rate (1 + c_psi psi^2)(1 + depth) dominates lambda exactly.
std::vector<ShareEvent> sample_shares(SubstrateState& s, const LandauParams& p, double horizon,
                                      Rng& rng, SamplerContext& ctx);

struct SubstrateConfig {
  LandauParams landau;
  RateCoupling coupling;
  ThermalParams thermal;
  SubstrateState initial;
  double dt = 1e-3;
  std::string device_id = "sim-0";
  std::uint64_t seed = 1;
};

/// Single-owner simulator instance with its own clock and generator.
class Substrate {
 public:
  explicit Substrate(SubstrateConfig config);

  const SubstrateState& state() const { return state_; }
  const SubstrateConfig& config() const { return config_; }
  double now() const { return ctx_.t; }

  void set_operating_point(double clock_mhz, double core_mv);
  void set_heartbeat(std::optional<Heartbeat> hb);
  void set_base_rate(double base_rate);

  std::vector<ShareEvent> sample_shares(double horizon);
  void thermal_step(double power_w, double ambient_c, double dt);

 private:
  SubstrateConfig config_;
  SubstrateState state_;
  SamplerContext ctx_;
  Rng rng_;
};

}  // namespace chimera
