#include "chimera/substrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "chimera/errors.hpp"

namespace chimera {

void LandauParams::validate() const {
  if (!(b > 0.0)) throw InvalidArgument("Landau quartic coefficient b must be > 0");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (!(v_crit_mv >= 850.0 && v_crit_mv <= 990.0)) {
    throw InvalidArgument("V_crit must lie in [850, 990] mV");
  }
}

double LandauParams::free_energy(double psi, double core_mv) const {
  const double psi2 = psi * psi;
  return f0 + a_slope * (core_mv - v_crit_mv) * psi2 + b * psi2 * psi2;
}

void SubstrateState::validate() const {
  if (!(base_rate > 0.0)) throw InvalidArgument("base_rate must be > 0");
  if (!(temp_c >= 0.0 && temp_c <= 120.0)) throw InvalidArgument("temp_c must lie in [0, 120]");
  if (heartbeat && !(heartbeat->depth >= 0.0 && heartbeat->depth <= 1.0)) {
    throw InvalidArgument("heartbeat depth must lie in [0, 1]");
  }
}

double landau_drift(double psi, double core_mv, const LandauParams& p) {
  return -2.0 * p.a_slope * (core_mv - p.v_crit_mv) * psi - 4.0 * p.b * psi * psi * psi;
}

double landau_equilibrium(double core_mv, const LandauParams& p) {
  if (core_mv >= p.v_crit_mv) return 0.0;
  return std::sqrt(p.a_slope * (p.v_crit_mv - core_mv) / (2.0 * p.b));
}

SubstrateState landau_step(const SubstrateState& s, const LandauParams& p, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw InvalidArgument("landau_step requires dt > 0");
  SubstrateState next = s;
  next.psi = s.psi + landau_drift(s.psi, s.core_mv, p) * dt;
  if (p.noise_sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    next.psi += p.noise_sigma * std::sqrt(dt) * gauss(rng);
  }
  return next;
}

double instantaneous_rate(const SubstrateState& s, double t, const RateCoupling& coupling) {
  double rate = s.base_rate * (1.0 + coupling.c_psi * s.psi * s.psi);
  if (s.heartbeat) {
    rate *= 1.0 + s.heartbeat->depth * std::sin(2.0 * std::numbers::pi * s.heartbeat->freq_hz * t);
  }
  return std::max(rate, coupling.lambda_min_fraction * s.base_rate);
}

SubstrateState thermal_step(const SubstrateState& s, double power_w, double ambient_c, double dt,
                            const ThermalParams& thermal) {
  if (!(dt > 0.0)) throw InvalidArgument("thermal_step requires dt > 0");
  SubstrateState next = s;
  next.temp_c += dt * ((power_w * thermal.r_th + ambient_c - s.temp_c) / thermal.tau_th);
  next.temp_c = std::clamp(next.temp_c, 0.0, 120.0);
  return next;
}

Hash256 share_hash(const std::string& device_id, std::uint64_t counter) {
  std::array<std::uint8_t, 8> be{};
  for (int i = 0; i < 8; ++i) be[i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  Sha256 ctx;
  ctx.update(device_id);
  ctx.update(be);
  return ctx.finish();
}

std::vector<ShareEvent> sample_shares(SubstrateState& s, const LandauParams& p, double horizon,
                                      Rng& rng, SamplerContext& ctx) {
  std::vector<ShareEvent> events;
  if (!(horizon > 0.0)) return events;
  if (!(ctx.dt > 0.0)) throw InvalidArgument("sampler dt must be > 0");

  std::exponential_distribution<double> unit_exp(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double depth = s.heartbeat ? s.heartbeat->depth : 0.0;
  const double end = ctx.t + horizon;
  double last_t = -std::numeric_limits<double>::infinity();

  double slice_start = ctx.t;
  while (slice_start < end) {
    const double slice_end = std::min(slice_start + ctx.dt, end);
    const double bound =
        s.base_rate * (1.0 + ctx.coupling.c_psi * s.psi * s.psi) * (1.0 + depth);

    double tau = slice_start;
    while (true) {
      tau += unit_exp(rng) / bound;
      if (tau >= slice_end) break;
      if (unit(rng) * bound > instantaneous_rate(s, tau, ctx.coupling)) continue;
      const double t = tau > last_t ? tau : std::nextafter(last_t, end);
      last_t = t;
      ShareEvent ev;
      ev.t = t;
      ev.hash = share_hash(ctx.device_id, ctx.counter);
      ev.nonce = static_cast<std::uint32_t>(ctx.counter);
      ev.source = ctx.device_id;
      ++ctx.counter;
      events.push_back(std::move(ev));
    }

    s = landau_step(s, p, slice_end - slice_start, rng);
    slice_start = slice_end;
  }
  ctx.t = end;
  return events;
}

Substrate::Substrate(SubstrateConfig config)
    : config_(std::move(config)), state_(config_.initial), rng_(config_.seed) {
  config_.landau.validate();
  state_.validate();
  ctx_.device_id = config_.device_id;
  ctx_.dt = config_.dt;
  ctx_.coupling = config_.coupling;
}

void Substrate::set_operating_point(double clock_mhz, double core_mv) {
  state_.clock_mhz = clock_mhz;
  state_.core_mv = core_mv;
}

void Substrate::set_heartbeat(std::optional<Heartbeat> hb) {
  if (hb && !(hb->depth >= 0.0 && hb->depth <= 1.0)) {
    throw InvalidArgument("heartbeat depth must lie in [0, 1]");
  }
  state_.heartbeat = hb;
}

void Substrate::set_base_rate(double base_rate) {
  if (!(base_rate > 0.0)) throw InvalidArgument("base_rate must be > 0");
  state_.base_rate = base_rate;
}

std::vector<ShareEvent> Substrate::sample_shares(double horizon) {
  return chimera::sample_shares(state_, config_.landau, horizon, rng_, ctx_);
}

void Substrate::thermal_step(double power_w, double ambient_c, double dt) {
  state_ = chimera::thermal_step(state_, power_w, ambient_c, dt, config_.thermal);
}

}  // namespace chimera
