#include <openssl/sha.h>

#include <cmath>
#include <numbers>

#include "chimera/errors.hpp"
#include "chimera/substrate.hpp"
#include "doctest.h"

using namespace chimera;

TEST_SUITE("substrate") {
  TEST_CASE("equilibrium is a stationary point of the drift") {
    LandauParams p;
    for (double v : {850.0, 855.0, 869.0}) {
      const double psi = landau_equilibrium(v, p);
      CHECK(psi > 0.0);
      CHECK(psi == doctest::Approx(std::sqrt(p.a_slope * (p.v_crit_mv - v) / (2.0 * p.b))));
      CHECK(std::abs(landau_drift(psi, v, p)) < 1e-14);
      CHECK(std::abs(landau_drift(-psi, v, p)) < 1e-14);
      CHECK(p.free_energy(psi, v) < p.free_energy(0.0, v));
    }
    CHECK(landau_equilibrium(870.0, p) == 0.0);
    CHECK(landau_equilibrium(950.0, p) == 0.0);
  }

  TEST_CASE("drift is minus the derivative of the free energy") {
    LandauParams p;
    for (double v : {850.0, 900.0}) {
      for (double psi : {-0.7, -0.1, 0.2, 0.9}) {
        const double h = 1e-6;
        const double numeric = -(p.free_energy(psi + h, v) - p.free_energy(psi - h, v)) / (2 * h);
        CHECK(landau_drift(psi, v, p) == doctest::Approx(numeric).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("parameter validation") {
    LandauParams p;
    p.b = 0.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = {};
    p.v_crit_mv = 1000;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    SubstrateState s;
    s.heartbeat = Heartbeat{2.4, 1.5};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    Rng rng(1);
    CHECK_THROWS_AS(landau_step(SubstrateState{}, LandauParams{}, 0.0, rng), InvalidArgument);
  }

  TEST_CASE("rate follows psi and heartbeat and is floored") {
    SubstrateState s;
    s.base_rate = 50;
    s.psi = 0.4;
    RateCoupling c;
    CHECK(instantaneous_rate(s, 0.0, c) == doctest::Approx(50 * (1 + 0.5 * 0.16)));
    s.psi = 0;
    s.heartbeat = Heartbeat{2.0, 1.0};
    // sin(2 pi 2 t) = -1 at t = 3/8
    CHECK(instantaneous_rate(s, 0.375, c) == doctest::Approx(0.5));
    CHECK(instantaneous_rate(s, 0.125, c) == doctest::Approx(100.0));
  }

  TEST_CASE("thermal step is one forward Euler step of the RC model") {
    SubstrateState s;
    s.temp_c = 30.0;
    const auto n = thermal_step(s, 10.0, 25.0, 0.5);
    CHECK(n.temp_c == doctest::Approx(30.0 + 0.5 * (10.0 * 4.0 + 25.0 - 30.0) / 20.0));
    SubstrateState t = s;
    for (int i = 0; i < 20000; ++i) t = thermal_step(t, 10.0, 25.0, 0.05);
    CHECK(t.temp_c == doctest::Approx(65.0).epsilon(1e-9));
    CHECK(thermal_step(s, 1000.0, 25.0, 20.0).temp_c == 120.0);
    CHECK(thermal_step(s, -1000.0, 25.0, 20.0).temp_c == 0.0);
  }

  TEST_CASE("share hash is SHA-256 of the id and big-endian counter") {
    const std::string id = "sim-7";
    const std::uint64_t counter = 0x0102030405060708ULL;
    std::vector<std::uint8_t> msg(id.begin(), id.end());
    for (int i = 0; i < 8; ++i) msg.push_back(static_cast<std::uint8_t>(i + 1));
    Hash256 expected;
    SHA256(msg.data(), msg.size(), expected.bytes.data());
    CHECK(share_hash(id, counter) == expected);
  }

  TEST_CASE("sampled events: ascending, counter driven, deterministic") {
    SubstrateConfig cfg;
    cfg.seed = 42;
    Substrate a(cfg);
    Substrate b(cfg);
    const auto ea = a.sample_shares(20.0);
    const auto eb = b.sample_shares(20.0);
    REQUIRE(ea.size() > 500);
    CHECK(ea == eb);
    for (std::size_t i = 0; i < ea.size(); ++i) {
      CHECK(ea[i].nonce == i);
      CHECK(ea[i].hash == share_hash(cfg.device_id, i));
      CHECK(ea[i].source == cfg.device_id);
      if (i) CHECK(ea[i].t > ea[i - 1].t);
      CHECK(ea[i].t >= 0.0);
      CHECK(ea[i].t < 20.0);
    }
    CHECK(a.now() == doctest::Approx(20.0));
    const auto more = a.sample_shares(1.0);
    if (!more.empty()) {
      CHECK(more.front().t >= ea.back().t);
      CHECK(more.front().nonce == ea.size());
    }
    CHECK(a.sample_shares(0.0).empty());
    CHECK(a.sample_shares(-1.0).empty());
  }

  TEST_CASE("nonce is the low 32 bits of the counter") {
    SubstrateState s;
    LandauParams p;
    Rng rng(3);
    SamplerContext ctx;
    ctx.counter = 0x100000005ULL;
    const auto ev = sample_shares(s, p, 1.0, rng, ctx);
    REQUIRE(!ev.empty());
    CHECK(ev.front().nonce == 5u);
  }

  TEST_CASE("unmodulated arrival count matches the base rate") {
    SubstrateConfig cfg;
    cfg.landau.noise_sigma = 0.0;
    cfg.initial.core_mv = 950;
    cfg.seed = 11;
    Substrate s(cfg);
    const auto ev = s.sample_shares(200.0);
    // Poisson(10000): 4 sigma = 400
    CHECK(std::abs(static_cast<double>(ev.size()) - 10000.0) < 400.0);
  }

  TEST_CASE("heartbeat phase bias equals depth / 2") {
    SubstrateConfig cfg;
    cfg.landau.noise_sigma = 0.0;
    cfg.initial.core_mv = 950;
    cfg.initial.heartbeat = Heartbeat{2.4, 0.6};
    cfg.seed = 12;
    Substrate s(cfg);
    const auto ev = s.sample_shares(400.0);
    double acc = 0.0;
    for (const auto& e : ev) acc += std::sin(2 * std::numbers::pi * 2.4 * e.t);
    CHECK(std::abs(acc / static_cast<double>(ev.size()) - 0.3) < 0.02);
  }

  TEST_CASE("noise-free trajectories settle at the analytic equilibria") {
    LandauParams p;
    p.noise_sigma = 0.0;
    Rng rng(1);
    for (double v : {850.0, 860.0, 900.0, 990.0}) {
      for (double psi0 : {-0.8, 0.05, 0.8}) {
        SubstrateState s;
        s.core_mv = v;
        s.psi = psi0;
        for (int i = 0; i < 200000; ++i) s = landau_step(s, p, 1e-3, rng);
        const double target = std::copysign(landau_equilibrium(v, p), psi0);
        if (target == 0.0) {
          CHECK(std::abs(s.psi) < 1e-6);
        } else {
          CHECK(std::abs(s.psi - target) <= 1e-6 * std::abs(target));
        }
      }
    }
  }
}
