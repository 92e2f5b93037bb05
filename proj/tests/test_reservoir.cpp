#include <cmath>
#include <random>

#include "chimera/reservoir.hpp"
#include "doctest.h"
#include "ridge_oracle.hpp"

using namespace chimera;

namespace {


Eigen::MatrixXd uniform_inputs(long rows, long cols, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

}  // namespace

TEST_SUITE("reservoir") {
  TEST_CASE("construction hits the requested spectral radius") {
    for (double rho : {0.5, 0.9, 2.0}) {
      ReservoirConfig cfg;
      cfg.spectral_radius = rho;
      const auto r = make_reservoir(cfg);
      CHECK(r.spectral_radius == doctest::Approx(rho).epsilon(1e-9));
      CHECK(r.size() == 100);
      const double density = double(r.a.nonZeros()) / (100.0 * 100.0);
      CHECK(density == doctest::Approx(0.1).epsilon(0.2));
    }
    ReservoirConfig cfg;
    const auto a = make_reservoir(cfg);
    const auto b = make_reservoir(cfg);
    CHECK(Eigen::MatrixXd(a.a).isApprox(Eigen::MatrixXd(b.a), 0.0));
    cfg.spectral_radius = 11;
    CHECK_THROWS_AS(make_reservoir(cfg), InvalidArgument);
    cfg = {};
    cfg.leak = 0;
    CHECK_THROWS_AS(make_reservoir(cfg), InvalidArgument);
  }

  TEST_CASE("step formula and degenerate cases") {
    ReservoirConfig cfg;
    cfg.n = 5;
    cfg.input_dim = 2;
    cfg.leak = 0.3;
    cfg.density = 1.0;
    const auto r = make_reservoir(cfg);
    Eigen::VectorXd x(5), u(2), xi(5);
    x << 0.1, -0.2, 0.3, 0.0, 0.5;
    u << 0.4, -0.1;
    xi << 0.01, 0.0, -0.02, 0.0, 0.03;
    const Eigen::VectorXd pre = r.w_in * u + Eigen::MatrixXd(r.a) * x + xi;
    const auto next = reservoir_step(r, x, u, xi);
    for (int i = 0; i < 5; ++i) CHECK(next(i) == doctest::Approx(0.7 * x(i) + 0.3 * std::tanh(pre(i))));
    CHECK_THROWS_AS(reservoir_step(r, Eigen::VectorXd::Zero(4), u, xi), DimensionMismatch);

    SurrogateReservoir zero;
    zero.w_in = Eigen::MatrixXd::Zero(3, 1);
    zero.a.resize(3, 3);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 100; ++i) z = reservoir_step(zero, z, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(3));
    CHECK(z.isZero(0.0));

    SurrogateReservoir memoryless;
    memoryless.w_in = Eigen::MatrixXd::Constant(3, 1, 0.7);
    memoryless.a.resize(3, 3);
    Eigen::VectorXd one(1);
    one << 0.5;
    const auto y = reservoir_step(memoryless, Eigen::VectorXd::Constant(3, 0.9), one, Eigen::VectorXd::Zero(3));
    CHECK(y(0) == doctest::Approx(std::tanh(0.35)));
  }

  TEST_CASE("state stays inside the tanh range and the sqrt(n) ball") {
    ReservoirConfig cfg;
    cfg.xi_scale = 0.1;
    const auto r = make_reservoir(cfg);
    const auto inputs = uniform_inputs(10000, 1, 4, -1.0, 1.0);
    const auto states = run_reservoir(r, inputs, Eigen::VectorXd::Constant(100, 5.0), 1);
    CHECK(states.cwiseAbs().maxCoeff() <= 1.0);
    for (long t = 0; t < states.rows(); ++t) CHECK(states.row(t).norm() <= 10.0);
  }

  TEST_CASE("echo state contraction at 0.8 and its failure at 2.0") {
    const auto inputs = uniform_inputs(500, 1, 77, 0.0, 0.5);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::mt19937_64 rng(seed * 31);
      std::uniform_real_distribution<double> u(-1, 1);
      Eigen::VectorXd a(100), b(100);
      for (int i = 0; i < 100; ++i) {
        a(i) = u(rng);
        b(i) = u(rng);
      }
      ReservoirConfig cfg;
      cfg.seed = seed;
      cfg.spectral_radius = 0.8;
      const auto ok = esp_test(make_reservoir(cfg), inputs, a, b, seed);
      CHECK(ok.holds);
      REQUIRE(ok.first_below_tolerance);
      CHECK(*ok.first_below_tolerance < 500);
      cfg.spectral_radius = 2.0;
      CHECK(!esp_test(make_reservoir(cfg), inputs, a, b, seed).holds);
      const auto same = esp_test(make_reservoir(cfg), inputs, a, a, seed);
      for (double d : same.divergence) CHECK(d == 0.0);
    }
  }

  TEST_CASE("separation") {
    ReservoirConfig cfg;
    const auto r = make_reservoir(cfg);
    const auto a = uniform_inputs(200, 1, 1, -0.5, 0.5);
    const auto b = uniform_inputs(200, 1, 2, -0.5, 0.5);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(100);
    const auto ab = separation_test(r, a, b, x0, 3);
    const auto ba = separation_test(r, b, a, x0, 3);
    CHECK(ab.distinguishable);
    CHECK(ab.threshold == doctest::Approx(1e-2));
    CHECK(ab.distance == ba.distance);
    CHECK(separation_test(r, a, a, x0, 3).distance == 0.0);
    CHECK_THROWS_AS(separation_test(r, a, b.topRows(10), x0, 3), DimensionMismatch);
  }

  TEST_CASE("harvest shape and determinism") {
    ReservoirConfig cfg;
    cfg.n = 3;
    const auto r = make_reservoir(cfg);
    const auto inputs = uniform_inputs(10, 1, 5, 0.0, 1.0);
    const auto s1 = harvest_states(r, inputs, 2, Eigen::VectorXd::Zero(3), 1);
    const auto s2 = harvest_states(r, inputs, 2, Eigen::VectorXd::Zero(3), 1);
    CHECK(s1.rows() == 8);
    CHECK(s1.cols() == 3);
    CHECK(s1 == s2);
    CHECK_THROWS_AS(harvest_states(r, inputs, 10, Eigen::VectorXd::Zero(3), 1), InsufficientData);
  }

  TEST_CASE("substrate-driven states separate distinct inputs") {
    SubstrateDrive drive;
    drive.substrate.seed = 5;
    const std::vector<double> a{0.1, 0.5, 0.2, 0.6, 0.0, 0.4};
    const std::vector<double> b{0.6, 0.0, 0.5, 0.1, 0.3, 0.2};
    const auto sa = harvest_substrate_states(drive, a, 1);
    const auto sa2 = harvest_substrate_states(drive, a, 1);
    const auto sb = harvest_substrate_states(drive, b, 1);
    CHECK(sa.rows() == 5);
    CHECK(sa.cols() == 9);
    CHECK(sa == sa2);
    for (long i = 0; i < sa.rows(); ++i) CHECK((sa.row(i) - sb.row(i)).norm() > 0.0);
  }

  TEST_CASE("readout matches the normal-equations oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
      const long t = 200, n = 50;
      Eigen::MatrixXd s = uniform_inputs(t, n, 100 + trial, -1, 1);
      Eigen::MatrixXd y = uniform_inputs(t, 2, 200 + trial, -1, 1);
      const auto model = train_readout(s, y, 1e-6);
      const auto ref = oracle::normal_equations_oracle(s, y, 1e-6);
      CHECK((model.weights - ref).norm() <= 1e-8 * ref.norm());
    }
  }

  TEST_CASE("exact recovery, ridge limit, singular systems") {
    Eigen::MatrixXd s = uniform_inputs(100, 4, 9, -1, 1);
    Eigen::VectorXd w(4);
    w << 1.5, -2.0, 0.25, 3.0;
    Eigen::MatrixXd y = (s * w).array() + 0.7;
    const auto exact = train_readout(s, y, 0.0);
    const Eigen::MatrixXd pred = exact.predict(s);
    CHECK(evaluate_nmse(std::span(pred.data(), pred.size()), std::span(y.data(), y.size())) < 1e-10);
    CHECK(exact.weights(0, 4) == doctest::Approx(0.7));

    const auto huge = train_readout(s, y, 1e14);
    CHECK(huge.weights.leftCols(4).norm() < 1e-10);
    CHECK(huge.weights(0, 4) == doctest::Approx(y.mean()).epsilon(1e-9));

    Eigen::MatrixXd dup(100, 3);
    dup << s.col(0), s.col(1), s.col(0);
    CHECK_THROWS_AS(train_readout(dup, y, 0.0), SingularSystem);
    CHECK_NOTHROW(train_readout(dup, y, 1e-3));
    CHECK_THROWS_AS(train_readout(s, y.topRows(10), 0.1), DimensionMismatch);
    CHECK_THROWS_AS(train_readout(s, y, -1.0), InvalidArgument);
    CHECK_THROWS_AS(exact.predict(dup), DimensionMismatch);
  }

  TEST_CASE("training error does not grow as lambda shrinks") {
    Eigen::MatrixXd s = uniform_inputs(150, 20, 31, -1, 1);
    Eigen::MatrixXd y = uniform_inputs(150, 1, 32, -1, 1);
    double prev = INFINITY;
    for (double lambda : {100.0, 10.0, 1.0, 0.1, 0.01, 1e-4}) {
      const Eigen::MatrixXd p = train_readout(s, y, lambda).predict(s);
      const double e = evaluate_nmse(std::span(p.data(), p.size()), std::span(y.data(), y.size()));
      CHECK(e <= prev + 1e-12);
      prev = e;
    }
  }

  TEST_CASE("nmse reference values") {
    const std::vector<double> y{1, 2, 3, 4, 5};
    CHECK(evaluate_nmse(y, y) == 0.0);
    const std::vector<double> mean(5, 3.0);
    CHECK(evaluate_nmse(mean, y) == doctest::Approx(1.0));
    std::vector<double> off;
    for (double v : y) off.push_back(v + 0.5);
    CHECK(evaluate_nmse(off, y) == doctest::Approx(0.25 / 2.0));
    const std::vector<double> flat(5, 1.0);
    CHECK_THROWS_AS(evaluate_nmse(flat, flat), InvalidArgument);
    CHECK_THROWS_AS(evaluate_nmse(flat, std::span(y).first(3)), DimensionMismatch);
  }
}
