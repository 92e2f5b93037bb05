#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "chimera/errors.hpp"
#include "chimera/spectral.hpp"
#include "doctest.h"

using namespace chimera;

namespace {

constexpr double kPi = std::numbers::pi;

// Welch by direct summation: periodic Hann, mean removed per segment,
// one-sided density.
std::vector<double> naive_welch(const std::vector<double>& x, double fs, std::size_t seg, std::size_t step) {
  std::vector<double> w(seg);
  double u = 0;
  for (std::size_t i = 0; i < seg; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2 * kPi * i / seg);
    u += w[i] * w[i];
  }
  std::vector<double> psd(seg / 2 + 1, 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg <= x.size(); start += step, ++count) {
    double mean = 0;
    for (std::size_t i = 0; i < seg; ++i) mean += x[start + i];
    mean /= seg;
    for (std::size_t k = 0; k < psd.size(); ++k) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < seg; ++i) {
        acc += (x[start + i] - mean) * w[i] * std::polar(1.0, -2 * kPi * double(k * i % seg) / seg);
      }
      psd[k] += std::norm(acc);
    }
  }
  for (std::size_t k = 0; k < psd.size(); ++k) {
    const bool edge = k == 0 || (seg % 2 == 0 && k == seg / 2);
    psd[k] *= (edge ? 1.0 : 2.0) / (fs * u * count);
  }
  return psd;
}

std::vector<double> white(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("matches direct-summation Welch") {
    auto x = white(1000, 1);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += std::sin(2 * kPi * 2.4 * i / 20.0) + 3.0;
    for (std::size_t seg : {64u, 100u, 256u}) {
      const auto est = psd_estimate(x, 20.0, {seg, 0.5});
      const auto ref = naive_welch(x, 20.0, seg, seg - seg / 2);
      REQUIRE(est.psd.size() == ref.size());
      CHECK(est.segments == (x.size() - seg) / (seg - seg / 2) + 1);
      for (std::size_t k = 0; k < ref.size(); ++k) {
        CHECK(est.psd[k] == doctest::Approx(ref[k]).epsilon(1e-9).scale(1e-12));
      }
      CHECK(est.freqs.back() <= 10.0);
      CHECK(est.resolution_hz() == doctest::Approx(20.0 / seg));
    }
  }

  TEST_CASE("Parseval on white noise within 1%") {
    for (std::uint64_t seed : {3u, 4u, 5u}) {
      const auto x = white(1 << 16, seed, 2.0);
      double mean = 0, var = 0;
      for (double v : x) mean += v / x.size();
      for (double v : x) var += (v - mean) * (v - mean) / x.size();
      const auto est = psd_estimate(x, 20.0);
      const double total = band_power(est, 0.0, 10.0);
      CHECK(total == doctest::Approx(var).epsilon(0.01));
    }
  }

  TEST_CASE("sinusoid peak and heartbeat detection") {
    auto x = white(2400, 7, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 2.0 * std::sin(2 * kPi * 2.4 * i / 20.0);
    const auto est = psd_estimate(x, 20.0);
    REQUIRE(est.peak);
    CHECK(std::abs(est.peak->freq_hz - 2.4) <= est.resolution_hz());
    const auto hb = detect_heartbeat(est);
    REQUIRE(hb);
    CHECK(std::abs(hb->freq_hz - 2.4) <= 0.1);
    CHECK(hb->prominence_db >= 10.0);
    CHECK(hb->reference_density > 0.0);
  }

  TEST_CASE("pure noise yields no heartbeat") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      hits += detect_heartbeat(psd_estimate(white(2400, 100 + seed), 20.0)).has_value();
    }
    CHECK(hits == 0);
  }

  TEST_CASE("argument checks") {
    CHECK_THROWS_AS(psd_estimate(white(511, 1), 20.0), InsufficientData);
    CHECK_NOTHROW(psd_estimate(white(512, 1), 20.0));
    CHECK_THROWS_AS(psd_estimate(white(600, 1), 0.0), InvalidArgument);
    CHECK_THROWS_AS(psd_estimate(white(600, 1), 20.0, {256, 1.0}), InvalidArgument);
    const auto est = psd_estimate(white(600, 1), 4.0);
    CHECK_THROWS_AS(detect_heartbeat(est), InvalidArgument);  // band above Nyquist
  }

  TEST_CASE("band power splits additively") {
    const auto est = psd_estimate(white(4096, 9), 20.0);
    const double whole = band_power(est, 0.0, 10.0);
    const double parts = band_power(est, 0.0, 2.5) + band_power(est, 2.5, 7.0) + band_power(est, 7.0, 10.0);
    CHECK(parts == doctest::Approx(whole).epsilon(1e-12));
  }

  TEST_CASE("real DFT against direct summation") {
    const auto x = white(37, 2);
    const auto X = real_dft(x);
    REQUIRE(X.size() == 19);
    for (std::size_t k = 0; k < X.size(); ++k) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * std::polar(1.0, -2 * kPi * double(k * i) / 37);
      CHECK(std::abs(X[k] - acc) < 1e-10);
    }
  }

  TEST_CASE("band analytic signal of an in-band tone has constant envelope") {
    std::vector<double> x(1000);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = 1.5 * std::cos(2 * kPi * 2.0 * i / 20.0) + 0.7 * std::cos(2 * kPi * 8.0 * i / 20.0);
    }
    const auto a = band_analytic_signal(x, 20.0, 1.0, 3.0);
    const auto b = band_analytic_signal(x, 20.0, 6.0, 9.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(a[i]) == doctest::Approx(1.5).epsilon(1e-9));
      CHECK(std::abs(b[i]) == doctest::Approx(0.7).epsilon(1e-9));
    }
  }
}
