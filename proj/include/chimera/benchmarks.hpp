#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chimera/errors.hpp"
#include "chimera/reservoir.hpp"

namespace chimera {

class NarmaDivergence : public Error {
 public:
  NarmaDivergence(std::size_t index, double value);
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// y(t+1) = 0.3 y(t) + 0.05 y(t) sum_{i=0..9} y(t-i) + 1.5 u(t-9) u(t) + 0.1,
/// zero history; output has the same length as u with y(0) = 0.
std::vector<double> narma10_generate(std::span<const double> u);

struct MackeyGlassConfig {
  double tau = 17.0;
  double beta = 0.2;
  double gamma = 0.1;
  double exponent = 10.0;
  double dt = 0.1;
  double sample_every = 1.0;  // time units between returned samples
  double transient = 1000.0;  // time units discarded before the first sample
  double x0 = 1.2;            // constant history on [-tau, 0]
  std::size_t n_samples = 1000;
};

/// RK4 on the delay equation x' = beta x(t-tau) / (1 + x(t-tau)^p) - gamma x.
/// Delayed values at half steps come from cubic Hermite interpolation of the
/// stored solution, which keeps the scheme fourth order.
std::vector<double> mackey_glass_generate(const MackeyGlassConfig& cfg);

struct BenchmarkReport {
  std::string task;
  double nmse = 0.0;
  double baseline_nmse = 0.0;  // mean predictor fitted on the training targets
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;

  std::string to_json() const;
};

struct BenchmarkConfig {
  ReservoirConfig reservoir;
  std::size_t washout = 100;
  std::size_t samples = 2500;  // post-washout rows
  double train_fraction = 0.8;
  double ridge_lambda = 1e-6;
};

BenchmarkConfig default_narma10_config();
BenchmarkConfig default_mackey_glass_config();

BenchmarkReport run_narma10_benchmark(std::uint64_t seed, BenchmarkConfig cfg = default_narma10_config());
BenchmarkReport run_mackey_glass_benchmark(std::uint64_t seed,
                                           BenchmarkConfig cfg = default_mackey_glass_config());

/// ESP over `seeds` reservoirs at the given spectral radius; metrics report how many held.
BenchmarkReport run_esp_benchmark(std::uint64_t seed, double spectral_radius = 0.8,
                                  std::size_t seeds = 20, std::size_t steps = 500);
BenchmarkReport run_separation_benchmark(std::uint64_t seed, std::size_t seeds = 20,
                                         std::size_t steps = 200);

}  // namespace chimera
