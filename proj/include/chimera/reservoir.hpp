#pragma once

// Surrogate reservoir for the state update
//   x' = (1 - leak) x + leak * tanh(W_in u + A x + xi),
// with leak = 1 giving the plain recurrence. xi is zero-mean Gaussian with
// amplitude xi_scale and stands in for the voltage/temperature/frequency
// dependent timing perturbation.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "chimera/errors.hpp"
#include "chimera/muse.hpp"
#include "chimera/substrate.hpp"

namespace chimera {

struct ReservoirConfig {
  int n = 100;
  int input_dim = 1;
  double density = 0.1;  // fraction of non-zero recurrent weights
  double spectral_radius = 0.9;
  double max_spectral_radius = 10.0;
  double input_scale = 0.5;
  double leak = 1.0;
  double xi_scale = 0.0;
  std::uint64_t seed = 1;
};

struct SurrogateReservoir {
  Eigen::MatrixXd w_in;                // n x input_dim
  Eigen::SparseMatrix<double> a;       // n x n
  double leak = 1.0;
  double xi_scale = 0.0;
  double spectral_radius = 0.0;        // of a, as constructed

  int size() const { return static_cast<int>(a.rows()); }
  int input_dim() const { return static_cast<int>(w_in.cols()); }
};

/// Random sparse reservoir rescaled to the requested spectral radius.
SurrogateReservoir make_reservoir(const ReservoirConfig& cfg);

/// Largest eigenvalue modulus (dense eigensolver; intended for n up to a few hundred).
double spectral_radius(const Eigen::SparseMatrix<double>& a);

Eigen::VectorXd reservoir_step(const SurrogateReservoir& r, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& xi);

/// Seeded stream of perturbation samples; all zeros when scale is 0.
class XiStream {
 public:
  XiStream(int n, double scale, std::uint64_t seed);
  Eigen::VectorXd next();

 private:
  int n_;
  double scale_;
  std::mt19937_64 rng_;
};

/// Runs the reservoir over rows of `inputs` (T x input_dim) and returns the trajectory (T x n).
Eigen::MatrixXd run_reservoir(const SurrogateReservoir& r, const Eigen::MatrixXd& inputs,
                              const Eigen::VectorXd& x0, std::uint64_t xi_seed);

struct EspResult {
  std::vector<double> divergence;  // ||x_a(t) - x_b(t)||, one entry per input row
  std::optional<std::size_t> first_below_tolerance;
  bool holds = false;  // divergence at the final step below tolerance
};

inline constexpr double kEspTolerance = 1e-6;

/// Drives two copies from distinct initial states with identical inputs and xi stream.
EspResult esp_test(const SurrogateReservoir& r, const Eigen::MatrixXd& inputs,
                   const Eigen::VectorXd& x0_a, const Eigen::VectorXd& x0_b,
                   std::uint64_t xi_seed, double tolerance = kEspTolerance);

struct SeparationResult {
  double distance = 0.0;
  double threshold = 0.0;
  bool distinguishable = false;
};

/// Terminal-state distance for two equal-length input sequences from a common
/// initial state and xi stream. A non-positive threshold selects 1e-3 * sqrt(n).
SeparationResult separation_test(const SurrogateReservoir& r, const Eigen::MatrixXd& input_a,
                                 const Eigen::MatrixXd& input_b, const Eigen::VectorXd& x0,
                                 std::uint64_t xi_seed, double threshold = 0.0);

/// Post-washout trajectory rows; throws InsufficientData when washout >= T.
Eigen::MatrixXd harvest_states(const SurrogateReservoir& r, const Eigen::MatrixXd& inputs,
                               std::size_t washout, const Eigen::VectorXd& x0,
                               std::uint64_t xi_seed);

/// Maps each input sample onto the substrate (heartbeat depth and voltage
/// offset), simulates one window, and reads the encoded feature vector as
/// the state row.
struct SubstrateDrive {
  SubstrateConfig substrate;
  double window_s = 5.0;
  double depth_gain = 1.6;    // depth = clamp(depth_gain * u, 0, 1)
  double mv_gain = 0.0;       // core_mv = base core_mv - mv_gain * u
  double heartbeat_hz = 2.4;
  double bin_s = kDefaultRateBinSeconds;
  WelchConfig welch{32, 0.5};
  std::size_t stats_window = 1024;
  FeatureConfig features;
};

Eigen::MatrixXd harvest_substrate_states(const SubstrateDrive& drive, std::span<const double> inputs,
                                         std::size_t washout);

class SingularSystem : public Error {
 public:
  using Error::Error;
};

struct ReadoutModel {
  Eigen::MatrixXd weights;  // targets x (state dim + 1); last column is the bias
  double ridge_lambda = 0.0;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& states) const;
};

/// Ridge readout with an unpenalized bias: the penalized weights solve the
/// centered problem and the bias restores the means. Solved by column-pivoted
/// QR of the stacked system [S_c; sqrt(lambda) I]. With lambda == 0 a rank
/// deficient S_c raises SingularSystem.
ReadoutModel train_readout(const Eigen::MatrixXd& states, const Eigen::MatrixXd& targets,
                           double lambda);

/// Mean squared error divided by the population variance of the targets.
double evaluate_nmse(std::span<const double> predictions, std::span<const double> targets);

}  // namespace chimera
