#include "chimera/reservoir.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace chimera {

SurrogateReservoir make_reservoir(const ReservoirConfig& cfg) {
  if (cfg.n <= 0 || cfg.input_dim <= 0) throw InvalidArgument("reservoir dimensions must be > 0");
  if (!(cfg.leak > 0.0 && cfg.leak <= 1.0)) throw InvalidArgument("leak must lie in (0, 1]");
  if (!(cfg.density > 0.0 && cfg.density <= 1.0)) throw InvalidArgument("density must lie in (0, 1]");
  if (!(cfg.spectral_radius >= 0.0 && cfg.spectral_radius <= cfg.max_spectral_radius)) {
    throw InvalidArgument("requested spectral radius exceeds the configured bound");
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SurrogateReservoir r;
  r.leak = cfg.leak;
  r.xi_scale = cfg.xi_scale;
  r.w_in.resize(cfg.n, cfg.input_dim);
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.input_dim; ++j) r.w_in(i, j) = cfg.input_scale * sym(rng);
  }

  std::vector<Eigen::Triplet<double>> entries;
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.n; ++j) {
      if (unit(rng) < cfg.density) entries.emplace_back(i, j, sym(rng));
    }
  }
  r.a.resize(cfg.n, cfg.n);
  r.a.setFromTriplets(entries.begin(), entries.end());

  const double raw = spectral_radius(r.a);
  if (raw > 0.0) r.a *= cfg.spectral_radius / raw;
  r.spectral_radius = spectral_radius(r.a);
  return r;
}

double spectral_radius(const Eigen::SparseMatrix<double>& a) {
  if (a.rows() == 0) return 0.0;
  const Eigen::MatrixXd dense(a);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::VectorXd reservoir_step(const SurrogateReservoir& r, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& xi) {
  if (x.size() != r.size() || xi.size() != r.size() || u.size() != r.input_dim()) {
    throw DimensionMismatch("reservoir_step: state, input or perturbation has the wrong size");
  }
  const Eigen::VectorXd pre = r.w_in * u + r.a * x + xi;
  return (1.0 - r.leak) * x + r.leak * pre.array().tanh().matrix();
}

XiStream::XiStream(int n, double scale, std::uint64_t seed) : n_(n), scale_(scale), rng_(seed) {}

Eigen::VectorXd XiStream::next() {
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(n_);
  if (scale_ == 0.0) return xi;
  std::normal_distribution<double> gauss(0.0, scale_);
  for (int i = 0; i < n_; ++i) xi(i) = gauss(rng_);
  return xi;
}

Eigen::MatrixXd run_reservoir(const SurrogateReservoir& r, const Eigen::MatrixXd& inputs,
                              const Eigen::VectorXd& x0, std::uint64_t xi_seed) {
  if (inputs.cols() != r.input_dim()) throw DimensionMismatch("input columns != input dimension");
  if (x0.size() != r.size()) throw DimensionMismatch("initial state has the wrong size");
  XiStream xi(r.size(), r.xi_scale, xi_seed);
  Eigen::MatrixXd states(inputs.rows(), r.size());
  Eigen::VectorXd x = x0;
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    x = reservoir_step(r, x, inputs.row(t).transpose(), xi.next());
    states.row(t) = x.transpose();
  }
  return states;
}

EspResult esp_test(const SurrogateReservoir& r, const Eigen::MatrixXd& inputs,
                   const Eigen::VectorXd& x0_a, const Eigen::VectorXd& x0_b,
                   std::uint64_t xi_seed, double tolerance) {
  const Eigen::MatrixXd a = run_reservoir(r, inputs, x0_a, xi_seed);
  const Eigen::MatrixXd b = run_reservoir(r, inputs, x0_b, xi_seed);
  EspResult res;
  res.divergence.resize(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    const double d = (a.row(t) - b.row(t)).norm();
    res.divergence[static_cast<std::size_t>(t)] = d;
    if (!res.first_below_tolerance && d < tolerance) {
      res.first_below_tolerance = static_cast<std::size_t>(t);
    }
  }
  res.holds = !res.divergence.empty() && res.divergence.back() < tolerance;
  return res;
}

SeparationResult separation_test(const SurrogateReservoir& r, const Eigen::MatrixXd& input_a,
                                 const Eigen::MatrixXd& input_b, const Eigen::VectorXd& x0,
                                 std::uint64_t xi_seed, double threshold) {
  if (input_a.rows() != input_b.rows() || input_a.cols() != input_b.cols()) {
    throw DimensionMismatch("separation inputs must have equal shape");
  }
  SeparationResult res;
  res.threshold = threshold > 0.0 ? threshold : 1e-3 * std::sqrt(static_cast<double>(r.size()));
  if (input_a.rows() == 0) return res;
  const auto a = run_reservoir(r, input_a, x0, xi_seed);
  const auto b = run_reservoir(r, input_b, x0, xi_seed);
  res.distance = (a.bottomRows(1) - b.bottomRows(1)).norm();
  res.distinguishable = res.distance > res.threshold;
  return res;
}

Eigen::MatrixXd harvest_states(const SurrogateReservoir& r, const Eigen::MatrixXd& inputs,
                               std::size_t washout, const Eigen::VectorXd& x0,
                               std::uint64_t xi_seed) {
  if (washout >= static_cast<std::size_t>(inputs.rows())) {
    throw InsufficientData("washout must be shorter than the input sequence");
  }
  const auto all = run_reservoir(r, inputs, x0, xi_seed);
  return all.bottomRows(all.rows() - static_cast<Eigen::Index>(washout));
}

Eigen::MatrixXd harvest_substrate_states(const SubstrateDrive& drive, std::span<const double> inputs,
                                         std::size_t washout) {
  if (washout >= inputs.size()) {
    throw InsufficientData("washout must be shorter than the input sequence");
  }
  Substrate sub(drive.substrate);
  const double base_mv = drive.substrate.initial.core_mv;
  const std::size_t dim = drive.features.bands.size() + 4;
  Eigen::MatrixXd states(static_cast<Eigen::Index>(inputs.size() - washout),
                         static_cast<Eigen::Index>(dim));

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double u = inputs[i];
    sub.set_heartbeat(Heartbeat{drive.heartbeat_hz, std::clamp(drive.depth_gain * u, 0.0, 1.0)});
    sub.set_operating_point(sub.state().clock_mhz, base_mv - drive.mv_gain * u);
    const double start = sub.now();
    const auto events = sub.sample_shares(drive.window_s);
    if (i < washout) continue;

    std::vector<double> times;
    times.reserve(events.size());
    for (const auto& ev : events) times.push_back(ev.t);
    TimingStats stats;
    if (times.size() >= kMinTimestamps) stats = interarrival_stats(times, drive.stats_window);
    const auto series = rate_series(events, drive.bin_s, start, start + drive.window_s);
    SpectralEstimate spectrum;
    if (series.counts.size() >= 2 * drive.welch.segment_length) {
      spectrum = psd_estimate(series.counts, series.fs(), drive.welch);
    }
    const auto fv = encode_features(stats, spectrum, mean_consecutive_hamming(events),
                                    series.counts, drive.features);
    const auto row = static_cast<Eigen::Index>(i - washout);
    for (std::size_t k = 0; k < fv.values.size(); ++k) {
      states(row, static_cast<Eigen::Index>(k)) = fv.values[k];
    }
  }
  return states;
}

Eigen::MatrixXd ReadoutModel::predict(const Eigen::MatrixXd& states) const {
  const Eigen::Index n = weights.cols() - 1;
  if (states.cols() != n) throw DimensionMismatch("state dimension does not match the readout");
  Eigen::MatrixXd out = states * weights.leftCols(n).transpose();
  out.rowwise() += weights.col(n).transpose();
  return out;
}

ReadoutModel train_readout(const Eigen::MatrixXd& states, const Eigen::MatrixXd& targets,
                           double lambda) {
  if (states.rows() != targets.rows()) throw DimensionMismatch("states and targets row counts differ");
  if (!(lambda >= 0.0)) throw InvalidArgument("ridge lambda must be >= 0");
  if (states.rows() == 0) throw InsufficientData("no training rows");

  const Eigen::Index t = states.rows();
  const Eigen::Index n = states.cols();
  const Eigen::Index m = targets.cols();
  const Eigen::RowVectorXd s_mean = states.colwise().mean();
  const Eigen::RowVectorXd y_mean = targets.colwise().mean();

  Eigen::MatrixXd lhs(t + n, n);
  lhs.topRows(t) = states.rowwise() - s_mean;
  lhs.bottomRows(n) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(t + n, m);
  rhs.topRows(t) = targets.rowwise() - y_mean;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lhs);
  if (qr.rank() < n) {
    throw SingularSystem("readout system is rank deficient (rank " + std::to_string(qr.rank()) +
                         " < " + std::to_string(n) + "); use lambda > 0");
  }
  const Eigen::MatrixXd w = qr.solve(rhs);  // n x m

  ReadoutModel model;
  model.ridge_lambda = lambda;
  model.weights.resize(m, n + 1);
  model.weights.leftCols(n) = w.transpose();
  model.weights.col(n) = (y_mean - s_mean * w).transpose();
  return model;
}

double evaluate_nmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw DimensionMismatch("prediction/target length mismatch");
  if (targets.empty()) throw InsufficientData("no targets");
  const double n = static_cast<double>(targets.size());
  double mean = 0.0;
  for (double y : targets) mean += y;
  mean /= n;
  double var = 0.0;
  double mse = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    var += (targets[i] - mean) * (targets[i] - mean);
    mse += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
  }
  var /= n;
  mse /= n;
  if (!(var > 0.0)) throw InvalidArgument("targets have zero variance");
  return mse / var;
}

}  // namespace chimera
