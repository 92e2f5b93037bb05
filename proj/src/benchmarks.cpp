#include "chimera/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"

namespace chimera {

NarmaDivergence::NarmaDivergence(std::size_t index, double value)
    : Error("NARMA-10 diverged at index " + std::to_string(index) + " (|y| = " +
            std::to_string(std::abs(value)) + " > 10)"),
      index_(index) {}

std::vector<double> narma10_generate(std::span<const double> u) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(u[i] >= 0.0 && u[i] <= 0.5)) {
      throw InvalidArgument("NARMA-10 input must lie in [0, 0.5] (index " + std::to_string(i) + ")");
    }
  }
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t t = 0; t + 1 < u.size(); ++t) {
    double window = 0.0;
    for (std::size_t i = 0; i < 10 && i <= t; ++i) window += y[t - i];
    const double lagged = t >= 9 ? u[t - 9] : 0.0;
    const double next = 0.3 * y[t] + 0.05 * y[t] * window + 1.5 * lagged * u[t] + 0.1;
    if (!(std::abs(next) <= 10.0)) throw NarmaDivergence(t + 1, next);
    y[t + 1] = next;
  }
  return y;
}

namespace {

bool is_integral_ratio(double num, double den, long& out) {
  const double ratio = num / den;
  out = std::lround(ratio);
  return out > 0 && std::abs(ratio - static_cast<double>(out)) < 1e-9 * std::max(1.0, ratio);
}

// Solution history with a ring buffer long enough to cover the delay.
class DelayHistory {
 public:
  DelayHistory(std::size_t delay_steps, double x0) : x_(delay_steps + 2), f_(delay_steps + 2), x0_(x0) {}

  void push(std::size_t index, double x, double f) {
    x_[index % x_.size()] = x;
    f_[index % f_.size()] = f;
  }
  // Value at grid index i; negative indices lie in the constant initial history.
  double at(long i) const { return i < 0 ? x0_ : x_[static_cast<std::size_t>(i) % x_.size()]; }
  // Hermite midpoint between grid indices i and i+1.
  double midpoint(long i, double dt) const {
    if (i + 1 <= 0) return x0_;
    const auto a = static_cast<std::size_t>(i) % x_.size();
    const auto b = static_cast<std::size_t>(i + 1) % x_.size();
    return 0.5 * (x_[a] + x_[b]) + dt * (f_[a] - f_[b]) / 8.0;
  }

 private:
  std::vector<double> x_;
  std::vector<double> f_;
  double x0_;
};

}  // namespace

std::vector<double> mackey_glass_generate(const MackeyGlassConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidArgument("Mackey-Glass dt must be > 0");
  long delay_steps = 0;
  long sample_steps = 0;
  if (!is_integral_ratio(cfg.tau, cfg.dt, delay_steps)) {
    throw InvalidArgument("Mackey-Glass tau / dt must be integral");
  }
  if (!is_integral_ratio(cfg.sample_every, cfg.dt, sample_steps)) {
    throw InvalidArgument("Mackey-Glass sample spacing / dt must be integral");
  }
  long transient_steps = 0;
  if (cfg.transient > 0.0 && !is_integral_ratio(cfg.transient, cfg.dt, transient_steps)) {
    throw InvalidArgument("Mackey-Glass transient / dt must be integral");
  }

  const double dt = cfg.dt;
  auto rhs = [&](double x, double delayed) {
    return cfg.beta * delayed / (1.0 + std::pow(delayed, cfg.exponent)) - cfg.gamma * x;
  };

  DelayHistory hist(static_cast<std::size_t>(delay_steps), cfg.x0);
  double x = cfg.x0;
  hist.push(0, x, rhs(x, cfg.x0));

  std::vector<double> out;
  out.reserve(cfg.n_samples);
  const long total_steps = transient_steps + sample_steps * static_cast<long>(cfg.n_samples);
  for (long i = 0;; ++i) {
    if (i >= transient_steps && (i - transient_steps) % sample_steps == 0) {
      out.push_back(x);
      if (out.size() == cfg.n_samples) break;
    }
    if (i >= total_steps) break;
    const long lag = i - delay_steps;
    const double d0 = hist.at(lag);
    const double dh = hist.midpoint(lag, dt);
    const double d1 = hist.at(lag + 1);
    const double k1 = rhs(x, d0);
    const double k2 = rhs(x + 0.5 * dt * k1, dh);
    const double k3 = rhs(x + 0.5 * dt * k2, dh);
    const double k4 = rhs(x + dt * k3, d1);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double delayed_next = hist.at(lag + 1);
    hist.push(static_cast<std::size_t>(i + 1), x, rhs(x, delayed_next));
  }
  return out;
}

std::string BenchmarkReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = task;
  j["nmse"] = nmse;
  j["baseline_nmse"] = baseline_nmse;
  j["train_size"] = train_size;
  j["test_size"] = test_size;
  j["seed"] = seed;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) j["metrics"][k] = v;
  return j.dump(2);
}

BenchmarkConfig default_narma10_config() {
  BenchmarkConfig cfg;
  cfg.reservoir.n = 100;
  cfg.reservoir.spectral_radius = 0.9;
  cfg.reservoir.input_scale = 0.5;
  cfg.reservoir.density = 0.1;
  cfg.samples = 2500;
  cfg.ridge_lambda = 1e-6;
  return cfg;
}

BenchmarkConfig default_mackey_glass_config() {
  BenchmarkConfig cfg;
  cfg.reservoir.n = 100;
  cfg.reservoir.spectral_radius = 0.9;
  cfg.reservoir.input_scale = 0.5;
  cfg.samples = 2000;
  cfg.ridge_lambda = 1e-8;
  return cfg;
}

namespace {

BenchmarkReport fit_and_score(const std::string& task, const Eigen::MatrixXd& states,
                              const Eigen::VectorXd& targets, const BenchmarkConfig& cfg,
                              std::uint64_t seed) {
  const auto rows = states.rows();
  const auto train = static_cast<Eigen::Index>(std::floor(cfg.train_fraction * static_cast<double>(rows)));
  const auto test = rows - train;
  if (train < 2 || test < 2) throw InsufficientData("benchmark split leaves too few rows");

  const auto model = train_readout(states.topRows(train), targets.head(train), cfg.ridge_lambda);
  const Eigen::VectorXd pred = model.predict(states.bottomRows(test)).col(0);
  const Eigen::VectorXd truth = targets.tail(test);
  const Eigen::VectorXd baseline = Eigen::VectorXd::Constant(test, targets.head(train).mean());

  BenchmarkReport rep;
  rep.task = task;
  rep.seed = seed;
  rep.train_size = static_cast<std::size_t>(train);
  rep.test_size = static_cast<std::size_t>(test);
  rep.nmse = evaluate_nmse(std::span(pred.data(), pred.size()), std::span(truth.data(), truth.size()));
  rep.baseline_nmse =
      evaluate_nmse(std::span(baseline.data(), baseline.size()), std::span(truth.data(), truth.size()));
  rep.metrics["ratio_to_baseline"] = rep.nmse / rep.baseline_nmse;
  rep.metrics["ridge_lambda"] = cfg.ridge_lambda;
  rep.metrics["reservoir_n"] = cfg.reservoir.n;
  return rep;
}

}  // namespace

BenchmarkReport run_narma10_benchmark(std::uint64_t seed, BenchmarkConfig cfg) {
  const std::size_t length = cfg.washout + cfg.samples + 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 0.5);
  std::vector<double> u(length);
  std::vector<double> y;
  int redraws = 0;
  while (true) {
    for (auto& v : u) v = dist(rng);
    try {
      y = narma10_generate(u);
      break;
    } catch (const NarmaDivergence&) {
      if (++redraws > 100) throw;
    }
  }

  cfg.reservoir.input_dim = 1;
  cfg.reservoir.seed = seed;
  const auto r = make_reservoir(cfg.reservoir);
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(length - 1), 1);
  Eigen::VectorXd targets(static_cast<Eigen::Index>(cfg.samples));
  for (std::size_t t = 0; t + 1 < length; ++t) inputs(static_cast<Eigen::Index>(t), 0) = u[t];
  for (std::size_t t = 0; t < cfg.samples; ++t) {
    targets(static_cast<Eigen::Index>(t)) = y[cfg.washout + t + 1];
  }
  const auto states = harvest_states(r, inputs, cfg.washout, Eigen::VectorXd::Zero(r.size()), seed);
  auto rep = fit_and_score("narma10", states, targets, cfg, seed);
  rep.metrics["input_redraws"] = redraws;
  rep.metrics["spectral_radius"] = r.spectral_radius;
  return rep;
}

BenchmarkReport run_mackey_glass_benchmark(std::uint64_t seed, BenchmarkConfig cfg) {
  MackeyGlassConfig mg;
  mg.n_samples = cfg.washout + cfg.samples + 1;
  const auto series = mackey_glass_generate(mg);

  cfg.reservoir.input_dim = 1;
  cfg.reservoir.seed = seed;
  const auto r = make_reservoir(cfg.reservoir);
  const std::size_t length = series.size();
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(length - 1), 1);
  Eigen::VectorXd targets(static_cast<Eigen::Index>(cfg.samples));
  for (std::size_t t = 0; t + 1 < length; ++t) inputs(static_cast<Eigen::Index>(t), 0) = series[t] - 1.0;
  for (std::size_t t = 0; t < cfg.samples; ++t) {
    targets(static_cast<Eigen::Index>(t)) = series[cfg.washout + t + 1];
  }
  const auto states = harvest_states(r, inputs, cfg.washout, Eigen::VectorXd::Zero(r.size()), seed);
  auto rep = fit_and_score("mackey-glass", states, targets, cfg, seed);
  rep.metrics["tau"] = mg.tau;
  rep.metrics["spectral_radius"] = r.spectral_radius;
  return rep;
}

BenchmarkReport run_esp_benchmark(std::uint64_t seed, double spectral_radius, std::size_t seeds,
                                  std::size_t steps) {
  BenchmarkReport rep;
  rep.task = "esp";
  rep.seed = seed;
  std::size_t held = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < seeds; ++k) {
    ReservoirConfig rc;
    rc.spectral_radius = spectral_radius;
    rc.seed = seed + k;
    const auto r = make_reservoir(rc);
    std::mt19937_64 rng(seed * 7919 + k);
    std::uniform_real_distribution<double> in(0.0, 0.5);
    std::uniform_real_distribution<double> init(-1.0, 1.0);
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(steps), 1);
    for (Eigen::Index t = 0; t < inputs.rows(); ++t) inputs(t, 0) = in(rng);
    Eigen::VectorXd xa(r.size());
    Eigen::VectorXd xb(r.size());
    for (int i = 0; i < r.size(); ++i) {
      xa(i) = init(rng);
      xb(i) = init(rng);
    }
    const auto res = esp_test(r, inputs, xa, xb, seed + k);
    held += res.holds ? 1 : 0;
    worst = std::max(worst, res.divergence.back());
  }
  rep.metrics["spectral_radius"] = spectral_radius;
  rep.metrics["seeds"] = static_cast<double>(seeds);
  rep.metrics["steps"] = static_cast<double>(steps);
  rep.metrics["esp_held"] = static_cast<double>(held);
  rep.metrics["max_final_divergence"] = worst;
  return rep;
}

BenchmarkReport run_separation_benchmark(std::uint64_t seed, std::size_t seeds, std::size_t steps) {
  BenchmarkReport rep;
  rep.task = "separation";
  rep.seed = seed;
  std::size_t separated = 0;
  double min_distance = std::numeric_limits<double>::infinity();
  double threshold = 0.0;
  for (std::size_t k = 0; k < seeds; ++k) {
    ReservoirConfig rc;
    rc.seed = seed + k;
    const auto r = make_reservoir(rc);
    std::mt19937_64 rng(seed * 104729 + k);
    std::uniform_real_distribution<double> in(-0.5, 0.5);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(steps), 1);
    Eigen::MatrixXd b(static_cast<Eigen::Index>(steps), 1);
    for (Eigen::Index t = 0; t < a.rows(); ++t) {
      a(t, 0) = in(rng);
      b(t, 0) = in(rng);
    }
    const auto res = separation_test(r, a, b, Eigen::VectorXd::Zero(r.size()), seed + k);
    separated += res.distinguishable ? 1 : 0;
    min_distance = std::min(min_distance, res.distance);
    threshold = res.threshold;
  }
  rep.metrics["seeds"] = static_cast<double>(seeds);
  rep.metrics["separated"] = static_cast<double>(separated);
  rep.metrics["min_distance"] = min_distance;
  rep.metrics["threshold"] = threshold;
  return rep;
}

}  // namespace chimera
