#pragma once

// Timing, diffusion and coherence metrics over share streams.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chimera/sha256.hpp"
#include "chimera/spectral.hpp"
#include "chimera/substrate.hpp"

namespace chimera {

inline constexpr std::size_t kMinTimestamps = 11;
inline constexpr std::size_t kDefaultStatsWindow = 64;
inline constexpr std::size_t kEntropyBins = 20;
inline constexpr std::size_t kDefaultCoreCount = 138;
inline constexpr double kDefaultRateBinSeconds = 0.05;

struct TimingStats {
  std::size_t n = 0;  // timestamps used
  double mean_s = 0.0;
  double std_s = 0.0;
  double cv = 0.0;
  // -sum h ln(h + 1e-10) over 20 density-normalized bins; comparable with
  // published values but not a true Shannon entropy.
  double paper_entropy = 0.0;
  // -sum p ln p over bin probabilities.
  double shannon_entropy_corrected = 0.0;
};

/// Statistics over the last `window` timestamps (or all of them when fewer).
/// Throws InsufficientData below 11 timestamps and InvalidArgument when the
/// timestamps are not strictly ascending or window < 11.
TimingStats interarrival_stats(std::span<const double> times,
                               std::size_t window = kDefaultStatsWindow);

/// Equal-width histogram with numpy.histogram semantics (range = [min, max],
/// right edge closed, degenerate range widened by 0.5 on each side).
struct Histogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;

  /// count / bin width / total, in that operation order.
  std::vector<double> density() const;
};
Histogram uniform_histogram(std::span<const double> values, std::size_t bins);

/// Pairwise summation with the same blocking as numpy's float64 add.reduce.
double pairwise_sum(std::span<const double> values);

double paper_entropy(std::span<const double> deltas);
double shannon_entropy_corrected(std::span<const double> deltas);

/// popcount(a ^ b) / 256.
double hamming_fraction(const Hash256& a, const Hash256& b);
/// Mean Hamming fraction between consecutive share hashes; 0 for fewer than two events.
double mean_consecutive_hamming(std::span<const ShareEvent> events);

struct KsyncInput {
  double sigma_j = 0.0;  // s
  double f_clk = 4e8;    // Hz
  std::vector<double> phases = std::vector<double>(kDefaultCoreCount, 0.0);
};

/// exp(-sigma_j^2 f_clk / (2 pi)) * sum_k cos(phase_k), unnormalized.
double compute_ksync(const KsyncInput& in);
/// compute_ksync divided by the core count.
double compute_ksync_normalized(const KsyncInput& in);

struct RateSeries {
  double t0 = 0.0;
  double bin_s = kDefaultRateBinSeconds;
  std::vector<double> counts;

  double fs() const { return 1.0 / bin_s; }
};

/// Counts per bin from the first event to the last; sum(counts) == events.size().
RateSeries rate_series(std::span<const ShareEvent> events, double bin_s = kDefaultRateBinSeconds);
/// Counts per bin over [t_start, t_end); events outside the interval are ignored.
RateSeries rate_series(std::span<const ShareEvent> events, double bin_s, double t_start,
                       double t_end);

struct FeatureBand {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

struct FeatureConfig {
  std::vector<FeatureBand> bands = {{0.1, 0.5}, {0.5, 1.5}, {1.5, 3.5}, {3.5, 5.0}, {5.0, 10.0}};
  FeatureBand pac_phase_band{0.5, 5.0};
  FeatureBand pac_amplitude_band{5.0, 10.0};
};

struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  /// Slot names in encoding order for a given configuration.
  static std::vector<std::string> names(const FeatureConfig& cfg);
};

/// Mean resultant length |sum A e^{i phi}| / sum A, where phi is the phase of
/// the phase band and A the envelope of the amplitude band. 0 when the
/// envelope vanishes.
double pac_index(std::span<const double> series, double fs, FeatureBand phase_band,
                 FeatureBand amplitude_band);

/// [cv, paper_entropy, hamming_mean, band powers..., PAC index].
FeatureVector encode_features(const TimingStats& stats, const SpectralEstimate& spectrum,
                              double hamming_mean, std::span<const double> rate_window,
                              const FeatureConfig& cfg = {});

}  // namespace chimera
