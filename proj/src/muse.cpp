#include "chimera/muse.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>

#include "chimera/errors.hpp"

namespace chimera {
namespace {

double pairwise_block(const double* a, std::size_t n) {
  constexpr std::size_t kBlock = 128;
  if (n < 8) {
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += a[i];
    return res;
  }
  if (n <= kBlock) {
    double r[8];
    for (std::size_t j = 0; j < 8; ++j) r[j] = a[j];
    std::size_t i = 8;
    for (; i < n - (n % 8); i += 8) {
      for (std::size_t j = 0; j < 8; ++j) r[j] += a[i + j];
    }
    double res = ((r[0] + r[1]) + (r[2] + r[3])) + ((r[4] + r[5]) + (r[6] + r[7]));
    for (; i < n; ++i) res += a[i];
    return res;
  }
  std::size_t n2 = n / 2;
  n2 -= n2 % 8;
  return pairwise_block(a, n2) + pairwise_block(a + n2, n - n2);
}

std::vector<double> successive_differences(std::span<const double> times) {
  std::vector<double> d(times.size() - 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) d[i] = times[i + 1] - times[i];
  return d;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_block(values.data(), values.size());
}

Histogram uniform_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  double first = 0.0;
  double last = 1.0;
  if (!values.empty()) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    first = *lo;
    last = *hi;
  }
  if (first == last) {
    first -= 0.5;
    last += 0.5;
  }

  Histogram h;
  h.edges.resize(bins + 1);
  const double step = (last - first) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = static_cast<double>(i) * step + first;
  h.edges[bins] = last;
  h.counts.assign(bins, 0);

  const double norm_denom = last - first;
  for (double x : values) {
    if (x < first || x > last) continue;
    auto idx = static_cast<std::ptrdiff_t>((x - first) / norm_denom * static_cast<double>(bins));
    if (idx == static_cast<std::ptrdiff_t>(bins)) --idx;
    if (x < h.edges[static_cast<std::size_t>(idx)]) --idx;
    if (x >= h.edges[static_cast<std::size_t>(idx) + 1] &&
        idx != static_cast<std::ptrdiff_t>(bins) - 1) {
      ++idx;
    }
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  return h;
}

std::vector<double> Histogram::density() const {
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> d(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double width = edges[i + 1] - edges[i];
    d[i] = static_cast<double>(counts[i]) / width / static_cast<double>(total);
  }
  return d;
}

double paper_entropy(std::span<const double> deltas) {
  const auto density = uniform_histogram(deltas, kEntropyBins).density();
  std::vector<double> terms(density.size());
  for (std::size_t i = 0; i < density.size(); ++i) {
    terms[i] = density[i] * std::log(density[i] + 1e-10);
  }
  return -pairwise_sum(terms);
}

double shannon_entropy_corrected(std::span<const double> deltas) {
  const auto hist = uniform_histogram(deltas, kEntropyBins);
  std::int64_t total = 0;
  for (auto c : hist.counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : hist.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

TimingStats interarrival_stats(std::span<const double> times, std::size_t window) {
  if (window < kMinTimestamps) {
    throw InvalidArgument("stats window must cover at least 11 timestamps");
  }
  if (times.size() < kMinTimestamps) {
    throw InsufficientData("need at least 11 timestamps, got " + std::to_string(times.size()));
  }
  const auto used = times.last(std::min(window, times.size()));
  for (std::size_t i = 1; i < used.size(); ++i) {
    if (!(used[i] > used[i - 1])) throw InvalidArgument("timestamps must be strictly ascending");
  }

  const auto deltas = successive_differences(used);
  const double n = static_cast<double>(deltas.size());
  TimingStats s;
  s.n = used.size();
  s.mean_s = pairwise_sum(deltas) / n;
  std::vector<double> sq(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double x = deltas[i] - s.mean_s;
    sq[i] = x * x;
  }
  s.std_s = std::sqrt(pairwise_sum(sq) / n);
  s.cv = s.std_s / s.mean_s;
  s.paper_entropy = paper_entropy(deltas);
  s.shannon_entropy_corrected = shannon_entropy_corrected(deltas);
  return s;
}

double hamming_fraction(const Hash256& a, const Hash256& b) {
  int bits = 0;
  for (std::size_t i = 0; i < a.bytes.size(); ++i) {
    bits += std::popcount(static_cast<unsigned>(a.bytes[i] ^ b.bytes[i]));
  }
  return static_cast<double>(bits) / 256.0;
}

double mean_consecutive_hamming(std::span<const ShareEvent> events) {
  if (events.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    total += hamming_fraction(events[i - 1].hash, events[i].hash);
  }
  return total / static_cast<double>(events.size() - 1);
}

double compute_ksync(const KsyncInput& in) {
  if (!(in.sigma_j >= 0.0)) throw InvalidArgument("jitter must be >= 0");
  if (!(in.f_clk > 0.0)) throw InvalidArgument("clock frequency must be > 0");
  double coherence = 0.0;
  for (double phase : in.phases) coherence += std::cos(phase);
  return std::exp(-in.sigma_j * in.sigma_j * in.f_clk / (2.0 * std::numbers::pi)) * coherence;
}

double compute_ksync_normalized(const KsyncInput& in) {
  if (in.phases.empty()) throw InvalidArgument("K_sync needs at least one core phase");
  return compute_ksync(in) / static_cast<double>(in.phases.size());
}

RateSeries rate_series(std::span<const ShareEvent> events, double bin_s) {
  if (!(bin_s > 0.0)) throw InvalidArgument("bin width must be > 0");
  RateSeries out;
  out.bin_s = bin_s;
  if (events.empty()) return out;
  out.t0 = events.front().t;
  const double span = events.back().t - out.t0;
  const auto bins = static_cast<std::size_t>(std::floor(span / bin_s)) + 1;
  out.counts.assign(bins, 0.0);
  for (const auto& ev : events) {
    auto idx = static_cast<std::size_t>(std::max(0.0, std::floor((ev.t - out.t0) / bin_s)));
    out.counts[std::min(idx, bins - 1)] += 1.0;
  }
  return out;
}

RateSeries rate_series(std::span<const ShareEvent> events, double bin_s, double t_start,
                       double t_end) {
  if (!(bin_s > 0.0)) throw InvalidArgument("bin width must be > 0");
  RateSeries out;
  out.bin_s = bin_s;
  out.t0 = t_start;
  if (!(t_end > t_start)) return out;
  const auto bins = static_cast<std::size_t>(std::ceil((t_end - t_start) / bin_s));
  out.counts.assign(bins, 0.0);
  for (const auto& ev : events) {
    if (ev.t < t_start || ev.t >= t_end) continue;
    const auto idx = static_cast<std::size_t>(std::floor((ev.t - t_start) / bin_s));
    out.counts[std::min(idx, bins - 1)] += 1.0;
  }
  return out;
}

std::vector<std::string> FeatureVector::names(const FeatureConfig& cfg) {
  std::vector<std::string> n = {"cv", "paper_entropy", "hamming_mean"};
  for (const auto& b : cfg.bands) n.push_back(fmt::format("band_{}_{}hz", b.lo_hz, b.hi_hz));
  n.emplace_back("pac_index");
  return n;
}

double pac_index(std::span<const double> series, double fs, FeatureBand phase_band,
                 FeatureBand amplitude_band) {
  if (series.size() < 4) return 0.0;
  const auto phase_sig = band_analytic_signal(series, fs, phase_band.lo_hz, phase_band.hi_hz);
  const auto amp_sig =
      band_analytic_signal(series, fs, amplitude_band.lo_hz, amplitude_band.hi_hz);
  std::complex<double> resultant{0.0, 0.0};
  double weight = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double amp = std::abs(amp_sig[i]);
    if (std::abs(phase_sig[i]) == 0.0) continue;
    resultant += amp * std::polar(1.0, std::arg(phase_sig[i]));
    weight += amp;
  }
  if (!(weight > 1e-300)) return 0.0;
  return std::abs(resultant) / weight;
}

FeatureVector encode_features(const TimingStats& stats, const SpectralEstimate& spectrum,
                              double hamming_mean, std::span<const double> rate_window,
                              const FeatureConfig& cfg) {
  FeatureVector fv;
  fv.values.reserve(cfg.bands.size() + 4);
  fv.values.push_back(stats.cv);
  fv.values.push_back(stats.paper_entropy);
  fv.values.push_back(hamming_mean);
  for (const auto& band : cfg.bands) fv.values.push_back(band_power(spectrum, band.lo_hz, band.hi_hz));
  fv.values.push_back(spectrum.fs > 0.0 ? pac_index(rate_window, spectrum.fs, cfg.pac_phase_band,
                                                    cfg.pac_amplitude_band)
                                        : 0.0);
  for (double& v : fv.values) {
    if (!std::isfinite(v)) v = 0.0;
  }
  return fv;
}

}  // namespace chimera
