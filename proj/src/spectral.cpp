#include "chimera/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>

#include "chimera/errors.hpp"

namespace chimera {
namespace {

// FFTW planner calls are not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealForwardPlan {
 public:
  explicit RealForwardPlan(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealForwardPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealForwardPlan(const RealForwardPlan&) = delete;
  RealForwardPlan& operator=(const RealForwardPlan&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  std::complex<double> bin(std::size_t k) const { return {out_[k][0], out_[k][1]}; }
  std::size_t bins() const { return n_ / 2 + 1; }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double to_db(double ratio) {
  if (ratio <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ratio);
}

}  // namespace

SpectralEstimate psd_estimate(std::span<const double> series, double fs, const WelchConfig& cfg) {
  if (!(fs > 0.0)) throw InvalidArgument("sampling rate must be > 0");
  const std::size_t seg = cfg.segment_length;
  if (seg < 4) throw InvalidArgument("segment length must be >= 4");
  if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0)) throw InvalidArgument("overlap must be in [0, 1)");
  if (series.size() < 2 * seg) {
    throw InsufficientData("series of " + std::to_string(series.size()) +
                           " samples is shorter than twice the segment length " +
                           std::to_string(seg));
  }

  const auto overlap_samples = static_cast<std::size_t>(std::floor(cfg.overlap * seg));
  const std::size_t step = seg - overlap_samples;
  const std::size_t segments = (series.size() - seg) / step + 1;

  std::vector<double> window(seg);
  double window_power = 0.0;
  for (std::size_t i = 0; i < seg; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(seg)));
    window_power += window[i] * window[i];
  }

  RealForwardPlan plan(seg);
  std::vector<double> accum(plan.bins(), 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    const auto chunk = series.subspan(s * step, seg);
    const double mean = std::accumulate(chunk.begin(), chunk.end(), 0.0) / static_cast<double>(seg);
    double* in = plan.input();
    for (std::size_t i = 0; i < seg; ++i) in[i] = (chunk[i] - mean) * window[i];
    plan.execute();
    for (std::size_t k = 0; k < accum.size(); ++k) accum[k] += std::norm(plan.bin(k));
  }

  SpectralEstimate out;
  out.fs = fs;
  out.segment_length = seg;
  out.overlap_samples = overlap_samples;
  out.segments = segments;
  out.freqs.resize(accum.size());
  out.psd.resize(accum.size());
  const double scale = 1.0 / (fs * window_power * static_cast<double>(segments));
  for (std::size_t k = 0; k < accum.size(); ++k) {
    out.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(seg);
    const bool unpaired = (k == 0) || (seg % 2 == 0 && k == seg / 2);
    out.psd[k] = accum[k] * scale * (unpaired ? 1.0 : 2.0);
  }

  if (out.psd.size() > 1) {
    const auto first = out.psd.begin() + 1;
    const auto top = std::max_element(first, out.psd.end());
    const double ref = median(std::vector<double>(first, out.psd.end()));
    if (*top > 0.0) {
      out.peak = SpectralPeak{out.freqs[static_cast<std::size_t>(top - out.psd.begin())],
                              ref > 0.0 ? to_db(*top / ref)
                                        : std::numeric_limits<double>::infinity()};
    }
  }
  return out;
}

double band_power(const SpectralEstimate& spectrum, double lo_hz, double hi_hz) {
  if (spectrum.freqs.size() < 2) return 0.0;
  const double df = spectrum.freqs[1] - spectrum.freqs[0];
  const double nyquist = spectrum.freqs.back();
  double total = 0.0;
  for (std::size_t k = 0; k < spectrum.freqs.size(); ++k) {
    const double f = spectrum.freqs[k];
    const bool inside = (f >= lo_hz && f < hi_hz) || (f == nyquist && hi_hz >= nyquist && f >= lo_hz);
    if (inside) total += spectrum.psd[k] * df;
  }
  return total;
}

std::optional<HeartbeatDetection> detect_heartbeat(const SpectralEstimate& spectrum,
                                                   double band_lo_hz, double band_hi_hz,
                                                   double min_prominence_db) {
  if (spectrum.freqs.size() < 2) throw InvalidArgument("spectrum has no non-DC bins");
  if (!(band_lo_hz >= 0.0 && band_lo_hz < band_hi_hz && band_hi_hz <= spectrum.freqs.back())) {
    throw InvalidArgument("heartbeat band lies outside the spectrum range");
  }

  std::optional<std::size_t> best;
  std::vector<double> reference;
  for (std::size_t k = 1; k < spectrum.freqs.size(); ++k) {
    const double f = spectrum.freqs[k];
    if (f >= band_lo_hz && f <= band_hi_hz) {
      if (!best || spectrum.psd[k] > spectrum.psd[*best]) best = k;
    } else {
      reference.push_back(spectrum.psd[k]);
    }
  }
  if (!best) return std::nullopt;
  if (reference.empty()) {
    reference.assign(spectrum.psd.begin() + 1, spectrum.psd.end());
  }

  HeartbeatDetection det;
  det.freq_hz = spectrum.freqs[*best];
  det.peak_density = spectrum.psd[*best];
  det.reference_density = median(std::move(reference));
  if (det.peak_density <= 0.0) return std::nullopt;
  det.prominence_db = det.reference_density > 0.0
                          ? to_db(det.peak_density / det.reference_density)
                          : std::numeric_limits<double>::infinity();
  if (det.prominence_db < min_prominence_db) return std::nullopt;
  return det;
}

std::vector<std::complex<double>> real_dft(std::span<const double> series) {
  if (series.empty()) return {};
  RealForwardPlan plan(series.size());
  std::copy(series.begin(), series.end(), plan.input());
  plan.execute();
  std::vector<std::complex<double>> out(plan.bins());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = plan.bin(k);
  return out;
}

std::vector<std::complex<double>> band_analytic_signal(std::span<const double> series, double fs,
                                                       double lo_hz, double hi_hz) {
  const std::size_t n = series.size();
  if (n == 0) return {};
  const auto half = real_dft(series);

  fftw_complex* buf = fftw_alloc_complex(n);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (std::size_t k = 0; k < n; ++k) {
    buf[k][0] = 0.0;
    buf[k][1] = 0.0;
  }
  for (std::size_t k = 0; k < half.size(); ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f < lo_hz || f > hi_hz) continue;
    const bool unpaired = (k == 0) || (n % 2 == 0 && k == n / 2);
    const std::complex<double> v = half[k] * (unpaired ? 1.0 : 2.0);
    buf[k][0] = v.real();
    buf[k][1] = v.imag();
  }
  fftw_execute(plan);

  std::vector<std::complex<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = {buf[i][0] / static_cast<double>(n), buf[i][1] / static_cast<double>(n)};
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return out;
}

}  // namespace chimera
