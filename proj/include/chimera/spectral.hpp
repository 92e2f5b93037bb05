#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chimera {

struct WelchConfig {
  std::size_t segment_length = 256;
  double overlap = 0.5;  // fraction of segment_length
};

struct SpectralPeak {
  double freq_hz = 0.0;
  double prominence_db = 0.0;  // over the median non-DC density
};

struct SpectralEstimate {
  std::vector<double> freqs;  // Hz, ascending, up to Nyquist
  std::vector<double> psd;    // one-sided density, units^2 / Hz
  double fs = 0.0;
  std::size_t segment_length = 0;
  std::size_t overlap_samples = 0;
  std::size_t segments = 0;
  std::string window = "hann";
  std::optional<SpectralPeak> peak;

  double resolution_hz() const { return fs / static_cast<double>(segment_length); }
};

/// Welch-averaged periodogram: periodic Hann window, mean-detrended segments,
/// one-sided density scaling 1 / (fs * sum w^2). Throws InsufficientData when
/// the series is shorter than twice the segment length.
SpectralEstimate psd_estimate(std::span<const double> series, double fs,
                              const WelchConfig& cfg = {});

/// Integral of the density over [lo, hi) with rectangle rule at the bin spacing.
double band_power(const SpectralEstimate& spectrum, double lo_hz, double hi_hz);

struct HeartbeatDetection {
  double freq_hz = 0.0;
  double prominence_db = 0.0;
  double peak_density = 0.0;
  double reference_density = 0.0;  // median out-of-band, non-DC density
};

inline constexpr double kDefaultHeartbeatLoHz = 0.5;
inline constexpr double kDefaultHeartbeatHiHz = 5.0;
inline constexpr double kDefaultHeartbeatProminenceDb = 10.0;

/// Highest in-band bin, kept only when it stands at least min_prominence_db
/// above the median out-of-band density. Throws InvalidArgument when the band
/// falls outside the spectrum.
std::optional<HeartbeatDetection> detect_heartbeat(
    const SpectralEstimate& spectrum, double band_lo_hz = kDefaultHeartbeatLoHz,
    double band_hi_hz = kDefaultHeartbeatHiHz,
    double min_prominence_db = kDefaultHeartbeatProminenceDb);

/// Real-to-complex DFT of the whole series (n/2 + 1 bins).
std::vector<std::complex<double>> real_dft(std::span<const double> series);

/// Analytic signal of the series restricted to [lo, hi] Hz via FFT masking.
std::vector<std::complex<double>> band_analytic_signal(std::span<const double> series, double fs,
                                                       double lo_hz, double hi_hz);

}  // namespace chimera
