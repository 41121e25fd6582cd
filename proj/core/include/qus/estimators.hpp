#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "qus/speckle_models.hpp"

namespace qus {

enum class Diagnostic { ok, clamped_low, clamped_high, degenerate_input };

const char* to_string(Diagnostic d) noexcept;

struct EstimateResult {
  double value = 0.0;
  bool valid = false;
  std::size_t sample_count = 0;
  Diagnostic diagnostic = Diagnostic::degenerate_input;
};

/// Exact running sums of intensity log-moments.
///
/// Each term is rounded once to a fixed-point grid of 2^-56 and accumulated
/// in 128-bit integers, so sums are associative: the moments of a sample
/// multiset do not depend on insertion order, and box sums taken from a
/// summed-area table equal the direct window sums bit for bit.
/// Per-term magnitudes are limited to 2^44 (amplitudes up to ~7e5).
/// Zero amplitudes are counted separately and excluded from every sum.
class LogMoments {
 public:
  using Fixed = __int128;

  LogMoments() = default;

  void add(double amplitude);
  void add_intensity(double intensity);
  template <class T>
  void add_all(std::span<const T> amplitudes) {
    for (T a : amplitudes) add(static_cast<double>(a));
  }

  LogMoments& operator+=(const LogMoments& other) noexcept;
  LogMoments& operator-=(const LogMoments& other) noexcept;
  friend LogMoments operator+(LogMoments a, const LogMoments& b) noexcept { return a += b; }
  friend LogMoments operator-(LogMoments a, const LogMoments& b) noexcept { return a -= b; }
  friend bool operator==(const LogMoments&, const LogMoments&) = default;

  /// Samples seen, including zeros.
  std::int64_t total() const noexcept { return nonzero_ + zeros_; }
  std::int64_t nonzero() const noexcept { return nonzero_; }
  std::int64_t zeros() const noexcept { return zeros_; }

  /// Means over the non-zero samples.
  double mean_intensity() const noexcept;
  double mean_log_intensity() const noexcept;
  double mean_intensity_log_intensity() const noexcept;
  /// Mean intensity over all samples, zeros included.
  double mean_intensity_all() const noexcept;

  static constexpr int kFractionBits = 56;
  static constexpr double kMaxTerm = 0x1.0p44;

 private:
  std::int64_t nonzero_ = 0;
  std::int64_t zeros_ = 0;
  Fixed sum_i_ = 0;
  Fixed sum_log_i_ = 0;
  Fixed sum_i_log_i_ = 0;
};

/// mean(I log I) / mean(I) - mean(log I). Requires >= 16 strictly positive,
/// finite intensities (ParameterDomainError otherwise).
double x_statistic(std::span<const double> intensities);

/// mean(log I) - log(mean(I)); always <= 0. Same preconditions as x_statistic.
double u_statistic(std::span<const double> intensities);

struct AlphaClamp {
  double min = 0.05;
  double max = 100.0;
};

/// Minimum sample count accepted by the sequence estimators.
inline constexpr std::size_t kMinEstimatorSamples = 16;

/// Fraction of dropped zero samples above which input is flagged degenerate.
inline constexpr double kMaxZeroFraction = 0.01;

/// alpha from the eps = 0 log-moment inversion alpha = 1 / (X - 1), with X
/// computed on intensities I = a^2 and clamped to [clamp.min, clamp.max].
/// Clamped results are flagged invalid.
EstimateResult estimate_alpha(std::span<const double> amplitudes, AlphaClamp clamp = {});
EstimateResult estimate_alpha(const LogMoments& moments, AlphaClamp clamp = {});

/// Nakagami maximum-likelihood fit.
struct NakagamiEstimate {
  double m = 0.0;
  double omega = 0.0;
  /// Diagnostics refer to m; result.value == m.
  EstimateResult result;
  /// Residual of log m - digamma(m) - delta at the returned m.
  double residual = 0.0;

  /// Throws ParameterDomainError when the fit is unusable (omega == 0).
  NakagamiParams params() const { return NakagamiParams(m, omega); }
};

/// Omega = mean(a^2); m solves log m - digamma(m) = log Omega - mean(log a^2)
/// by safeguarded Newton iteration on [1e-3, 1e3].
NakagamiEstimate nakagami_mle(std::span<const double> amplitudes);
NakagamiEstimate nakagami_mle(const LogMoments& moments);

}  // namespace qus
