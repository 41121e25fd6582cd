#include "qus/estimators.hpp"

#include <cmath>
#include <string>

#include "qus/errors.hpp"

namespace qus {

const char* to_string(Diagnostic d) noexcept {
  switch (d) {
    case Diagnostic::ok: return "ok";
    case Diagnostic::clamped_low: return "clamped_low";
    case Diagnostic::clamped_high: return "clamped_high";
    case Diagnostic::degenerate_input: return "degenerate_input";
  }
  return "unknown";
}

namespace {

constexpr std::int64_t kMaxNonzeroTerms = std::int64_t{1} << 26;

LogMoments::Fixed to_fixed(double v) {
  if (!(std::abs(v) < LogMoments::kMaxTerm)) {
    throw ParameterDomainError("intensity log-moment term out of range: " + std::to_string(v));
  }
  return static_cast<LogMoments::Fixed>(std::nearbyint(std::ldexp(v, LogMoments::kFractionBits)));
}

double from_fixed(LogMoments::Fixed v) {
  return std::ldexp(static_cast<double>(v), -LogMoments::kFractionBits);
}

}  // namespace

void LogMoments::add(double amplitude) {
  if (!std::isfinite(amplitude) || amplitude < 0.0) {
    throw ParameterDomainError("amplitudes must be finite and >= 0");
  }
  add_intensity(amplitude * amplitude);
}

void LogMoments::add_intensity(double intensity) {
  if (!std::isfinite(intensity) || intensity < 0.0) {
    throw ParameterDomainError("intensities must be finite and >= 0");
  }
  if (intensity == 0.0) {
    ++zeros_;
    return;
  }
  if (nonzero_ >= kMaxNonzeroTerms) {
    throw ParameterDomainError("too many samples for one log-moment accumulator");
  }
  const double log_i = std::log(intensity);
  sum_i_ += to_fixed(intensity);
  sum_log_i_ += to_fixed(log_i);
  sum_i_log_i_ += to_fixed(intensity * log_i);
  ++nonzero_;
}

LogMoments& LogMoments::operator+=(const LogMoments& other) noexcept {
  nonzero_ += other.nonzero_;
  zeros_ += other.zeros_;
  sum_i_ += other.sum_i_;
  sum_log_i_ += other.sum_log_i_;
  sum_i_log_i_ += other.sum_i_log_i_;
  return *this;
}

LogMoments& LogMoments::operator-=(const LogMoments& other) noexcept {
  nonzero_ -= other.nonzero_;
  zeros_ -= other.zeros_;
  sum_i_ -= other.sum_i_;
  sum_log_i_ -= other.sum_log_i_;
  sum_i_log_i_ -= other.sum_i_log_i_;
  return *this;
}

double LogMoments::mean_intensity() const noexcept {
  return from_fixed(sum_i_) / static_cast<double>(nonzero_);
}
double LogMoments::mean_log_intensity() const noexcept {
  return from_fixed(sum_log_i_) / static_cast<double>(nonzero_);
}
double LogMoments::mean_intensity_log_intensity() const noexcept {
  return from_fixed(sum_i_log_i_) / static_cast<double>(nonzero_);
}
double LogMoments::mean_intensity_all() const noexcept {
  return from_fixed(sum_i_) / static_cast<double>(total());
}

namespace {

LogMoments intensity_moments(std::span<const double> intensities) {
  if (intensities.size() < kMinEstimatorSamples) {
    throw ParameterDomainError("log-moment statistics need at least 16 intensities");
  }
  LogMoments moments;
  for (double i : intensities) {
    if (!std::isfinite(i) || !(i > 0.0)) {
      throw ParameterDomainError("log-moment statistics need strictly positive finite intensities");
    }
    moments.add_intensity(i);
  }
  return moments;
}

double x_from(const LogMoments& m) {
  return m.mean_intensity_log_intensity() / m.mean_intensity() - m.mean_log_intensity();
}

std::span<const double> checked_amplitudes(std::span<const double> amplitudes) {
  if (amplitudes.size() < kMinEstimatorSamples) {
    throw ParameterDomainError("estimators need at least 16 samples");
  }
  return amplitudes;
}

bool too_many_zeros(const LogMoments& m) {
  return m.nonzero() < 2 ||
         static_cast<double>(m.zeros()) > kMaxZeroFraction * static_cast<double>(m.total());
}

}  // namespace

double x_statistic(std::span<const double> intensities) {
  return x_from(intensity_moments(intensities));
}

double u_statistic(std::span<const double> intensities) {
  const LogMoments m = intensity_moments(intensities);
  return m.mean_log_intensity() - std::log(m.mean_intensity());
}

EstimateResult estimate_alpha(std::span<const double> amplitudes, AlphaClamp clamp) {
  LogMoments moments;
  moments.add_all(checked_amplitudes(amplitudes));
  return estimate_alpha(moments, clamp);
}

EstimateResult estimate_alpha(const LogMoments& moments, AlphaClamp clamp) {
  if (!(clamp.min > 0.0 && clamp.min < clamp.max)) {
    throw ConfigurationError("alpha clamp must satisfy 0 < min < max");
  }
  EstimateResult r;
  r.sample_count = static_cast<std::size_t>(moments.total());
  if (too_many_zeros(moments)) {
    r.value = clamp.max;
    return r;
  }
  const double x = x_from(moments);
  if (std::abs(x) < 1e-12) {
    r.value = clamp.max;
    return r;
  }
  if (x <= 1.0 + 1e-6) {
    r.value = clamp.max;
    r.diagnostic = Diagnostic::clamped_high;
    return r;
  }
  const double alpha = 1.0 / (x - 1.0);
  if (alpha > clamp.max) {
    r.value = clamp.max;
    r.diagnostic = Diagnostic::clamped_high;
  } else if (alpha < clamp.min) {
    r.value = clamp.min;
    r.diagnostic = Diagnostic::clamped_low;
  } else {
    r.value = alpha;
    r.valid = true;
    r.diagnostic = Diagnostic::ok;
  }
  return r;
}

NakagamiEstimate nakagami_mle(std::span<const double> amplitudes) {
  LogMoments moments;
  moments.add_all(checked_amplitudes(amplitudes));
  return nakagami_mle(moments);
}

NakagamiEstimate nakagami_mle(const LogMoments& moments) {
  NakagamiEstimate fit;
  fit.result.sample_count = static_cast<std::size_t>(moments.total());
  fit.omega = moments.total() > 0 ? moments.mean_intensity_all() : 0.0;
  fit.m = kMaxShapeBracket;
  fit.result.value = fit.m;
  if (too_many_zeros(moments)) return fit;

  const double delta = std::log(fit.omega) - moments.mean_log_intensity();
  if (!(delta > 1e-12)) return fit;

  const LogDigammaRoot root = solve_log_minus_digamma(delta);
  fit.m = root.m;
  fit.residual = root.residual;
  fit.result.value = root.m;
  if (root.clamped_high) {
    fit.result.diagnostic = Diagnostic::clamped_high;
  } else if (root.clamped_low) {
    fit.result.diagnostic = Diagnostic::clamped_low;
  } else {
    fit.result.diagnostic = Diagnostic::ok;
    fit.result.valid = true;
  }
  return fit;
}

}  // namespace qus
