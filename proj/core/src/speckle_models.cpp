#include "qus/speckle_models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "qus/errors.hpp"

namespace qus {

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

std::string describe_hk(double eps, double sigma, double alpha) {
  std::ostringstream os;
  os << "invalid HK parameters (epsilon=" << eps << ", sigma=" << sigma << ", alpha=" << alpha
     << "): require epsilon >= 0, sigma > 0, alpha > 0";
  return os.str();
}

}  // namespace

HKParams::HKParams(double epsilon, double sigma, double alpha)
    : epsilon_(epsilon), sigma_(sigma), alpha_(alpha) {
  if (!(std::isfinite(epsilon) && epsilon >= 0.0) || !finite_positive(sigma) ||
      !finite_positive(alpha)) {
    throw ParameterDomainError(describe_hk(epsilon, sigma, alpha));
  }
}

double HKParams::k() const noexcept { return epsilon_ / (sigma_ * std::numbers::sqrt2); }

double HKParams::destrempes_sigma() const noexcept { return sigma_ / std::sqrt(alpha_); }

NakagamiParams::NakagamiParams(double m, double omega) : m_(m), omega_(omega) {
  if (!finite_positive(m) || !finite_positive(omega)) {
    std::ostringstream os;
    os << "invalid Nakagami parameters (m=" << m << ", omega=" << omega << "): require m > 0, omega > 0";
    throw ParameterDomainError(os.str());
  }
}

EnvelopeField::EnvelopeField(Grid<float> amplitudes) : grid_(std::move(amplitudes)) {
  for (float v : grid_.values()) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw ParameterDomainError("envelope amplitudes must be finite and >= 0");
    }
  }
}

double draw_hk(const HKParams& params, Rng& rng) {
  const auto [x, y] = standard_normal_pair(rng);
  const double z = standard_gamma(rng, params.alpha());
  const double diffuse = params.sigma() * std::sqrt(z / params.alpha());
  const double in_phase = params.epsilon() + x * diffuse;
  const double quadrature = y * diffuse;
  return std::sqrt(in_phase * in_phase + quadrature * quadrature);
}

std::vector<double> sample_hk(const HKParams& params, std::size_t count, Rng& rng) {
  if (count == 0) throw ParameterDomainError("sample count must be >= 1");
  std::vector<double> out(count);
  for (auto& a : out) a = draw_hk(params, rng);
  return out;
}

std::vector<double> sample_nakagami(const NakagamiParams& params, std::size_t count, Rng& rng) {
  if (count == 0) throw ParameterDomainError("sample count must be >= 1");
  const double scale = params.omega() / params.m();
  std::vector<double> out(count);
  for (auto& a : out) a = std::sqrt(standard_gamma(rng, params.m()) * scale);
  return out;
}

double pdf_nakagami(const NakagamiParams& params, double x) {
  if (!(x >= 0.0)) return 0.0;
  const double m = params.m();
  const double omega = params.omega();
  if (x == 0.0) {
    if (m > 0.5) return 0.0;
    if (m < 0.5) return std::numeric_limits<double>::infinity();
    return 2.0 * std::sqrt(m / omega) / std::tgamma(m);
  }
  const double log_pdf = std::log(2.0) + m * std::log(m) - std::lgamma(m) - m * std::log(omega) +
                         (2.0 * m - 1.0) * std::log(x) - m * x * x / omega;
  return std::exp(log_pdf);
}

double cdf_nakagami(const NakagamiParams& params, double x) {
  if (!(x > 0.0)) return 0.0;
  return boost::math::gamma_p(params.m(), params.m() * x * x / params.omega());
}

// ---------------------------------------------------------------------------
// Homodyned-K density

namespace {

constexpr std::size_t kZeroTableSize = 4096;

const std::vector<double>& j0_zeros() {
  static const std::vector<double> zeros = [] {
    std::vector<double> z(kZeroTableSize);
    boost::math::cyl_bessel_j_zero(0.0, 1, static_cast<unsigned>(kZeroTableSize), z.begin());
    return z;
  }();
  return zeros;
}

/// k-th (1-based) positive zero of J0.
double j0_zero(std::size_t k) {
  const auto& zeros = j0_zeros();
  if (k <= zeros.size()) return zeros[k - 1];
  // McMahon expansion; beyond the table the error is far below 1e-12.
  const double beta = (static_cast<double>(k) - 0.25) * std::numbers::pi;
  const double inv = 1.0 / (8.0 * beta);
  return beta + inv - (124.0 / 3.0) * inv * inv * inv;
}

/// Wynn epsilon extrapolation of a partial-sum sequence. Returns the
/// deepest even-column entry built from the tail of the sequence.
double wynn_epsilon(std::span<const double> sums) {
  const std::size_t n = sums.size();
  if (n < 3) return sums.back();
  std::vector<double> prev(n + 1, 0.0);  // column j-1
  std::vector<double> cur(sums.begin(), sums.end());  // column j
  double best = sums.back();
  for (std::size_t col = 1; col < n; ++col) {
    const std::size_t len = n - col;
    std::vector<double> next(len);
    for (std::size_t i = 0; i < len; ++i) {
      const double diff = cur[i + 1] - cur[i];
      if (diff == 0.0 || !std::isfinite(diff)) return best;
      next[i] = prev[i + 1] + 1.0 / diff;
    }
    prev = std::move(cur);
    cur = std::move(next);
    if (col % 2 == 0) {
      if (!std::isfinite(cur.back())) return best;
      best = cur.back();
    }
  }
  return best;
}

/// Integral of u J0(u r) (1 + shape u^2)^(-alpha) over u in [0, inf), r > 0,
/// summed panel by panel between zeros of J0(u r) and accelerated with Wynn.
double hankel_envelope(double r, double shape, double alpha, const HkQuadrature& quad, double tolerance) {
  const double envelope_scale = 1.0 / std::sqrt(shape);
  const double truncation =
      envelope_scale * std::sqrt(std::expm1(-std::log(quad.envelope_cutoff) / alpha));
  auto integrand = [&](double u) {
    return u * boost::math::cyl_bessel_j(0, u * r) * std::exp(-alpha * std::log1p(shape * u * u));
  };
  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;

  std::vector<double> partial;
  partial.reserve(64);
  std::vector<double> estimates;
  double sum = 0.0;
  double lower = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int stable_checks = 0;

  for (std::size_t k = 1; k <= quad.max_panels; ++k) {
    const double upper = j0_zero(k) / r;
    const double panel = Rule::integrate(integrand, lower, upper, 15, quad.panel_tolerance);
    sum += panel;
    partial.push_back(sum);
    lower = upper;

    if (upper >= truncation && std::abs(panel) <= 0.1 * tolerance) return sum;
    // Extrapolate only once the envelope hump is behind us.
    if (partial.size() < 4 || upper < 2.0 * envelope_scale) continue;

    constexpr std::size_t kWindow = 21;
    const std::size_t take = std::min(partial.size(), kWindow);
    estimates.push_back(
        wynn_epsilon(std::span<const double>(partial).subspan(partial.size() - take, take)));
    const std::size_t n = estimates.size();
    if (n < 4) continue;
    // Spread of the last four extrapolations, as in QUADPACK's qelg.
    residual = 0.0;
    for (std::size_t back = 1; back <= 3; ++back) {
      residual = std::max(residual, std::abs(estimates[n - 1] - estimates[n - 1 - back]));
    }
    stable_checks = residual < tolerance ? stable_checks + 1 : 0;
    if (stable_checks >= 3) return estimates.back();
  }
  std::ostringstream os;
  os << "pdf_hk did not converge within " << quad.max_panels << " panels (r=" << r << ", alpha=" << alpha
     << "), residual " << residual;
  throw AccuracyError(os.str(), residual);
}

}  // namespace

double pdf_hk(const HKParams& params, double x, const HkQuadrature& quad) {
  if (!std::isfinite(x) || x < 0.0) {
    throw ParameterDomainError("pdf_hk requires a finite amplitude x >= 0");
  }
  if (x == 0.0) return 0.0;

  const double eps = params.epsilon();
  const double alpha = params.alpha();
  const double shape = params.sigma() * params.sigma() / (2.0 * alpha);
  const double tolerance = quad.absolute_tolerance / x;
  if (eps == 0.0) return x * hankel_envelope(x, shape, alpha, quad, tolerance);

  // Neumann's addition theorem turns J0(u eps) J0(u x) into the average over
  // theta in [0, pi] of J0(u r), r^2 = x^2 + eps^2 - 2 x eps cos(theta), so the
  // two-frequency integral becomes an average of one-frequency ones.
  // At x == eps the inner integral blows up like r^(2 alpha - 2) as r -> 0.
  if (x == eps && alpha <= 0.5) return std::numeric_limits<double>::infinity();
  auto inner = [&](double theta) {
    const double half = std::sin(0.5 * theta);
    const double r = std::sqrt((x - eps) * (x - eps) + 4.0 * x * eps * half * half);
    // theta rounding onto 0 at x == eps: a single point, finite only for alpha > 1.
    if (r == 0.0) return alpha > 1.0 ? 1.0 / (2.0 * shape * (alpha - 1.0)) : 0.0;
    return hankel_envelope(r, shape, alpha, quad, 0.5 * tolerance);
  };
  // The average of a smooth function of cos(theta) over a period: nested
  // midpoint rules (3x refinement reuses every node) converge geometrically
  // unless x is close to eps, where tanh-sinh takes over.
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  double node_sum = 0.0;
  for (std::size_t n = 3; n <= 243; n *= 3) {
    // Midpoints of the n-cell rule not shared with the n/3-cell rule.
    const double h = std::numbers::pi / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (n > 3 && i % 3 == 1) continue;
      node_sum += inner((static_cast<double>(i) + 0.5) * h);
    }
    mean = node_sum / static_cast<double>(n);
    if (std::isfinite(estimate)) {
      residual = std::abs(mean - estimate);
      if (residual < 0.5 * tolerance) break;
    }
    estimate = mean;
  }
  if (!(residual < 0.5 * tolerance)) {
    thread_local boost::math::quadrature::tanh_sinh<double> outer(10);
    double outer_error = 0.0;
    mean = outer.integrate(inner, 0.0, std::numbers::pi, 1e-7, &outer_error) / std::numbers::pi;
    residual = outer_error / std::numbers::pi;
  }
  if (!(residual <= tolerance) || !std::isfinite(mean)) {
    std::ostringstream os;
    os << "pdf_hk angular quadrature did not converge (x=" << x << ", alpha=" << alpha << "), residual "
       << x * residual;
    throw AccuracyError(os.str(), x * residual);
  }
  return x * mean;
}

// ---------------------------------------------------------------------------
// log m - digamma(m) = delta

namespace {

double log_minus_digamma(double m) { return std::log(m) - boost::math::digamma(m); }

/// Greenwood & Durand (1960) approximation to the gamma shape MLE.
double greenwood_durand(double delta) {
  if (delta <= 0.5772) {
    return (0.5000876 + 0.1648852 * delta - 0.0544274 * delta * delta) / delta;
  }
  if (delta <= 17.0) {
    return (8.898919 + 9.059950 * delta + 0.9775373 * delta * delta) /
           (delta * (17.79728 + 11.968477 * delta + delta * delta));
  }
  return 1.0 / delta;
}

}  // namespace

LogDigammaRoot solve_log_minus_digamma(double delta) {
  LogDigammaRoot root;
  // log m - digamma(m) decreases monotonically from +inf (m -> 0) to 0 (m -> inf).
  const double at_low = log_minus_digamma(kMinShapeBracket);
  const double at_high = log_minus_digamma(kMaxShapeBracket);
  if (!(delta < at_low)) {
    root.m = kMinShapeBracket;
    root.residual = at_low - delta;
    root.clamped_low = true;
    return root;
  }
  if (!(delta > at_high)) {
    root.m = kMaxShapeBracket;
    root.residual = at_high - delta;
    root.clamped_high = true;
    return root;
  }

  double lo = kMinShapeBracket;
  double hi = kMaxShapeBracket;
  double m = std::clamp(greenwood_durand(delta), lo, hi);
  double f = log_minus_digamma(m) - delta;
  for (int it = 1; it <= 100; ++it) {
    root.iterations = it;
    if (f > 0.0) lo = m; else hi = m;
    const double slope = 1.0 / m - boost::math::trigamma(m);
    double next = m - f / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    m = next;
    f = log_minus_digamma(m) - delta;
    if (std::abs(f) < 1e-12 || hi - lo < 1e-15 * m) break;
  }
  root.m = m;
  root.residual = f;
  return root;
}

double nakagami_pseudo_m(double alpha) {
  if (!finite_positive(alpha)) throw ParameterDomainError("alpha must be finite and > 0");
  const double delta = std::log(alpha) - boost::math::digamma(alpha) + std::numbers::egamma;
  return solve_log_minus_digamma(delta).m;
}

double nakagami_m_for_alpha(double alpha, MMapping mapping) {
  if (mapping == MMapping::moment) {
    if (!finite_positive(alpha)) throw ParameterDomainError("alpha must be finite and > 0");
    return alpha / (alpha + 2.0);
  }
  return nakagami_pseudo_m(alpha);
}

}  // namespace qus
