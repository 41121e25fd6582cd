#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qus/grid.hpp"
#include "qus/rng.hpp"

namespace qus {

/// Homodyned-K parameters (epsilon, sigma, alpha).
///
/// sigma follows the generative convention a = |eps + (X + iY) sigma sqrt(Z/alpha)|
/// with Z ~ Gamma(alpha, 1), so the mean diffuse intensity is 2 sigma^2
/// independently of alpha. The "total diffuse power 2 sigma'^2 alpha"
/// parametrization used elsewhere in the literature has sigma'^2 = sigma^2 / alpha;
/// see destrempes_sigma().
class HKParams {
 public:
  /// Throws ParameterDomainError unless epsilon >= 0, sigma > 0, alpha > 0 (all finite).
  HKParams(double epsilon, double sigma, double alpha);

  double epsilon() const noexcept { return epsilon_; }
  double sigma() const noexcept { return sigma_; }
  double alpha() const noexcept { return alpha_; }

  double coherent_power() const noexcept { return epsilon_ * epsilon_; }
  double diffuse_power() const noexcept { return 2.0 * sigma_ * sigma_; }
  double mean_intensity() const noexcept { return coherent_power() + diffuse_power(); }
  /// Coherent-to-diffuse amplitude ratio, k^2 = eps^2 / (2 sigma^2).
  double k() const noexcept;
  double destrempes_sigma() const noexcept;

  friend bool operator==(const HKParams&, const HKParams&) = default;

 private:
  double epsilon_;
  double sigma_;
  double alpha_;
};

class NakagamiParams {
 public:
  /// Throws ParameterDomainError unless m > 0 and omega > 0 (both finite).
  NakagamiParams(double m, double omega);

  double m() const noexcept { return m_; }
  double omega() const noexcept { return omega_; }

  friend bool operator==(const NakagamiParams&, const NakagamiParams&) = default;

 private:
  double m_;
  double omega_;
};

/// 2-D grid of envelope amplitudes; every value finite and >= 0.
///
/// Amplitudes are stored in single precision, which is also the on-disk
/// representation, so in-memory and reloaded fields are bitwise identical.
class EnvelopeField {
 public:
  EnvelopeField() = default;
  explicit EnvelopeField(Grid<float> amplitudes);
  EnvelopeField(std::size_t height, std::size_t width, std::vector<float> amplitudes)
      : EnvelopeField(Grid<float>(height, width, std::move(amplitudes))) {}

  std::size_t height() const noexcept { return grid_.height(); }
  std::size_t width() const noexcept { return grid_.width(); }
  float operator()(std::size_t row, std::size_t col) const noexcept { return grid_(row, col); }
  const Grid<float>& grid() const noexcept { return grid_; }
  std::span<const float> values() const noexcept { return grid_.values(); }

  friend bool operator==(const EnvelopeField&, const EnvelopeField&) = default;

 private:
  Grid<float> grid_;
};

/// One HK amplitude: draws (X, Y) from a normal pair, then Z ~ Gamma(alpha, 1).
double draw_hk(const HKParams& params, Rng& rng);

/// count i.i.d. HK amplitudes; a pure function of (params, count, rng state).
std::vector<double> sample_hk(const HKParams& params, std::size_t count, Rng& rng);

/// count i.i.d. Nakagami amplitudes, sqrt of Gamma(m, omega / m) intensities.
std::vector<double> sample_nakagami(const NakagamiParams& params, std::size_t count, Rng& rng);

double pdf_nakagami(const NakagamiParams& params, double x);
double cdf_nakagami(const NakagamiParams& params, double x);

/// Settings for the Bessel-integral evaluation of the HK density.
struct HkQuadrature {
  double absolute_tolerance = 1e-6;
  /// Integration in u stops once (1 + u^2 sigma^2 / (2 alpha))^-alpha drops
  /// below this and the last panel is negligible.
  double envelope_cutoff = 1e-10;
  /// Budget of half-oscillation panels before giving up.
  std::size_t max_panels = 4000;
  /// Relative tolerance of the adaptive Gauss-Kronrod rule inside one panel.
  double panel_tolerance = 1e-11;
};

/// Homodyned-K density at amplitude x.
///
/// Evaluates x * int_0^inf u J0(u eps) J0(u x) (1 + u^2 sigma^2 / (2 alpha))^-alpha du.
/// The u axis is cut into half-oscillation panels (zeros of J0(u x) when
/// eps = 0), each integrated by adaptive Gauss-Kronrod. Past the truncation
/// point the sum stops directly; before it, the partial sums are
/// extrapolated with Wynn's epsilon algorithm, which is what makes small
/// alpha (integrand decaying like u^(1/2 - 2 alpha)) tractable.
///
/// For eps > 0 the product J0(u eps) J0(u x) is expanded with Neumann's
/// addition theorem into an angular average of J0(u r) terms, each handled
/// as above. At x == eps with alpha <= 0.5 the density is infinite and
/// +inf is returned.
/// Throws AccuracyError (carrying the residual estimate) if the budget runs out.
double pdf_hk(const HKParams& params, double x, const HkQuadrature& quad = {});

/// Solves log m - digamma(m) = delta for m on the bracket [1e-3, 1e3].
struct LogDigammaRoot {
  double m = 1.0;
  double residual = 0.0;
  int iterations = 0;
  bool clamped_low = false;
  bool clamped_high = false;
};
LogDigammaRoot solve_log_minus_digamma(double delta);

inline constexpr double kMinShapeBracket = 1e-3;
inline constexpr double kMaxShapeBracket = 1e3;

/// Nakagami m that maximum likelihood converges to on infinite K-distributed
/// (eps = 0) data: log m - digamma(m) = log alpha - digamma(alpha) + gamma_E.
double nakagami_pseudo_m(double alpha);

/// How ground-truth m maps are derived from alpha.
enum class MMapping {
  mle_consistent,  ///< nakagami_pseudo_m
  moment,          ///< alpha / (alpha + 2), the intensity-moment matched shape
};

double nakagami_m_for_alpha(double alpha, MMapping mapping);

}  // namespace qus
