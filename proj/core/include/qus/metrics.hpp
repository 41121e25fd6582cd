#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qus/grid.hpp"
#include "qus/parametric_image.hpp"

namespace qus {

enum class RrmseDenominator {
  /// sqrt(mean(((pred - truth) / truth)^2)): relative error per pixel, then RMS.
  per_pixel,
  /// sqrt(mean((pred - truth)^2)) / |mean(truth)| over the included pixels.
  map_mean,
};

const char* to_string(RrmseDenominator d) noexcept;

struct RrmseOptions {
  RrmseDenominator denominator = RrmseDenominator::per_pixel;
  /// Pixels whose exclusion reference is within this of 0 are excluded.
  double zero_tolerance = 1e-12;
  /// Map deciding exclusion; defaults to the truth map itself. Pass the
  /// log10(alpha) truth to apply the "log alpha = 0" rule to other parameters.
  const Grid<double>* exclusion_reference = nullptr;
};

struct RrmseResult {
  double value = 0.0;
  std::size_t included = 0;
  std::size_t excluded_zero = 0;     ///< dropped by the zero-truth rule
  std::size_t excluded_invalid = 0;  ///< dropped because the prediction is invalid
};

/// Relative RMS error of `pred` against `truth`. Throws
/// DimensionMismatchError on shape mismatch and EmptyDomainError when no
/// pixel survives exclusion.
RrmseResult rrmse(const ParametricImage& pred, const Grid<double>& truth, const RrmseOptions& options = {});

/// 100 * (baseline - method) / baseline; baseline must be > 0.
double improvement_percent(double baseline, double method);

/// Pearson correlation over jointly valid pixels. Throws EmptyDomainError
/// with fewer than 2 such pixels, DegenerateInputError for zero variance.
double map_correlation(const ParametricImage& a, const ParametricImage& b);

/// Pixelwise mean over the frames valid at each pixel. A pixel is valid
/// when strictly more than half of the frames are valid there.
ParametricImage frame_average(std::span<const ParametricImage> frames);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation (n - 1)
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

struct ImageMetrics {
  std::string id;
  std::optional<RrmseResult> log10_alpha;
  std::optional<RrmseResult> m;
  std::optional<double> alpha_m_correlation;
};

/// Table-style report: per-image RRMSEs aggregated as mean +- std across images.
struct MetricReport {
  std::string label;
  RrmseDenominator denominator = RrmseDenominator::per_pixel;
  std::vector<ImageMetrics> images;

  Summary log10_alpha() const;
  Summary m() const;
  Summary correlation() const;
  std::size_t excluded_log10_alpha() const;
  std::size_t excluded_m() const;
};

std::string report_to_csv(const MetricReport& report);

/// Aggregate means recorded in a report JSON, for use as a baseline.
struct ReportMeans {
  std::string label;
  std::optional<double> log10_alpha;
  std::optional<double> m;
};
ReportMeans report_means_from_json(std::string_view json_text, const std::string& origin = "<memory>");

/// JSON report. With a baseline, the improvement of `report` over it is included.
std::string report_to_json(const MetricReport& report, const ReportMeans* baseline = nullptr);

}  // namespace qus
