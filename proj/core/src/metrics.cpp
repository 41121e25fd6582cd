#include "qus/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qus/errors.hpp"

namespace qus {

using nlohmann::json;

const char* to_string(RrmseDenominator d) noexcept {
  return d == RrmseDenominator::map_mean ? "map_mean" : "per_pixel";
}

RrmseResult rrmse(const ParametricImage& pred, const Grid<double>& truth, const RrmseOptions& options) {
  if (!truth.same_shape(pred.height(), pred.width())) {
    throw DimensionMismatchError("prediction and truth maps differ in size");
  }
  const Grid<double>& reference = options.exclusion_reference ? *options.exclusion_reference : truth;
  if (!reference.same_shape(truth)) throw DimensionMismatchError("exclusion reference differs in size");

  RrmseResult out;
  double sum_sq = 0.0;
  double sum_truth = 0.0;
  for (std::size_t r = 0; r < truth.height(); ++r) {
    for (std::size_t c = 0; c < truth.width(); ++c) {
      if (std::abs(reference(r, c)) <= options.zero_tolerance) {
        ++out.excluded_zero;
        continue;
      }
      if (!pred.valid(r, c)) {
        ++out.excluded_invalid;
        continue;
      }
      const double t = truth(r, c);
      const double diff = static_cast<double>(pred.value(r, c)) - t;
      if (options.denominator == RrmseDenominator::per_pixel) {
        if (std::abs(t) <= options.zero_tolerance) {
          ++out.excluded_zero;
          continue;
        }
        sum_sq += (diff / t) * (diff / t);
      } else {
        sum_sq += diff * diff;
        sum_truth += t;
      }
      ++out.included;
    }
  }
  if (out.included == 0) throw EmptyDomainError("rrmse: no pixel survives exclusion");
  const double n = static_cast<double>(out.included);
  out.value = std::sqrt(sum_sq / n);
  if (options.denominator == RrmseDenominator::map_mean) {
    const double mean_truth = std::abs(sum_truth / n);
    if (mean_truth <= options.zero_tolerance) throw EmptyDomainError("rrmse: mean truth is zero");
    out.value /= mean_truth;
  }
  return out;
}

double improvement_percent(double baseline, double method) {
  if (!(baseline > 0.0) || !std::isfinite(baseline)) {
    throw ParameterDomainError("improvement_percent needs a positive baseline");
  }
  return 100.0 * (baseline - method) / baseline;
}

double map_correlation(const ParametricImage& a, const ParametricImage& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionMismatchError("correlated maps differ in size");
  }
  std::size_t n = 0;
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t r = 0; r < a.height(); ++r) {
    for (std::size_t c = 0; c < a.width(); ++c) {
      if (!a.valid(r, c) || !b.valid(r, c)) continue;
      ++n;
      mean_a += (a.value(r, c) - mean_a) / static_cast<double>(n);
      mean_b += (b.value(r, c) - mean_b) / static_cast<double>(n);
    }
  }
  if (n < 2) throw EmptyDomainError("map_correlation needs at least 2 jointly valid pixels");
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t r = 0; r < a.height(); ++r) {
    for (std::size_t c = 0; c < a.width(); ++c) {
      if (!a.valid(r, c) || !b.valid(r, c)) continue;
      const double da = a.value(r, c) - mean_a;
      const double db = b.value(r, c) - mean_b;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateInputError("map_correlation: a map has zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

ParametricImage frame_average(std::span<const ParametricImage> frames) {
  if (frames.empty()) throw EmptyDomainError("frame_average needs at least one frame");
  const auto& first = frames.front();
  for (const auto& f : frames) {
    if (f.height() != first.height() || f.width() != first.width() || f.kind() != first.kind()) {
      throw DimensionMismatchError("frames differ in size or parameter kind");
    }
  }
  ParametricImage out(first.height(), first.width(), first.kind());
  for (std::size_t r = 0; r < first.height(); ++r) {
    for (std::size_t c = 0; c < first.width(); ++c) {
      std::size_t valid = 0;
      double sum = 0.0;
      for (const auto& f : frames) {
        if (!f.valid(r, c)) continue;
        ++valid;
        sum += f.value(r, c);
      }
      if (2 * valid > frames.size()) out.set(r, c, static_cast<float>(sum / static_cast<double>(valid)));
    }
  }
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  s.mean = mean;
  s.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  return s;
}

namespace {

template <class Get>
Summary summarize_by(const std::vector<ImageMetrics>& images, Get get) {
  std::vector<double> v;
  for (const auto& img : images) {
    if (auto x = get(img)) v.push_back(*x);
  }
  return summarize(v);
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.stddev}, {"images", s.count}}; }

}  // namespace

Summary MetricReport::log10_alpha() const {
  return summarize_by(images, [](const ImageMetrics& i) {
    return i.log10_alpha ? std::optional<double>(i.log10_alpha->value) : std::nullopt;
  });
}

Summary MetricReport::m() const {
  return summarize_by(images, [](const ImageMetrics& i) {
    return i.m ? std::optional<double>(i.m->value) : std::nullopt;
  });
}

Summary MetricReport::correlation() const {
  return summarize_by(images, [](const ImageMetrics& i) { return i.alpha_m_correlation; });
}

std::size_t MetricReport::excluded_log10_alpha() const {
  std::size_t n = 0;
  for (const auto& i : images) {
    if (i.log10_alpha) n += i.log10_alpha->excluded_zero;
  }
  return n;
}

std::size_t MetricReport::excluded_m() const {
  std::size_t n = 0;
  for (const auto& i : images) {
    if (i.m) n += i.m->excluded_zero;
  }
  return n;
}

std::string report_to_csv(const MetricReport& report) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "id,rrmse_log10_alpha,included_log10_alpha,excluded_zero_log10_alpha,excluded_invalid_log10_alpha,"
        "rrmse_m,included_m,excluded_zero_m,excluded_invalid_m,alpha_m_correlation\n";
  auto cells = [&](const std::optional<RrmseResult>& r) {
    if (r) {
      os << r->value << ',' << r->included << ',' << r->excluded_zero << ',' << r->excluded_invalid;
    } else {
      os << ",,,";
    }
  };
  for (const auto& img : report.images) {
    os << img.id << ',';
    cells(img.log10_alpha);
    os << ',';
    cells(img.m);
    os << ',';
    if (img.alpha_m_correlation) os << *img.alpha_m_correlation;
    os << '\n';
  }
  return os.str();
}

std::string report_to_json(const MetricReport& report, const ReportMeans* baseline) {
  json j;
  j["label"] = report.label;
  j["rrmse_denominator"] = to_string(report.denominator);
  j["aggregation"] = "mean and sample std of per-image RRMSE";
  j["exclusion_rule"] = "pixels whose ground-truth log10(alpha) is 0 (|value| <= 1e-12) are excluded";
  j["rrmse"] = {{"log10_alpha", summary_json(report.log10_alpha())}, {"m", summary_json(report.m())}};
  j["excluded_pixels"] = {{"log10_alpha", report.excluded_log10_alpha()}, {"m", report.excluded_m()}};
  if (report.correlation().count > 0) j["alpha_m_correlation"] = summary_json(report.correlation());
  if (baseline) {
    json imp;
    imp["baseline"] = baseline->label;
    if (baseline->log10_alpha && report.log10_alpha().count > 0) {
      imp["log10_alpha"] = improvement_percent(*baseline->log10_alpha, report.log10_alpha().mean);
    }
    if (baseline->m && report.m().count > 0) imp["m"] = improvement_percent(*baseline->m, report.m().mean);
    j["improvement_percent"] = std::move(imp);
  }
  json images = json::array();
  for (const auto& img : report.images) {
    json row;
    row["id"] = img.id;
    if (img.log10_alpha) row["log10_alpha"] = img.log10_alpha->value;
    if (img.m) row["m"] = img.m->value;
    if (img.alpha_m_correlation) row["alpha_m_correlation"] = *img.alpha_m_correlation;
    images.push_back(std::move(row));
  }
  j["images"] = std::move(images);
  return j.dump(2) + "\n";
}

ReportMeans report_means_from_json(std::string_view json_text, const std::string& origin) {
  ReportMeans means;
  try {
    const json j = json::parse(json_text);
    means.label = j.value("label", std::string{});
    const json& r = j.at("rrmse");
    if (r.contains("log10_alpha") && r.at("log10_alpha").at("images").get<std::size_t>() > 0) {
      means.log10_alpha = r.at("log10_alpha").at("mean").get<double>();
    }
    if (r.contains("m") && r.at("m").at("images").get<std::size_t>() > 0) {
      means.m = r.at("m").at("mean").get<double>();
    }
  } catch (const json::exception& e) {
    throw MalformedFileError(origin, "report", e.what());
  }
  return means;
}

}  // namespace qus
