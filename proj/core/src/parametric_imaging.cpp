#include "qus/parametric_imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "parallel.hpp"
#include "qus/errors.hpp"

namespace qus {

namespace {

/// Reflect index into [0, n) without repeating the edge sample.
std::size_t reflect(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

class MomentTable {
 public:
  /// Table over `rows` x `cols` samples supplied by at(r, c).
  template <class Sample>
  MomentTable(std::size_t rows, std::size_t cols, Sample&& at)
      : rows_(rows), cols_(cols), table_((rows + 1) * (cols + 1)) {
    for (std::size_t r = 0; r < rows; ++r) {
      LogMoments row_sum;
      for (std::size_t c = 0; c < cols; ++c) {
        row_sum.add(at(r, c));
        cell(r + 1, c + 1) = cell(r, c + 1) + row_sum;
      }
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  /// Moments over rows [r0, r1) x cols [c0, c1).
  LogMoments box(std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) const noexcept {
    LogMoments m = cell(r1, c1);
    m -= cell(r0, c1);
    m -= cell(r1, c0);
    m += cell(r0, c0);
    return m;
  }

 private:
  LogMoments& cell(std::size_t r, std::size_t c) noexcept { return table_[r * (cols_ + 1) + c]; }
  const LogMoments& cell(std::size_t r, std::size_t c) const noexcept { return table_[r * (cols_ + 1) + c]; }

  std::size_t rows_, cols_;
  std::vector<LogMoments> table_;
};

struct PixelEstimate {
  float log10_alpha = kInvalidSentinel;
  float m = kInvalidSentinel;
  float omega = kInvalidSentinel;
};

PixelEstimate estimate_window(const LogMoments& moments, const PatchMapOptions& opt) {
  PixelEstimate out;
  if (static_cast<std::size_t>(moments.total()) < opt.min_samples) return out;
  if (opt.estimator != EstimatorKind::nakagami) {
    const EstimateResult a = estimate_alpha(moments, opt.clamp);
    if (a.valid) out.log10_alpha = static_cast<float>(std::log10(a.value));
  }
  if (opt.estimator != EstimatorKind::alpha) {
    const NakagamiEstimate fit = nakagami_mle(moments);
    if (fit.result.valid) {
      out.m = static_cast<float>(fit.m);
      out.omega = static_cast<float>(fit.omega);
    }
  }
  return out;
}

/// Sample positions of the coarse grid along one axis: 0, s, 2s, ..., n-1.
std::vector<std::size_t> coarse_positions(std::size_t n, std::size_t stride) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < n; i += stride) pos.push_back(i);
  if (pos.back() != n - 1) pos.push_back(n - 1);
  return pos;
}

/// Fills a dense grid from values known at coarse (row, col) positions.
Grid<float> upsample(const Grid<float>& coarse, const std::vector<std::size_t>& rows,
                     const std::vector<std::size_t>& cols, std::size_t height, std::size_t width) {
  Grid<float> dense(height, width, kInvalidSentinel);
  std::size_t ri = 0;
  for (std::size_t r = 0; r < height; ++r) {
    while (ri + 1 < rows.size() && rows[ri + 1] <= r) ++ri;
    const std::size_t r1 = std::min(ri + 1, rows.size() - 1);
    const double ty = r1 == ri ? 0.0 : static_cast<double>(r - rows[ri]) / static_cast<double>(rows[r1] - rows[ri]);
    std::size_t ci = 0;
    for (std::size_t c = 0; c < width; ++c) {
      while (ci + 1 < cols.size() && cols[ci + 1] <= c) ++ci;
      const std::size_t c1 = std::min(ci + 1, cols.size() - 1);
      const double tx = c1 == ci ? 0.0 : static_cast<double>(c - cols[ci]) / static_cast<double>(cols[c1] - cols[ci]);
      const double weights[4] = {(1 - ty) * (1 - tx), (1 - ty) * tx, ty * (1 - tx), ty * tx};
      const float corners[4] = {coarse(ri, ci), coarse(ri, c1), coarse(r1, ci), coarse(r1, c1)};
      double acc = 0.0;
      bool ok = true;
      for (int k = 0; k < 4; ++k) {
        if (weights[k] == 0.0) continue;
        if (std::isnan(corners[k])) {
          ok = false;
          break;
        }
        acc += weights[k] * corners[k];
      }
      if (ok) dense(r, c) = static_cast<float>(acc);
    }
  }
  return dense;
}

}  // namespace

PatchMaps patch_map(const EnvelopeField& field, const PatchMapOptions& opt) {
  const std::size_t H = field.height();
  const std::size_t W = field.width();
  const std::size_t ph = opt.patch.height;
  const std::size_t pw = opt.patch.width;
  if (ph < 4 || pw < 4) throw ConfigurationError("patch must be at least 4x4");
  if (ph > H || pw > W) {
    throw ConfigurationError("patch " + std::to_string(ph) + "x" + std::to_string(pw) +
                             " exceeds field " + std::to_string(H) + "x" + std::to_string(W));
  }
  if (opt.stride == 0) throw ConfigurationError("stride must be >= 1");

  const std::size_t top = ph / 2;
  const std::size_t left = pw / 2;
  const bool mirror = opt.border == BorderPolicy::mirror;
  const MomentTable table =
      mirror ? MomentTable(H + ph - 1, W + pw - 1,
                           [&](std::size_t r, std::size_t c) {
                             return static_cast<double>(field(reflect(static_cast<long>(r) - static_cast<long>(top), H),
                                                              reflect(static_cast<long>(c) - static_cast<long>(left), W)));
                           })
             : MomentTable(H, W, [&](std::size_t r, std::size_t c) { return static_cast<double>(field(r, c)); });

  auto window = [&](std::size_t r, std::size_t c) {
    if (mirror) return table.box(r, r + ph, c, c + pw);
    const long r0 = static_cast<long>(r) - static_cast<long>(top);
    const long c0 = static_cast<long>(c) - static_cast<long>(left);
    const auto clip = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n))); };
    return table.box(clip(r0, H), clip(r0 + static_cast<long>(ph), H), clip(c0, W), clip(c0 + static_cast<long>(pw), W));
  };

  const auto rows = coarse_positions(H, opt.stride);
  const auto cols = coarse_positions(W, opt.stride);
  Grid<float> alpha(rows.size(), cols.size(), kInvalidSentinel);
  Grid<float> m(rows.size(), cols.size(), kInvalidSentinel);
  Grid<float> omega(rows.size(), cols.size(), kInvalidSentinel);
  detail::parallel_for(rows.size(), opt.jobs, [&](std::size_t i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const PixelEstimate e = estimate_window(window(rows[i], cols[j]), opt);
      alpha(i, j) = e.log10_alpha;
      m(i, j) = e.m;
      omega(i, j) = e.omega;
    }
  });

  auto finish = [&](Grid<float>& g, ParameterKind kind) {
    if (opt.stride > 1) g = upsample(g, rows, cols, H, W);
    return ParametricImage(std::move(g), kind);
  };
  PatchMaps out;
  if (opt.estimator != EstimatorKind::nakagami) out.log10_alpha = finish(alpha, ParameterKind::log10_alpha);
  if (opt.estimator != EstimatorKind::alpha) {
    out.m = finish(m, ParameterKind::m);
    out.omega = finish(omega, ParameterKind::omega);
  }
  return out;
}

ParametricImage apply_external_map(const MapFile& predictions, ParameterKind kind, std::size_t height,
                                   std::size_t width) {
  if (predictions.height != height || predictions.width != width) {
    throw DimensionMismatchError("prediction map is " + std::to_string(predictions.height) + "x" +
                                 std::to_string(predictions.width) + ", expected " + std::to_string(height) +
                                 "x" + std::to_string(width));
  }
  const MapChannel& values = predictions.channel(channel_name(kind));
  const std::string own_mask = std::string(channel_name(kind)) + "_valid";
  const MapChannel* mask = predictions.find(own_mask);
  if (mask == nullptr) mask = predictions.find("valid");
  Grid<std::uint8_t> valid(height, width, 1);
  if (mask != nullptr) {
    for (std::size_t i = 0; i < mask->values.size(); ++i) {
      valid.values()[i] = (mask->values[i] != 0.0f && !std::isnan(mask->values[i])) ? 1 : 0;
    }
  }
  return ParametricImage(Grid<float>(height, width, values.values), std::move(valid), kind);
}

ParametricImage apply_external_map(const std::filesystem::path& predictions, ParameterKind kind,
                                   std::size_t height, std::size_t width) {
  return apply_external_map(read_map(predictions), kind, height, width);
}

}  // namespace qus
