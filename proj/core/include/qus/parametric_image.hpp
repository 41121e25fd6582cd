#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

#include "qus/grid.hpp"

namespace qus {

enum class ParameterKind { log10_alpha, m, omega };

/// Channel name used for the kind in map files ("log10_alpha", "m", "omega").
std::string_view channel_name(ParameterKind kind) noexcept;
std::optional<ParameterKind> parameter_kind_from_name(std::string_view name) noexcept;

inline constexpr float kInvalidSentinel = std::numeric_limits<float>::quiet_NaN();

/// Per-pixel estimate map. Invalid pixels hold kInvalidSentinel (quiet NaN)
/// and a false mask entry; every statistic skips them.
class ParametricImage {
 public:
  ParametricImage() = default;
  ParametricImage(std::size_t height, std::size_t width, ParameterKind kind)
      : kind_(kind), values_(height, width, kInvalidSentinel), valid_(height, width, 0) {}

  /// Validity derived from the values: NaN means invalid.
  ParametricImage(Grid<float> values, ParameterKind kind);

  /// Explicit mask; values at masked-out pixels are overwritten with the sentinel.
  ParametricImage(Grid<float> values, Grid<std::uint8_t> valid, ParameterKind kind);

  std::size_t height() const noexcept { return values_.height(); }
  std::size_t width() const noexcept { return values_.width(); }
  ParameterKind kind() const noexcept { return kind_; }

  bool valid(std::size_t row, std::size_t col) const noexcept { return valid_(row, col) != 0; }
  float value(std::size_t row, std::size_t col) const noexcept { return values_(row, col); }

  void set(std::size_t row, std::size_t col, float value) noexcept {
    values_(row, col) = value;
    valid_(row, col) = 1;
  }
  void invalidate(std::size_t row, std::size_t col) noexcept {
    values_(row, col) = kInvalidSentinel;
    valid_(row, col) = 0;
  }

  const Grid<float>& values() const noexcept { return values_; }
  const Grid<std::uint8_t>& valid_mask() const noexcept { return valid_; }
  std::size_t valid_count() const noexcept;

 private:
  ParameterKind kind_ = ParameterKind::log10_alpha;
  Grid<float> values_;
  Grid<std::uint8_t> valid_;
};

}  // namespace qus
