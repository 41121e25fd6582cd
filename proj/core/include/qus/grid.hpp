#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qus/errors.hpp"

namespace qus {

/// Dense row-major 2-D array.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), values_(height * width, fill) {}
  Grid(std::size_t height, std::size_t width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_) {
      throw DimensionMismatchError("grid value count does not equal height*width");
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& operator()(std::size_t row, std::size_t col) noexcept { return values_[row * width_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const noexcept {
    return values_[row * width_ + col];
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  const std::vector<T>& storage() const noexcept { return values_; }

  bool same_shape(std::size_t h, std::size_t w) const noexcept { return h == height_ && w == width_; }
  template <class U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return same_shape(other.height(), other.width());
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> values_;
};

}  // namespace qus
