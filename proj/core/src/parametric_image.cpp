#include "qus/parametric_image.hpp"

#include <algorithm>
#include <cmath>

namespace qus {

std::string_view channel_name(ParameterKind kind) noexcept {
  switch (kind) {
    case ParameterKind::log10_alpha: return "log10_alpha";
    case ParameterKind::m: return "m";
    case ParameterKind::omega: return "omega";
  }
  return "log10_alpha";
}

std::optional<ParameterKind> parameter_kind_from_name(std::string_view name) noexcept {
  if (name == "log10_alpha") return ParameterKind::log10_alpha;
  if (name == "m") return ParameterKind::m;
  if (name == "omega") return ParameterKind::omega;
  return std::nullopt;
}

ParametricImage::ParametricImage(Grid<float> values, ParameterKind kind)
    : kind_(kind), values_(std::move(values)), valid_(values_.height(), values_.width(), 0) {
  auto v = values_.values();
  auto mask = valid_.values();
  for (std::size_t i = 0; i < v.size(); ++i) mask[i] = std::isnan(v[i]) ? 0 : 1;
}

ParametricImage::ParametricImage(Grid<float> values, Grid<std::uint8_t> valid, ParameterKind kind)
    : kind_(kind), values_(std::move(values)), valid_(std::move(valid)) {
  if (!valid_.same_shape(values_)) {
    throw DimensionMismatchError("validity mask shape differs from value grid");
  }
  auto v = values_.values();
  auto mask = valid_.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) mask[i] = 0;
    if (mask[i] == 0) v[i] = kInvalidSentinel;
  }
}

std::size_t ParametricImage::valid_count() const noexcept {
  const auto mask = valid_.values();
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto b) { return b != 0; }));
}

}  // namespace qus
