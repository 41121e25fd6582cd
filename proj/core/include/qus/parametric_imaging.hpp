#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "qus/dataset_io.hpp"
#include "qus/estimators.hpp"
#include "qus/parametric_image.hpp"
#include "qus/speckle_models.hpp"

namespace qus {

enum class BorderPolicy {
  shrink,  ///< clip the window at the image edge; fewer samples near borders
  mirror,  ///< reflect the field (without repeating the edge sample)
};

enum class EstimatorKind { alpha, nakagami, both };

struct PatchSize {
  std::size_t height = 32;
  std::size_t width = 16;
};

struct PatchMapOptions {
  PatchSize patch;
  EstimatorKind estimator = EstimatorKind::both;
  BorderPolicy border = BorderPolicy::shrink;
  /// Windows with fewer samples than this are invalid.
  std::size_t min_samples = 128;
  /// Estimate every `stride` pixels (plus the last row/column) and fill the
  /// rest bilinearly. 1 = dense.
  std::size_t stride = 1;
  AlphaClamp clamp;
  unsigned jobs = 1;
};

struct PatchMaps {
  std::optional<ParametricImage> log10_alpha;
  std::optional<ParametricImage> m;
  std::optional<ParametricImage> omega;
};

/// Patch-based parametric imaging. The window for pixel (r, c) covers rows
/// [r - h/2, r - h/2 + h - 1] and columns [c - w/2, c - w/2 + w - 1]
/// (integer division; for even sizes this is [r - h/2, r + h/2 - 1]).
///
/// Window moments come from a summed-area table of exact fixed-point
/// log-moments, so each pixel costs O(1) and any two windows holding the
/// same sample multiset produce bitwise-identical estimates.
/// Throws ConfigurationError if the patch is smaller than 4x4 or larger than the field.
PatchMaps patch_map(const EnvelopeField& field, const PatchMapOptions& options = {});

/// Wraps externally produced predictions. Validity comes from NaN sentinels
/// and, when present, a "<kind>_valid" or "valid" channel (nonzero = valid).
/// Throws DimensionMismatchError when the map is not height x width or lacks the channel.
ParametricImage apply_external_map(const MapFile& predictions, ParameterKind kind,
                                   std::size_t height, std::size_t width);
ParametricImage apply_external_map(const std::filesystem::path& predictions, ParameterKind kind,
                                   std::size_t height, std::size_t width);

}  // namespace qus
