#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qus/dataset_io.hpp"
#include "qus/grid.hpp"
#include "qus/rng.hpp"
#include "qus/speckle_models.hpp"

namespace qus {

/// Random shape model. Each shape is an ellipse or an irregular blob
/// (smoothed white noise added to an elliptical bump, thresholded at a
/// random quantile). Shapes whose rasterized area falls outside
/// [area_min, area_max] are redrawn.
struct ShapeConfig {
  std::size_t height = 256;
  std::size_t width = 128;
  int count_min = 1;
  int count_max = 6;
  double semi_axis_min = 8.0;
  double semi_axis_max = 48.0;
  std::size_t area_min = 128;
  std::size_t area_max = 8192;
  double blob_fraction = 0.5;
  double blob_smoothing = 3.0;
  double blob_quantile_min = 0.3;
  double blob_quantile_max = 0.7;
  int max_attempts = 64;
};

enum class ShapeKind { ellipse, blob };

struct ShapeRecord {
  ShapeKind kind = ShapeKind::ellipse;
  /// Rasterized pixel count before occlusion by later shapes.
  std::size_t area = 0;
  /// Region id after occlusion, -1 when fully covered by later shapes.
  int region = -1;
};

/// Region labels. Present labels are compacted to 0..region_count-1 in
/// drawing order; region 0 is the background whenever any background
/// pixel survives.
struct RegionMap {
  Grid<std::int32_t> labels;
  int region_count = 1;
  std::vector<ShapeRecord> shapes;
};

struct ParameterRanges {
  double log10_alpha_min = -0.6;
  double log10_alpha_max = 1.0;
  double sigma_min = 0.5;
  double sigma_max = 2.0;
};

/// One HKParams per region id (epsilon = 0).
struct RegionParams {
  std::vector<HKParams> regions;
};

struct GroundTruthMaps {
  Grid<double> log10_alpha;
  Grid<double> m;
  Grid<double> sigma;
  Grid<std::int32_t> region_id;
};

struct PhantomSample {
  EnvelopeField envelope;
  GroundTruthMaps truth;
  std::uint64_t seed = 0;
  RegionParams params;
};

struct PhantomConfig {
  ShapeConfig shapes;
  ParameterRanges ranges;
  MMapping m_mapping = MMapping::mle_consistent;
};

RegionMap generate_region_map(const ShapeConfig& config, Rng& rng);

RegionParams assign_region_params(const RegionMap& map, const ParameterRanges& ranges, Rng& rng);

/// Draws every pixel independently from its region's HK law (row-major
/// order) and fills the ground-truth maps.
PhantomSample synthesize_field(const RegionMap& map, const RegionParams& params, Rng& rng,
                               MMapping mapping = MMapping::mle_consistent);

/// Full pipeline for one image. Shape, parameter and pixel stages draw from
/// streams 1, 2 and 3 split off Rng(seed).
PhantomSample generate_phantom(const PhantomConfig& config, std::uint64_t seed);

struct DatasetConfig {
  PhantomConfig phantom;
  std::size_t count = 0;
  std::uint64_t base_seed = 0;
  /// First `train` images are train, the next `val` are val, the rest test.
  std::size_t train = 0;
  std::size_t val = 0;
  /// Worker threads; never affects output bytes.
  unsigned jobs = 1;
};

/// Default split when none is given: 80 % train, 10 % val, rest test.
void apply_default_split(DatasetConfig& config);

/// JSON echo of everything that determines the dataset bytes (jobs excluded).
std::string dataset_config_to_json(const DatasetConfig& config);
/// Overlays keys present in `json_text` onto `config`. Accepts either a
/// bare config object or a whole manifest (its "config" member is used).
void merge_dataset_config_json(DatasetConfig& config, std::string_view json_text,
                               const std::string& origin = "<memory>");

MapFile truth_to_map_file(const GroundTruthMaps& truth);

std::string image_id(std::size_t index);

/// Generates `config.count` images with seeds derive_seed(base_seed, index)
/// into out_dir/images/ and writes out_dir/manifest.json.
Manifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

}  // namespace qus
