#include "qus/phantom_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "parallel.hpp"
#include "qus/errors.hpp"

namespace qus {

using nlohmann::json;

namespace {

struct Pixel {
  std::int32_t row;
  std::int32_t col;
};

struct Ellipse {
  double center_row, center_col;
  double semi_a, semi_b;
  double cos_t, sin_t;

  /// Squared normalized radius of pixel center (row, col).
  double rho2(double row, double col) const noexcept {
    const double dy = row - center_row;
    const double dx = col - center_col;
    const double u = (dx * cos_t + dy * sin_t) / semi_a;
    const double v = (-dx * sin_t + dy * cos_t) / semi_b;
    return u * u + v * v;
  }
};

Ellipse draw_ellipse(const ShapeConfig& cfg, Rng& rng) {
  Ellipse e{};
  e.center_row = rng.uniform() * static_cast<double>(cfg.height);
  e.center_col = rng.uniform() * static_cast<double>(cfg.width);
  e.semi_a = cfg.semi_axis_min + rng.uniform() * (cfg.semi_axis_max - cfg.semi_axis_min);
  e.semi_b = cfg.semi_axis_min + rng.uniform() * (cfg.semi_axis_max - cfg.semi_axis_min);
  const double theta = rng.uniform() * std::numbers::pi;
  e.cos_t = std::cos(theta);
  e.sin_t = std::sin(theta);
  return e;
}

/// Pixel rectangle [r0, r1) x [c0, c1) covering radius `reach` around the ellipse, clipped.
struct Box {
  std::int32_t r0, r1, c0, c1;
};

Box bounding_box(const ShapeConfig& cfg, const Ellipse& e, double reach) {
  const double extent = reach * std::max(e.semi_a, e.semi_b) + 1.0;
  auto clip = [](double v, std::size_t hi) {
    return static_cast<std::int32_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  return {clip(std::floor(e.center_row - extent), cfg.height), clip(std::ceil(e.center_row + extent) + 1, cfg.height),
          clip(std::floor(e.center_col - extent), cfg.width), clip(std::ceil(e.center_col + extent) + 1, cfg.width)};
}

std::vector<Pixel> rasterize_ellipse(const ShapeConfig& cfg, const Ellipse& e) {
  std::vector<Pixel> px;
  const Box box = bounding_box(cfg, e, 1.0);
  for (std::int32_t r = box.r0; r < box.r1; ++r) {
    for (std::int32_t c = box.c0; c < box.c1; ++c) {
      if (e.rho2(r, c) <= 1.0) px.push_back({r, c});
    }
  }
  return px;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (auto& v : k) v /= total;
  return k;
}

/// White noise over an h x w box, blurred separably, scaled to unit std.
std::vector<double> smooth_noise(std::size_t h, std::size_t w, double sigma, Rng& rng) {
  std::vector<double> noise(h * w);
  for (std::size_t i = 0; i < noise.size(); i += 2) {
    const auto [a, b] = standard_normal_pair(rng);
    noise[i] = a;
    if (i + 1 < noise.size()) noise[i + 1] = b;
  }
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  auto at = [&](const std::vector<double>& src, long r, long c) {
    r = std::clamp<long>(r, 0, static_cast<long>(h) - 1);
    c = std::clamp<long>(c, 0, static_cast<long>(w) - 1);
    return src[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)];
  };
  std::vector<double> tmp(h * w), out(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * at(noise, static_cast<long>(r), static_cast<long>(c) + k);
      tmp[r * w + c] = s;
    }
  }
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * at(tmp, static_cast<long>(r) + k, static_cast<long>(c));
      out[r * w + c] = s;
      sum += s;
      sum2 += s * s;
    }
  }
  const double n = static_cast<double>(out.size());
  const double sd = std::sqrt(std::max(sum2 / n - (sum / n) * (sum / n), 1e-300));
  for (auto& v : out) v = (v - sum / n) / sd;
  return out;
}

constexpr double kBlobReach = 1.25;
constexpr double kBlobNoiseWeight = 0.6;

std::vector<Pixel> rasterize_blob(const ShapeConfig& cfg, const Ellipse& e, Rng& rng) {
  const Box box = bounding_box(cfg, e, kBlobReach);
  const std::size_t h = static_cast<std::size_t>(std::max(0, box.r1 - box.r0));
  const std::size_t w = static_cast<std::size_t>(std::max(0, box.c1 - box.c0));
  const double quantile =
      cfg.blob_quantile_min + rng.uniform() * (cfg.blob_quantile_max - cfg.blob_quantile_min);
  if (h == 0 || w == 0) return {};
  const auto noise = smooth_noise(h, w, cfg.blob_smoothing, rng);

  std::vector<std::pair<double, Pixel>> candidates;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const auto r = static_cast<std::int32_t>(box.r0 + i);
      const auto c = static_cast<std::int32_t>(box.c0 + j);
      const double rho2 = e.rho2(r, c);
      if (rho2 > kBlobReach * kBlobReach) continue;
      candidates.push_back({(1.0 - rho2) + kBlobNoiseWeight * noise[i * w + j], Pixel{r, c}});
    }
  }
  if (candidates.empty()) return {};
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& cand : candidates) scores.push_back(cand.first);
  const auto cut = static_cast<std::size_t>(quantile * static_cast<double>(scores.size()));
  std::nth_element(scores.begin(), scores.begin() + static_cast<long>(std::min(cut, scores.size() - 1)), scores.end());
  const double threshold = scores[std::min(cut, scores.size() - 1)];
  std::vector<Pixel> px;
  for (const auto& [score, p] : candidates) {
    if (score > threshold) px.push_back(p);
  }
  return px;
}

}  // namespace

RegionMap generate_region_map(const ShapeConfig& cfg, Rng& rng) {
  if (cfg.height == 0 || cfg.width == 0) throw ConfigurationError("image size must be positive");
  if (cfg.count_min < 0 || cfg.count_max < cfg.count_min) {
    throw ConfigurationError("shape count range must satisfy 0 <= min <= max");
  }
  if (!(cfg.semi_axis_min > 0.0 && cfg.semi_axis_min <= cfg.semi_axis_max)) {
    throw ConfigurationError("semi-axis range must satisfy 0 < min <= max");
  }
  if (cfg.area_min > cfg.area_max) throw ConfigurationError("area range must satisfy min <= max");

  Grid<std::int32_t> raw(cfg.height, cfg.width, 0);
  RegionMap map;
  const auto count = static_cast<int>(rng.uniform_int(cfg.count_min, cfg.count_max));
  for (int s = 0; s < count; ++s) {
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      const bool blob = rng.uniform() < cfg.blob_fraction;
      const Ellipse e = draw_ellipse(cfg, rng);
      const auto px = blob ? rasterize_blob(cfg, e, rng) : rasterize_ellipse(cfg, e);
      if (px.size() < cfg.area_min || px.size() > cfg.area_max) continue;
      const auto label = static_cast<std::int32_t>(map.shapes.size() + 1);
      for (const Pixel& p : px) raw(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col)) = label;
      map.shapes.push_back({blob ? ShapeKind::blob : ShapeKind::ellipse, px.size(), -1});
      break;
    }
  }

  std::vector<std::size_t> pixel_count(map.shapes.size() + 1, 0);
  for (auto v : raw.values()) ++pixel_count[static_cast<std::size_t>(v)];
  std::vector<std::int32_t> remap(pixel_count.size(), -1);
  std::int32_t next = 0;
  for (std::size_t raw_label = 0; raw_label < pixel_count.size(); ++raw_label) {
    if (pixel_count[raw_label] > 0) remap[raw_label] = next++;
  }
  for (auto& v : raw.values()) v = remap[static_cast<std::size_t>(v)];
  for (std::size_t s = 0; s < map.shapes.size(); ++s) map.shapes[s].region = remap[s + 1];
  map.labels = std::move(raw);
  map.region_count = next;
  return map;
}

RegionParams assign_region_params(const RegionMap& map, const ParameterRanges& ranges, Rng& rng) {
  if (!(ranges.log10_alpha_min <= ranges.log10_alpha_max) ||
      !(ranges.sigma_min > 0.0 && ranges.sigma_min <= ranges.sigma_max)) {
    throw ConfigurationError("parameter ranges must satisfy min <= max and sigma > 0");
  }
  RegionParams params;
  params.regions.reserve(static_cast<std::size_t>(map.region_count));
  for (int r = 0; r < map.region_count; ++r) {
    const double log10_alpha =
        ranges.log10_alpha_min + rng.uniform() * (ranges.log10_alpha_max - ranges.log10_alpha_min);
    const double sigma = ranges.sigma_min + rng.uniform() * (ranges.sigma_max - ranges.sigma_min);
    params.regions.emplace_back(0.0, sigma, std::pow(10.0, log10_alpha));
  }
  return params;
}

PhantomSample synthesize_field(const RegionMap& map, const RegionParams& params, Rng& rng,
                               MMapping mapping) {
  if (params.regions.size() != static_cast<std::size_t>(map.region_count)) {
    throw DimensionMismatchError("region parameter count differs from region map");
  }
  const std::size_t h = map.labels.height();
  const std::size_t w = map.labels.width();
  std::vector<double> region_m(params.regions.size());
  std::vector<double> region_log10_alpha(params.regions.size());
  for (std::size_t i = 0; i < params.regions.size(); ++i) {
    region_m[i] = nakagami_m_for_alpha(params.regions[i].alpha(), mapping);
    region_log10_alpha[i] = std::log10(params.regions[i].alpha());
  }

  PhantomSample sample;
  sample.params = params;
  sample.truth.log10_alpha = Grid<double>(h, w);
  sample.truth.m = Grid<double>(h, w);
  sample.truth.sigma = Grid<double>(h, w);
  sample.truth.region_id = map.labels;
  std::vector<float> amplitudes(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto region = static_cast<std::size_t>(map.labels(r, c));
      const HKParams& hk = params.regions[region];
      amplitudes[r * w + c] = static_cast<float>(draw_hk(hk, rng));
      sample.truth.log10_alpha(r, c) = region_log10_alpha[region];
      sample.truth.m(r, c) = region_m[region];
      sample.truth.sigma(r, c) = hk.sigma();
    }
  }
  sample.envelope = EnvelopeField(h, w, std::move(amplitudes));
  return sample;
}

PhantomSample generate_phantom(const PhantomConfig& config, std::uint64_t seed) {
  const Rng root(seed);
  Rng shape_rng = root.split(1);
  Rng param_rng = root.split(2);
  Rng pixel_rng = root.split(3);
  const RegionMap map = generate_region_map(config.shapes, shape_rng);
  const RegionParams params = assign_region_params(map, config.ranges, param_rng);
  PhantomSample sample = synthesize_field(map, params, pixel_rng, config.m_mapping);
  sample.seed = seed;
  return sample;
}

// ---------------------------------------------------------------------------
// Dataset generation

void apply_default_split(DatasetConfig& config) {
  config.train = config.count * 8 / 10;
  config.val = config.count / 10;
}

std::string dataset_config_to_json(const DatasetConfig& config) {
  const auto& s = config.phantom.shapes;
  const auto& r = config.phantom.ranges;
  json j;
  j["height"] = s.height;
  j["width"] = s.width;
  j["count"] = config.count;
  j["base_seed"] = config.base_seed;
  j["split"] = {{"train", config.train}, {"val", config.val},
                {"test", config.count - std::min(config.count, config.train + config.val)}};
  j["shapes"] = {{"count_min", s.count_min},
                 {"count_max", s.count_max},
                 {"semi_axis_min", s.semi_axis_min},
                 {"semi_axis_max", s.semi_axis_max},
                 {"area_min", s.area_min},
                 {"area_max", s.area_max},
                 {"blob_fraction", s.blob_fraction},
                 {"blob_smoothing", s.blob_smoothing},
                 {"blob_quantile_min", s.blob_quantile_min},
                 {"blob_quantile_max", s.blob_quantile_max},
                 {"max_attempts", s.max_attempts}};
  j["ranges"] = {{"log10_alpha_min", r.log10_alpha_min},
                 {"log10_alpha_max", r.log10_alpha_max},
                 {"sigma_min", r.sigma_min},
                 {"sigma_max", r.sigma_max}};
  j["m_mapping"] = config.phantom.m_mapping == MMapping::moment ? "moment" : "mle_consistent";
  j["rng"] = "splitmix64-counter; image seed = mix64(base_seed + 0x9E3779B97F4A7C15 * (index + 1))";
  return j.dump();
}

void merge_dataset_config_json(DatasetConfig& config, std::string_view json_text, const std::string& origin) {
  try {
    json j = json::parse(json_text);
    if (j.contains("images") && j.contains("config")) j = j.at("config");
    auto take = [](const json& obj, const char* key, auto& target) {
      if (obj.contains(key)) target = obj.at(key).get<std::remove_reference_t<decltype(target)>>();
    };
    auto& s = config.phantom.shapes;
    auto& r = config.phantom.ranges;
    take(j, "height", s.height);
    take(j, "width", s.width);
    take(j, "count", config.count);
    take(j, "base_seed", config.base_seed);
    if (j.contains("split")) {
      take(j.at("split"), "train", config.train);
      take(j.at("split"), "val", config.val);
    }
    if (j.contains("shapes")) {
      const auto& sj = j.at("shapes");
      take(sj, "count_min", s.count_min);
      take(sj, "count_max", s.count_max);
      take(sj, "semi_axis_min", s.semi_axis_min);
      take(sj, "semi_axis_max", s.semi_axis_max);
      take(sj, "area_min", s.area_min);
      take(sj, "area_max", s.area_max);
      take(sj, "blob_fraction", s.blob_fraction);
      take(sj, "blob_smoothing", s.blob_smoothing);
      take(sj, "blob_quantile_min", s.blob_quantile_min);
      take(sj, "blob_quantile_max", s.blob_quantile_max);
      take(sj, "max_attempts", s.max_attempts);
    }
    if (j.contains("ranges")) {
      const auto& rj = j.at("ranges");
      take(rj, "log10_alpha_min", r.log10_alpha_min);
      take(rj, "log10_alpha_max", r.log10_alpha_max);
      take(rj, "sigma_min", r.sigma_min);
      take(rj, "sigma_max", r.sigma_max);
    }
    if (j.contains("m_mapping")) {
      const auto mapping = j.at("m_mapping").get<std::string>();
      if (mapping == "moment") {
        config.phantom.m_mapping = MMapping::moment;
      } else if (mapping == "mle_consistent") {
        config.phantom.m_mapping = MMapping::mle_consistent;
      } else {
        throw ConfigurationError(origin + ": unknown m_mapping '" + mapping + "'");
      }
    }
  } catch (const json::exception& e) {
    throw MalformedFileError(origin, "config", e.what());
  }
}

MapFile truth_to_map_file(const GroundTruthMaps& truth) {
  MapFile map;
  map.height = static_cast<std::uint32_t>(truth.log10_alpha.height());
  map.width = static_cast<std::uint32_t>(truth.log10_alpha.width());
  auto as_float = [](const auto& grid) {
    std::vector<float> v;
    v.reserve(grid.size());
    for (auto x : grid.values()) v.push_back(static_cast<float>(x));
    return v;
  };
  map.channels.push_back({"log10_alpha", as_float(truth.log10_alpha)});
  map.channels.push_back({"m", as_float(truth.m)});
  map.channels.push_back({"sigma", as_float(truth.sigma)});
  map.channels.push_back({"region_id", as_float(truth.region_id)});
  return map;
}

std::string image_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

Manifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir) {
  if (config.count == 0) throw ConfigurationError("dataset count must be >= 1");
  if (config.train + config.val > config.count) {
    throw ConfigurationError("train + val split exceeds image count");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError((out_dir / "images").string(), ec.message());

  Manifest manifest;
  manifest.base_seed = config.base_seed;
  manifest.config_json = dataset_config_to_json(config);
  manifest.images.resize(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    ManifestImage& img = manifest.images[i];
    img.id = image_id(i);
    img.seed = derive_seed(config.base_seed, i);
    img.split = i < config.train ? Split::train : (i < config.train + config.val ? Split::val : Split::test);
    img.envelope = "images/" + img.id + "_envelope.qusf";
    img.truth = "images/" + img.id + "_truth.qusf";
  }

  detail::parallel_for(config.count, config.jobs, [&](std::size_t i) {
    const ManifestImage& img = manifest.images[i];
    const PhantomSample sample = generate_phantom(config.phantom, img.seed);
    write_map(out_dir / img.envelope, to_map_file(sample.envelope));
    write_map(out_dir / img.truth, truth_to_map_file(sample.truth));
  });
  write_manifest(out_dir / kManifestFileName, manifest);
  return manifest;
}

}  // namespace qus
