#include "qus/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qus/dataset_io.hpp"
#include "qus/errors.hpp"
#include "qus/metrics.hpp"
#include "qus/parametric_imaging.hpp"
#include "qus/phantom_synth.hpp"

namespace qus::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad flag values or combinations; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
constexpr std::string_view kPredictionSuffix = "_pred.qusf";
constexpr std::string_view kPredictionManifest = "predictions.json";

template <class T>
T parse_number(std::string_view text, std::string_view flag) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw UsageError(std::string(flag) + ": '" + std::string(text) + "' is not a valid number");
  }
  return value;
}

template <class T>
std::pair<T, T> parse_pair(std::string_view text, char sep, std::string_view flag) {
  const auto at = text.find(sep);
  if (at == std::string_view::npos) {
    throw UsageError(std::string(flag) + ": expected two values separated by '" + sep + "', got '" +
                     std::string(text) + "'");
  }
  return {parse_number<T>(text.substr(0, at), flag), parse_number<T>(text.substr(at + 1), flag)};
}

std::pair<std::size_t, std::size_t> parse_dims(const std::string& text, std::string_view flag) {
  auto lowered = text;
  std::replace(lowered.begin(), lowered.end(), 'X', 'x');
  const auto dims = parse_pair<std::size_t>(lowered, 'x', flag);
  if (dims.first == 0 || dims.second == 0) throw UsageError(std::string(flag) + ": dimensions must be >= 1");
  return dims;
}

std::pair<double, double> parse_range(const std::string& text, std::string_view flag) {
  const auto r = parse_pair<double>(text, ',', flag);
  if (!(r.first < r.second)) {
    throw UsageError(std::string(flag) + ": lower bound must be below upper bound, got '" + text + "'");
  }
  return r;
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

// ---------------------------------------------------------------------------
// generate

struct GenerateFlags {
  std::string out;
  std::string config;
  std::string size;
  std::string split;
  std::string log10_alpha_range;
  std::string sigma_range;
  std::string shape_count;
  std::string m_mapping;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  CLI::Option* count_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

DatasetConfig resolve_generate(const GenerateFlags& f) {
  DatasetConfig cfg;
  cfg.train = kUnset;
  cfg.val = kUnset;
  if (!f.config.empty()) merge_dataset_config_json(cfg, read_text(f.config), f.config);

  auto& shapes = cfg.phantom.shapes;
  auto& ranges = cfg.phantom.ranges;
  if (f.count_opt->count() > 0) cfg.count = f.count;
  if (f.seed_opt->count() > 0) cfg.base_seed = f.seed;
  if (!f.size.empty()) std::tie(shapes.height, shapes.width) = parse_dims(f.size, "--size");
  if (!f.split.empty()) std::tie(cfg.train, cfg.val) = parse_pair<std::size_t>(f.split, ',', "--split");
  if (!f.log10_alpha_range.empty()) {
    std::tie(ranges.log10_alpha_min, ranges.log10_alpha_max) = parse_range(f.log10_alpha_range, "--log10-alpha-range");
  }
  if (!f.sigma_range.empty()) std::tie(ranges.sigma_min, ranges.sigma_max) = parse_range(f.sigma_range, "--sigma-range");
  if (!f.shape_count.empty()) {
    std::tie(shapes.count_min, shapes.count_max) = parse_pair<int>(f.shape_count, ',', "--shapes");
  }
  if (f.m_mapping == "moment") cfg.phantom.m_mapping = MMapping::moment;
  if (f.m_mapping == "mle_consistent") cfg.phantom.m_mapping = MMapping::mle_consistent;
  cfg.jobs = f.jobs;

  if (cfg.count == 0) throw UsageError("--count must be given (directly or via --config) and be >= 1");
  if (cfg.train == kUnset || cfg.val == kUnset) apply_default_split(cfg);
  if (cfg.train + cfg.val > cfg.count) {
    throw UsageError("--split " + std::to_string(cfg.train) + "," + std::to_string(cfg.val) +
                     " needs " + std::to_string(cfg.train + cfg.val) + " images but --count is " +
                     std::to_string(cfg.count));
  }
  if (shapes.height < 8 || shapes.width < 8) throw UsageError("--size must be at least 8x8");
  if (!(ranges.sigma_min > 0.0)) throw UsageError("--sigma-range lower bound must be > 0");
  if (shapes.count_min < 0 || shapes.count_min > shapes.count_max) {
    throw UsageError("--shapes expects 0 <= min <= max");
  }
  if (cfg.jobs == 0) throw UsageError("--jobs must be >= 1");
  return cfg;
}

void add_generate(CLI::App& app, GenerateFlags& f) {
  app.add_option("--out", f.out, "Output dataset directory")->required();
  f.count_opt = app.add_option("--count", f.count, "Number of images");
  app.add_option("--size", f.size, "Image size HxW (default 256x128)");
  f.seed_opt = app.add_option("--seed", f.seed, "Base seed (default 0)");
  app.add_option("--split", f.split, "TRAIN,VAL image counts; the rest is test (default 80%/10%)");
  app.add_option("--config", f.config, "Config JSON (bare config or a manifest); flags override it");
  app.add_option("--log10-alpha-range", f.log10_alpha_range, "lo,hi for log10(alpha) (default -0.6,1.0)");
  app.add_option("--sigma-range", f.sigma_range, "lo,hi for sigma (default 0.5,2.0)");
  app.add_option("--shapes", f.shape_count, "min,max shapes per image (default 1,6)");
  app.add_option("--m-mapping", f.m_mapping, "Ground-truth m from alpha")
      ->check(CLI::IsMember({"mle_consistent", "moment"}));
  app.add_option("--jobs", f.jobs, "Worker threads (output is identical for any value)");
}

int cmd_generate(const GenerateFlags& f, std::ostream& out) {
  const DatasetConfig cfg = resolve_generate(f);
  const Manifest manifest = generate_dataset(cfg, f.out);
  json echo;
  echo["command"] = "generate";
  echo["out"] = f.out;
  echo["config"] = json::parse(manifest.config_json);
  out << echo.dump(2) << '\n';
  out << "wrote " << manifest.images.size() << " images (train " << manifest.in_split(Split::train).size()
      << ", val " << manifest.in_split(Split::val).size() << ", test " << manifest.in_split(Split::test).size()
      << ") to " << f.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateFlags {
  std::string input;
  std::string out;
  std::string patch = "32x16";
  std::string estimator = "both";
  std::string border = "shrink";
  std::string split = "test";
  std::size_t stride = 1;
  std::size_t min_samples = 128;
  unsigned jobs = 1;
};

PatchMapOptions resolve_estimate(const EstimateFlags& f) {
  PatchMapOptions opt;
  const auto [h, w] = parse_dims(f.patch, "--patch");
  if (h < 4 || w < 4) throw UsageError("--patch must be at least 4x4, got " + f.patch);
  opt.patch = {h, w};
  opt.estimator = f.estimator == "alpha" ? EstimatorKind::alpha
                  : f.estimator == "nakagami" ? EstimatorKind::nakagami
                                              : EstimatorKind::both;
  opt.border = f.border == "mirror" ? BorderPolicy::mirror : BorderPolicy::shrink;
  if (f.stride == 0) throw UsageError("--stride must be >= 1");
  if (f.min_samples == 0) throw UsageError("--min-samples must be >= 1");
  if (f.min_samples > h * w) {
    throw UsageError("--min-samples " + std::to_string(f.min_samples) + " exceeds the patch sample count " +
                     std::to_string(h * w) + "; every pixel would be invalid");
  }
  if (f.jobs == 0) throw UsageError("--jobs must be >= 1");
  opt.stride = f.stride;
  opt.min_samples = f.min_samples;
  opt.jobs = f.jobs;
  return opt;
}

json estimate_echo(const EstimateFlags& f, const PatchMapOptions& opt) {
  return {{"patch", {{"height", opt.patch.height}, {"width", opt.patch.width}}},
          {"estimator", f.estimator},
          {"border", f.border},
          {"stride", opt.stride},
          {"min_samples", opt.min_samples},
          {"alpha_clamp", {opt.clamp.min, opt.clamp.max}}};
}

MapFile maps_to_file(const PatchMaps& maps) {
  std::vector<ParametricImage> images;
  for (const auto* m : {&maps.log10_alpha, &maps.m, &maps.omega}) {
    if (*m) images.push_back(**m);
  }
  return to_map_file(images);
}

void add_estimate(CLI::App& app, EstimateFlags& f) {
  app.add_option("--input", f.input, "Envelope MapFile, or a dataset directory / manifest")->required();
  app.add_option("--out", f.out, "Output MapFile (single input) or directory (dataset)")->required();
  app.add_option("--patch", f.patch, "Patch size HxW")->capture_default_str();
  app.add_option("--estimator", f.estimator, "Estimator")
      ->check(CLI::IsMember({"alpha", "nakagami", "both"}))
      ->capture_default_str();
  app.add_option("--border", f.border, "Border policy")
      ->check(CLI::IsMember({"shrink", "mirror"}))
      ->capture_default_str();
  app.add_option("--stride", f.stride, "Estimate every N pixels and interpolate bilinearly")->capture_default_str();
  app.add_option("--min-samples", f.min_samples, "Windows with fewer samples are invalid")->capture_default_str();
  app.add_option("--split", f.split, "Dataset split to process")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  app.add_option("--jobs", f.jobs, "Worker threads (output is identical for any value)");
}

fs::path manifest_path_for(const fs::path& input) {
  return fs::is_directory(input) ? input / kManifestFileName : input;
}

bool is_dataset_input(const fs::path& input) {
  return fs::is_directory(input) || input.extension() == ".json";
}

int cmd_estimate(const EstimateFlags& f, std::ostream& out) {
  const PatchMapOptions opt = resolve_estimate(f);
  json echo;
  echo["command"] = "estimate";
  echo["input"] = f.input;
  echo["options"] = estimate_echo(f, opt);

  if (!is_dataset_input(f.input)) {
    const EnvelopeField field = envelope_from_map(read_map(f.input), f.input);
    write_map(f.out, maps_to_file(patch_map(field, opt)));
    echo["out"] = f.out;
    out << echo.dump(2) << '\n';
    return kExitOk;
  }

  const fs::path manifest_path = manifest_path_for(f.input);
  const Manifest manifest = read_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  const fs::path out_dir = f.out;
  json listing = json::array();
  for (const auto& img : manifest.images) {
    if (f.split != "all" && f.split != to_string(img.split)) continue;
    const fs::path source = root / img.envelope;
    const EnvelopeField field = envelope_from_map(read_map(source), source.string());
    const std::string name = img.id + std::string(kPredictionSuffix);
    write_map(out_dir / name, maps_to_file(patch_map(field, opt)));
    listing.push_back({{"id", img.id}, {"pred", name}});
  }
  echo["toolkit_version"] = std::string(kToolkitVersion);
  echo["source_manifest"] = fs::absolute(manifest_path).lexically_normal().string();
  echo["split"] = f.split;
  echo["images"] = listing;
  write_text(out_dir / kPredictionManifest, echo.dump(2) + "\n");
  echo.erase("images");
  out << echo.dump(2) << '\n';
  out << "wrote " << listing.size() << " prediction maps to " << f.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::string dataset;
  std::string truth;
  std::string pred;
  std::string split = "test";
  std::string baseline;
  std::string label = "patch";
  std::string csv;
  std::string json_out;
  std::string denominator = "per_pixel";
};

void add_eval(CLI::App& app, EvalFlags& f) {
  auto* dataset = app.add_option("--dataset", f.dataset, "Dataset directory or manifest (with --pred DIR)");
  auto* truth = app.add_option("--truth", f.truth, "Single ground-truth MapFile (with --pred FILE)");
  dataset->excludes(truth);
  app.add_option("--pred", f.pred, "Prediction directory (dataset) or MapFile (single)")->required();
  app.add_option("--split", f.split, "Dataset split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  app.add_option("--baseline", f.baseline, "Report JSON of a baseline; adds improvement percentages");
  app.add_option("--label", f.label, "Method label recorded in the report")->capture_default_str();
  app.add_option("--csv", f.csv, "Write per-image CSV here");
  app.add_option("--json", f.json_out, "Write the JSON report here (default: stdout)");
  app.add_option("--denominator", f.denominator, "RRMSE denominator")
      ->check(CLI::IsMember({"per_pixel", "map_mean"}))
      ->capture_default_str();
}

ImageMetrics evaluate_image(const std::string& id, const MapFile& truth, const MapFile& pred,
                            RrmseDenominator denominator, std::ostream& err) {
  ImageMetrics row;
  row.id = id;
  const Grid<double> truth_alpha = grid_from_map(truth, channel_name(ParameterKind::log10_alpha));
  std::optional<ParametricImage> pred_alpha;
  std::optional<ParametricImage> pred_m;
  if (pred.find(channel_name(ParameterKind::log10_alpha))) {
    pred_alpha = apply_external_map(pred, ParameterKind::log10_alpha, truth.height, truth.width);
  }
  if (pred.find(channel_name(ParameterKind::m))) {
    pred_m = apply_external_map(pred, ParameterKind::m, truth.height, truth.width);
  }
  if (!pred_alpha && !pred_m) {
    throw DimensionMismatchError(id + ": prediction has neither a log10_alpha nor an m channel");
  }

  RrmseOptions options;
  options.denominator = denominator;
  options.exclusion_reference = &truth_alpha;
  try {
    if (pred_alpha) row.log10_alpha = rrmse(*pred_alpha, truth_alpha, options);
  } catch (const EmptyDomainError& e) {
    err << "warning: " << id << ": log10_alpha: " << e.what() << '\n';
  }
  try {
    if (pred_m) row.m = rrmse(*pred_m, grid_from_map(truth, channel_name(ParameterKind::m)), options);
  } catch (const EmptyDomainError& e) {
    err << "warning: " << id << ": m: " << e.what() << '\n';
  }
  if (pred_alpha && pred_m) {
    try {
      row.alpha_m_correlation = map_correlation(*pred_alpha, *pred_m);
    } catch (const Error&) {
      // Constant or empty maps carry no correlation; the column stays blank.
    }
  }
  return row;
}

int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  if (f.dataset.empty() == f.truth.empty()) throw UsageError("eval needs exactly one of --dataset or --truth");
  MetricReport report;
  report.label = f.label;
  report.denominator = f.denominator == "map_mean" ? RrmseDenominator::map_mean : RrmseDenominator::per_pixel;

  if (!f.truth.empty()) {
    report.images.push_back(
        evaluate_image(fs::path(f.truth).stem().string(), read_map(f.truth), read_map(f.pred), report.denominator, err));
  } else {
    const fs::path manifest_path = manifest_path_for(f.dataset);
    const Manifest manifest = read_manifest(manifest_path);
    const fs::path root = manifest_path.parent_path();
    for (const auto& img : manifest.images) {
      if (f.split != "all" && f.split != to_string(img.split)) continue;
      const fs::path pred_path = fs::path(f.pred) / (img.id + std::string(kPredictionSuffix));
      report.images.push_back(
          evaluate_image(img.id, read_map(root / img.truth), read_map(pred_path), report.denominator, err));
    }
    if (report.images.empty()) throw UsageError("split '" + f.split + "' of " + f.dataset + " has no images");
  }

  std::optional<ReportMeans> baseline;
  if (!f.baseline.empty()) baseline = report_means_from_json(read_text(f.baseline), f.baseline);
  const std::string json_text = report_to_json(report, baseline ? &*baseline : nullptr);
  if (!f.csv.empty()) write_text(f.csv, report_to_csv(report));
  if (!f.json_out.empty()) {
    write_text(f.json_out, json_text);
    const Summary a = report.log10_alpha();
    const Summary m = report.m();
    out << "images " << report.images.size() << "; rrmse log10_alpha " << a.mean << " +- " << a.stddev
        << "; rrmse m " << m.mean << " +- " << m.stddev << "; excluded pixels " << report.excluded_log10_alpha()
        << '\n';
  } else {
    out << json_text;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// render

struct RenderFlags {
  std::string input;
  std::string channel;
  std::string range;
  std::string out;
};

void add_render(CLI::App& app, RenderFlags& f) {
  app.add_option("--input", f.input, "MapFile to render")->required();
  app.add_option("--channel", f.channel, "Channel name (optional when the file has one channel)");
  app.add_option("--range", f.range, "lo,hi mapped to 0..255 (default: valid min,max)");
  app.add_option("--out", f.out, "Output PGM path")->required();
}

int cmd_render(const RenderFlags& f, std::ostream& out) {
  const MapFile map = read_map(f.input);
  const MapChannel* channel = nullptr;
  if (!f.channel.empty()) {
    channel = map.find(f.channel);
  } else if (map.channels.size() == 1) {
    channel = &map.channels.front();
  }
  if (channel == nullptr) {
    std::string names;
    for (const auto& c : map.channels) names += (names.empty() ? "" : ", ") + c.name;
    throw UsageError("--channel must name one of: " + names);
  }
  // The parameter kind only matters for channel naming, not for rendering.
  const ParameterKind kind = parameter_kind_from_name(channel->name).value_or(ParameterKind::log10_alpha);
  const ParametricImage image(Grid<float>(map.height, map.width, channel->values), kind);

  double lo = 0.0, hi = 0.0;
  if (!f.range.empty()) {
    std::tie(lo, hi) = parse_range(f.range, "--range");
  } else {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (float v : channel->values) {
      if (std::isnan(v)) continue;
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
    }
    if (!(lo < hi)) throw UsageError("channel '" + channel->name + "' is constant or empty; pass --range");
  }
  render_pgm(image, lo, hi, f.out);
  out << "rendered " << channel->name << " [" << lo << ", " << hi << "] to " << f.out << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Homodyned-K speckle toolkit: phantom generation, patch-based QUS imaging, evaluation"};
  app.name(args.empty() ? "qus" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  GenerateFlags gen;
  EstimateFlags est;
  EvalFlags ev;
  RenderFlags ren;
  auto* generate = app.add_subcommand("generate", "Synthesize a phantom dataset");
  add_generate(*generate, gen);
  auto* estimate = app.add_subcommand("estimate", "Patch-based parametric maps from envelope data");
  add_estimate(*estimate, est);
  auto* eval = app.add_subcommand("eval", "RRMSE, improvement and alpha-m correlation report");
  add_eval(*eval, ev);
  auto* render = app.add_subcommand("render", "Render one map channel as an 8-bit PGM");
  add_render(*render, ren);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("qus");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, out);
    if (estimate->parsed()) return cmd_estimate(est, out);
    if (eval->parsed()) return cmd_eval(ev, out, err);
    return cmd_render(ren, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace qus::cli
