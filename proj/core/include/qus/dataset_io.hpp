#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qus/parametric_image.hpp"
#include "qus/speckle_models.hpp"

namespace qus {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

// MapFile byte layout (all integers little-endian):
//
//   offset  size  field
//   0       4     magic, ASCII "QUSF"
//   4       4     u32 version = 1
//   8       4     u32 height
//   12      4     u32 width
//   16      4     u32 channel count C >= 1
//   20      4     u32 value encoding = 1 (IEEE-754 binary32, little-endian)
//   24      ...   C channel names, each u16 byte length + UTF-8 bytes
//   ...     ...   payload: C * height * width float32 values, channel after
//                 channel, each channel row-major
//
// Invalid pixels are stored as quiet NaN.

inline constexpr std::uint32_t kMapFileVersion = 1;
inline constexpr std::uint32_t kEncodingFloat32LE = 1;

struct MapChannel {
  std::string name;
  std::vector<float> values;

  friend bool operator==(const MapChannel&, const MapChannel&) = default;
};

struct MapFile {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<MapChannel> channels;

  const MapChannel* find(std::string_view name) const noexcept;
  const MapChannel& channel(std::string_view name) const;  // throws DimensionMismatchError
  std::size_t payload_bytes() const noexcept {
    return std::size_t{height} * width * channels.size() * sizeof(float);
  }
};

/// Serializes after checking channel sizes and name uniqueness.
std::vector<std::byte> encode_map(const MapFile& map);
/// `origin` labels errors (usually the path). Throws MalformedFileError
/// naming the violated field: magic, version, encoding, header, channel
/// names, or payload.
MapFile decode_map(std::span<const std::byte> bytes, const std::string& origin = "<memory>");

void write_map(const std::filesystem::path& path, const MapFile& map);
MapFile read_map(const std::filesystem::path& path);

inline constexpr std::string_view kEnvelopeChannel = "envelope";

MapFile to_map_file(const EnvelopeField& field);
MapFile to_map_file(std::span<const ParametricImage> images);
/// Envelope channel, or the only channel when the file has exactly one.
EnvelopeField envelope_from_map(const MapFile& map, const std::string& origin = "<memory>");
/// Channel named after `kind`; validity derived from NaN sentinels.
ParametricImage parametric_from_map(const MapFile& map, ParameterKind kind);
/// Any channel as a double grid (ground-truth maps).
Grid<double> grid_from_map(const MapFile& map, std::string_view channel);

/// Writes an 8-bit binary PGM (P5). Values map affinely from [lo, hi] onto
/// [0, 255] and clamp; invalid pixels render as 0.
std::vector<std::byte> encode_pgm(const ParametricImage& image, double lo, double hi);
void render_pgm(const ParametricImage& image, double lo, double hi, const std::filesystem::path& path);

enum class Split { train, val, test };
const char* to_string(Split s) noexcept;
std::optional<Split> split_from_string(std::string_view s) noexcept;

struct ManifestImage {
  std::string id;
  std::uint64_t seed = 0;
  Split split = Split::train;
  std::string envelope;  ///< relative to the manifest directory
  std::string truth;

  friend bool operator==(const ManifestImage&, const ManifestImage&) = default;
};

struct Manifest {
  std::string toolkit_version{kToolkitVersion};
  std::uint64_t base_seed = 0;
  /// Effective generation config, serialized JSON object.
  std::string config_json = "{}";
  std::vector<ManifestImage> images;

  std::vector<const ManifestImage*> in_split(Split split) const;
};

inline constexpr std::string_view kManifestFileName = "manifest.json";

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text, const std::string& origin = "<memory>");

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Parses the manifest, checks ids are unique, and with `verify_files`
/// that every referenced file exists and parses as a MapFile.
Manifest read_manifest(const std::filesystem::path& path, bool verify_files = false);

/// Writes bytes to path, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);
std::vector<std::byte> read_file(const std::filesystem::path& path);

}  // namespace qus
