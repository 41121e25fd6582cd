#include "qus/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qus/errors.hpp"

namespace qus {

using nlohmann::json;

namespace {

constexpr std::array<char, 4> kMagic = {'Q', 'U', 'S', 'F'};
constexpr std::size_t kFixedHeaderBytes = 24;

class ByteWriter {
 public:
  void u16(std::uint16_t v) {
    out_.push_back(std::byte(v & 0xFF));
    out_.push_back(std::byte(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out_.push_back(std::byte((v >> s) & 0xFF));
  }
  void bytes(std::string_view s) {
    for (char c : s) out_.push_back(std::byte(static_cast<unsigned char>(c)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::byte> take() { return std::move(out_); }
  void reserve(std::size_t n) { out_.reserve(n); }

 private:
  std::vector<std::byte> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> in, const std::string& origin) : in_(in), origin_(origin) {}

  std::uint16_t u16(const char* field) {
    need(2, field);
    const auto v = static_cast<std::uint16_t>(std::to_integer<unsigned>(in_[pos_]) |
                                              (std::to_integer<unsigned>(in_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* field) {
    need(n, field);
    std::string s(n, '\0');
    std::memcpy(s.data(), in_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  float f32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(v);
  }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (remaining() < n) throw MalformedFileError(origin_, field, "truncated");
  }

  std::span<const std::byte> in_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

void check_channels(const MapFile& map) {
  if (map.channels.empty()) throw ConfigurationError("map file needs at least one channel");
  std::set<std::string> seen;
  const std::size_t pixels = std::size_t{map.height} * map.width;
  for (const auto& ch : map.channels) {
    if (ch.name.empty() || ch.name.size() > 0xFFFF) {
      throw ConfigurationError("channel names must be 1..65535 bytes");
    }
    if (!seen.insert(ch.name).second) throw ConfigurationError("duplicate channel name: " + ch.name);
    if (ch.values.size() != pixels) {
      throw DimensionMismatchError("channel '" + ch.name + "' has " + std::to_string(ch.values.size()) +
                                   " values, expected " + std::to_string(pixels));
    }
  }
}

}  // namespace

const MapChannel* MapFile::find(std::string_view name) const noexcept {
  for (const auto& ch : channels) {
    if (ch.name == name) return &ch;
  }
  return nullptr;
}

const MapChannel& MapFile::channel(std::string_view name) const {
  if (const auto* ch = find(name)) return *ch;
  throw DimensionMismatchError("map file has no channel named '" + std::string(name) + "'");
}

std::vector<std::byte> encode_map(const MapFile& map) {
  check_channels(map);
  ByteWriter w;
  w.reserve(kFixedHeaderBytes + map.payload_bytes() + 64);
  w.bytes(std::string_view(kMagic.data(), kMagic.size()));
  w.u32(kMapFileVersion);
  w.u32(map.height);
  w.u32(map.width);
  w.u32(static_cast<std::uint32_t>(map.channels.size()));
  w.u32(kEncodingFloat32LE);
  for (const auto& ch : map.channels) {
    w.u16(static_cast<std::uint16_t>(ch.name.size()));
    w.bytes(ch.name);
  }
  for (const auto& ch : map.channels) {
    for (float v : ch.values) w.f32(v);
  }
  return w.take();
}

MapFile decode_map(std::span<const std::byte> bytes, const std::string& origin) {
  ByteReader r(bytes, origin);
  if (r.str(4, "magic") != std::string_view(kMagic.data(), kMagic.size())) {
    throw MalformedFileError(origin, "magic", "expected \"QUSF\"");
  }
  if (const auto version = r.u32("version"); version != kMapFileVersion) {
    throw MalformedFileError(origin, "version", "unsupported version " + std::to_string(version));
  }
  MapFile map;
  map.height = r.u32("header");
  map.width = r.u32("header");
  const std::uint32_t count = r.u32("header");
  if (const auto enc = r.u32("encoding"); enc != kEncodingFloat32LE) {
    throw MalformedFileError(origin, "encoding", "unknown value encoding " + std::to_string(enc));
  }
  if (count == 0) throw MalformedFileError(origin, "header", "zero channels");
  if (count > r.remaining() / 2) throw MalformedFileError(origin, "header", "channel count exceeds file size");
  std::set<std::string> seen;
  map.channels.resize(count);
  for (auto& ch : map.channels) {
    const std::uint16_t len = r.u16("channel names");
    ch.name = r.str(len, "channel names");
    if (ch.name.empty()) throw MalformedFileError(origin, "channel names", "empty channel name");
    if (!seen.insert(ch.name).second) {
      throw MalformedFileError(origin, "channel names", "duplicate channel '" + ch.name + "'");
    }
  }
  const std::size_t pixels = std::size_t{map.height} * map.width;
  if (r.remaining() != map.payload_bytes()) {
    throw MalformedFileError(origin, "payload",
                             "expected " + std::to_string(map.payload_bytes()) + " bytes, found " +
                                 std::to_string(r.remaining()));
  }
  for (auto& ch : map.channels) {
    ch.values.resize(pixels);
    for (auto& v : ch.values) v = r.f32();
  }
  return map;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError(path.string(), "read failed");
  return bytes;
}

void write_map(const std::filesystem::path& path, const MapFile& map) {
  write_file(path, encode_map(map));
}

MapFile read_map(const std::filesystem::path& path) {
  return decode_map(read_file(path), path.string());
}

MapFile to_map_file(const EnvelopeField& field) {
  MapFile map;
  map.height = static_cast<std::uint32_t>(field.height());
  map.width = static_cast<std::uint32_t>(field.width());
  map.channels.push_back({std::string(kEnvelopeChannel), field.grid().storage()});
  return map;
}

MapFile to_map_file(std::span<const ParametricImage> images) {
  if (images.empty()) throw ConfigurationError("no parametric images to store");
  MapFile map;
  map.height = static_cast<std::uint32_t>(images.front().height());
  map.width = static_cast<std::uint32_t>(images.front().width());
  for (const auto& img : images) {
    if (img.height() != map.height || img.width() != map.width) {
      throw DimensionMismatchError("parametric images in one file must share dimensions");
    }
    map.channels.push_back({std::string(channel_name(img.kind())), img.values().storage()});
  }
  return map;
}

EnvelopeField envelope_from_map(const MapFile& map, const std::string& origin) {
  const MapChannel* ch = map.find(kEnvelopeChannel);
  if (ch == nullptr) {
    if (map.channels.size() != 1) {
      throw MalformedFileError(origin, "channel names", "no 'envelope' channel");
    }
    ch = &map.channels.front();
  }
  return EnvelopeField(Grid<float>(map.height, map.width, ch->values));
}

ParametricImage parametric_from_map(const MapFile& map, ParameterKind kind) {
  const MapChannel& ch = map.channel(channel_name(kind));
  return ParametricImage(Grid<float>(map.height, map.width, ch.values), kind);
}

Grid<double> grid_from_map(const MapFile& map, std::string_view channel) {
  const MapChannel& ch = map.channel(channel);
  return Grid<double>(map.height, map.width, std::vector<double>(ch.values.begin(), ch.values.end()));
}

std::vector<std::byte> encode_pgm(const ParametricImage& image, double lo, double hi) {
  if (!(lo < hi)) throw ConfigurationError("render range requires lo < hi");
  std::ostringstream header;
  header << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  const std::string h = header.str();
  std::vector<std::byte> out;
  out.reserve(h.size() + image.height() * image.width());
  for (char c : h) out.push_back(std::byte(static_cast<unsigned char>(c)));
  const double scale = 255.0 / (hi - lo);
  for (std::size_t r = 0; r < image.height(); ++r) {
    for (std::size_t c = 0; c < image.width(); ++c) {
      unsigned level = 0;
      if (image.valid(r, c)) {
        const double v = std::clamp((image.value(r, c) - lo) * scale, 0.0, 255.0);
        level = static_cast<unsigned>(std::lround(v));
      }
      out.push_back(std::byte(level));
    }
  }
  return out;
}

void render_pgm(const ParametricImage& image, double lo, double hi, const std::filesystem::path& path) {
  write_file(path, encode_pgm(image, lo, hi));
}

// ---------------------------------------------------------------------------
// Manifest

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

std::optional<Split> split_from_string(std::string_view s) noexcept {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  return std::nullopt;
}

std::vector<const ManifestImage*> Manifest::in_split(Split split) const {
  std::vector<const ManifestImage*> out;
  for (const auto& img : images) {
    if (img.split == split) out.push_back(&img);
  }
  return out;
}

std::string manifest_to_json(const Manifest& manifest) {
  json j;
  j["toolkit_version"] = manifest.toolkit_version;
  j["base_seed"] = manifest.base_seed;
  j["config"] = json::parse(manifest.config_json);
  json images = json::array();
  for (const auto& img : manifest.images) {
    images.push_back({{"id", img.id},
                      {"seed", img.seed},
                      {"split", to_string(img.split)},
                      {"envelope", img.envelope},
                      {"truth", img.truth}});
  }
  j["images"] = std::move(images);
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text, const std::string& origin) {
  Manifest m;
  try {
    const json j = json::parse(text);
    m.toolkit_version = j.at("toolkit_version").get<std::string>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.config_json = j.at("config").dump();
    std::set<std::string> ids;
    for (const auto& item : j.at("images")) {
      ManifestImage img;
      img.id = item.at("id").get<std::string>();
      img.seed = item.at("seed").get<std::uint64_t>();
      const auto split = split_from_string(item.at("split").get<std::string>());
      if (!split) throw MalformedFileError(origin, "split", "unknown split for image " + img.id);
      img.split = *split;
      img.envelope = item.at("envelope").get<std::string>();
      img.truth = item.at("truth").get<std::string>();
      if (!ids.insert(img.id).second) {
        throw MalformedFileError(origin, "images", "duplicate image id " + img.id);
      }
      m.images.push_back(std::move(img));
    }
  } catch (const json::exception& e) {
    throw MalformedFileError(origin, "manifest", e.what());
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  const std::string text = manifest_to_json(manifest);
  write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

Manifest read_manifest(const std::filesystem::path& path, bool verify_files) {
  const auto bytes = read_file(path);
  const std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  Manifest m = manifest_from_json(text, path.string());
  if (verify_files) {
    const auto dir = path.parent_path();
    for (const auto& img : m.images) {
      for (const auto& rel : {img.envelope, img.truth}) {
        const auto file = dir / rel;
        if (!std::filesystem::exists(file)) {
          throw MalformedFileError(path.string(), "images", "missing file " + file.string());
        }
        (void)read_map(file);
      }
    }
  }
  return m;
}

}  // namespace qus
