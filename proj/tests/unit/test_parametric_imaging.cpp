#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "qus/errors.hpp"
#include "qus/parametric_imaging.hpp"
#include "support.hpp"

using namespace qus;

namespace {

EnvelopeField homogeneous(std::size_t h, std::size_t w, double alpha, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(h * w);
  for (auto& x : v) x = static_cast<float>(draw_hk(HKParams(0.0, 1.0, alpha), rng));
  return EnvelopeField(h, w, std::move(v));
}

std::vector<double> interior_values(const ParametricImage& img, std::size_t margin_r, std::size_t margin_c) {
  std::vector<double> out;
  for (std::size_t r = margin_r; r + margin_r < img.height(); ++r)
    for (std::size_t c = margin_c; c + margin_c < img.width(); ++c)
      if (img.valid(r, c)) out.push_back(img.value(r, c));
  return out;
}

double iqr(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() * 3 / 4] - v[v.size() / 4];
}

bool same_bits(float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }

/// Independent window reference: gathers the samples of one window by index.
LogMoments brute_window(const EnvelopeField& f, long r, long c, long ph, long pw, bool mirror) {
  const long H = static_cast<long>(f.height());
  const long W = static_cast<long>(f.width());
  auto reflect = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  LogMoments m;
  for (long i = r - ph / 2; i < r - ph / 2 + ph; ++i) {
    for (long j = c - pw / 2; j < c - pw / 2 + pw; ++j) {
      if (mirror) {
        m.add(f(static_cast<std::size_t>(reflect(i, H)), static_cast<std::size_t>(reflect(j, W))));
      } else if (i >= 0 && i < H && j >= 0 && j < W) {
        m.add(f(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
      }
    }
  }
  return m;
}

float expected_log10_alpha(const LogMoments& m) {
  const auto r = estimate_alpha(m);
  return r.valid ? static_cast<float>(std::log10(r.value)) : kInvalidSentinel;
}

}  // namespace

TEST_CASE("homogeneous field gives log10 alpha near the truth") {
  const EnvelopeField f = homogeneous(256, 128, 4.0, 1);
  const PatchMaps maps = patch_map(f);
  REQUIRE(maps.log10_alpha);
  REQUIRE(maps.m);
  REQUIRE(maps.omega);
  CHECK(std::abs(test::median(interior_values(*maps.log10_alpha, 16, 8)) - std::log10(4.0)) < 0.1);
  CHECK(maps.log10_alpha->kind() == ParameterKind::log10_alpha);
  CHECK(maps.m->height() == 256);
  CHECK(maps.m->width() == 128);
}

TEST_CASE("estimator selection") {
  const EnvelopeField f = homogeneous(64, 32, 2.0, 2);
  PatchMapOptions opt;
  opt.estimator = EstimatorKind::alpha;
  auto a = patch_map(f, opt);
  CHECK(a.log10_alpha);
  CHECK_FALSE(a.m);
  opt.estimator = EstimatorKind::nakagami;
  auto n = patch_map(f, opt);
  CHECK_FALSE(n.log10_alpha);
  CHECK(n.m);
  CHECK(n.omega);
}

TEST_CASE("constant field is invalid everywhere") {
  const EnvelopeField f(64, 32, std::vector<float>(64 * 32, 1.5f));
  const PatchMaps maps = patch_map(f);
  CHECK(maps.log10_alpha->valid_count() == 0);
  CHECK(maps.m->valid_count() == 0);
  CHECK(std::isnan(maps.m->value(10, 10)));
}

TEST_CASE("patch size must fit the field") {
  const EnvelopeField f = homogeneous(64, 32, 2.0, 3);
  PatchMapOptions opt;
  opt.patch = {65, 16};
  CHECK_THROWS_AS(patch_map(f, opt), ConfigurationError);
  opt.patch = {32, 33};
  CHECK_THROWS_AS(patch_map(f, opt), ConfigurationError);
  opt.patch = {3, 16};
  CHECK_THROWS_AS(patch_map(f, opt), ConfigurationError);
  opt.patch = {32, 16};
  opt.stride = 0;
  CHECK_THROWS_AS(patch_map(f, opt), ConfigurationError);
  opt.stride = 1;
  opt.patch = {64, 32};
  CHECK_NOTHROW(patch_map(f, opt));
  opt.patch = {5, 7};
  opt.min_samples = 16;
  CHECK_NOTHROW(patch_map(f, opt));
}

TEST_CASE("windows match a brute-force reference bit for bit") {
  const EnvelopeField f = homogeneous(48, 40, 1.5, 4);
  for (auto border : {BorderPolicy::shrink, BorderPolicy::mirror}) {
    for (PatchSize p : {PatchSize{32, 16}, PatchSize{9, 7}, PatchSize{4, 4}}) {
      PatchMapOptions opt;
      opt.patch = p;
      opt.border = border;
      opt.min_samples = 16;
      const PatchMaps maps = patch_map(f, opt);
      for (std::size_t r = 0; r < f.height(); r += 5) {
        for (std::size_t c = 0; c < f.width(); c += 3) {
          CAPTURE(r);
          CAPTURE(c);
          const LogMoments w = brute_window(f, static_cast<long>(r), static_cast<long>(c), static_cast<long>(p.height),
                                            static_cast<long>(p.width), border == BorderPolicy::mirror);
          if (static_cast<std::size_t>(w.total()) < opt.min_samples) {
            REQUIRE_FALSE(maps.log10_alpha->valid(r, c));
            continue;
          }
          REQUIRE(same_bits(maps.log10_alpha->value(r, c), expected_log10_alpha(w)));
          const NakagamiEstimate fit = nakagami_mle(w);
          const float m = fit.result.valid ? static_cast<float>(fit.m) : kInvalidSentinel;
          REQUIRE(same_bits(maps.m->value(r, c), m));
        }
      }
    }
  }
}

TEST_CASE("identical window contents give identical estimates") {
  // Columns repeat with period 16, so every fully interior 32x16 window in a
  // row holds the same sample multiset.
  const EnvelopeField base = homogeneous(96, 16, 3.0, 5);
  std::vector<float> v(96 * 80);
  for (std::size_t r = 0; r < 96; ++r)
    for (std::size_t c = 0; c < 80; ++c) v[r * 80 + c] = base(r, c % 16);
  const EnvelopeField f(96, 80, std::move(v));
  const PatchMaps maps = patch_map(f);
  for (std::size_t r = 16; r + 16 <= 96; ++r) {
    const float ref_a = maps.log10_alpha->value(r, 8);
    const float ref_m = maps.m->value(r, 8);
    for (std::size_t c = 8; c + 8 <= 80; ++c) {
      REQUIRE(same_bits(maps.log10_alpha->value(r, c), ref_a));
      REQUIRE(same_bits(maps.m->value(r, c), ref_m));
    }
  }
}

TEST_CASE("shrink border keeps every pixel above the sample minimum") {
  const EnvelopeField f = homogeneous(256, 128, 2.0, 6);
  PatchMapOptions opt;
  opt.estimator = EstimatorKind::nakagami;
  CHECK(patch_map(f, opt).m->valid_count() == 256 * 128);
  // Top-left window holds 16 x 8 samples; bottom-right holds 17 x 9.
  opt.min_samples = 129;
  const auto clipped = patch_map(f, opt);
  CHECK_FALSE(clipped.m->valid(0, 0));
  CHECK(clipped.m->valid(255, 127));
  opt.min_samples = 154;
  CHECK_FALSE(patch_map(f, opt).m->valid(255, 127));
  CHECK(clipped.m->valid(128, 64));
}

TEST_CASE("larger patches narrow the estimate spread") {
  std::vector<double> small_iqr, large_iqr;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EnvelopeField f = homogeneous(256, 128, 4.0, derive_seed(6, seed));
    PatchMapOptions opt;
    opt.estimator = EstimatorKind::alpha;
    small_iqr.push_back(iqr(interior_values(*patch_map(f, opt).log10_alpha, 32, 16)));
    opt.patch = {64, 32};
    large_iqr.push_back(iqr(interior_values(*patch_map(f, opt).log10_alpha, 32, 16)));
  }
  CHECK(test::median(large_iqr) < test::median(small_iqr));
}

TEST_CASE("strided maps agree with the dense map on the coarse grid") {
  const EnvelopeField f = homogeneous(70, 45, 1.0, 7);
  PatchMapOptions opt;
  opt.patch = {16, 8};
  opt.estimator = EstimatorKind::nakagami;
  opt.min_samples = 64;
  const PatchMaps dense = patch_map(f, opt);
  opt.stride = 4;
  const PatchMaps coarse = patch_map(f, opt);
  auto on_grid = [](std::size_t i, std::size_t n) { return i % 4 == 0 || i == n - 1; };
  for (std::size_t r = 0; r < 70; ++r) {
    for (std::size_t c = 0; c < 45; ++c) {
      if (on_grid(r, 70) && on_grid(c, 45)) REQUIRE(same_bits(coarse.m->value(r, c), dense.m->value(r, c)));
    }
  }
  // Between grid nodes the value is the bilinear blend of the four corners.
  const double corners[4] = {dense.m->value(8, 12), dense.m->value(8, 16), dense.m->value(12, 12),
                             dense.m->value(12, 16)};
  const double ty = 0.25, tx = 0.75;  // pixel (9, 15)
  const double want = (1 - ty) * ((1 - tx) * corners[0] + tx * corners[1]) + ty * ((1 - tx) * corners[2] + tx * corners[3]);
  CHECK(coarse.m->value(9, 15) == doctest::Approx(want).epsilon(1e-6));
  // The last row and column are always estimated directly.
  CHECK(same_bits(coarse.m->value(69, 44), dense.m->value(69, 44)));
}

TEST_CASE("jobs do not change the maps") {
  const EnvelopeField f = homogeneous(128, 64, 2.0, 8);
  PatchMapOptions opt;
  const PatchMaps one = patch_map(f, opt);
  opt.jobs = 3;
  const PatchMaps three = patch_map(f, opt);
  CHECK(one.log10_alpha->values().storage().size() == three.log10_alpha->values().storage().size());
  for (std::size_t i = 0; i < 128 * 64; ++i) {
    REQUIRE(same_bits(one.log10_alpha->values().values()[i], three.log10_alpha->values().values()[i]));
    REQUIRE(same_bits(one.m->values().values()[i], three.m->values().values()[i]));
  }
}

TEST_CASE("external maps round-trip") {
  const EnvelopeField f = homogeneous(64, 32, 2.0, 9);
  const PatchMaps maps = patch_map(f);
  const std::vector<ParametricImage> images{*maps.log10_alpha, *maps.m};
  const auto path = test::scratch_dir("external") / "pred.qusf";
  write_map(path, to_map_file(images));

  const ParametricImage a = apply_external_map(path, ParameterKind::log10_alpha, 64, 32);
  const ParametricImage m = apply_external_map(path, ParameterKind::m, 64, 32);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      REQUIRE(same_bits(a.value(r, c), maps.log10_alpha->value(r, c)));
      REQUIRE(a.valid(r, c) == maps.log10_alpha->valid(r, c));
      REQUIRE(same_bits(m.value(r, c), maps.m->value(r, c)));
    }
  }
  CHECK_THROWS_AS(apply_external_map(path, ParameterKind::log10_alpha, 32, 64), DimensionMismatchError);
  CHECK_THROWS_AS(apply_external_map(path, ParameterKind::omega, 64, 32), DimensionMismatchError);
}

TEST_CASE("external maps honour a validity channel") {
  MapFile file;
  file.height = 2;
  file.width = 3;
  file.channels.push_back({"m", {0.5f, 0.6f, 0.7f, 0.8f, 0.9f, 1.0f}});
  file.channels.push_back({"valid", {1, 1, 0, 1, 0, 1}});
  const ParametricImage img = apply_external_map(file, ParameterKind::m, 2, 3);
  CHECK(img.valid_count() == 4);
  CHECK_FALSE(img.valid(0, 2));
  CHECK(std::isnan(img.value(1, 1)));
  CHECK(img.value(1, 2) == 1.0f);

  file.channels.push_back({"m_valid", {1, 1, 1, 1, 1, 0}});
  const ParametricImage own = apply_external_map(file, ParameterKind::m, 2, 3);
  CHECK(own.valid(0, 2));
  CHECK_FALSE(own.valid(1, 2));

  MapFile plain;
  plain.height = 1;
  plain.width = 2;
  plain.channels.push_back({"log10_alpha", {0.25f, NAN}});
  const ParametricImage p = apply_external_map(plain, ParameterKind::log10_alpha, 1, 2);
  CHECK(p.valid(0, 0));
  CHECK_FALSE(p.valid(0, 1));
}
