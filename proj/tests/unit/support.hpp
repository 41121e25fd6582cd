#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "qus/rng.hpp"
#include "qus/speckle_models.hpp"

namespace qus::test {

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

inline double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

inline std::vector<double> squared(const std::vector<double>& a) {
  std::vector<double> out(a.size());
  std::transform(a.begin(), a.end(), out.begin(), [](double x) { return x * x; });
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Fresh, empty scratch directory below the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(QUS_TEST_WORK_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> hk_intensities(double alpha, std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  Rng rng(seed);
  return squared(sample_hk(HKParams(0.0, sigma, alpha), n, rng));
}

}  // namespace qus::test
