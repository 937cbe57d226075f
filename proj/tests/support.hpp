#pragma once

#include "fpnet/common.hpp"
#include "fpnet/rng.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace fpnet::test {

/// Hand-rolled generators for property tests.
inline Rng gen(std::uint64_t seed) { return make_stream(seed, StreamPurpose::misc, 0xfeed, 0); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Vector random_vector(Rng& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(n);
  for (int k = 0; k < n; ++k) v(k) = nd(rng);
  return v;
}

inline Vector random_box(Rng& rng, int n, double box) {
  Vector v(n);
  for (int k = 0; k < n; ++k) v(k) = uniform(rng, -box, box);
  return v;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline std::string temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / ("fpnet_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace fpnet::test

