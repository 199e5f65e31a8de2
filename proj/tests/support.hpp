#pragma once

#include <filesystem>
#include <string>

#include "mulr/rng.hpp"
#include "mulr/tensor.hpp"

namespace mulr::testing {

inline Matrix random_matrix(Rng &rng, std::size_t rows, std::size_t cols, double range = 1.0) {
  Matrix m(rows, cols);
  for (double &x : m.flat()) x = rng.uniform(-range, range);
  return m;
}

inline Vec random_vec(Rng &rng, std::size_t n, double range = 1.0) {
  Vec v(n);
  for (double &x : v) x = rng.uniform(-range, range);
  return v;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("mulr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mulr::testing
