/* Copyright 2026 The qtens Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef QTENS_TESTS_SUPPORT_FIXTURES_HPP_
#define QTENS_TESTS_SUPPORT_FIXTURES_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "qtens/cp_als.hpp"
#include "qtens/quantize.hpp"
#include "qtens/tensor.hpp"

namespace qtens_tests {

using qtens::DenseTensor;
using qtens::FactorSet;
using qtens::index_t;
using qtens::Matrix;

inline Matrix normal_matrix(index_t rows, index_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (index_t i = 0; i < rows; ++i) {
    for (index_t j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

inline DenseTensor normal_tensor(const std::vector<index_t>& shape, std::mt19937_64& rng) {
  DenseTensor t(shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (index_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

/// A matrix whose entries are scale * k for signed b-bit integer codes k,
/// with both extreme codes attained somewhere. With a dyadic scale such a
/// matrix is reproduced exactly by an asymmetric min-max grid of the same
/// bit-width, which is what the exact-recovery constructions need.
inline Matrix on_grid_matrix(index_t rows, index_t cols, int bits, double scale, std::mt19937_64& rng) {
  const std::int64_t qmin = -(std::int64_t{1} << (bits - 1));
  const std::int64_t qmax = (std::int64_t{1} << (bits - 1)) - 1;
  std::vector<std::int64_t> codes(static_cast<std::size_t>(rows * cols));
  std::uniform_int_distribution<std::int64_t> uni(qmin, qmax);
  for (auto& c : codes) c = uni(rng);
  codes[0] = qmin;
  codes[1] = qmax;
  std::shuffle(codes.begin(), codes.end(), rng);
  Matrix m(rows, cols);
  for (index_t i = 0; i < rows; ++i) {
    for (index_t j = 0; j < cols; ++j) {
      m(i, j) = scale * static_cast<double>(codes[static_cast<std::size_t>(i * cols + j)]);
    }
  }
  return m;
}

/// Rank-R factor set with every factor on its own dyadic grid; the
/// reconstruction is exactly representable by b-bit quantized factors.
inline FactorSet on_grid_factors(const std::vector<index_t>& shape, index_t rank, int bits,
                                 std::mt19937_64& rng) {
  FactorSet fs;
  double scale = 0.125;
  for (index_t e : shape) {
    fs.factors.push_back(on_grid_matrix(e, rank, bits, scale, rng));
    scale *= 0.5;  // distinct per-factor grids
  }
  return fs;
}

/// Relative Gaussian noise: returns t + level * ||t|| * N / ||N||.
inline DenseTensor add_noise(const DenseTensor& t, double level, std::mt19937_64& rng) {
  DenseTensor noise = normal_tensor(t.shape(), rng);
  const double t_norm = t.norm();
  const double n_norm = noise.norm();
  DenseTensor out = t;
  if (level > 0.0 && n_norm > 0.0) {
    const double a = level * t_norm / n_norm;
    for (index_t i = 0; i < out.size(); ++i) out[i] += a * noise[i];
  }
  return out;
}

}  // namespace qtens_tests

#endif  // QTENS_TESTS_SUPPORT_FIXTURES_HPP_
