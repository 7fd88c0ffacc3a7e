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

#ifndef QTENS_CP_ALS_HPP_
#define QTENS_CP_ALS_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "qtens/tensor.hpp"

namespace qtens {

struct AlsConfig {
  index_t rank = 1;
  int max_iters = 10;
  double tol = 1e-8;  // stop when the per-sweep relative-error improvement drops below this
  std::uint64_t seed = 0;
};

enum class InitMode { Random, AlsBalanced };

struct AlsResult {
  FactorSet factors;
  std::vector<double> errors;  // relative error at init and after each sweep
  int sweeps = 0;
};

namespace detail {

/// Seeded i.i.d. standard-normal factors, scaled per factor by
/// (||t||_F / R)^(1/ndim) so the reconstruction starts at the right magnitude.
inline FactorSet random_factors(const std::vector<index_t>& shape, index_t rank, double tensor_norm,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale =
      tensor_norm > 0.0 ? std::pow(tensor_norm / static_cast<double>(rank), 1.0 / static_cast<double>(shape.size()))
                        : 0.0;
  FactorSet fs;
  fs.factors.reserve(shape.size());
  for (index_t extent : shape) {
    Matrix f(extent, rank);
    for (index_t i = 0; i < extent; ++i) {
      for (index_t r = 0; r < rank; ++r) f(i, r) = scale * normal(rng);
    }
    fs.factors.push_back(std::move(f));
  }
  return fs;
}

inline Matrix gram_hadamard_except(const FactorSet& fs, index_t mode) {
  Matrix g = Matrix::Ones(fs.rank(), fs.rank());
  for (index_t d = 0; d < fs.ndim(); ++d) {
    if (d == mode) continue;
    g = g.cwiseProduct(gram(fs.factors[static_cast<std::size_t>(d)]));
  }
  return g;
}

inline void check_als_input(const DenseTensor& t, const AlsConfig& cfg) {
  if (t.ndim() != 2 && t.ndim() != 3) throw std::invalid_argument("cp_als: tensor order must be 2 or 3");
  if (cfg.rank < 1) throw std::invalid_argument("cp_als: rank must be >= 1");
  if (cfg.max_iters < 1) throw std::invalid_argument("cp_als: max_iters must be >= 1");
}

}  // namespace detail

/// Alternating least squares for an unconstrained CP model. Each factor
/// update solves its ridge-stabilized normal equations exactly, so the
/// relative error is non-increasing across sweeps. A zero tensor yields zero
/// factors with error 0 by convention.
inline AlsResult cp_als(const DenseTensor& t, const AlsConfig& cfg) {
  detail::check_als_input(t, cfg);

  AlsResult res;
  if (t.norm() == 0.0) {
    res.factors = detail::random_factors(t.shape(), cfg.rank, 0.0, cfg.seed);
    res.errors.push_back(0.0);
    return res;
  }

  res.factors = detail::random_factors(t.shape(), cfg.rank, t.norm(), cfg.seed);
  res.errors.push_back(rel_error(t, reconstruct(res.factors, t.shape())));

  double prev = res.errors.back();
  for (int sweep = 0; sweep < cfg.max_iters; ++sweep) {
    for (index_t mode = 0; mode < t.ndim(); ++mode) {
      Matrix g = detail::gram_hadamard_except(res.factors, mode);
      g.diagonal().array() += 1e-12 * g.trace();  // survives collinear factors
      const Matrix k = mttkrp(t, res.factors, mode);
      Eigen::MatrixXd gc = g;
      res.factors.factors[static_cast<std::size_t>(mode)] = gc.ldlt().solve(k.transpose()).transpose();
    }
    const double err = rel_error(t, reconstruct(res.factors, t.shape()));
    res.errors.push_back(err);
    ++res.sweeps;
    if (prev - err < cfg.tol) break;
    prev = err;
  }
  return res;
}

/// Rescales every rank-one component so its columns carry equal norm
/// (the geometric mean of the original norms), then fixes a sign convention:
/// in every factor but the last, the largest-magnitude entry of each column
/// is made positive, with the last factor absorbing the compensating flips.
/// The reconstruction is unchanged; components with a zero column are passed
/// through as-is.
inline FactorSet balance_factors(const FactorSet& fs) {
  fs.check_consistent();
  FactorSet out = fs;
  const index_t nd = fs.ndim();
  for (index_t r = 0; r < fs.rank(); ++r) {
    double prod = 1.0;
    bool has_zero = false;
    for (index_t d = 0; d < nd; ++d) {
      const double n = out.factors[static_cast<std::size_t>(d)].col(r).norm();
      if (n == 0.0) has_zero = true;
      prod *= n;
    }
    if (has_zero) continue;
    const double g = std::pow(prod, 1.0 / static_cast<double>(nd));
    for (index_t d = 0; d < nd; ++d) {
      Matrix& f = out.factors[static_cast<std::size_t>(d)];
      f.col(r) *= g / f.col(r).norm();
    }
    for (index_t d = 0; d + 1 < nd; ++d) {
      Matrix& f = out.factors[static_cast<std::size_t>(d)];
      index_t top = 0;
      for (index_t i = 1; i < f.rows(); ++i) {
        if (std::abs(f(i, r)) > std::abs(f(top, r))) top = i;
      }
      if (f(top, r) < 0.0) {
        f.col(r) *= -1.0;
        out.factors[static_cast<std::size_t>(nd - 1)].col(r) *= -1.0;
      }
    }
  }
  return out;
}

/// Builds the starting point for the quantized factorization loops.
/// Random draws seeded factors without touching the tensor beyond its norm;
/// AlsBalanced runs cp_als for cfg.max_iters sweeps and balances the result.
/// With max_iters == 0 AlsBalanced degenerates to Random (no sweeps, no
/// balancing), so both modes coincide for the same seed.
inline FactorSet init_for_admm(const DenseTensor& t, const AlsConfig& cfg, InitMode mode) {
  if (t.ndim() != 2 && t.ndim() != 3) throw std::invalid_argument("init_for_admm: tensor order must be 2 or 3");
  if (cfg.rank < 1) throw std::invalid_argument("init_for_admm: rank must be >= 1");
  if (mode == InitMode::Random || cfg.max_iters == 0) {
    return detail::random_factors(t.shape(), cfg.rank, t.norm(), cfg.seed);
  }
  return balance_factors(cp_als(t, cfg).factors);
}

}  // namespace qtens

#endif  // QTENS_CP_ALS_HPP_
