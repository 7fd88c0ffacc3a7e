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

#ifndef QTENS_ADMM_HPP_
#define QTENS_ADMM_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qtens/cp_als.hpp"
#include "qtens/quantize.hpp"
#include "qtens/tensor.hpp"

namespace qtens {

/// Per-iteration snapshot handed to an optional observer. The matrix
/// references are only valid for the duration of the callback.
struct AdmmInnerEvent {
  index_t mode = 0;
  int iter = 0;
  double rho = 0.0;
  double solve_residual = 0.0;  // ||(G+rhoI) Btilde - rhs||_F / ||K||_F
  double r = 0.0;
  double s = 0.0;
  const Matrix& factor;       // B after projection
  const Matrix& factor_prev;  // B before this iteration
  const Matrix& btilde_t;     // transposed auxiliary solution
  const Matrix& dual;         // U after the dual step
  const Matrix& dual_prev;    // U before the dual step
};

struct AdmmConfig {
  int bits = 8;
  QuantScheme scheme{QuantMethod::MseMinMax, true};
  double eps = 1e-3;
  int inner_max = 20;
  int outer_max = 200;
  int patience = 3;
  double min_improve = 1e-5;  // relative e_quant improvement that resets the patience counter
  std::function<void(const AdmmInnerEvent&)> observer;  // optional instrumentation hook
};

/// Per-factor dual state of the splitting scheme.
struct AdmmState {
  Matrix dual;
  double rho = 0.0;
  double r = std::numeric_limits<double>::infinity();
  double s = std::numeric_limits<double>::infinity();
};

struct AdmmFactorResult {
  Matrix factor;      // on-grid
  Matrix dual;
  QuantGrid grid;
  IntTensor codes;
  Matrix continuous;  // last least-squares iterate (B-tilde transposed)
  double rho = 0.0;
  double r = std::numeric_limits<double>::infinity();
  double s = std::numeric_limits<double>::infinity();
  int iters = 0;
  double max_solve_residual = 0.0;
};

struct SweepRecord {
  int sweep = 0;       // 1-based outer sweep
  double e_quant = 0.0;
  double rel_error = 0.0;  // reconstruction error of the continuous iterates
};

struct QuantizedFactorSet {
  FactorSet factors;                // entries lie exactly on the per-factor grids
  std::vector<QuantGrid> grids;
  std::vector<IntTensor> codes;
  std::vector<SweepRecord> trace;
  double e_quant = std::numeric_limits<double>::infinity();  // best over all sweeps
  int best_sweep = 0;
  int sweeps = 0;
  bool converged = false;  // stopped on the patience rule rather than outer_max
};

/// Quantized reconstruction error: the relative Frobenius distance between
/// the tensor and the reconstruction from the given (on-grid) factors,
/// evaluated through the mode-1 unfolding for 3-way inputs.
inline double e_quant(const DenseTensor& t, const FactorSet& fs) {
  if (fs.ndim() != t.ndim()) throw std::invalid_argument("e_quant: factor count does not match tensor order");
  double num = 0.0;
  double den = 0.0;
  if (t.ndim() == 2) {
    const Matrix x = unfold(t, 0);
    den = x.norm();
    const Matrix resid = x - fs.factors[0] * fs.factors[1].transpose();
    num = resid.norm();
  } else if (t.ndim() == 3) {
    const Matrix x1 = unfold(t, 1);
    den = x1.norm();
    const Matrix resid = x1 - fs.factors[1] * khatri_rao(fs.factors[2], fs.factors[0]).transpose();
    num = resid.norm();
  } else {
    throw std::invalid_argument("e_quant: tensor order must be 2 or 3");
  }
  if (den == 0.0) throw std::invalid_argument("e_quant: tensor has zero norm");
  return num / den;
}

inline double e_quant(const DenseTensor& t, const QuantizedFactorSet& qfs) { return e_quant(t, qfs.factors); }

/// One ADMM pass for a single factor (the inner loop of the alternating
/// scheme). G is the Hadamard product of the other factors' Grams, K the
/// matching MTTKRP. The returned factor lies exactly on the returned grid.
inline AdmmFactorResult admm_factor_update(const Matrix& factor, const Matrix& dual, const Matrix& k,
                                           const Matrix& g, index_t rank, const AdmmConfig& cfg,
                                           index_t mode = 0) {
  if (g.rows() != rank || g.cols() != rank) throw std::invalid_argument("admm_factor_update: G must be rank x rank");
  if (k.rows() != factor.rows() || k.cols() != rank) {
    throw std::invalid_argument("admm_factor_update: K shape does not match the factor");
  }
  if (dual.rows() != factor.rows() || dual.cols() != factor.cols()) {
    throw std::invalid_argument("admm_factor_update: dual shape does not match the factor");
  }
  if (cfg.inner_max < 1) throw std::invalid_argument("admm_factor_update: inner_max must be >= 1");

  const double tr = g.trace();
  const double rho = tr > 1e-12 ? tr / static_cast<double>(rank) : 1e-3;

  Eigen::MatrixXd h = g;
  h.diagonal().array() += rho;
  const Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("admm_factor_update: Cholesky factorization of G + rho*I failed");
  }

  const double k_norm = k.norm();
  const double res_den = k_norm > 0.0 ? k_norm : 1.0;

  AdmmFactorResult res;
  res.rho = rho;
  Matrix b = factor;
  Matrix u = dual;
  Matrix b_prev, u_prev, btilde_t;
  for (int it = 0; it < cfg.inner_max; ++it) {
    const Eigen::MatrixXd rhs = (k + rho * (b + u)).transpose();
    const Eigen::MatrixXd btilde = llt.solve(rhs);
    res.max_solve_residual =
        std::max(res.max_solve_residual, (h * btilde - rhs).norm() / res_den);
    btilde_t = btilde.transpose();

    b_prev = b;
    ProjectedMatrix proj = project(Matrix(btilde_t - u), cfg.bits, cfg.scheme);
    b = std::move(proj.values);
    res.grid = proj.grid;
    res.codes = std::move(proj.codes);

    if (cfg.observer) u_prev = u;
    u = u + (b - btilde_t);

    const double b_sq = b.squaredNorm();
    const double u_sq = u.squaredNorm();
    res.r = (b - btilde_t).squaredNorm() / (b_sq > 0.0 ? b_sq : 1.0);
    res.s = (b - b_prev).squaredNorm() / (u_sq > 0.0 ? u_sq : 1.0);
    ++res.iters;

    if (cfg.observer) {
      const double solve_res = (h * btilde - rhs).norm() / res_den;
      cfg.observer(AdmmInnerEvent{mode, it, rho, solve_res, res.r, res.s, b, b_prev, btilde_t, u, u_prev});
    }
    if (res.r < cfg.eps && res.s < cfg.eps) break;
  }
  res.factor = std::move(b);
  res.dual = std::move(u);
  res.continuous = std::move(btilde_t);
  return res;
}

namespace detail {

/// Outer alternating loop shared by the matrix and 3-way entry points.
/// Updates the factors in `mode_order` per sweep, tracks the quantized
/// reconstruction error, and returns the best iterate seen.
inline QuantizedFactorSet admm_joint(const DenseTensor& t, index_t rank, const AdmmConfig& cfg,
                                     const FactorSet& init, const std::vector<index_t>& mode_order) {
  if (rank < 1) throw std::invalid_argument("quantized factorization: rank must be >= 1");
  if (init.ndim() != t.ndim()) throw std::invalid_argument("quantized factorization: init factor count mismatch");
  if (init.rank() != rank) throw std::invalid_argument("quantized factorization: init rank mismatch");
  for (index_t d = 0; d < t.ndim(); ++d) {
    if (init.factors[static_cast<std::size_t>(d)].rows() != t.extent(d)) {
      throw std::invalid_argument("quantized factorization: init factor rows do not match tensor extents");
    }
  }
  if (t.norm() == 0.0) throw std::invalid_argument("quantized factorization: tensor has zero norm");
  if (cfg.outer_max < 1 || cfg.patience < 1) {
    throw std::invalid_argument("quantized factorization: outer_max and patience must be >= 1");
  }

  const index_t nd = t.ndim();
  FactorSet fs = init;
  FactorSet continuous = init;
  std::vector<AdmmState> states(static_cast<std::size_t>(nd));
  for (index_t d = 0; d < nd; ++d) {
    states[static_cast<std::size_t>(d)].dual =
        Matrix::Zero(t.extent(d), rank);  // duals start at zero
  }
  std::vector<QuantGrid> grids(static_cast<std::size_t>(nd));
  std::vector<IntTensor> codes(static_cast<std::size_t>(nd));

  QuantizedFactorSet out;
  int stall = 0;
  for (int sweep = 1; sweep <= cfg.outer_max; ++sweep) {
    for (index_t mode : mode_order) {
      const std::size_t m = static_cast<std::size_t>(mode);
      const Matrix g = gram_hadamard_except(fs, mode);
      const Matrix k = mttkrp(t, fs, mode);
      AdmmFactorResult r = admm_factor_update(fs.factors[m], states[m].dual, k, g, rank, cfg, mode);
      fs.factors[m] = std::move(r.factor);
      states[m].dual = std::move(r.dual);
      states[m].rho = r.rho;
      states[m].r = r.r;
      states[m].s = r.s;
      grids[m] = r.grid;
      codes[m] = std::move(r.codes);
      continuous.factors[m] = std::move(r.continuous);
    }
    const double eq = e_quant(t, fs);
    const double re = rel_error(t, reconstruct(continuous, t.shape()));
    out.trace.push_back(SweepRecord{sweep, eq, re});
    out.sweeps = sweep;

    const bool improved = out.e_quant == std::numeric_limits<double>::infinity()
                              ? true
                              : (out.e_quant - eq) >= cfg.min_improve * out.e_quant;
    if (eq < out.e_quant) {
      out.e_quant = eq;
      out.best_sweep = sweep;
      out.factors = fs;
      out.grids = grids;
      out.codes = codes;
    }
    stall = improved ? 0 : stall + 1;
    if (stall >= cfg.patience) {
      out.converged = true;
      break;
    }
  }
  return out;
}

inline DenseTensor matrix_to_tensor(const Matrix& x) {
  std::vector<double> data(x.data(), x.data() + x.size());
  return DenseTensor({x.rows(), x.cols()}, std::move(data));
}

}  // namespace detail

/// Alternating quantized matrix factorization X ~ A B^T with both factors
/// constrained to their data-dependent grids. B is updated first, then A.
inline QuantizedFactorSet quantized_matrix_factorization(const Matrix& x, index_t rank, const AdmmConfig& cfg,
                                                         const FactorSet& init) {
  if (init.ndim() != 2) throw std::invalid_argument("quantized_matrix_factorization: init must hold two factors");
  return detail::admm_joint(detail::matrix_to_tensor(x), rank, cfg, init, {1, 0});
}

/// Quantized 3-way CP factorization. Per outer sweep the factors are updated
/// in order A, B, C, each through the per-factor ADMM inner loop; duals
/// persist across sweeps and the best iterate by quantized error is returned.
inline QuantizedFactorSet quantized_cpd(const DenseTensor& t, index_t rank, const AdmmConfig& cfg,
                                        const FactorSet& init) {
  if (t.ndim() != 3) throw std::invalid_argument("quantized_cpd: tensor order must be 3");
  return detail::admm_joint(t, rank, cfg, init, {0, 1, 2});
}

}  // namespace qtens

#endif  // QTENS_ADMM_HPP_
