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

#ifndef QTENS_TENSOR_HPP_
#define QTENS_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qtens {

using index_t = std::int64_t;

/// Dense row-major matrix of doubles. Row-major keeps the raw buffer layout
/// identical to DenseTensor and the on-disk format.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense N-way tensor, row-major (last index varies fastest).
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(std::vector<index_t> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

  DenseTensor(std::vector<index_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<index_t>(data_.size()) != checked_size(shape_)) {
      throw std::invalid_argument("DenseTensor: data length does not match shape");
    }
  }

  index_t ndim() const { return static_cast<index_t>(shape_.size()); }
  index_t size() const { return static_cast<index_t>(data_.size()); }
  const std::vector<index_t>& shape() const { return shape_; }
  index_t extent(index_t mode) const { return shape_.at(static_cast<std::size_t>(mode)); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](index_t lin) { return data_[static_cast<std::size_t>(lin)]; }
  double operator[](index_t lin) const { return data_[static_cast<std::size_t>(lin)]; }

  double& operator()(index_t i, index_t j) { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
  double operator()(index_t i, index_t j) const { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }

  double& operator()(index_t i, index_t j, index_t k) {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double operator()(index_t i, index_t j, index_t k) const {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  double& operator()(index_t i, index_t j, index_t k, index_t l) {
    return data_[static_cast<std::size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  double operator()(index_t i, index_t j, index_t k, index_t l) const {
    return data_[static_cast<std::size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  /// Frobenius norm, fixed left-to-right summation order.
  double norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

 private:
  static index_t checked_size(const std::vector<index_t>& shape) {
    index_t n = 1;
    for (index_t e : shape) {
      if (e < 1) throw std::invalid_argument("DenseTensor: all extents must be >= 1");
      n *= e;
    }
    return n;
  }

  std::vector<index_t> shape_;
  std::vector<double> data_;
};

/// One factor matrix per tensor mode, each n_i x R.
struct FactorSet {
  std::vector<Matrix> factors;

  FactorSet() = default;
  explicit FactorSet(std::vector<Matrix> f) : factors(std::move(f)) {}

  index_t rank() const { return factors.empty() ? 0 : factors.front().cols(); }
  index_t ndim() const { return static_cast<index_t>(factors.size()); }

  void check_consistent() const {
    for (const Matrix& f : factors) {
      if (f.cols() != rank()) {
        throw std::invalid_argument("FactorSet: factors must share the same column count");
      }
    }
  }
};

namespace detail {

inline void check_mode(const DenseTensor& t, index_t mode, const char* who) {
  if (mode < 0 || mode >= t.ndim()) {
    throw std::out_of_range(std::string(who) + ": mode " + std::to_string(mode) +
                            " out of range for a " + std::to_string(t.ndim()) + "-way tensor");
  }
}

}  // namespace detail

/// Mode-n unfolding. Rows are indexed by `mode`; columns enumerate the
/// remaining modes with the LOWER-numbered mode varying fastest, so that for
/// a 3-way tensor  unfold(t, 1) == B * khatri_rao(C, A)^T  when t is the CP
/// reconstruction of {A, B, C}.
inline Matrix unfold(const DenseTensor& t, index_t mode) {
  detail::check_mode(t, mode, "unfold");
  const index_t nd = t.ndim();
  const index_t rows = t.extent(mode);
  const index_t cols = t.size() / rows;
  Matrix m(rows, cols);

  // Column strides: ascending remaining modes, lowest fastest.
  std::vector<index_t> col_stride(static_cast<std::size_t>(nd), 0);
  index_t s = 1;
  for (index_t d = 0; d < nd; ++d) {
    if (d == mode) continue;
    col_stride[static_cast<std::size_t>(d)] = s;
    s *= t.extent(d);
  }

  std::vector<index_t> idx(static_cast<std::size_t>(nd), 0);
  for (index_t lin = 0; lin < t.size(); ++lin) {
    index_t col = 0;
    for (index_t d = 0; d < nd; ++d) {
      if (d != mode) col += idx[static_cast<std::size_t>(d)] * col_stride[static_cast<std::size_t>(d)];
    }
    m(idx[static_cast<std::size_t>(mode)], col) = t[lin];
    for (index_t d = nd - 1; d >= 0; --d) {  // odometer, last index fastest
      if (++idx[static_cast<std::size_t>(d)] < t.extent(d)) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  return m;
}

/// Inverse of unfold: fold(unfold(t, mode), mode, t.shape()) == t exactly.
inline DenseTensor fold(const Matrix& m, index_t mode, const std::vector<index_t>& shape) {
  const index_t nd = static_cast<index_t>(shape.size());
  if (mode < 0 || mode >= nd) throw std::out_of_range("fold: mode out of range");
  DenseTensor t(shape);
  if (m.rows() != t.extent(mode) || m.rows() * m.cols() != t.size()) {
    throw std::invalid_argument("fold: matrix dimensions inconsistent with shape and mode");
  }

  std::vector<index_t> col_stride(static_cast<std::size_t>(nd), 0);
  index_t s = 1;
  for (index_t d = 0; d < nd; ++d) {
    if (d == mode) continue;
    col_stride[static_cast<std::size_t>(d)] = s;
    s *= t.extent(d);
  }

  std::vector<index_t> idx(static_cast<std::size_t>(nd), 0);
  for (index_t lin = 0; lin < t.size(); ++lin) {
    index_t col = 0;
    for (index_t d = 0; d < nd; ++d) {
      if (d != mode) col += idx[static_cast<std::size_t>(d)] * col_stride[static_cast<std::size_t>(d)];
    }
    t[lin] = m(idx[static_cast<std::size_t>(mode)], col);
    for (index_t d = nd - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < t.extent(d)) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  return t;
}

/// Column-wise Kronecker product. Column r is kron(a[:,r], b[:,r]) with a's
/// index varying slowest: result((ia * b.rows) + ib, r) = a(ia,r) * b(ib,r).
inline Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("khatri_rao: column count mismatch");
  Matrix out(a.rows() * b.rows(), a.cols());
  for (index_t ia = 0; ia < a.rows(); ++ia) {
    for (index_t ib = 0; ib < b.rows(); ++ib) {
      for (index_t r = 0; r < a.cols(); ++r) {
        out(ia * b.rows() + ib, r) = a(ia, r) * b(ib, r);
      }
    }
  }
  return out;
}

/// Gram matrix a^T a (symmetric PSD).
inline Matrix gram(const Matrix& a) {
  return a.transpose() * a;
}

/// Matricized tensor times Khatri-Rao product:
///   mttkrp(t, fs, n) == unfold(t, n) * khatri_rao over the factors other
/// than n, combined with the HIGHER-numbered factor first (mode 1 of a 3-way
/// tensor uses khatri_rao(C, A)).
inline Matrix mttkrp(const DenseTensor& t, const FactorSet& fs, index_t mode) {
  detail::check_mode(t, mode, "mttkrp");
  if (fs.ndim() != t.ndim()) throw std::invalid_argument("mttkrp: factor count does not match tensor order");
  for (index_t d = 0; d < t.ndim(); ++d) {
    if (fs.factors[static_cast<std::size_t>(d)].rows() != t.extent(d)) {
      throw std::invalid_argument("mttkrp: factor " + std::to_string(d) + " rows do not match tensor extent");
    }
  }
  Matrix kr;
  bool first = true;
  for (index_t d = t.ndim() - 1; d >= 0; --d) {
    if (d == mode) continue;
    const Matrix& f = fs.factors[static_cast<std::size_t>(d)];
    kr = first ? f : khatri_rao(kr, f);
    first = false;
  }
  return unfold(t, mode) * kr;
}

/// CP reconstruction: t(i,j,k) = sum_r A(i,r) B(j,r) C(k,r); 2-way X = A B^T.
inline DenseTensor reconstruct(const FactorSet& fs, const std::vector<index_t>& shape) {
  if (fs.ndim() != static_cast<index_t>(shape.size())) {
    throw std::invalid_argument("reconstruct: factor count does not match shape");
  }
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (fs.factors[d].rows() != shape[d]) {
      throw std::invalid_argument("reconstruct: factor " + std::to_string(d) + " rows do not match shape");
    }
  }
  fs.check_consistent();
  const index_t rank = fs.rank();
  DenseTensor t(shape);
  if (fs.ndim() == 2) {
    const Matrix& a = fs.factors[0];
    const Matrix& b = fs.factors[1];
    for (index_t i = 0; i < shape[0]; ++i) {
      for (index_t j = 0; j < shape[1]; ++j) {
        double acc = 0.0;
        for (index_t r = 0; r < rank; ++r) acc += a(i, r) * b(j, r);
        t(i, j) = acc;
      }
    }
  } else if (fs.ndim() == 3) {
    const Matrix& a = fs.factors[0];
    const Matrix& b = fs.factors[1];
    const Matrix& c = fs.factors[2];
    for (index_t i = 0; i < shape[0]; ++i) {
      for (index_t j = 0; j < shape[1]; ++j) {
        for (index_t k = 0; k < shape[2]; ++k) {
          double acc = 0.0;
          for (index_t r = 0; r < rank; ++r) acc += a(i, r) * b(j, r) * c(k, r);
          t(i, j, k) = acc;
        }
      }
    }
  } else {
    throw std::invalid_argument("reconstruct: only 2- and 3-way tensors are supported");
  }
  return t;
}

/// Relative Frobenius error ||t - approx||_F / ||t||_F.
inline double rel_error(const DenseTensor& t, const DenseTensor& approx) {
  if (t.shape() != approx.shape()) throw std::invalid_argument("rel_error: shape mismatch");
  double num = 0.0;
  for (index_t i = 0; i < t.size(); ++i) {
    const double d = t[i] - approx[i];
    num += d * d;
  }
  const double den = t.norm();
  if (den == 0.0) throw std::invalid_argument("rel_error: reference tensor has zero norm");
  return std::sqrt(num) / den;
}

}  // namespace qtens

#endif  // QTENS_TENSOR_HPP_
