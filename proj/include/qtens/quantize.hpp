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

#ifndef QTENS_QUANTIZE_HPP_
#define QTENS_QUANTIZE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qtens/tensor.hpp"

namespace qtens {

/// Uniform per-tensor quantization grid: the value set
/// { scale * (k - zero_point) : k in [-2^(bits-1), 2^(bits-1) - 1] }.
struct QuantGrid {
  int bits = 8;
  double scale = 1.0;
  std::int32_t zero_point = 0;
  bool symmetric = true;

  std::int64_t qmin() const { return -(std::int64_t{1} << (bits - 1)); }
  std::int64_t qmax() const { return (std::int64_t{1} << (bits - 1)) - 1; }
  double node(std::int64_t code) const { return scale * static_cast<double>(code - zero_point); }
};

enum class QuantMethod { MinMax, MseMinMax };

struct QuantScheme {
  QuantMethod method = QuantMethod::MinMax;
  bool symmetric = true;
};

/// Integer codes plus the shape they were quantized from. The grid that makes
/// them meaningful travels separately (see QuantizedFactorSet).
struct IntTensor {
  std::vector<index_t> shape;
  std::vector<std::int32_t> codes;
};

namespace detail {

inline void check_bits(int bits, const char* who) {
  if (bits < 2 || bits > 8) {
    throw std::invalid_argument(std::string(who) + ": bits must lie in {2..8}, got " + std::to_string(bits));
  }
}

/// Round to nearest, ties to even (the default FE_TONEAREST behavior).
inline double round_half_even(double x) { return std::nearbyint(x); }

inline std::int32_t quantize_one(double x, const QuantGrid& g) {
  const double q = round_half_even(x / g.scale) + static_cast<double>(g.zero_point);
  const double lo = static_cast<double>(g.qmin());
  const double hi = static_cast<double>(g.qmax());
  return static_cast<std::int32_t>(std::clamp(q, lo, hi));
}

inline void quantize_span(std::span<const double> x, const QuantGrid& g, std::int32_t* out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = quantize_one(x[i], g);
}

/// Sum of squared reconstruction errors under grid g, fixed summation order.
inline double quant_sse(std::span<const double> x, const QuantGrid& g) {
  double sse = 0.0;
  for (double v : x) {
    const double d = v - g.node(quantize_one(v, g));
    sse += d * d;
  }
  return sse;
}

inline QuantGrid minmax_grid_span(std::span<const double> x, int bits, bool symmetric) {
  check_bits(bits, "minmax_grid");
  if (x.empty()) throw std::invalid_argument("minmax_grid: empty input");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double levels = static_cast<double>((std::int64_t{1} << bits) - 1);

  QuantGrid g;
  g.bits = bits;
  g.symmetric = symmetric;
  if (symmetric) {
    const double amax = std::max(std::abs(lo), std::abs(hi));
    if (amax == 0.0) return g;  // degenerate: scale 1, zero point 0
    g.scale = 2.0 * amax / levels;
    g.zero_point = 0;
  } else {
    if (hi == lo) return QuantGrid{bits, 1.0, 0, false};  // degenerate
    g.scale = (hi - lo) / levels;
    // Pin min(x) to the lowest representable code.
    const double zf = static_cast<double>(-(std::int64_t{1} << (bits - 1))) - round_half_even(lo / g.scale);
    g.zero_point = static_cast<std::int32_t>(
        std::clamp(zf, static_cast<double>(std::numeric_limits<std::int32_t>::min()),
                   static_cast<double>(std::numeric_limits<std::int32_t>::max())));
  }
  return g;
}

inline QuantGrid mse_grid_span(std::span<const double> x, int bits) {
  check_bits(bits, "mse_grid");
  if (x.empty()) throw std::invalid_argument("mse_grid: empty input");
  double amax = 0.0;
  for (double v : x) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) throw std::invalid_argument("mse_grid: input is all zero");

  const double levels = static_cast<double>((std::int64_t{1} << bits) - 1);
  QuantGrid best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 80; ++i) {  // alpha = 0.20, 0.21, ..., 1.00
    const double alpha = static_cast<double>(20 + i) / 100.0;
    QuantGrid g{bits, 2.0 * alpha * amax / levels, 0, true};
    const double sse = quant_sse(x, g);
    if (sse <= best_sse) {  // ties resolved toward larger alpha
      best_sse = sse;
      best = g;
    }
  }
  return best;
}

inline QuantGrid grid_for_scheme(std::span<const double> x, int bits, const QuantScheme& scheme) {
  if (scheme.method == QuantMethod::MseMinMax) {
    if (!scheme.symmetric) {
      throw std::invalid_argument("quantize: MseMinMax is defined for symmetric grids only");
    }
    return mse_grid_span(x, bits);
  }
  return minmax_grid_span(x, bits, scheme.symmetric);
}

inline bool all_zero(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

}  // namespace detail

/// MinMax grid from the data range. Symmetric: scale = 2 max|x| / (2^b - 1),
/// zero point 0. Asymmetric: scale = (max - min) / (2^b - 1) with the zero
/// point chosen so min(x) maps to the lowest code. A collapsed range falls
/// back to scale 1, zero point 0.
inline QuantGrid minmax_grid(const DenseTensor& x, int bits, bool symmetric) {
  return detail::minmax_grid_span({x.data(), static_cast<std::size_t>(x.size())}, bits, symmetric);
}

/// Symmetric grid with the clipping range chosen by scanning
/// q_max = alpha * max|x| over alpha in {0.20, 0.21, ..., 1.00} and keeping
/// the candidate with the smallest squared reconstruction error (ties go to
/// the larger alpha). alpha = 1.00 reproduces the symmetric MinMax grid, so
/// the result never does worse than MinMax.
inline QuantGrid mse_grid(const DenseTensor& x, int bits) {
  return detail::mse_grid_span({x.data(), static_cast<std::size_t>(x.size())}, bits);
}

/// Elementwise code = clip(round(x / scale) + z, -2^(b-1), 2^(b-1) - 1),
/// ties rounded to even.
inline IntTensor quantize(const DenseTensor& x, const QuantGrid& g) {
  IntTensor q;
  q.shape = x.shape();
  q.codes.resize(static_cast<std::size_t>(x.size()));
  detail::quantize_span({x.data(), static_cast<std::size_t>(x.size())}, g, q.codes.data());
  return q;
}

/// Elementwise scale * (code - zero_point).
inline DenseTensor dequantize(const IntTensor& q, const QuantGrid& g) {
  DenseTensor x(q.shape);
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    const std::int32_t c = q.codes[i];
    if (c < g.qmin() || c > g.qmax()) {
      throw std::out_of_range("dequantize: code " + std::to_string(c) + " outside the representable range");
    }
    x[static_cast<index_t>(i)] = g.node(c);
  }
  return x;
}

/// Nearest-grid-node projection: builds the grid from x itself via `scheme`,
/// then snaps every element to its nearest node (ties to even code). An
/// all-zero input projects to exact zeros under the degenerate unit grid.
inline std::pair<DenseTensor, QuantGrid> project(const DenseTensor& x, int bits, const QuantScheme& scheme) {
  detail::check_bits(bits, "project");
  std::span<const double> xs{x.data(), static_cast<std::size_t>(x.size())};
  if (detail::all_zero(xs)) {
    return {DenseTensor(x.shape()), QuantGrid{bits, 1.0, 0, true}};
  }
  const QuantGrid g = detail::grid_for_scheme(xs, bits, scheme);
  return {dequantize(quantize(x, g), g), g};
}

/// Matrix-valued grid projection used by the ADMM factor step.
struct ProjectedMatrix {
  Matrix values;
  QuantGrid grid;
  IntTensor codes;
};

inline ProjectedMatrix project(const Matrix& x, int bits, const QuantScheme& scheme) {
  detail::check_bits(bits, "project");
  std::span<const double> xs{x.data(), static_cast<std::size_t>(x.size())};
  ProjectedMatrix out;
  out.codes.shape = {x.rows(), x.cols()};
  out.codes.codes.resize(xs.size());
  if (detail::all_zero(xs)) {
    out.grid = QuantGrid{bits, 1.0, 0, true};
    out.values = Matrix::Zero(x.rows(), x.cols());
    return out;
  }
  out.grid = detail::grid_for_scheme(xs, bits, scheme);
  detail::quantize_span(xs, out.grid, out.codes.codes.data());
  out.values.resize(x.rows(), x.cols());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.values.data()[i] = out.grid.node(out.codes.codes[i]);
  }
  return out;
}

}  // namespace qtens

#endif  // QTENS_QUANTIZE_HPP_
