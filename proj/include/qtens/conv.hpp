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

#ifndef QTENS_CONV_HPP_
#define QTENS_CONV_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qtens/tensor.hpp"

namespace qtens {

/// Square-kernel convolution layer, stride 1, "same" zero padding D/2.
struct ConvLayerSpec {
  index_t out_channels = 1;  // T
  index_t in_channels = 1;   // S
  index_t kernel = 1;        // D, odd
  index_t height = 1;        // input H
  index_t width = 1;         // input W
};

/// Weights of the three-stage replacement: pointwise S->R, depthwise DxD
/// applied per channel, pointwise R->T.
struct FactorizedConvWeights {
  Matrix first;     // R x S
  DenseTensor mid;  // D x D x R, channel r uses slice (.,.,r)
  Matrix last;      // T x R
  index_t rank = 0;
};

struct BopReport {
  std::int64_t macs = 0;
  int b_w = 0;
  int b_a = 0;
  std::int64_t bops = 0;
  std::int64_t params_before = 0;
  std::int64_t params_after = 0;
};

namespace detail {

inline void check_conv_spec(const ConvLayerSpec& sp) {
  if (sp.out_channels < 1 || sp.in_channels < 1 || sp.kernel < 1 || sp.height < 1 || sp.width < 1) {
    throw std::invalid_argument("conv layer spec: all dimensions must be >= 1");
  }
  if (sp.kernel % 2 == 0) throw std::invalid_argument("conv layer spec: kernel size must be odd");
}

inline index_t exact_sqrt(index_t n) {
  const index_t d = static_cast<index_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (d < 1 || d * d != n) return -1;
  return d;
}

}  // namespace detail

/// Flattens the two spatial modes of a [T,S,D,D] kernel into one, giving
/// [T,S,D^2] with combined index j*D + i for spatial position (j,i).
inline DenseTensor reshape_kernel(const DenseTensor& k4) {
  if (k4.ndim() != 4) throw std::invalid_argument("reshape_kernel: kernel must be 4-way");
  const index_t d = k4.extent(2);
  if (k4.extent(3) != d) throw std::invalid_argument("reshape_kernel: spatial dimensions must be square");
  // Row-major layout makes this a pure reshape: (t,s,j,i) and (t,s,j*D+i)
  // address the same element.
  return DenseTensor({k4.extent(0), k4.extent(1), d * d}, k4.values());
}

/// Inverse of reshape_kernel.
inline DenseTensor reshape_back(const DenseTensor& k3) {
  if (k3.ndim() != 3) throw std::invalid_argument("reshape_back: input must be 3-way");
  const index_t d = detail::exact_sqrt(k3.extent(2));
  if (d < 0) throw std::invalid_argument("reshape_back: last extent is not a perfect square");
  return DenseTensor({k3.extent(0), k3.extent(1), d, d}, k3.values());
}

/// Folds the D^2 x R spatial factor into the depthwise D x D x R tensor,
/// mid(j,i,r) = c(j*D + i, r).
inline DenseTensor fold_spatial_factor(const Matrix& c) {
  const index_t d = detail::exact_sqrt(c.rows());
  if (d < 0) throw std::invalid_argument("fold_spatial_factor: row count is not a perfect square");
  const index_t rank = c.cols();
  DenseTensor mid({d, d, rank});
  for (index_t j = 0; j < d; ++j) {
    for (index_t i = 0; i < d; ++i) {
      for (index_t r = 0; r < rank; ++r) mid(j, i, r) = c(j * d + i, r);
    }
  }
  return mid;
}

/// Rank giving roughly a `rate`-fold parameter reduction: the original
/// parameter count divided by the per-rank cost and the rate, floored and
/// clamped to at least 1. Linear (or 1x1) layers cost n+m per rank, conv
/// layers T+S+D^2.
inline index_t select_rank(index_t n, index_t m, double rate) {
  if (n < 1 || m < 1) throw std::invalid_argument("select_rank: dimensions must be >= 1");
  if (!(rate > 0.0)) throw std::invalid_argument("select_rank: rate must be positive");
  const double full = static_cast<double>(n) * static_cast<double>(m);
  const double per_rank = static_cast<double>(n + m);
  const index_t r = static_cast<index_t>(std::floor(full / per_rank / rate));
  return r < 1 ? 1 : r;
}

inline index_t select_rank(const ConvLayerSpec& sp, double rate) {
  detail::check_conv_spec(sp);
  if (!(rate > 0.0)) throw std::invalid_argument("select_rank: rate must be positive");
  const index_t t = sp.out_channels, s = sp.in_channels, dd = sp.kernel * sp.kernel;
  if (sp.kernel == 1) return select_rank(t, s, rate);
  const double full = static_cast<double>(t) * static_cast<double>(s) * static_cast<double>(dd);
  const double per_rank = static_cast<double>(t + s + dd);
  const index_t r = static_cast<index_t>(std::floor(full / per_rank / rate));
  return r < 1 ? 1 : r;
}

/// Reference convolution: stride 1, "same" zero padding delta = D/2.
inline DenseTensor direct_conv(const DenseTensor& k4, const DenseTensor& x) {
  if (k4.ndim() != 4) throw std::invalid_argument("direct_conv: kernel must be 4-way");
  if (x.ndim() != 3) throw std::invalid_argument("direct_conv: input must be 3-way [S,H,W]");
  const index_t t_dim = k4.extent(0), s_dim = k4.extent(1), d = k4.extent(2);
  if (k4.extent(3) != d) throw std::invalid_argument("direct_conv: spatial dimensions must be square");
  if (d % 2 == 0) throw std::invalid_argument("direct_conv: kernel size must be odd");
  if (x.extent(0) != s_dim) throw std::invalid_argument("direct_conv: channel mismatch between kernel and input");
  const index_t h_dim = x.extent(1), w_dim = x.extent(2);
  const index_t delta = d / 2;

  DenseTensor y({t_dim, h_dim, w_dim});
  for (index_t t = 0; t < t_dim; ++t) {
    for (index_t ho = 0; ho < h_dim; ++ho) {
      for (index_t wo = 0; wo < w_dim; ++wo) {
        double acc = 0.0;
        for (index_t s = 0; s < s_dim; ++s) {
          for (index_t j = 0; j < d; ++j) {
            const index_t hi = ho + j - delta;
            if (hi < 0 || hi >= h_dim) continue;
            for (index_t i = 0; i < d; ++i) {
              const index_t wi = wo + i - delta;
              if (wi < 0 || wi >= w_dim) continue;
              acc += k4(t, s, j, i) * x(s, hi, wi);
            }
          }
        }
        y(t, ho, wo) = acc;
      }
    }
  }
  return y;
}

/// Runs the factorized three-stage convolution sequence. Algebraically this
/// equals direct_conv with the rank-R reconstructed kernel.
inline DenseTensor factorized_forward(const FactorizedConvWeights& w, const DenseTensor& x) {
  if (x.ndim() != 3) throw std::invalid_argument("factorized_forward: input must be 3-way [S,H,W]");
  const index_t rank = w.rank;
  if (rank < 1) throw std::invalid_argument("factorized_forward: rank must be >= 1");
  if (w.first.rows() != rank || w.last.cols() != rank) {
    throw std::invalid_argument("factorized_forward: pointwise factor shapes do not match the rank");
  }
  if (w.mid.ndim() != 3 || w.mid.extent(0) != w.mid.extent(1) || w.mid.extent(2) != rank) {
    throw std::invalid_argument("factorized_forward: depthwise factor must be D x D x rank");
  }
  const index_t s_dim = w.first.cols();
  const index_t t_dim = w.last.rows();
  const index_t d = w.mid.extent(0);
  if (d % 2 == 0) throw std::invalid_argument("factorized_forward: kernel size must be odd");
  if (x.extent(0) != s_dim) throw std::invalid_argument("factorized_forward: channel mismatch");
  const index_t h_dim = x.extent(1), w_dim = x.extent(2);
  const index_t delta = d / 2;

  DenseTensor z1({rank, h_dim, w_dim});
  for (index_t r = 0; r < rank; ++r) {
    for (index_t h = 0; h < h_dim; ++h) {
      for (index_t ww = 0; ww < w_dim; ++ww) {
        double acc = 0.0;
        for (index_t s = 0; s < s_dim; ++s) acc += w.first(r, s) * x(s, h, ww);
        z1(r, h, ww) = acc;
      }
    }
  }

  DenseTensor z2({rank, h_dim, w_dim});
  for (index_t r = 0; r < rank; ++r) {
    for (index_t ho = 0; ho < h_dim; ++ho) {
      for (index_t wo = 0; wo < w_dim; ++wo) {
        double acc = 0.0;
        for (index_t j = 0; j < d; ++j) {
          const index_t hi = ho + j - delta;
          if (hi < 0 || hi >= h_dim) continue;
          for (index_t i = 0; i < d; ++i) {
            const index_t wi = wo + i - delta;
            if (wi < 0 || wi >= w_dim) continue;
            acc += w.mid(j, i, r) * z1(r, hi, wi);
          }
        }
        z2(r, ho, wo) = acc;
      }
    }
  }

  DenseTensor y({t_dim, h_dim, w_dim});
  for (index_t t = 0; t < t_dim; ++t) {
    for (index_t h = 0; h < h_dim; ++h) {
      for (index_t ww = 0; ww < w_dim; ++ww) {
        double acc = 0.0;
        for (index_t r = 0; r < rank; ++r) acc += w.last(t, r) * z2(r, h, ww);
        y(t, h, ww) = acc;
      }
    }
  }
  return y;
}

namespace detail {

inline void check_bop_bits(int b_w, int b_a) {
  if (b_w < 2 || b_w > 32 || b_a < 2 || b_a > 32) {
    throw std::invalid_argument("bop_count: bit-widths must lie in [2, 32]");
  }
}

}  // namespace detail

/// MAC/BOP/parameter accounting for a conv layer, exact integer arithmetic.
inline BopReport bop_count(const ConvLayerSpec& sp, int b_w, int b_a, bool factorized, index_t rank = 0) {
  detail::check_conv_spec(sp);
  detail::check_bop_bits(b_w, b_a);
  const std::int64_t t = sp.out_channels, s = sp.in_channels;
  const std::int64_t dd = static_cast<std::int64_t>(sp.kernel) * sp.kernel;
  const std::int64_t hw = static_cast<std::int64_t>(sp.height) * sp.width;
  BopReport rep;
  rep.b_w = b_w;
  rep.b_a = b_a;
  rep.params_before = t * s * dd;
  if (factorized) {
    if (rank < 1) throw std::invalid_argument("bop_count: factorized layer needs rank >= 1");
    const std::int64_t r = rank;
    rep.params_after = r * s + r * dd + t * r;
    rep.macs = rep.params_after * hw;
  } else {
    rep.params_after = rep.params_before;
    rep.macs = rep.params_before * hw;
  }
  rep.bops = rep.macs * b_w * b_a;
  return rep;
}

/// Accounting for a linear layer with an n x m weight (one MAC per weight
/// per sample; factorized form costs rank*(n+m)).
inline BopReport bop_count(index_t n, index_t m, int b_w, int b_a, bool factorized, index_t rank = 0) {
  if (n < 1 || m < 1) throw std::invalid_argument("bop_count: dimensions must be >= 1");
  detail::check_bop_bits(b_w, b_a);
  BopReport rep;
  rep.b_w = b_w;
  rep.b_a = b_a;
  rep.params_before = static_cast<std::int64_t>(n) * m;
  if (factorized) {
    if (rank < 1) throw std::invalid_argument("bop_count: factorized layer needs rank >= 1");
    rep.params_after = static_cast<std::int64_t>(rank) * (n + m);
  } else {
    rep.params_after = rep.params_before;
  }
  rep.macs = rep.params_after;
  rep.bops = rep.macs * b_w * b_a;
  return rep;
}

}  // namespace qtens

#endif  // QTENS_CONV_HPP_
