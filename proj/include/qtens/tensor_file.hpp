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

#ifndef QTENS_TENSOR_FILE_HPP_
#define QTENS_TENSOR_FILE_HPP_

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtens/tensor.hpp"

namespace qtens {

/// Errors in the binary tensor format or the surrounding file I/O.
class TensorFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout, all integers little-endian:
//   magic "QTNS" | version u32 = 1 | ndim u32 | dims u32[ndim] |
//   dtype u32 = 0 (float64 LE) | payload: row-major float64 values
namespace detail {

inline constexpr char kTensorMagic[4] = {'Q', 'T', 'N', 'S'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kDtypeFloat64 = 0;
inline constexpr index_t kMaxTensorElems = index_t{1} << 40;

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

inline void put_f64(std::vector<unsigned char>& out, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& buf, std::string origin)
      : buf_(buf), origin_(std::move(origin)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[off_ + static_cast<std::size_t>(i)]) << (8 * i);
    off_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(buf_[off_ + static_cast<std::size_t>(i)]) << (8 * i);
    off_ += 8;
    return std::bit_cast<double>(u);
  }

  void magic() {
    need(4, "magic");
    for (int i = 0; i < 4; ++i) {
      if (static_cast<char>(buf_[off_ + static_cast<std::size_t>(i)]) != kTensorMagic[i]) {
        throw TensorFileError(origin_ + ": bad magic, not a tensor file");
      }
    }
    off_ += 4;
  }

  std::size_t offset() const { return off_; }
  std::size_t remaining() const { return buf_.size() - off_; }

  void expect_end() const {
    if (off_ != buf_.size()) {
      throw TensorFileError(origin_ + ": " + std::to_string(buf_.size() - off_) +
                            " trailing bytes at offset " + std::to_string(off_));
    }
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (buf_.size() - off_ < n) {
      throw TensorFileError(origin_ + ": truncated file, need " + std::to_string(n) + " bytes for " + what +
                            " at offset " + std::to_string(off_) + " but only " +
                            std::to_string(buf_.size() - off_) + " remain (file size " +
                            std::to_string(buf_.size()) + ")");
    }
  }

  const std::vector<unsigned char>& buf_;
  std::string origin_;
  std::size_t off_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_tensor(const DenseTensor& t) {
  std::vector<unsigned char> out;
  out.reserve(16 + 4 * static_cast<std::size_t>(t.ndim()) + 8 * static_cast<std::size_t>(t.size()));
  for (char c : detail::kTensorMagic) out.push_back(static_cast<unsigned char>(c));
  detail::put_u32(out, detail::kTensorVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (index_t e : t.shape()) {
    if (e > static_cast<index_t>(UINT32_MAX)) throw TensorFileError("encode_tensor: extent exceeds the format limit");
    detail::put_u32(out, static_cast<std::uint32_t>(e));
  }
  detail::put_u32(out, detail::kDtypeFloat64);
  for (double v : t.values()) detail::put_f64(out, v);
  return out;
}

inline DenseTensor decode_tensor(const std::vector<unsigned char>& buf, const std::string& origin) {
  detail::ByteReader r(buf, origin);
  r.magic();
  const std::uint32_t version = r.u32("version");
  if (version != detail::kTensorVersion) {
    throw TensorFileError(origin + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t ndim = r.u32("ndim");
  if (ndim < 1 || ndim > 8) throw TensorFileError(origin + ": unsupported ndim " + std::to_string(ndim));
  std::vector<index_t> shape(ndim);
  index_t total = 1;
  for (std::uint32_t d = 0; d < ndim; ++d) {
    const std::uint32_t e = r.u32("dims");
    if (e == 0) throw TensorFileError(origin + ": zero extent in dims");
    shape[d] = static_cast<index_t>(e);
    if (total > detail::kMaxTensorElems / shape[d]) throw TensorFileError(origin + ": tensor too large");
    total *= shape[d];
  }
  const std::uint32_t dtype = r.u32("dtype");
  if (dtype != detail::kDtypeFloat64) {
    throw TensorFileError(origin + ": unsupported dtype code " + std::to_string(dtype));
  }
  std::vector<double> data(static_cast<std::size_t>(total));
  for (index_t i = 0; i < total; ++i) data[static_cast<std::size_t>(i)] = r.f64("payload");
  r.expect_end();
  return DenseTensor(std::move(shape), std::move(data));
}

inline void write_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  const std::vector<unsigned char> buf = encode_tensor(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw TensorFileError(path.string() + ": cannot open for writing");
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw TensorFileError(path.string() + ": write failed");
}

inline DenseTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorFileError(path.string() + ": cannot open for reading");
  std::vector<unsigned char> buf{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  if (is.bad()) throw TensorFileError(path.string() + ": read failed");
  return decode_tensor(buf, path.string());
}

}  // namespace qtens

#endif  // QTENS_TENSOR_FILE_HPP_
