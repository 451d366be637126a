// lipspeech/data/tensor_file.hpp

// Copyright 2026  The lipspeech authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lipspeech/core/common.hpp"
#include "lipspeech/core/tensor.hpp"

namespace lipspeech {

// Single-tensor binary container (the corpus *.npzlike files), format v1:
//   8 bytes magic "LSTEN001"
//   u32 dtype: 0 = uint8, 1 = float32
//   u32 ndim
//   u64 dims[ndim]
//   payload, little-endian, row-major
enum class TensorDType : std::uint32_t { kU8 = 0, kF32 = 1 };

namespace detail {
inline constexpr char kTensorMagic[8] = {'L', 'S', 'T', 'E', 'N', '0', '0', '1'};
}

inline void save_tensor_u8(const std::string& path, const Shape& shape,
                           const std::vector<std::uint8_t>& bytes) {
  require<IoError>(index_t(bytes.size()) == shape_numel(shape),
                   "save_tensor_u8: size mismatch");
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "save_tensor_u8: cannot open ", path);
  out.write(detail::kTensorMagic, 8);
  const std::uint32_t dtype = std::uint32_t(TensorDType::kU8);
  const std::uint32_t ndim = std::uint32_t(shape.size());
  out.write(reinterpret_cast<const char*>(&dtype), 4);
  out.write(reinterpret_cast<const char*>(&ndim), 4);
  for (index_t d : shape) {
    const std::uint64_t v = std::uint64_t(d);
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  require<IoError>(out.good(), "save_tensor_u8: write failed: ", path);
}

inline void save_tensor_f32(const std::string& path, const Tensor<float>& t) {
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "save_tensor_f32: cannot open ", path);
  out.write(detail::kTensorMagic, 8);
  const std::uint32_t dtype = std::uint32_t(TensorDType::kF32);
  const std::uint32_t ndim = std::uint32_t(t.shape().size());
  out.write(reinterpret_cast<const char*>(&dtype), 4);
  out.write(reinterpret_cast<const char*>(&ndim), 4);
  for (index_t d : t.shape()) {
    const std::uint64_t v = std::uint64_t(d);
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
  out.write(reinterpret_cast<const char*>(t.data()),
            std::streamsize(size_t(t.numel()) * 4));
  require<IoError>(out.good(), "save_tensor_f32: write failed: ", path);
}

struct TensorFileHeader {
  TensorDType dtype;
  Shape shape;
};

inline TensorFileHeader read_tensor_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  require<IoError>(in.good() && std::memcmp(magic, detail::kTensorMagic, 8) == 0,
                   "tensor file: bad magic in ", path);
  std::uint32_t dtype = 0, ndim = 0;
  in.read(reinterpret_cast<char*>(&dtype), 4);
  in.read(reinterpret_cast<char*>(&ndim), 4);
  require<IoError>(in.good() && dtype <= 1 && ndim <= 8, "tensor file: bad header in ",
                   path);
  Shape shape(ndim);
  for (auto& d : shape) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    d = index_t(v);
  }
  require<IoError>(in.good(), "tensor file: truncated header in ", path);
  return {TensorDType(dtype), shape};
}

// Loads either dtype as float; uint8 payloads are scaled to [0, 1].
inline Tensor<float> load_tensor_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "load_tensor: cannot open ", path);
  const auto hdr = read_tensor_header(in, path);
  const index_t n = shape_numel(hdr.shape);
  Tensor<float> t(hdr.shape);
  if (hdr.dtype == TensorDType::kU8) {
    std::vector<std::uint8_t> raw(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    require<IoError>(in.gcount() == std::streamsize(raw.size()),
                     "load_tensor: truncated payload in ", path);
    for (index_t i = 0; i < n; ++i) t.data()[i] = float(raw[size_t(i)]) / 255.0f;
  } else {
    in.read(reinterpret_cast<char*>(t.data()), std::streamsize(size_t(n) * 4));
    require<IoError>(in.gcount() == std::streamsize(size_t(n) * 4),
                     "load_tensor: truncated payload in ", path);
  }
  return t;
}

inline Shape peek_tensor_shape(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "peek_tensor_shape: cannot open ", path);
  return read_tensor_header(in, path).shape;
}

}  // namespace lipspeech
