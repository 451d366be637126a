// lipspeech/core/hash.hpp

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
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "lipspeech/core/common.hpp"

namespace lipspeech {

// FNV-1a, 64 bit. Used as the content hash for configs, checkpoints and
// determinism checks; collision resistance beyond accidental corruption is
// not required anywhere.
class ContentHash {
 public:
  ContentHash& update(const void* bytes, size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ull;
    }
    return *this;
  }

  ContentHash& update(const std::string& s) { return update(s.data(), s.size()); }

  template <typename T>
  ContentHash& update_pod(const T& v) {
    return update(&v, sizeof(T));
  }

  std::uint64_t value() const { return h_; }

  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h_;
    return os.str();
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

inline std::string hash_bytes_hex(const void* bytes, size_t n) {
  return ContentHash().update(bytes, n).hex();
}

inline std::string hash_string_hex(const std::string& s) {
  return hash_bytes_hex(s.data(), s.size());
}

inline std::string hash_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "hash_file_hex: cannot open ", path);
  ContentHash h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), std::streamsize(buf.size()));
    h.update(buf.data(), size_t(in.gcount()));
  }
  return h.hex();
}

}  // namespace lipspeech
