// lipspeech/core/rng.hpp

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

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "lipspeech/core/common.hpp"

namespace lipspeech {

// Deterministic RNG. The raw mt19937_64 stream is fully specified by the
// standard; the distribution mappings below are implemented by hand so the
// produced values never depend on the standard library vendor.
class Rng {
 public:
  Rng() : gen_(0x9e3779b97f4a7c15ull) {}
  explicit Rng(std::uint64_t seed) : gen_(splitmix(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0. Rejection-free modulo is fine here:
  // n is always tiny relative to 2^64 so the bias is unobservable.
  index_t uniform_index(index_t n) {
    require(n > 0, "Rng::uniform_index: n must be positive");
    return index_t(gen_() % std::uint64_t(n));
  }

  // Box-Muller; one value per call keeps the stream position predictable.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream; hashing the tag keeps sub-streams decorrelated
  // from the parent and from each other.
  Rng fork(std::uint64_t tag) {
    std::uint64_t s = splitmix(gen_() ^ splitmix(tag + 0x632be59bd9b4e019ull));
    Rng child;
    child.gen_.seed(s);
    return child;
  }

  std::string save_state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void load_state(const std::string& state) {
    std::istringstream is(state);
    is >> gen_;
    require<IoError>(!is.fail(), "Rng::load_state: malformed state string");
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace lipspeech
