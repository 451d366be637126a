// lipspeech/audio/resample.hpp

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
#include <vector>

#include "lipspeech/core/common.hpp"

namespace lipspeech {

// Windowed-sinc resampler (Hann window, 32 zero crossings per side).
// Output length is round(n * out_rate / in_rate).
inline std::vector<float> resample(const std::vector<float>& x, int in_rate,
                                   int out_rate) {
  require(in_rate > 0 && out_rate > 0, "resample: rates must be positive");
  if (in_rate == out_rate) return x;
  const double ratio = double(out_rate) / double(in_rate);
  const index_t n_in = index_t(x.size());
  const index_t n_out = index_t(std::llround(double(n_in) * ratio));
  const double cutoff = 0.95 * std::min(1.0, ratio);  // relative to in-Nyquist
  const int half = 32;
  const double taps_half = double(half) / std::min(1.0, ratio);
  std::vector<float> out(size_t(n_out), 0.0f);
  for (index_t i = 0; i < n_out; ++i) {
    const double center = double(i) / ratio;
    const index_t j0 = index_t(std::ceil(center - taps_half));
    const index_t j1 = index_t(std::floor(center + taps_half));
    double acc = 0, wsum = 0;
    for (index_t j = j0; j <= j1; ++j) {
      const double u = (double(j) - center) * std::min(1.0, ratio);
      const double s = u == 0.0 ? cutoff : std::sin(M_PI * cutoff * u) / (M_PI * u);
      const double win = 0.5 + 0.5 * std::cos(M_PI * u / double(half));
      const double w = s * win;
      wsum += w;
      if (j >= 0 && j < n_in) acc += w * double(x[size_t(j)]);
    }
    out[size_t(i)] = wsum != 0.0 ? float(acc / wsum) : 0.0f;
  }
  return out;
}

}  // namespace lipspeech
