// lipspeech/audio/stft.hpp

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

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include "lipspeech/core/common.hpp"

namespace lipspeech {

// Short-time Fourier analysis/synthesis with a periodic Hann window and
// center padding chosen so an input of length L yields exactly L/hop frames.
// All spectral math runs in double; FFTW plans use FFTW_ESTIMATE so plan
// choice (and therefore output) is reproducible.
class Stft {
 public:
  Stft(index_t win, index_t fft_size, index_t hop)
      : win_(win), fft_(fft_size), hop_(hop), bins_(fft_size / 2 + 1) {
    require(fft_size >= win, "Stft: fft_size < win");
    require(win >= hop && hop > 0, "Stft: need win >= hop > 0");
    require((win - hop) % 2 == 0, "Stft: win - hop must be even for centering");
    window_.resize(size_t(win_));
    for (index_t n = 0; n < win_; ++n)
      window_[size_t(n)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(n) / double(win_));
    std::lock_guard<std::mutex> lock(plan_mutex());
    re_ = fftw_alloc_real(size_t(fft_));
    co_ = fftw_alloc_complex(size_t(bins_));
    fwd_ = fftw_plan_dft_r2c_1d(int(fft_), re_, co_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(int(fft_), co_, re_, FFTW_ESTIMATE);
  }

  ~Stft() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(re_);
    fftw_free(co_);
  }

  Stft(const Stft&) = delete;
  Stft& operator=(const Stft&) = delete;

  index_t bins() const { return bins_; }
  index_t hop() const { return hop_; }
  index_t win() const { return win_; }

  index_t num_frames(index_t samples) const {
    require(samples % hop_ == 0, "Stft: sample count ", samples,
            " not divisible by hop ", hop_);
    return samples / hop_;
  }

  // Complex spectrogram, frame-major: out[t * bins + k].
  std::vector<std::complex<double>> forward(const std::vector<double>& x) const {
    const index_t frames = num_frames(index_t(x.size()));
    const auto padded = center_pad(x);
    std::vector<std::complex<double>> out(size_t(frames * bins_));
    for (index_t t = 0; t < frames; ++t) {
      for (index_t n = 0; n < win_; ++n)
        re_[n] = padded[size_t(t * hop_ + n)] * window_[size_t(n)];
      for (index_t n = win_; n < fft_; ++n) re_[n] = 0.0;
      fftw_execute(fwd_);
      for (index_t k = 0; k < bins_; ++k)
        out[size_t(t * bins_ + k)] = {co_[k][0], co_[k][1]};
    }
    return out;
  }

  // Overlap-add inverse with squared-window normalization; returns
  // frames * hop samples (the center-pad margins are cropped).
  std::vector<double> inverse(const std::vector<std::complex<double>>& spec,
                              index_t frames) const {
    require(index_t(spec.size()) == frames * bins_, "Stft::inverse: size");
    const index_t pad = (win_ - hop_) / 2;
    const index_t total = frames * hop_ + 2 * pad;
    std::vector<double> acc(size_t(total), 0.0);
    std::vector<double> norm(size_t(total), 0.0);
    for (index_t t = 0; t < frames; ++t) {
      for (index_t k = 0; k < bins_; ++k) {
        co_[k][0] = spec[size_t(t * bins_ + k)].real();
        co_[k][1] = spec[size_t(t * bins_ + k)].imag();
      }
      fftw_execute(inv_);
      const double scale = 1.0 / double(fft_);
      for (index_t n = 0; n < win_; ++n) {
        acc[size_t(t * hop_ + n)] += re_[n] * scale * window_[size_t(n)];
        norm[size_t(t * hop_ + n)] += window_[size_t(n)] * window_[size_t(n)];
      }
    }
    std::vector<double> out(size_t(frames * hop_));
    for (index_t i = 0; i < frames * hop_; ++i) {
      const double w = norm[size_t(i + pad)];
      out[size_t(i)] = w > 1e-10 ? acc[size_t(i + pad)] / w : 0.0;
    }
    return out;
  }

 private:
  std::vector<double> center_pad(const std::vector<double>& x) const {
    const index_t pad = (win_ - hop_) / 2;
    const index_t n = index_t(x.size());
    require(n > pad, "Stft: input shorter than pad margin");
    std::vector<double> out(size_t(n + 2 * pad));
    for (index_t i = 0; i < pad; ++i) out[size_t(i)] = x[size_t(pad - i)];
    std::copy(x.begin(), x.end(), out.begin() + pad);
    for (index_t i = 0; i < pad; ++i)
      out[size_t(n + pad + i)] = x[size_t(n - 2 - i)];
    return out;
  }

  static std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
  }

  index_t win_, fft_, hop_, bins_;
  std::vector<double> window_;
  double* re_;
  fftw_complex* co_;
  fftw_plan fwd_, inv_;
};

}  // namespace lipspeech
