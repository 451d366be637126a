// lipspeech/audio/griffin_lim.hpp

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

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <vector>

#include "lipspeech/audio/mel.hpp"
#include "lipspeech/audio/stft.hpp"

namespace lipspeech {

// Plain (momentum-free) phase reconstruction from a log-mel spectrogram.
// Mel bins are lifted back to the linear magnitude spectrum through the
// filterbank pseudo-inverse, clamped at zero. Plain iterations keep the
// projection error non-increasing, which the tests rely on.
class GriffinLim {
 public:
  explicit GriffinLim(const AudioConfig& cfg) : cfg_(cfg), stft_(cfg.win, cfg.fft_size, cfg.hop) {
    cfg_.validate();
    const index_t bins = cfg_.fft_size / 2 + 1;
    const auto fb = mel_filterbank(cfg_);
    Eigen::MatrixXd m(cfg_.mel_bins, bins);
    for (index_t j = 0; j < cfg_.mel_bins; ++j)
      for (index_t k = 0; k < bins; ++k) m(j, k) = fb[size_t(j * bins + k)];
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    pinv_ = svd.solve(Eigen::MatrixXd::Identity(cfg_.mel_bins, cfg_.mel_bins));
  }

  // mel: log-power [mel_bins, T]; returns T * hop samples clipped to [-1, 1].
  template <typename S>
  std::vector<float> synthesize(const MelSpectrogramT<S>& mel, index_t iterations) const {
    require(iterations >= 1, "GriffinLim: iterations must be >= 1");
    require<ShapeError>(mel.bins() == cfg_.mel_bins, "GriffinLim: mel bins ",
                        mel.bins(), " expected ", cfg_.mel_bins);
    const index_t frames = mel.frames();
    const index_t bins = cfg_.fft_size / 2 + 1;

    // log power -> linear magnitude per frame
    Eigen::MatrixXd p(cfg_.mel_bins, frames);
    const S* md = mel.values.data();
    for (index_t j = 0; j < cfg_.mel_bins; ++j)
      for (index_t t = 0; t < frames; ++t) p(j, t) = std::exp(double(md[j * frames + t]));
    Eigen::MatrixXd lin = pinv_ * p;
    std::vector<double> mag(size_t(frames * bins));
    for (index_t t = 0; t < frames; ++t)
      for (index_t k = 0; k < bins; ++k)
        mag[size_t(t * bins + k)] = std::sqrt(std::max(0.0, lin(k, t)));

    std::vector<std::complex<double>> spec(size_t(frames * bins));
    for (size_t i = 0; i < spec.size(); ++i) spec[i] = {mag[i], 0.0};
    std::vector<double> x;
    for (index_t it = 0; it < iterations; ++it) {
      x = stft_.inverse(spec, frames);
      if (it + 1 == iterations) break;
      auto est = stft_.forward(x);
      for (size_t i = 0; i < spec.size(); ++i) {
        const double a = std::abs(est[i]);
        spec[i] = a > 1e-12 ? est[i] * (mag[i] / a) : std::complex<double>(mag[i], 0.0);
      }
    }
    std::vector<float> out(x.size());
    for (size_t i = 0; i < x.size(); ++i)
      out[i] = float(std::min(1.0, std::max(-1.0, x[i])));
    return out;
  }

 private:
  AudioConfig cfg_;
  Stft stft_;
  Eigen::MatrixXd pinv_;  // [bins, mel_bins]
};

}  // namespace lipspeech
