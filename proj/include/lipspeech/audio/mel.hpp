// lipspeech/audio/mel.hpp

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

#include "lipspeech/audio/stft.hpp"
#include "lipspeech/core/common.hpp"
#include "lipspeech/core/tensor.hpp"

namespace lipspeech {

struct AudioConfig {
  int sample_rate = 16000;
  double utterance_seconds = 3.0;
  int mel_bins = 80;
  int hop = 320;
  int win = 1280;
  int fft_size = 1280;
  double mel_floor = 1e-5;  // linear power floor

  index_t samples_per_utterance() const {
    return index_t(std::llround(double(sample_rate) * utterance_seconds));
  }
  index_t mel_frames_per_utterance() const { return samples_per_utterance() / hop; }

  void validate() const {
    require<ConfigError>(sample_rate > 0 && hop > 0 && win > 0 && mel_bins > 0,
                         "AudioConfig: nonpositive field");
    require<ConfigError>(fft_size >= win, "AudioConfig: fft_size < win");
    require<ConfigError>(samples_per_utterance() % hop == 0,
                         "AudioConfig: sample_rate * utterance_seconds must be "
                         "divisible by hop");
    require<ConfigError>(mel_floor > 0, "AudioConfig: mel_floor must be > 0");
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular filterbank on the HTK mel scale, rows [mel_bins, fft/2+1],
// spanning 0 Hz to Nyquist.
inline std::vector<double> mel_filterbank(const AudioConfig& cfg) {
  const index_t bins = cfg.fft_size / 2 + 1;
  const index_t m = cfg.mel_bins;
  const double f_max = double(cfg.sample_rate) / 2.0;
  const double mel_max = hz_to_mel(f_max);
  std::vector<double> centers(size_t(m + 2));
  for (index_t i = 0; i < m + 2; ++i)
    centers[size_t(i)] = mel_to_hz(mel_max * double(i) / double(m + 1));
  std::vector<double> fb(size_t(m * bins), 0.0);
  for (index_t k = 0; k < bins; ++k) {
    const double f = double(k) * double(cfg.sample_rate) / double(cfg.fft_size);
    for (index_t j = 0; j < m; ++j) {
      const double lo = centers[size_t(j)], c = centers[size_t(j + 1)],
                   hi = centers[size_t(j + 2)];
      double w = 0.0;
      if (f >= lo && f <= c && c > lo) w = (f - lo) / (c - lo);
      else if (f > c && f <= hi && hi > c) w = (hi - f) / (hi - c);
      fb[size_t(j * bins + k)] = w;
    }
  }
  return fb;
}

template <typename S>
struct MelSpectrogramT {
  Tensor<S> values;  // [mel_bins, frames], natural-log power
  int sample_rate = 0;
  int hop = 0;
  int win = 0;
  double mel_floor = 0;

  index_t bins() const { return values.dim(0); }
  index_t frames() const { return values.dim(1); }
};

using MelSpectrogram = MelSpectrogramT<float>;

// Log-power mel spectrogram. Exactly length/hop frames; every entry is
// >= log(mel_floor).
template <typename S = float>
MelSpectrogramT<S> compute_mel(const std::vector<float>& waveform,
                               const AudioConfig& cfg) {
  cfg.validate();
  for (float v : waveform)
    require(std::isfinite(v), "compute_mel: non-finite sample in waveform");
  Stft stft(cfg.win, cfg.fft_size, cfg.hop);
  std::vector<double> x(waveform.begin(), waveform.end());
  const index_t frames = stft.num_frames(index_t(x.size()));
  const auto spec = stft.forward(x);
  const auto fb = mel_filterbank(cfg);
  const index_t bins = stft.bins();
  MelSpectrogramT<S> mel;
  mel.values = Tensor<S>({cfg.mel_bins, frames});
  mel.sample_rate = cfg.sample_rate;
  mel.hop = cfg.hop;
  mel.win = cfg.win;
  mel.mel_floor = cfg.mel_floor;
  S* out = mel.values.data();
  std::vector<double> power(static_cast<size_t>(bins));
  for (index_t t = 0; t < frames; ++t) {
    for (index_t k = 0; k < bins; ++k) power[size_t(k)] = std::norm(spec[size_t(t * bins + k)]);
    for (index_t j = 0; j < cfg.mel_bins; ++j) {
      double acc = 0.0;
      const double* row = fb.data() + j * bins;
      for (index_t k = 0; k < bins; ++k) acc += row[k] * power[size_t(k)];
      out[j * frames + t] = S(std::log(std::max(acc, cfg.mel_floor)));
    }
  }
  return mel;
}

// Mean absolute difference between two equally shaped mels.
template <typename S>
double mel_l1_distance(const MelSpectrogramT<S>& a, const MelSpectrogramT<S>& b) {
  require<ShapeError>(a.values.shape() == b.values.shape(),
                      "mel_l1_distance: shape mismatch");
  double acc = 0;
  const S* pa = a.values.data();
  const S* pb = b.values.data();
  for (index_t i = 0; i < a.values.numel(); ++i) acc += std::abs(double(pa[i]) - double(pb[i]));
  return acc / double(a.values.numel());
}

}  // namespace lipspeech
