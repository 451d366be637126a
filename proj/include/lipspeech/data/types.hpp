// lipspeech/data/types.hpp

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
#include <string>
#include <vector>

#include "lipspeech/audio/mel.hpp"
#include "lipspeech/core/common.hpp"
#include "lipspeech/core/tensor.hpp"
#include "lipspeech/data/grapheme.hpp"

namespace lipspeech {

// Mel frames advance twice per video frame (decoder upsampling (1,1,2)).
constexpr index_t kMelFramesPerVideoFrame = 2;

struct VideoConfig {
  int frames_per_utterance = 75;
  int lip_height = 144;
  int lip_width = 144;
  int channels = 3;
  int face_size = 128;

  void validate(const AudioConfig& audio) const {
    require<ConfigError>(frames_per_utterance > 0 && channels > 0,
                         "VideoConfig: nonpositive field");
    require<ConfigError>(lip_height == 144 && lip_width == 144,
                         "VideoConfig: lip crop must be 144x144");
    require<ConfigError>(
        audio.mel_frames_per_utterance() ==
            index_t(frames_per_utterance) * kMelFramesPerVideoFrame,
        "VideoConfig: mel frames per utterance (",
        audio.mel_frames_per_utterance(), ") must be ", kMelFramesPerVideoFrame,
        "x video frames (", frames_per_utterance, ")");
  }
};

struct UtteranceSample {
  std::string speaker_id;
  std::string utterance_id;
  Tensor<float> lip_frames;    // [T_v, C, 144, 144], values in [0, 1]
  Tensor<float> face_image;    // [C, face, face], values in [0, 1]
  std::vector<float> waveform; // samples_per_utterance entries in [-1, 1]
  std::string transcript;

  void validate(const AudioConfig& audio, const VideoConfig& video) const {
    require<CorpusError>(
        lip_frames.ndim() == 4 &&
            lip_frames.dim(0) == video.frames_per_utterance &&
            lip_frames.dim(1) == video.channels &&
            lip_frames.dim(2) == video.lip_height &&
            lip_frames.dim(3) == video.lip_width,
        "UtteranceSample ", speaker_id, "/", utterance_id, ": lip_frames shape ",
        shape_str(lip_frames.shape()));
    require<CorpusError>(face_image.ndim() == 3 && face_image.dim(0) == video.channels,
                         "UtteranceSample ", speaker_id, "/", utterance_id,
                         ": face_image shape ", shape_str(face_image.shape()));
    require<CorpusError>(index_t(waveform.size()) == audio.samples_per_utterance(),
                         "UtteranceSample ", speaker_id, "/", utterance_id,
                         ": waveform length ", waveform.size(), " expected ",
                         audio.samples_per_utterance());
    for (float v : waveform)
      require<CorpusError>(std::isfinite(v) && v >= -1.0f && v <= 1.0f,
                           "UtteranceSample ", speaker_id, "/", utterance_id,
                           ": waveform sample out of [-1,1]");
    require<CorpusError>(!transcript.empty(), "UtteranceSample ", speaker_id, "/",
                         utterance_id, ": empty transcript");
    for (char c : transcript)
      require<CorpusError>(grapheme::is_valid_char(c), "UtteranceSample ",
                           speaker_id, "/", utterance_id,
                           ": transcript has invalid character");
  }
};

}  // namespace lipspeech
