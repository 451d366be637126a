// lipspeech/data/toy_corpus.hpp

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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lipspeech/audio/wav.hpp"
#include "lipspeech/core/rng.hpp"
#include "lipspeech/data/grapheme.hpp"
#include "lipspeech/data/manifest.hpp"
#include "lipspeech/data/tensor_file.hpp"
#include "lipspeech/data/types.hpp"

namespace lipspeech {

// Procedural stand-in corpus. Every speaker gets a fixed vocal timbre
// (base F0 plus a formant-like spectral envelope) and a fixed face texture;
// every grapheme gets a fixed mouth shape. Everything is derived from the
// corpus seed, so regeneration is byte-identical.

namespace toy {

struct MouthParams {
  double aperture;  // 0 closed .. 1 wide open
  double width;
  double tilt;      // radians
  double voicing;   // 0 unvoiced .. 1 voiced
  double f0_mult;
  double formant_shift;
};

inline MouthParams grapheme_params(index_t id) {
  if (id == grapheme::kSpaceId || id == grapheme::kBlankId)
    return {0.02, 0.30, 0.0, 0.0, 1.0, 1.0};
  const index_t i = id - 1;  // 0..25
  const double a = double((i * 5) % 26) / 25.0;
  const double w = double((i * 11) % 26) / 25.0;
  const double t = double((i * 17) % 26) / 25.0;
  const double u = double((i * 7) % 26) / 25.0;
  const double v = double((i * 3) % 26) / 25.0;
  const char c = char('a' + i);
  const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  return {0.15 + 0.80 * a,          0.25 + 0.70 * w, -0.30 + 0.60 * t,
          vowel ? 1.0 : 0.75,       0.95 + 0.10 * u, 0.88 + 0.24 * v};
}

struct SpeakerVoice {
  double f0;
  double formant1, formant2, formant3;
};

inline SpeakerVoice speaker_voice(index_t speaker_index) {
  const double k = double(speaker_index);
  return {85.0 + 18.0 * k, 380.0 + 45.0 * k, 1250.0 + 110.0 * k, 2600.0 + 140.0 * k};
}

inline double spectral_envelope(const SpeakerVoice& v, double f) {
  auto bump = [](double f, double c, double w) {
    const double d = (f - c) / w;
    return std::exp(-d * d);
  };
  return 1.2 * bump(f, v.formant1, 150.0) + 1.0 * bump(f, v.formant2, 190.0) +
         0.5 * bump(f, v.formant3, 260.0) + 0.12 * std::exp(-f / 2500.0);
}

// Harmonic synthesis with accumulated phase; segment edges get short linear
// ramps so the tone does not click at grapheme boundaries.
inline std::vector<float> synthesize_waveform(const GraphemeIds& ids,
                                              const SpeakerVoice& voice,
                                              const AudioConfig& audio, Rng rng) {
  const index_t n = audio.samples_per_utterance();
  const index_t n_seg = index_t(ids.size());
  const double sr = double(audio.sample_rate);
  std::vector<float> out(size_t(n), 0.0f);
  const int n_harm = std::max(1, int(7400.0 / voice.f0));
  std::vector<double> phase(size_t(n_harm), 0.0);
  const index_t ramp = index_t(0.010 * sr);
  for (index_t s = 0; s < n; ++s) {
    const index_t seg = std::min<index_t>(n_seg - 1, s * n_seg / n);
    const auto gp = grapheme_params(ids[size_t(seg)]);
    const double f0 = voice.f0 * gp.f0_mult;
    // edge ramp within the segment
    const index_t seg_start = seg * n / n_seg;
    const index_t seg_end = (seg + 1) * n / n_seg;
    double env = 1.0;
    if (s - seg_start < ramp) env = double(s - seg_start) / double(ramp);
    if (seg_end - s <= ramp) env = std::min(env, double(seg_end - s) / double(ramp));
    double acc = 0.0;
    for (int h = 1; h <= n_harm; ++h) {
      const double fh = f0 * h;
      if (fh >= sr / 2.0 - 200.0) break;
      phase[size_t(h - 1)] += 2.0 * M_PI * fh / sr;
      if (phase[size_t(h - 1)] > 2.0 * M_PI) phase[size_t(h - 1)] -= 2.0 * M_PI;
      double amp = spectral_envelope(voice, fh * gp.formant_shift) / std::sqrt(double(h));
      if (h == 1) amp += 1.5;
      acc += gp.voicing * amp * std::sin(phase[size_t(h - 1)]);
    }
    acc += (0.004 + 0.08 * (1.0 - gp.voicing)) * (rng.uniform() * 2.0 - 1.0);
    out[size_t(s)] = float(env * acc);
  }
  float peak = 1e-6f;
  for (float v : out) peak = std::max(peak, std::abs(v));
  const float scale = 0.8f / peak;
  for (auto& v : out) v *= scale;
  return out;
}

// Mouth geometry for a video frame: piecewise grapheme parameters with a
// short blend near segment boundaries.
inline MouthParams mouth_at_frame(const GraphemeIds& ids, index_t frame,
                                  index_t total_frames) {
  const index_t n_seg = index_t(ids.size());
  const double pos = (double(frame) + 0.5) / double(total_frames) * double(n_seg);
  index_t seg = std::min<index_t>(n_seg - 1, index_t(pos));
  const double frac = pos - double(seg);
  const auto cur = grapheme_params(ids[size_t(seg)]);
  const auto nxt = grapheme_params(ids[size_t(std::min(n_seg - 1, seg + 1))]);
  double s = std::clamp((frac - 0.65) / 0.35, 0.0, 1.0);
  s = s * s * (3.0 - 2.0 * s) * 0.5;
  MouthParams p = cur;
  p.aperture = (1.0 - s) * cur.aperture + s * nxt.aperture;
  p.width = (1.0 - s) * cur.width + s * nxt.width;
  p.tilt = (1.0 - s) * cur.tilt + s * nxt.tilt;
  return p;
}

inline void render_lip_frame(const MouthParams& p, const VideoConfig& video,
                             double brightness, std::uint8_t* rgb) {
  const int h = video.lip_height, w = video.lip_width;
  const double cx = w / 2.0, cy = h * 0.54;
  const double ax = 18.0 + 36.0 * p.width;
  const double by = 3.0 + 30.0 * p.aperture;
  const double ct = std::cos(p.tilt), st = std::sin(p.tilt);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // skin with a soft vertical gradient
      double r = 205.0 - 18.0 * double(y) / h;
      double g = 168.0 - 14.0 * double(y) / h;
      double b = 148.0 - 12.0 * double(y) / h;
      const double dx = double(x) - cx, dy = double(y) - cy;
      const double u = (dx * ct + dy * st) / (ax * 1.28);
      const double v = (-dx * st + dy * ct) / (by * 1.28 + 2.5);
      const double ring = u * u + v * v;
      if (ring <= 1.0) {
        r = 158.0; g = 64.0; b = 74.0;  // lips
        const double iu = (dx * ct + dy * st) / ax;
        const double iv = (-dx * st + dy * ct) / by;
        if (iu * iu + iv * iv <= 1.0) {
          r = 58.0; g = 24.0; b = 30.0;  // mouth cavity
          if (p.aperture > 0.45 && std::abs(iv) < 0.28) {
            r = 233.0; g = 228.0; b = 218.0;  // teeth band
          }
        }
      }
      const size_t base = size_t(y * w + x);
      const size_t plane = size_t(h * w);
      rgb[base] = std::uint8_t(std::clamp(r * brightness, 0.0, 255.0));
      rgb[base + plane] = std::uint8_t(std::clamp(g * brightness, 0.0, 255.0));
      rgb[base + 2 * plane] = std::uint8_t(std::clamp(b * brightness, 0.0, 255.0));
    }
  }
}

inline std::vector<std::uint8_t> render_lip_sequence(const GraphemeIds& ids,
                                                     const VideoConfig& video,
                                                     Rng& rng) {
  const index_t t = video.frames_per_utterance;
  const size_t plane = size_t(video.lip_height * video.lip_width);
  std::vector<std::uint8_t> out(size_t(t) * 3 * plane);
  for (index_t f = 0; f < t; ++f) {
    const auto p = mouth_at_frame(ids, f, t);
    const double brightness = 1.0 + 0.015 * (rng.uniform() * 2.0 - 1.0);
    render_lip_frame(p, video, brightness, out.data() + size_t(f) * 3 * plane);
  }
  return out;
}

// Speaker-identifying face: a base palette plus sinusoidal gratings whose
// frequencies/phases come from the speaker stream, with mild per-utterance
// jitter (brightness, grating phase, feature offsets).
inline std::vector<std::uint8_t> render_face(index_t speaker_index,
                                             const VideoConfig& video, Rng spk_rng,
                                             Rng utt_rng) {
  const int n = video.face_size;
  const size_t plane = size_t(n * n);
  std::vector<std::uint8_t> out(3 * plane);
  struct Grating {
    double fx, fy, phase, amp;
    int channel;
  };
  double base[3];
  for (auto& b : base) b = 70.0 + 130.0 * spk_rng.uniform();
  std::vector<Grating> gratings;
  for (int i = 0; i < 6; ++i) {
    Grating g;
    g.fx = spk_rng.uniform(0.06, 0.45);
    g.fy = spk_rng.uniform(0.06, 0.45);
    g.phase = spk_rng.uniform(0.0, 2.0 * M_PI);
    g.amp = spk_rng.uniform(10.0, 26.0);
    g.channel = int(spk_rng.uniform_index(3));
    gratings.push_back(g);
  }
  const double eye_dx = spk_rng.uniform(-6.0, 6.0);
  const double eye_r = spk_rng.uniform(5.5, 9.0);
  const double mouth_w = spk_rng.uniform(12.0, 18.0);

  const double jitter_b = utt_rng.uniform(0.92, 1.08);
  const double jitter_p = utt_rng.uniform(-0.6, 0.6);
  const double jitter_x = utt_rng.uniform(-1.5, 1.5);
  const double jitter_y = utt_rng.uniform(-1.5, 1.5);

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double rgb[3] = {base[0], base[1], base[2]};
      for (const auto& g : gratings)
        rgb[g.channel] +=
            g.amp * std::sin(g.fx * (x + jitter_x) + g.fy * (y + jitter_y) +
                             g.phase + jitter_p);
      auto ellipse = [&](double cx, double cy, double rx, double ry) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
      };
      const double ex = n * 0.34 + eye_dx + jitter_x;
      const double ex2 = n * 0.66 + eye_dx + jitter_x;
      const double ey = n * 0.36 + jitter_y;
      if (ellipse(ex, ey, eye_r, eye_r * 0.7) || ellipse(ex2, ey, eye_r, eye_r * 0.7)) {
        rgb[0] = 35; rgb[1] = 30; rgb[2] = 30;
      }
      if (ellipse(n * 0.5 + jitter_x, n * 0.74 + jitter_y, mouth_w, 5.5)) {
        rgb[0] = 120; rgb[1] = 45; rgb[2] = 55;
      }
      for (int c = 0; c < 3; ++c)
        out[size_t(c) * plane + size_t(y * n + x)] =
            std::uint8_t(std::clamp(rgb[c] * jitter_b, 0.0, 255.0));
    }
  }
  return out;
}

inline std::string make_transcript(Rng& rng) {
  const index_t n_words = 2 + rng.uniform_index(2);
  std::string text;
  for (index_t w = 0; w < n_words; ++w) {
    if (w) text.push_back(' ');
    const index_t len = 2 + rng.uniform_index(3);
    for (index_t i = 0; i < len; ++i)
      text.push_back(char('a' + rng.uniform_index(26)));
  }
  return text;
}

}  // namespace toy

// Writes a full procedural corpus under root. Identical arguments produce
// byte-identical trees; an existing root is refused unless force is set.
inline CorpusManifest generate_toy_corpus(const std::filesystem::path& root,
                                          index_t n_speakers,
                                          index_t utterances_per_speaker,
                                          std::uint64_t seed,
                                          const AudioConfig& audio = {},
                                          const VideoConfig& video = {},
                                          bool force = false) {
  require<CorpusError>(n_speakers >= 2, "generate_toy_corpus: need >= 2 speakers");
  require<CorpusError>(utterances_per_speaker >= 4,
                       "generate_toy_corpus: need >= 4 utterances per speaker");
  audio.validate();
  video.validate(audio);
  if (std::filesystem::exists(root)) {
    require<CorpusError>(force, "generate_toy_corpus: root ", root.string(),
                         " already exists (use force to overwrite)");
    std::filesystem::remove_all(root);
  }
  std::filesystem::create_directories(root);

  CorpusManifest manifest;
  manifest.root = root;
  manifest.seed = seed;
  manifest.audio = audio;
  manifest.video = video;

  for (index_t s = 0; s < n_speakers; ++s) {
    const std::string speaker = "s" + std::to_string(s + 1);
    const auto voice = toy::speaker_voice(s);
    for (index_t u = 0; u < utterances_per_speaker; ++u) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "u%03d", int(u + 1));
      const std::string utt(buf);
      // independent streams per (speaker, utterance) field
      const std::uint64_t tag = Rng::splitmix(seed ^ (std::uint64_t(s) << 32 |
                                                      std::uint64_t(u)));
      Rng text_rng = Rng(tag).fork(1);
      Rng wave_rng = Rng(tag).fork(2);
      Rng lips_rng = Rng(tag).fork(3);
      Rng face_utt_rng = Rng(tag).fork(4);
      Rng face_spk_rng = Rng(Rng::splitmix(seed ^ 0xFACEull)).fork(std::uint64_t(s));

      const std::string transcript = toy::make_transcript(text_rng);
      const auto ids = encode_transcript(transcript);
      const auto wave = toy::synthesize_waveform(ids, voice, audio, wave_rng);
      const auto lips = toy::render_lip_sequence(ids, video, lips_rng);
      const auto face = toy::render_face(s, video, face_spk_rng, face_utt_rng);

      const auto dir = root / speaker / utt;
      std::filesystem::create_directories(dir);
      {
        std::ofstream tr(dir / "transcript.txt");
        tr << transcript << "\n";
        require<IoError>(tr.good(), "generate_toy_corpus: transcript write failed");
      }
      write_pcm16((dir / "audio.pcm16").string(), wave);
      save_tensor_u8((dir / "lips.npzlike").string(),
                     {video.frames_per_utterance, video.channels, video.lip_height,
                      video.lip_width},
                     lips);
      save_tensor_u8((dir / "face.npzlike").string(),
                     {video.channels, video.face_size, video.face_size}, face);

      ManifestEntry e;
      e.speaker_id = speaker;
      e.utterance_id = utt;
      e.transcript = transcript;
      manifest.entries.push_back(std::move(e));
    }
  }
  assign_splits(manifest.entries, seed);
  manifest.save();
  return manifest;
}

}  // namespace lipspeech
