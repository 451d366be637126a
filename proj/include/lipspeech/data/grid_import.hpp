// lipspeech/data/grid_import.hpp

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
#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lipspeech/audio/resample.hpp"
#include "lipspeech/audio/wav.hpp"
#include "lipspeech/data/loader.hpp"
#include "lipspeech/data/manifest.hpp"
#include "lipspeech/data/tensor_file.hpp"
#include "lipspeech/data/toy_corpus.hpp"

namespace lipspeech {

// Import of GRID-style recordings that were already lip-cropped. Expected
// input layout (documented in docs/formats.md):
//   in_root/<speaker>/<utterance>/audio.wav
//   in_root/<speaker>/<utterance>/transcript.txt
//   in_root/<speaker>/<utterance>/lips.npzlike            [T,3,H,W]
//     or  in_root/<speaker>/<utterance>/frames/*.ppm      (P6, any size)
//   in_root/<speaker>/<utterance>/face.npzlike | face.ppm (optional;
//     falls back to the middle lip frame)
// Audio is resampled to the configured rate and padded/trimmed to the
// utterance length; frame sequences are trimmed or padded by repeating the
// last frame. Unreadable utterances are skipped and reported.

struct GridImportReport {
  index_t imported = 0;
  std::vector<std::string> skipped;  // "path: reason"
};

namespace detail {

struct ImageU8 {
  index_t channels = 0, height = 0, width = 0;
  std::vector<std::uint8_t> data;  // [C, H, W]
};

inline ImageU8 read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "read_ppm: cannot open ", path);
  std::string magic;
  in >> magic;
  require<IoError>(magic == "P6", "read_ppm: not a P6 file: ", path);
  auto next_int = [&]() {
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
      if (c == '#') {
        while (c != '\n' && c != EOF) c = in.get();
      }
      c = in.get();
    }
    int v = 0;
    while (std::isdigit(c)) {
      v = v * 10 + (c - '0');
      c = in.get();
    }
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  require<IoError>(w > 0 && h > 0 && maxval == 255, "read_ppm: bad header: ", path);
  std::vector<std::uint8_t> interleaved(size_t(w) * size_t(h) * 3);
  in.read(reinterpret_cast<char*>(interleaved.data()),
          std::streamsize(interleaved.size()));
  require<IoError>(size_t(in.gcount()) == interleaved.size(),
                   "read_ppm: truncated: ", path);
  ImageU8 img;
  img.channels = 3;
  img.height = h;
  img.width = w;
  img.data.resize(interleaved.size());
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < w; ++x)
      for (index_t c = 0; c < 3; ++c)
        img.data[size_t(c * h * w + y * w + x)] =
            interleaved[size_t((y * w + x) * 3 + c)];
  return img;
}

inline std::vector<std::uint8_t> resize_bilinear(const std::uint8_t* src, index_t c,
                                                 index_t h, index_t w, index_t oh,
                                                 index_t ow) {
  std::vector<std::uint8_t> out(size_t(c * oh * ow));
  for (index_t ch = 0; ch < c; ++ch) {
    const std::uint8_t* plane = src + ch * h * w;
    for (index_t y = 0; y < oh; ++y) {
      const double fy = (double(y) + 0.5) * double(h) / double(oh) - 0.5;
      const index_t y0 = std::clamp<index_t>(index_t(std::floor(fy)), 0, h - 1);
      const index_t y1 = std::min(h - 1, y0 + 1);
      const double wy = std::clamp(fy - double(y0), 0.0, 1.0);
      for (index_t x = 0; x < ow; ++x) {
        const double fx = (double(x) + 0.5) * double(w) / double(ow) - 0.5;
        const index_t x0 = std::clamp<index_t>(index_t(std::floor(fx)), 0, w - 1);
        const index_t x1 = std::min(w - 1, x0 + 1);
        const double wx = std::clamp(fx - double(x0), 0.0, 1.0);
        const double v = (1 - wy) * ((1 - wx) * plane[y0 * w + x0] +
                                     wx * plane[y0 * w + x1]) +
                         wy * ((1 - wx) * plane[y1 * w + x0] +
                               wx * plane[y1 * w + x1]);
        out[size_t(ch * oh * ow + y * ow + x)] =
            std::uint8_t(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return out;
}

// [T, C, H, W] uint8 from lips.npzlike (u8 or f32) or a frames/ directory.
inline std::vector<std::uint8_t> load_frames(const std::filesystem::path& dir,
                                             const VideoConfig& video) {
  const index_t c = video.channels, h = video.lip_height, w = video.lip_width;
  std::vector<std::uint8_t> frames;  // concatenated [C,H,W] planes
  index_t t = 0;
  if (std::filesystem::exists(dir / "lips.npzlike")) {
    const auto tens = load_tensor_f32((dir / "lips.npzlike").string());
    require<CorpusError>(tens.ndim() == 4 && tens.dim(1) == c,
                         "grid import: lips.npzlike must be [T,C,H,W] in ",
                         dir.string());
    t = tens.dim(0);
    const index_t ih = tens.dim(2), iw = tens.dim(3);
    std::vector<std::uint8_t> u8(size_t(tens.numel()));
    for (index_t i = 0; i < tens.numel(); ++i)
      u8[size_t(i)] =
          std::uint8_t(std::clamp(double(tens.data()[i]) * 255.0, 0.0, 255.0));
    for (index_t f = 0; f < t; ++f) {
      auto resized = resize_bilinear(u8.data() + f * c * ih * iw, c, ih, iw, h, w);
      frames.insert(frames.end(), resized.begin(), resized.end());
    }
  } else if (std::filesystem::exists(dir / "frames")) {
    std::vector<std::filesystem::path> files;
    for (const auto& p : std::filesystem::directory_iterator(dir / "frames"))
      if (p.path().extension() == ".ppm") files.push_back(p.path());
    std::sort(files.begin(), files.end());
    require<CorpusError>(!files.empty(), "grid import: no .ppm frames in ",
                         (dir / "frames").string());
    for (const auto& f : files) {
      const auto img = read_ppm(f.string());
      auto resized = resize_bilinear(img.data.data(), img.channels, img.height,
                                     img.width, h, w);
      frames.insert(frames.end(), resized.begin(), resized.end());
      ++t;
    }
  } else {
    throw CorpusError(
        strcat_all("grid import: no lips.npzlike or frames/ in ", dir.string()));
  }
  // pad (repeat last) / trim to the configured frame count
  const index_t plane = c * h * w;
  const index_t want = video.frames_per_utterance;
  if (t > want) frames.resize(size_t(want * plane));
  while (t < want) {
    frames.insert(frames.end(), frames.end() - plane, frames.end());
    ++t;
  }
  return frames;
}

}  // namespace detail

inline CorpusManifest grid_import(const std::filesystem::path& in_root,
                                  const std::filesystem::path& out_root,
                                  const AudioConfig& audio, const VideoConfig& video,
                                  std::uint64_t seed, GridImportReport* report,
                                  bool force = false) {
  audio.validate();
  video.validate(audio);
  require<CorpusError>(std::filesystem::is_directory(in_root),
                       "grid_import: input directory ", in_root.string(),
                       " does not exist");
  if (std::filesystem::exists(out_root)) {
    require<CorpusError>(force, "grid_import: output root ", out_root.string(),
                         " already exists (use force to overwrite)");
    std::filesystem::remove_all(out_root);
  }
  std::filesystem::create_directories(out_root);

  CorpusManifest manifest;
  manifest.root = out_root;
  manifest.seed = seed;
  manifest.audio = audio;
  manifest.video = video;

  std::vector<std::filesystem::path> speaker_dirs;
  for (const auto& p : std::filesystem::directory_iterator(in_root))
    if (p.is_directory()) speaker_dirs.push_back(p.path());
  std::sort(speaker_dirs.begin(), speaker_dirs.end());

  for (const auto& spk_dir : speaker_dirs) {
    std::vector<std::filesystem::path> utt_dirs;
    for (const auto& p : std::filesystem::directory_iterator(spk_dir))
      if (p.is_directory()) utt_dirs.push_back(p.path());
    std::sort(utt_dirs.begin(), utt_dirs.end());
    for (const auto& utt_dir : utt_dirs) {
      try {
        const std::string speaker = spk_dir.filename().string();
        const std::string utt = utt_dir.filename().string();

        auto wav = read_wav((utt_dir / "audio.wav").string());
        auto wave = resample(wav.samples, wav.sample_rate, audio.sample_rate);
        wave.resize(size_t(audio.samples_per_utterance()), 0.0f);
        float peak = 0.0f;
        for (float v : wave) peak = std::max(peak, std::abs(v));
        if (peak > 1.0f)
          for (auto& v : wave) v /= peak;

        std::ifstream tr(utt_dir / "transcript.txt");
        require<CorpusError>(tr.good(), "missing transcript.txt");
        std::string transcript;
        std::getline(tr, transcript);
        std::string clean;
        for (char ch : transcript) {
          const char lc = char(std::tolower(static_cast<unsigned char>(ch)));
          if (grapheme::is_valid_char(lc)) clean.push_back(lc);
        }
        while (!clean.empty() && clean.back() == ' ') clean.pop_back();
        require<CorpusError>(!clean.empty(), "empty transcript after cleanup");

        auto frames = detail::load_frames(utt_dir, video);

        std::vector<std::uint8_t> face;
        const index_t fs = video.face_size;
        if (std::filesystem::exists(utt_dir / "face.npzlike")) {
          const auto t = load_tensor_f32((utt_dir / "face.npzlike").string());
          require<CorpusError>(t.ndim() == 3 && t.dim(0) == video.channels,
                               "face.npzlike must be [C,H,W]");
          std::vector<std::uint8_t> u8(size_t(t.numel()));
          for (index_t i = 0; i < t.numel(); ++i)
            u8[size_t(i)] =
                std::uint8_t(std::clamp(double(t.data()[i]) * 255.0, 0.0, 255.0));
          face = detail::resize_bilinear(u8.data(), video.channels, t.dim(1),
                                         t.dim(2), fs, fs);
        } else if (std::filesystem::exists(utt_dir / "face.ppm")) {
          const auto img = detail::read_ppm((utt_dir / "face.ppm").string());
          face = detail::resize_bilinear(img.data.data(), img.channels, img.height,
                                         img.width, fs, fs);
        } else {
          // middle lip frame as the face source
          const index_t plane = video.channels * video.lip_height * video.lip_width;
          const index_t mid = video.frames_per_utterance / 2;
          face = detail::resize_bilinear(frames.data() + mid * plane, video.channels,
                                         video.lip_height, video.lip_width, fs, fs);
        }

        const auto dir = out_root / speaker / utt;
        std::filesystem::create_directories(dir);
        {
          std::ofstream out(dir / "transcript.txt");
          out << clean << "\n";
        }
        write_pcm16((dir / "audio.pcm16").string(), wave);
        save_tensor_u8((dir / "lips.npzlike").string(),
                       {video.frames_per_utterance, video.channels,
                        video.lip_height, video.lip_width},
                       frames);
        save_tensor_u8((dir / "face.npzlike").string(),
                       {video.channels, fs, fs}, face);

        ManifestEntry e;
        e.speaker_id = speaker;
        e.utterance_id = utt;
        e.transcript = clean;
        manifest.entries.push_back(std::move(e));
        if (report) ++report->imported;
      } catch (const std::exception& ex) {
        if (report)
          report->skipped.push_back(utt_dir.string() + ": " + ex.what());
      }
    }
  }
  if (index_t(manifest.entries.size()) >= 3)
    assign_splits(manifest.entries, seed);
  manifest.save();
  return manifest;
}

}  // namespace lipspeech
