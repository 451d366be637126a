// lipspeech/audio/wav.hpp

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

namespace lipspeech {

// Minimal RIFF/WAVE support: 16-bit PCM and 32-bit IEEE float, any channel
// count (downmixed to mono by averaging). Little-endian host assumed.

struct WavData {
  int sample_rate = 0;
  std::vector<float> samples;  // mono, [-1, 1]
};

namespace detail {
template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
}  // namespace detail

inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "read_wav: cannot open ", path);
  char tag[4];
  in.read(tag, 4);
  require<IoError>(std::memcmp(tag, "RIFF", 4) == 0, "read_wav: not RIFF: ", path);
  detail::read_pod<std::uint32_t>(in);
  in.read(tag, 4);
  require<IoError>(std::memcmp(tag, "WAVE", 4) == 0, "read_wav: not WAVE: ", path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  WavData wav;
  bool got_fmt = false, got_data = false;
  while (in && !(got_fmt && got_data)) {
    in.read(tag, 4);
    if (!in) break;
    const auto size = detail::read_pod<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = detail::read_pod<std::uint16_t>(in);
      channels = detail::read_pod<std::uint16_t>(in);
      rate = detail::read_pod<std::uint32_t>(in);
      detail::read_pod<std::uint32_t>(in);  // byte rate
      detail::read_pod<std::uint16_t>(in);  // block align
      bits = detail::read_pod<std::uint16_t>(in);
      in.ignore(std::streamsize(size) - 16);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      require<IoError>(got_fmt, "read_wav: data chunk before fmt: ", path);
      require<IoError>(channels > 0, "read_wav: zero channels: ", path);
      const size_t bytes_per = size_t(bits) / 8;
      require<IoError>((format == 1 && bits == 16) || (format == 3 && bits == 32),
                       "read_wav: unsupported format (need PCM16 or float32): ",
                       path);
      const size_t n_frames = size / (bytes_per * channels);
      wav.samples.resize(n_frames);
      std::vector<char> raw(static_cast<size_t>(size));
      in.read(raw.data(), std::streamsize(size));
      require<IoError>(size_t(in.gcount()) == size_t(size), "read_wav: truncated: ",
                       path);
      for (size_t i = 0; i < n_frames; ++i) {
        double acc = 0;
        for (size_t c = 0; c < channels; ++c) {
          const char* p = raw.data() + (i * channels + c) * bytes_per;
          if (format == 1) {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            acc += double(v) / 32768.0;
          } else {
            float v;
            std::memcpy(&v, p, 4);
            acc += double(v);
          }
        }
        wav.samples[i] = float(acc / channels);
      }
      got_data = true;
    } else {
      in.ignore(std::streamsize(size) + (size % 2));
    }
  }
  require<IoError>(got_fmt && got_data, "read_wav: missing fmt/data chunk: ", path);
  wav.sample_rate = int(rate);
  return wav;
}

inline void write_wav_pcm16(const std::string& path, const std::vector<float>& samples,
                            int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "write_wav_pcm16: cannot open ", path);
  const std::uint32_t data_size = std::uint32_t(samples.size() * 2);
  out.write("RIFF", 4);
  detail::write_pod<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_pod<std::uint32_t>(out, 16);
  detail::write_pod<std::uint16_t>(out, 1);  // PCM
  detail::write_pod<std::uint16_t>(out, 1);  // mono
  detail::write_pod<std::uint32_t>(out, std::uint32_t(sample_rate));
  detail::write_pod<std::uint32_t>(out, std::uint32_t(sample_rate * 2));
  detail::write_pod<std::uint16_t>(out, 2);
  detail::write_pod<std::uint16_t>(out, 16);
  out.write("data", 4);
  detail::write_pod<std::uint32_t>(out, data_size);
  for (float s : samples) {
    const double c = std::min(1.0, std::max(-1.0, double(s)));
    const auto v = std::int16_t(std::lround(c * 32767.0));
    detail::write_pod<std::int16_t>(out, v);
  }
  require<IoError>(out.good(), "write_wav_pcm16: write failed: ", path);
}

// Raw little-endian 16-bit mono stream (the corpus on-disk waveform format).
inline void write_pcm16(const std::string& path, const std::vector<float>& samples) {
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "write_pcm16: cannot open ", path);
  for (float s : samples) {
    const double c = std::min(1.0, std::max(-1.0, double(s)));
    const auto v = std::int16_t(std::lround(c * 32767.0));
    detail::write_pod<std::int16_t>(out, v);
  }
  require<IoError>(out.good(), "write_pcm16: write failed: ", path);
}

inline std::vector<float> read_pcm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  require<IoError>(in.good(), "read_pcm16: cannot open ", path);
  const auto bytes = size_t(in.tellg());
  require<IoError>(bytes % 2 == 0, "read_pcm16: odd byte count in ", path);
  in.seekg(0);
  std::vector<std::int16_t> raw(bytes / 2);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(bytes));
  std::vector<float> out(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) out[i] = float(raw[i]) / 32768.0f;
  return out;
}

}  // namespace lipspeech
