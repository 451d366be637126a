// lipspeech/data/manifest.hpp

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
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipspeech/core/common.hpp"
#include "lipspeech/core/rng.hpp"
#include "lipspeech/data/types.hpp"

namespace lipspeech {

enum class Split { kTrain, kVal, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split name: " + s);
}

struct ManifestEntry {
  std::string speaker_id;
  std::string utterance_id;
  std::string transcript;
  Split split = Split::kTrain;
};

// Index of a corpus on disk. Layout, schema v1:
//   root/<speaker>/<utterance>/{lips.npzlike, face.npzlike,
//                               audio.pcm16, transcript.txt}
//   root/manifest.json
struct CorpusManifest {
  static constexpr int kSchemaVersion = 1;

  std::filesystem::path root;
  std::uint64_t seed = 0;
  AudioConfig audio;
  VideoConfig video;
  std::vector<ManifestEntry> entries;

  std::filesystem::path utterance_dir(const ManifestEntry& e) const {
    return root / e.speaker_id / e.utterance_id;
  }

  const ManifestEntry* find(const std::string& speaker,
                            const std::string& utterance) const {
    for (const auto& e : entries)
      if (e.speaker_id == speaker && e.utterance_id == utterance) return &e;
    return nullptr;
  }

  std::vector<const ManifestEntry*> split_entries(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(&e);
    return out;
  }

  std::vector<std::string> speakers() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (std::find(out.begin(), out.end(), e.speaker_id) == out.end())
        out.push_back(e.speaker_id);
    std::sort(out.begin(), out.end());
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "corpus_manifest";
    j["seed"] = seed;
    j["audio"] = {{"sample_rate", audio.sample_rate},
                  {"utterance_seconds", audio.utterance_seconds},
                  {"mel_bins", audio.mel_bins},
                  {"hop", audio.hop},
                  {"win", audio.win},
                  {"fft_size", audio.fft_size},
                  {"mel_floor", audio.mel_floor}};
    j["video"] = {{"frames_per_utterance", video.frames_per_utterance},
                  {"lip_height", video.lip_height},
                  {"lip_width", video.lip_width},
                  {"channels", video.channels},
                  {"face_size", video.face_size}};
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      arr.push_back({{"speaker_id", e.speaker_id},
                     {"utterance_id", e.utterance_id},
                     {"transcript", e.transcript},
                     {"split", split_name(e.split)}});
    }
    j["utterances"] = arr;
    return j;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    require<IoError>(out.good(), "manifest save: cannot open ", path.string());
    out << to_json().dump(2) << "\n";
    require<IoError>(out.good(), "manifest save: write failed");
  }

  void save() const { save(root / "manifest.json"); }

  static CorpusManifest load(const std::filesystem::path& corpus_root) {
    const auto path = corpus_root / "manifest.json";
    std::ifstream in(path);
    require<IoError>(in.good(), "manifest load: cannot open ", path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(strcat_all("manifest load: bad JSON: ", e.what()));
    }
    require<IoError>(j.value("schema_version", -1) == kSchemaVersion,
                     "manifest load: unsupported schema_version");
    CorpusManifest m;
    m.root = corpus_root;
    m.seed = j.value("seed", std::uint64_t(0));
    const auto& a = j.at("audio");
    m.audio.sample_rate = a.at("sample_rate");
    m.audio.utterance_seconds = a.at("utterance_seconds");
    m.audio.mel_bins = a.at("mel_bins");
    m.audio.hop = a.at("hop");
    m.audio.win = a.at("win");
    m.audio.fft_size = a.at("fft_size");
    m.audio.mel_floor = a.at("mel_floor");
    const auto& v = j.at("video");
    m.video.frames_per_utterance = v.at("frames_per_utterance");
    m.video.lip_height = v.at("lip_height");
    m.video.lip_width = v.at("lip_width");
    m.video.channels = v.at("channels");
    m.video.face_size = v.at("face_size");
    for (const auto& e : j.at("utterances")) {
      ManifestEntry me;
      me.speaker_id = e.at("speaker_id");
      me.utterance_id = e.at("utterance_id");
      me.transcript = e.at("transcript");
      me.split = split_from_name(e.at("split"));
      m.entries.push_back(std::move(me));
    }
    m.audio.validate();
    m.video.validate(m.audio);
    return m;
  }
};

// 90/5/5 split over all utterances; val and test each get at least one
// utterance. A seeded shuffle decides membership, so the same seed always
// produces the same assignment.
inline void assign_splits(std::vector<ManifestEntry>& entries, std::uint64_t seed) {
  const index_t n = index_t(entries.size());
  require<CorpusError>(n >= 3, "assign_splits: need at least 3 utterances");
  std::vector<index_t> order(static_cast<size_t>(n));
  for (index_t i = 0; i < n; ++i) order[size_t(i)] = i;
  Rng rng(Rng::splitmix(seed) ^ 0x5157ULL);
  for (index_t i = n - 1; i > 0; --i)
    std::swap(order[size_t(i)], order[size_t(rng.uniform_index(i + 1))]);
  const index_t n_test = std::max<index_t>(1, index_t(double(n) * 0.05));
  const index_t n_val = std::max<index_t>(1, index_t(double(n) * 0.05));
  for (index_t i = 0; i < n; ++i) {
    Split s = Split::kTrain;
    if (i < n_test) s = Split::kTest;
    else if (i < n_test + n_val) s = Split::kVal;
    entries[size_t(order[size_t(i)])].split = s;
  }
}

}  // namespace lipspeech
