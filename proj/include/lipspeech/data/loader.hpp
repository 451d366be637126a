// lipspeech/data/loader.hpp

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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lipspeech/audio/mel.hpp"
#include "lipspeech/audio/wav.hpp"
#include "lipspeech/core/rng.hpp"
#include "lipspeech/data/manifest.hpp"
#include "lipspeech/data/tensor_file.hpp"
#include "lipspeech/data/types.hpp"

namespace lipspeech {

// Reads and fully validates one utterance. Any missing file or shape
// mismatch throws before anything is returned; there is no partial result.
inline UtteranceSample load_utterance(const CorpusManifest& manifest,
                                      const std::string& speaker,
                                      const std::string& utterance) {
  const auto* entry = manifest.find(speaker, utterance);
  require<CorpusError>(entry != nullptr, "load_utterance: unknown id ", speaker, "/",
                       utterance);
  const auto dir = manifest.utterance_dir(*entry);
  UtteranceSample s;
  s.speaker_id = speaker;
  s.utterance_id = utterance;
  s.lip_frames = load_tensor_f32((dir / "lips.npzlike").string());
  s.face_image = load_tensor_f32((dir / "face.npzlike").string());
  s.waveform = read_pcm16((dir / "audio.pcm16").string());
  {
    std::ifstream tr(dir / "transcript.txt");
    require<CorpusError>(tr.good(), "load_utterance: missing transcript in ",
                         dir.string());
    std::getline(tr, s.transcript);
  }
  require<CorpusError>(s.transcript == entry->transcript,
                       "load_utterance: transcript on disk disagrees with manifest "
                       "for ", speaker, "/", utterance);
  s.validate(manifest.audio, manifest.video);
  return s;
}

// On-disk mel cache under root/cache/mel. Computation is pure per
// utterance; generation is single-writer so plain files are enough.
class MelCache {
 public:
  explicit MelCache(const CorpusManifest& manifest, bool use_disk = true)
      : manifest_(manifest), use_disk_(use_disk) {
    if (use_disk_)
      std::filesystem::create_directories(manifest_.root / "cache" / "mel");
  }

  MelSpectrogram get(const ManifestEntry& e) const {
    const auto path = cache_path(e);
    if (use_disk_ && std::filesystem::exists(path)) {
      MelSpectrogram mel;
      mel.values = load_tensor_f32(path.string());
      mel.sample_rate = manifest_.audio.sample_rate;
      mel.hop = manifest_.audio.hop;
      mel.win = manifest_.audio.win;
      mel.mel_floor = manifest_.audio.mel_floor;
      return mel;
    }
    const auto wave =
        read_pcm16((manifest_.utterance_dir(e) / "audio.pcm16").string());
    auto mel = compute_mel(wave, manifest_.audio);
    if (use_disk_) save_tensor_f32(path.string(), mel.values);
    return mel;
  }

 private:
  std::filesystem::path cache_path(const ManifestEntry& e) const {
    return manifest_.root / "cache" / "mel" /
           (e.speaker_id + "_" + e.utterance_id + ".npzlike");
  }

  const CorpusManifest& manifest_;
  bool use_disk_;
};

// Deterministic epoch-shuffled batch iterator over one split. The cursor
// (epoch, position) is checkpointable so training can resume mid-epoch.
class BatchIterator {
 public:
  BatchIterator(const CorpusManifest& manifest, Split split, index_t batch_size,
                std::uint64_t seed)
      : manifest_(manifest), split_(split), batch_size_(batch_size), seed_(seed) {
    for (const auto& e : manifest.entries)
      if (e.split == split) entries_.push_back(&e);
    require<CorpusError>(!entries_.empty(), "BatchIterator: empty split ",
                         split_name(split));
    reshuffle();
  }

  index_t size() const { return index_t(entries_.size()); }
  index_t epoch() const { return epoch_; }
  index_t cursor() const { return cursor_; }

  void restore(index_t epoch, index_t cursor) {
    epoch_ = epoch;
    cursor_ = cursor;
    reshuffle();
  }

  std::vector<const ManifestEntry*> next_batch() {
    std::vector<const ManifestEntry*> batch;
    for (index_t i = 0; i < batch_size_; ++i) {
      if (cursor_ >= index_t(order_.size())) {
        ++epoch_;
        cursor_ = 0;
        reshuffle();
      }
      batch.push_back(entries_[size_t(order_[size_t(cursor_)])]);
      ++cursor_;
    }
    return batch;
  }

  bool at_epoch_boundary() const { return cursor_ >= index_t(order_.size()); }

 private:
  void reshuffle() {
    const index_t n = index_t(entries_.size());
    order_.resize(size_t(n));
    for (index_t i = 0; i < n; ++i) order_[size_t(i)] = i;
    Rng rng(Rng::splitmix(seed_) ^ Rng::splitmix(std::uint64_t(epoch_) + 1));
    for (index_t i = n - 1; i > 0; --i)
      std::swap(order_[size_t(i)], order_[size_t(rng.uniform_index(i + 1))]);
  }

  const CorpusManifest& manifest_;
  Split split_;
  index_t batch_size_;
  std::uint64_t seed_;
  std::vector<const ManifestEntry*> entries_;
  std::vector<index_t> order_;
  index_t epoch_ = 0;
  index_t cursor_ = 0;
};

}  // namespace lipspeech
