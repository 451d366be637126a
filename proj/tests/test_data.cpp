// tests/test_data.cpp

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

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <filesystem>
#include <fstream>

#include "lipspeech/core/hash.hpp"
#include "lipspeech/data/grapheme.hpp"
#include "lipspeech/data/grid_import.hpp"
#include "lipspeech/data/loader.hpp"
#include "lipspeech/data/toy_corpus.hpp"

using namespace lipspeech;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lipspeech_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string tree_hash(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& p : fs::recursive_directory_iterator(root))
    if (p.is_regular_file()) files.push_back(p.path());
  std::sort(files.begin(), files.end());
  ContentHash h;
  for (const auto& f : files) {
    h.update(fs::relative(f, root).string());
    h.update(hash_file_hex(f.string()));
  }
  return h.hex();
}

double dominant_hz(const std::vector<float>& x, int sr, index_t n) {
  double best = -1;
  index_t best_k = 0;
  for (index_t k = 1; k < n / 2; ++k) {
    std::complex<double> acc{0, 0};
    for (index_t i = 0; i < n; ++i)
      acc += double(x[size_t(i)]) *
             std::exp(std::complex<double>(0, -2.0 * M_PI * double(k * i) / double(n)));
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_k = k;
    }
  }
  return double(best_k) * sr / double(n);
}

}  // namespace

TEST_CASE("grapheme codec round trips") {
  REQUIRE(encode_transcript("ab") == GraphemeIds{1, 2});
  REQUIRE(decode_graphemes({1, 2}) == "ab");
  REQUIRE_THROWS_AS(encode_transcript(""), CorpusError);
  const auto with_space = encode_transcript("a a");
  REQUIRE(with_space == GraphemeIds{1, grapheme::kSpaceId, 1});
  REQUIRE(decode_graphemes(with_space) == "a a");
  REQUIRE_THROWS_AS(encode_transcript("a!b"), CorpusError);
  REQUIRE_THROWS_AS(encode_transcript("A"), CorpusError);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    std::string s;
    const auto len = 1 + rng.uniform_index(20);
    for (index_t j = 0; j < len; ++j)
      s.push_back(rng.uniform() < 0.15 ? ' ' : char('a' + rng.uniform_index(26)));
    REQUIRE(decode_graphemes(encode_transcript(s)) == s);
  }
  // ids never contain the blank
  for (index_t id : encode_transcript("hello world"))
    REQUIRE(id != grapheme::kBlankId);
}

TEST_CASE("toy corpus: counts, splits, shapes") {
  const auto root = fresh_dir("toy_small");
  auto manifest = generate_toy_corpus(root, 2, 4, 7);
  REQUIRE(manifest.entries.size() == 8);
  index_t train = 0, val = 0, test = 0;
  for (const auto& e : manifest.entries) {
    if (e.split == Split::kTrain) ++train;
    if (e.split == Split::kVal) ++val;
    if (e.split == Split::kTest) ++test;
  }
  REQUIRE(train == 6);
  REQUIRE(val == 1);
  REQUIRE(test == 1);

  auto sample = load_utterance(manifest, "s1", "u001");
  REQUIRE(sample.lip_frames.shape() == Shape{75, 3, 144, 144});
  REQUIRE(sample.face_image.shape() == Shape{3, 128, 128});
  REQUIRE(index_t(sample.waveform.size()) == 48000);
  REQUIRE_FALSE(sample.transcript.empty());

  // refuse silent overwrite
  REQUIRE_THROWS_AS(generate_toy_corpus(root, 2, 4, 7), CorpusError);
  REQUIRE_NOTHROW(generate_toy_corpus(root, 2, 4, 7, {}, {}, true));
  fs::remove_all(root);
}

TEST_CASE("toy corpus is byte-identical for a fixed seed") {
  const auto a = fresh_dir("toy_det_a");
  const auto b = fresh_dir("toy_det_b");
  generate_toy_corpus(a, 2, 4, 99);
  generate_toy_corpus(b, 2, 4, 99);
  REQUIRE(tree_hash(a) == tree_hash(b));
  const auto c = fresh_dir("toy_det_c");
  generate_toy_corpus(c, 2, 4, 100);
  REQUIRE(tree_hash(a) != tree_hash(c));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("toy corpus speakers separate in dominant F0 (FFT peak oracle)") {
  const auto root = fresh_dir("toy_f0");
  auto manifest = generate_toy_corpus(root, 8, 4, 1);
  std::vector<double> freqs;
  for (int s = 1; s <= 8; ++s) {
    auto sample = load_utterance(manifest, "s" + std::to_string(s), "u001");
    freqs.push_back(dominant_hz(sample.waveform, 16000, 8192));
  }
  for (size_t i = 0; i < freqs.size(); ++i)
    for (size_t j = i + 1; j < freqs.size(); ++j)
      REQUIRE(std::abs(freqs[i] - freqs[j]) > 2.0 * 16000.0 / 8192.0);
  fs::remove_all(root);
}

TEST_CASE("load_utterance error paths") {
  const auto root = fresh_dir("toy_errors");
  auto manifest = generate_toy_corpus(root, 2, 4, 5);
  REQUIRE_THROWS_AS(load_utterance(manifest, "s1", "u999"), CorpusError);
  REQUIRE_THROWS_AS(load_utterance(manifest, "nope", "u001"), CorpusError);

  // tampered waveform length -> corpus corruption error
  const auto audio_path = root / "s1" / "u002" / "audio.pcm16";
  fs::resize_file(audio_path, fs::file_size(audio_path) - 640);
  REQUIRE_THROWS_AS(load_utterance(manifest, "s1", "u002"), CorpusError);
  fs::remove_all(root);
}

TEST_CASE("manifest json round trip") {
  const auto root = fresh_dir("toy_manifest");
  auto manifest = generate_toy_corpus(root, 2, 5, 11);
  auto loaded = CorpusManifest::load(root);
  REQUIRE(loaded.entries.size() == manifest.entries.size());
  REQUIRE(loaded.seed == 11);
  REQUIRE(loaded.audio.sample_rate == 16000);
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    REQUIRE(loaded.entries[i].speaker_id == manifest.entries[i].speaker_id);
    REQUIRE(loaded.entries[i].utterance_id == manifest.entries[i].utterance_id);
    REQUIRE(loaded.entries[i].transcript == manifest.entries[i].transcript);
    REQUIRE(loaded.entries[i].split == manifest.entries[i].split);
  }
  fs::remove_all(root);
}

TEST_CASE("mel cache round trips through disk") {
  const auto root = fresh_dir("toy_melcache");
  auto manifest = generate_toy_corpus(root, 2, 4, 3);
  MelCache cache(manifest);
  const auto& e = manifest.entries.front();
  auto a = cache.get(e);
  REQUIRE(fs::exists(root / "cache" / "mel" /
                     (e.speaker_id + "_" + e.utterance_id + ".npzlike")));
  auto b = cache.get(e);  // second call reads the cached file
  REQUIRE(a.values.vec() == b.values.vec());
  REQUIRE(a.values.shape() == Shape{80, 150});
  fs::remove_all(root);
}

TEST_CASE("batch iterator is deterministic and restorable") {
  const auto root = fresh_dir("toy_batch");
  auto manifest = generate_toy_corpus(root, 2, 6, 17);
  BatchIterator it1(manifest, Split::kTrain, 3, 42);
  BatchIterator it2(manifest, Split::kTrain, 3, 42);
  for (int i = 0; i < 10; ++i) {
    auto b1 = it1.next_batch();
    auto b2 = it2.next_batch();
    for (size_t j = 0; j < b1.size(); ++j)
      REQUIRE(b1[j]->utterance_id == b2[j]->utterance_id);
  }
  // resume from a saved cursor reproduces the rest of the stream
  const auto epoch = it1.epoch();
  const auto cursor = it1.cursor();
  auto next = it1.next_batch();
  BatchIterator it3(manifest, Split::kTrain, 3, 42);
  it3.restore(epoch, cursor);
  auto next3 = it3.next_batch();
  for (size_t j = 0; j < next.size(); ++j)
    REQUIRE(next[j]->utterance_id == next3[j]->utterance_id);
  fs::remove_all(root);
}

TEST_CASE("grid import: empty directory yields empty manifest") {
  const auto in = fresh_dir("grid_empty_in");
  const auto out = fresh_dir("grid_empty_out");
  fs::create_directories(in);
  GridImportReport report;
  auto manifest = grid_import(in, out, {}, {}, 1, &report);
  REQUIRE(manifest.entries.empty());
  REQUIRE(report.imported == 0);
  REQUIRE(fs::exists(out / "manifest.json"));
  fs::remove_all(in);
  fs::remove_all(out);
}

TEST_CASE("grid import: well-formed speaker with 50 kHz audio") {
  const auto in = fresh_dir("grid_in");
  const auto out = fresh_dir("grid_out");
  const auto utt = in / "s9" / "utt1";
  fs::create_directories(utt / "frames");

  // 3 s of 440 Hz at 50 kHz (the resampler oracle checks the tone survives)
  std::vector<float> wave(150000);
  for (size_t i = 0; i < wave.size(); ++i)
    wave[i] = float(0.5 * std::sin(2.0 * M_PI * 440.0 * double(i) / 50000.0));
  write_wav_pcm16((utt / "audio.wav").string(), wave, 50000);
  {
    std::ofstream tr(utt / "transcript.txt");
    tr << "Bin blue AT f two now!\n";
  }
  for (int f = 0; f < 5; ++f) {
    std::ofstream ppm(utt / "frames" /
                      ("frame_000" + std::to_string(f) + ".ppm"),
                      std::ios::binary);
    ppm << "P6\n64 64\n255\n";
    for (int i = 0; i < 64 * 64; ++i) {
      const char px[3] = {char(f * 40), char(i % 255), char(64)};
      ppm.write(px, 3);
    }
  }

  GridImportReport report;
  auto manifest = grid_import(in, out, {}, {}, 1, &report);
  REQUIRE(report.imported == 1);
  REQUIRE(report.skipped.empty());
  REQUIRE(manifest.entries.size() == 1);
  REQUIRE(manifest.entries[0].speaker_id == "s9");
  REQUIRE(manifest.entries[0].transcript == "bin blue at f two now");

  auto sample = load_utterance(manifest, "s9", "utt1");
  REQUIRE(index_t(sample.waveform.size()) == 48000);  // resampled 50k -> 16k
  REQUIRE(sample.lip_frames.shape() == Shape{75, 3, 144, 144});
  REQUIRE(std::abs(dominant_hz(sample.waveform, 16000, 4096) - 440.0) < 8.0);
  fs::remove_all(in);
  fs::remove_all(out);
}

TEST_CASE("grid import: unreadable utterance is skipped with a report") {
  const auto in = fresh_dir("grid_skip_in");
  const auto out = fresh_dir("grid_skip_out");
  fs::create_directories(in / "s1" / "bad");
  {
    std::ofstream bad(in / "s1" / "bad" / "audio.wav");
    bad << "not a wav";
  }
  GridImportReport report;
  auto manifest = grid_import(in, out, {}, {}, 1, &report);
  REQUIRE(manifest.entries.empty());
  REQUIRE(report.skipped.size() == 1);
  fs::remove_all(in);
  fs::remove_all(out);
}
