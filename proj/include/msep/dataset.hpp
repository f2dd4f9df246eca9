// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msep/synth.hpp"

namespace msep {

// One two-speaker mixture: 3 s crops of target and interferer added
// at unity gain, a reference utterance by the target speaker (always
// a different utterance), and 10 face-variant ids for augmentation.
struct MixtureSample {
  std::string id;
  std::string target_wav;
  std::string interferer_wav;
  std::string mixture_wav;
  std::string reference_wav;
  std::string speaker_id;
  std::string interferer_id;
  std::vector<uint32_t> face_variant_ids;
  std::string transcript;  // space-joined tokens; may be empty
  double crop_offset_s = 0;
};

struct Manifest {
  std::string dir;  // manifest location; wav paths are relative to it
  std::vector<MixtureSample> samples;

  std::string resolve(const std::string& rel_path) const;
};

struct MixConfig {
  long n_train = 2000;
  long n_test = 200;
  double clip_seconds = 3.0;
  uint64_t seed = 1;
  std::optional<double> snr_db;  // off by default: unity-gain addition
};

struct MixResult {
  std::string train_manifest;
  std::string test_manifest;
  std::vector<std::string> excluded_speakers;  // fewer than 2 utterances
};

// Builds train/test mixtures with speaker-disjoint partitions; writes
// wav files, train.jsonl / test.jsonl and a copy of corpus.json with
// utterance paths rewritten relative to out_dir.
MixResult build_mixtures(const std::string& corpus_dir, const std::string& out_dir,
                         const MixConfig& cfg);

Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<MixtureSample>& samples);

// Deterministic shuffled batching.
std::vector<std::vector<int>> iterate_batches(long n_samples, int batch_size,
                                              uint64_t shuffle_seed);

}  // namespace msep
