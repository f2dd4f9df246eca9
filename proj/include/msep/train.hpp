// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msep/checkpoint.hpp"
#include "msep/dataset.hpp"
#include "msep/model.hpp"
#include "msep/profile.hpp"
#include "msep/rng.hpp"

namespace msep {

struct TrainConfig {
  ConditioningMode mode = ConditioningMode::voice;
  int batch_size = 8;
  int epochs = 30;
  double initial_lr = 1e-3;
  double anneal_divisor = 1.1;
  uint64_t seed = 1;
  std::string checkpoint_dir;
  Profile profile = Profile::desk;
  bool deterministic = false;   // single-threaded, zeroed timing fields
  double pose_sigma = 0.4;
  double validation_fraction = 0.05;

  void validate() const;
};

struct TrainResult {
  std::string last_checkpoint;
  std::string best_checkpoint;
  std::string metrics_path;
  std::vector<double> epoch_mean_loss;
  double best_val_loss = 0;
};

// Seed conventions for per-epoch randomness; checkpoints resume at
// epoch boundaries, so restoring (seed, epoch) reproduces the stream.
inline uint64_t epoch_shuffle_seed(uint64_t seed, long epoch) {
  return mix_seed(seed, "epoch-shuffle", static_cast<uint64_t>(epoch));
}
inline uint64_t epoch_face_seed(uint64_t seed, long epoch) {
  return mix_seed(seed, "epoch-face", static_cast<uint64_t>(epoch));
}

// Deterministic train/validation split of [0, n); returns the train
// indices and fills val_idx when given.
std::vector<int> validation_split(long n, double fraction, uint64_t seed,
                                  std::vector<int>* val_idx = nullptr);

// Trains a fresh model on the manifest; per-bin stats are computed
// from the manifest's mixtures before epoch 0. Writes last.ckpt,
// best.ckpt (by validation loss) and metrics.jsonl under
// cfg.checkpoint_dir. Deterministic for a fixed seed.
TrainResult train(const std::string& manifest_path, const TrainConfig& cfg,
                  const ModelConfig* model_override = nullptr);

// Continues training from a checkpoint; bit-identical to the
// uninterrupted run under the same seed.
TrainResult resume(const std::string& checkpoint_path, const std::string& manifest_path,
                   const TrainConfig& cfg);

}  // namespace msep
