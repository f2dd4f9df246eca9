// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>

#include "msep/adam.hpp"
#include "msep/binstats.hpp"
#include "msep/model.hpp"

namespace msep {

// Versioned binary checkpoint: magic "MSEP", u32 format version,
// length-prefixed JSON config, named f32 tensors, Adam moments,
// per-bin normalization stats, epoch counter and RNG seed. All
// multi-byte fields little-endian. Readers reject unknown versions.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  MaskNet net;
  AdamState<float> opt;
  StftConfig stft_cfg;
  BinStats stats;
  uint64_t epoch = 0;
  uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const MaskNet& net, const AdamState<float>& opt,
                     const StftConfig& stft_cfg, const BinStats& stats, uint64_t epoch,
                     uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace msep
