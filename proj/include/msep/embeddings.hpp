// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msep/stft.hpp"
#include "msep/waveform.hpp"

namespace msep {

enum class EmbeddingKind : uint8_t { voice = 0, face = 1 };

std::string to_string(EmbeddingKind k);
EmbeddingKind parse_kind(const std::string& s);

// Fixed-dimension unit-norm identity vector used to condition the mask
// net. Stand-in for the pretrained face/voice embedding networks.
struct ConditionEmbedding {
  EmbeddingKind kind = EmbeddingKind::voice;
  int dim = 0;
  std::vector<float> values;  // L2 norm 1 within 1e-6
  std::string speaker_id;
  std::string source_id;  // utterance id or face-variant index

  void validate() const;
};

struct Resonance {
  double freq_hz;
  double bandwidth_hz;
  double gain;
};

// Synthetic speaker: a seeded glottal source plus a 4-resonance
// spectral envelope. Distinct speakers carry distinct seeds.
struct SpeakerIdentity {
  std::string speaker_id;
  uint64_t seed = 0;
  double f0_hz = 0;
  std::vector<Resonance> envelope;
};

// Seed of the fixed random projection in the voice oracle. Published
// so externally computed embeddings can reproduce it.
inline constexpr uint64_t kVoiceProjectionSeed = 0x564F494345ULL;  // "VOICE"

// Deterministic voice print: 40-band log-mel long-term average
// spectrum plus per-band deviation, projected to `dim` by a fixed
// seeded Gaussian matrix and L2-normalized. Reference must be >= 1 s.
ConditionEmbedding voice_embedding_oracle(const Waveform& reference, int dim,
                                          const StftConfig& cfg);

// Seeded unit-Gaussian base vector per speaker; each variant adds
// pose_sigma times a unit jitter direction keyed by variant_index.
ConditionEmbedding face_embedding_synthetic(const SpeakerIdentity& identity,
                                            uint32_t variant_index, double pose_sigma, int dim);

// "EMB1" file: u32 version, u8 kind, u32 dim, u32 count, then per
// record length-prefixed speaker_id and source_id plus dim f32 values.
void save_embeddings(const std::string& path, const std::vector<ConditionEmbedding>& embs);
std::vector<ConditionEmbedding> load_embeddings(const std::string& path);

struct DispersionStats {
  double within_mean_cos = 0;   // mean over speakers of mean pairwise cosine
  double between_mean_cos = 0;  // mean pairwise cosine across speakers
  std::map<std::string, double> per_speaker_spread;
};

DispersionStats dispersion_stats(const std::vector<ConditionEmbedding>& embs);

double cosine(const std::vector<float>& a, const std::vector<float>& b);

}  // namespace msep
