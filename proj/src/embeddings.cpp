// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/embeddings.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "msep/errors.hpp"
#include "msep/mel.hpp"
#include "msep/rng.hpp"

namespace msep {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr uint32_t kVersion = 1;
constexpr int kMelBands = 40;

std::vector<float> normalized(const std::vector<double>& v) {
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw NumericalError("embedding: zero-norm vector");
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  // renormalize in single precision so the stored vector is unit norm
  double n2 = 0;
  for (float x : out) n2 += static_cast<double>(x) * x;
  float inv = static_cast<float>(1.0 / std::sqrt(n2));
  for (float& x : out) x *= inv;
  return out;
}

}  // namespace

std::string to_string(EmbeddingKind k) { return k == EmbeddingKind::voice ? "voice" : "face"; }

EmbeddingKind parse_kind(const std::string& s) {
  if (s == "voice") return EmbeddingKind::voice;
  if (s == "face") return EmbeddingKind::face;
  throw ValidationError("unknown embedding kind '" + s + "' (expected voice or face)");
}

void ConditionEmbedding::validate() const {
  if (dim != static_cast<int>(values.size()))
    throw ValidationError("embedding: dim field does not match value count");
  double norm = 0;
  for (float v : values) {
    if (!std::isfinite(v)) throw ValidationError("embedding: non-finite value");
    norm += static_cast<double>(v) * v;
  }
  if (std::abs(std::sqrt(norm) - 1.0) > 1e-6)
    throw ValidationError("embedding: vector is not unit norm");
}

ConditionEmbedding voice_embedding_oracle(const Waveform& reference, int dim,
                                          const StftConfig& cfg) {
  if (dim < 1) throw ValidationError("voice oracle: dim must be positive");
  if (reference.duration_s() < 1.0)
    throw ValidationError("voice oracle: reference shorter than 1 s (" +
                          std::to_string(reference.duration_s()) + " s)");

  MagnitudeSpectrogram mag = magnitude(stft(reference, cfg));
  auto fb = mel_filterbank(kMelBands, cfg.fft_size, cfg.sample_rate);

  // log-mel frames
  long frames = mag.frames;
  std::vector<double> logmel(frames * kMelBands);
  for (long t = 0; t < frames; ++t) {
    const double* row = mag.data.data() + t * mag.bins;
    for (int b = 0; b < kMelBands; ++b) {
      double acc = 0;
      for (int f = 0; f < mag.bins; ++f) acc += fb[b][f] * row[f];
      logmel[t * kMelBands + b] = std::log(acc + 1e-10);
    }
  }

  // long-term average plus per-band deviation, each centered so the
  // embedding ignores overall level
  std::vector<double> stats(2 * kMelBands);
  for (int b = 0; b < kMelBands; ++b) {
    double sum = 0, sumsq = 0;
    for (long t = 0; t < frames; ++t) {
      double v = logmel[t * kMelBands + b];
      sum += v;
      sumsq += v * v;
    }
    double mean = sum / frames;
    double var = std::max(sumsq / frames - mean * mean, 0.0);
    stats[b] = mean;
    stats[kMelBands + b] = std::sqrt(var);
  }
  // remove mean and linear trend per half: overall level and the
  // common source tilt carry no speaker identity
  for (int half = 0; half < 2; ++half) {
    double* s = stats.data() + half * kMelBands;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int b = 0; b < kMelBands; ++b) {
      sx += b;
      sy += s[b];
      sxx += static_cast<double>(b) * b;
      sxy += b * s[b];
    }
    double denom = kMelBands * sxx - sx * sx;
    double slope = (kMelBands * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / kMelBands;
    for (int b = 0; b < kMelBands; ++b) s[b] -= intercept + slope * b;
  }

  // fixed seeded projection to the requested dimension
  Rng rng(mix_seed(kVoiceProjectionSeed, static_cast<uint64_t>(dim)));
  std::vector<double> proj(2 * kMelBands * static_cast<size_t>(dim));
  for (auto& v : proj) v = rng.gaussian();

  std::vector<double> out(dim, 0.0);
  for (int d = 0; d < dim; ++d) {
    const double* row = proj.data() + static_cast<size_t>(d) * 2 * kMelBands;
    double acc = 0;
    for (int i = 0; i < 2 * kMelBands; ++i) acc += row[i] * stats[i];
    out[d] = acc;
  }

  ConditionEmbedding e;
  e.kind = EmbeddingKind::voice;
  e.dim = dim;
  e.values = normalized(out);
  return e;
}

ConditionEmbedding face_embedding_synthetic(const SpeakerIdentity& identity,
                                            uint32_t variant_index, double pose_sigma, int dim) {
  if (dim < 1) throw ValidationError("face embedding: dim must be positive");
  if (pose_sigma < 0) throw ValidationError("face embedding: pose_sigma must be >= 0");

  Rng base_rng(mix_seed(identity.seed, "face-base", static_cast<uint64_t>(dim)));
  std::vector<double> base(dim);
  for (auto& v : base) v = base_rng.gaussian();
  double bn = 0;
  for (double v : base) bn += v * v;
  bn = std::sqrt(bn);
  for (auto& v : base) v /= bn;

  if (pose_sigma > 0) {
    Rng jit_rng(mix_seed(mix_seed(identity.seed, "face-jitter", static_cast<uint64_t>(dim)),
                         variant_index));
    std::vector<double> jitter(dim);
    double jn = 0;
    for (auto& v : jitter) {
      v = jit_rng.gaussian();
      jn += v * v;
    }
    jn = std::sqrt(jn);
    for (int i = 0; i < dim; ++i) base[i] += pose_sigma * jitter[i] / jn;
  }

  ConditionEmbedding e;
  e.kind = EmbeddingKind::face;
  e.dim = dim;
  e.values = normalized(base);
  e.speaker_id = identity.speaker_id;
  e.source_id = std::to_string(variant_index);
  return e;
}

void save_embeddings(const std::string& path, const std::vector<ConditionEmbedding>& embs) {
  if (embs.empty()) throw ValidationError("embeddings: nothing to save");
  EmbeddingKind kind = embs.front().kind;
  int dim = embs.front().dim;
  for (const auto& e : embs) {
    e.validate();
    if (e.kind != kind || e.dim != dim)
      throw ValidationError("embeddings: mixed kinds or dims in one file");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("embeddings: cannot create " + path);
  out.write(kMagic, 4);
  uint32_t version = kVersion;
  out.write(reinterpret_cast<char*>(&version), 4);
  uint8_t kind_byte = static_cast<uint8_t>(kind);
  out.write(reinterpret_cast<char*>(&kind_byte), 1);
  uint32_t dim_u = static_cast<uint32_t>(dim), count = static_cast<uint32_t>(embs.size());
  out.write(reinterpret_cast<char*>(&dim_u), 4);
  out.write(reinterpret_cast<char*>(&count), 4);
  for (const auto& e : embs) {
    uint32_t n = static_cast<uint32_t>(e.speaker_id.size());
    out.write(reinterpret_cast<char*>(&n), 4);
    out.write(e.speaker_id.data(), n);
    n = static_cast<uint32_t>(e.source_id.size());
    out.write(reinterpret_cast<char*>(&n), 4);
    out.write(e.source_id.data(), n);
    out.write(reinterpret_cast<const char*>(e.values.data()), dim * sizeof(float));
  }
  if (!out) throw IoError("embeddings: write failed on " + path);
}

std::vector<ConditionEmbedding> load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("embeddings: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("embeddings: " + path + " has bad magic (expected EMB1)");
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kVersion)
    throw IoError("embeddings: unsupported version " + std::to_string(version));
  uint8_t kind_byte = 0;
  in.read(reinterpret_cast<char*>(&kind_byte), 1);
  if (kind_byte > 1) throw IoError("embeddings: bad kind byte");
  uint32_t dim = 0, count = 0;
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in || dim == 0 || dim > 1u << 20)
    throw IoError("embeddings: bad header in " + path);

  std::vector<ConditionEmbedding> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    ConditionEmbedding e;
    e.kind = static_cast<EmbeddingKind>(kind_byte);
    e.dim = static_cast<int>(dim);
    auto read_str = [&]() {
      uint32_t n = 0;
      in.read(reinterpret_cast<char*>(&n), 4);
      if (!in || n > 1u << 16) throw IoError("embeddings: truncated record in " + path);
      std::string s(n, '\0');
      if (!in.read(s.data(), n)) throw IoError("embeddings: truncated record in " + path);
      return s;
    };
    e.speaker_id = read_str();
    e.source_id = read_str();
    e.values.resize(dim);
    if (!in.read(reinterpret_cast<char*>(e.values.data()), dim * sizeof(float)))
      throw IoError("embeddings: truncated values in " + path);

    double norm = 0;
    for (float v : e.values) {
      if (!std::isfinite(v))
        throw ValidationError("embeddings: non-finite value in record " + std::to_string(i));
      norm += static_cast<double>(v) * v;
    }
    norm = std::sqrt(norm);
    if (std::abs(norm - 1.0) > 1e-3)
      throw ValidationError("embeddings: record " + std::to_string(i) + " norm " +
                            std::to_string(norm) + " is not within 1e-3 of 1");
    float inv = static_cast<float>(1.0 / norm);
    for (float& v : e.values) v *= inv;
    out.push_back(std::move(e));
  }
  return out;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dim mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na < 1e-24 || nb < 1e-24) throw ValidationError("cosine: zero vector");
  return dot / std::sqrt(na * nb);
}

DispersionStats dispersion_stats(const std::vector<ConditionEmbedding>& embs) {
  if (embs.empty()) throw ValidationError("dispersion: no embeddings");
  std::map<std::string, std::vector<const ConditionEmbedding*>> by_speaker;
  for (const auto& e : embs) by_speaker[e.speaker_id].push_back(&e);

  DispersionStats out;
  double within_sum = 0;
  for (const auto& [spk, group] : by_speaker) {
    double spread;
    if (group.size() < 2) {
      spread = 1.0;  // singleton convention
    } else {
      double acc = 0;
      long pairs = 0;
      for (size_t i = 0; i < group.size(); ++i)
        for (size_t j = i + 1; j < group.size(); ++j) {
          acc += cosine(group[i]->values, group[j]->values);
          ++pairs;
        }
      spread = acc / pairs;
    }
    out.per_speaker_spread[spk] = spread;
    within_sum += spread;
  }
  out.within_mean_cos = within_sum / by_speaker.size();

  double between_acc = 0;
  long between_pairs = 0;
  for (size_t i = 0; i < embs.size(); ++i)
    for (size_t j = i + 1; j < embs.size(); ++j) {
      if (embs[i].speaker_id == embs[j].speaker_id) continue;
      between_acc += cosine(embs[i].values, embs[j].values);
      ++between_pairs;
    }
  out.between_mean_cos = between_pairs > 0 ? between_acc / between_pairs : 1.0;
  return out;
}

}  // namespace msep
