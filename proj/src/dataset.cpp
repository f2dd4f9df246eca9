// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "msep/errors.hpp"
#include "msep/rng.hpp"
#include "msep/wav.hpp"

namespace fs = std::filesystem;

namespace msep {

namespace {

nlohmann::json sample_to_json(const MixtureSample& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["target_wav"] = s.target_wav;
  j["interferer_wav"] = s.interferer_wav;
  j["mixture_wav"] = s.mixture_wav;
  j["reference_wav"] = s.reference_wav;
  j["speaker_id"] = s.speaker_id;
  j["interferer_id"] = s.interferer_id;
  j["face_variant_ids"] = s.face_variant_ids;
  j["transcript"] = s.transcript;
  j["crop_offset_s"] = s.crop_offset_s;
  return j;
}

MixtureSample sample_from_json(const nlohmann::json& j) {
  MixtureSample s;
  s.id = j.at("id").get<std::string>();
  s.target_wav = j.at("target_wav").get<std::string>();
  s.interferer_wav = j.at("interferer_wav").get<std::string>();
  s.mixture_wav = j.at("mixture_wav").get<std::string>();
  s.reference_wav = j.at("reference_wav").get<std::string>();
  s.speaker_id = j.at("speaker_id").get<std::string>();
  s.interferer_id = j.at("interferer_id").get<std::string>();
  s.face_variant_ids = j.at("face_variant_ids").get<std::vector<uint32_t>>();
  s.transcript = j.value("transcript", std::string());
  s.crop_offset_s = j.at("crop_offset_s").get<double>();
  return s;
}

struct SpeakerPool {
  std::vector<const SpeakerIdentity*> speakers;
  // utterances grouped per speaker, same order as `speakers`
  std::vector<std::vector<const UtteranceInfo*>> utts;
};

MixtureSample make_one(const CorpusIndex& corpus, const SpeakerPool& pool,
                       const std::string& out_dir, const std::string& id, uint64_t sample_seed,
                       double clip_seconds, std::optional<double> snr_db) {
  Rng rng(sample_seed);
  int sr = corpus.spec.sample_rate;
  long clip = static_cast<long>(std::llround(clip_seconds * sr));

  int tgt_idx = static_cast<int>(rng.uniform_int(0, static_cast<long>(pool.speakers.size()) - 1));
  int int_idx;
  do {
    int_idx = static_cast<int>(rng.uniform_int(0, static_cast<long>(pool.speakers.size()) - 1));
  } while (int_idx == tgt_idx);

  const auto& tgt_utts = pool.utts[tgt_idx];
  const auto& int_utts = pool.utts[int_idx];
  int tgt_utt = static_cast<int>(rng.uniform_int(0, static_cast<long>(tgt_utts.size()) - 1));
  int int_utt = static_cast<int>(rng.uniform_int(0, static_cast<long>(int_utts.size()) - 1));
  int ref_utt;
  do {
    ref_utt = static_cast<int>(rng.uniform_int(0, static_cast<long>(tgt_utts.size()) - 1));
  } while (ref_utt == tgt_utt);

  auto read_crop = [&](const UtteranceInfo& u, long offset) {
    int rate = 0;
    std::vector<int16_t> all =
        read_wav_s16((fs::path(corpus.dir) / u.wav_path).string(), &rate);
    if (rate != sr)
      throw ValidationError("mix: sample rate mismatch in " + u.wav_path + " (got " +
                            std::to_string(rate) + ", corpus says " + std::to_string(sr) + ")");
    if (static_cast<long>(all.size()) < clip)
      throw ValidationError("mix: utterance " + u.wav_path + " shorter than the clip length");
    return std::vector<int16_t>(all.begin() + offset, all.begin() + offset + clip);
  };

  auto pick_offset = [&](const UtteranceInfo& u) {
    long len = static_cast<long>(std::llround(corpus.spec.utterance_seconds * sr));
    (void)u;
    return rng.uniform_int(0, std::max(0L, len - clip));
  };

  long tgt_off = pick_offset(*tgt_utts[tgt_utt]);
  long int_off = pick_offset(*int_utts[int_utt]);
  std::vector<int16_t> target = read_crop(*tgt_utts[tgt_utt], tgt_off);
  std::vector<int16_t> interf = read_crop(*int_utts[int_utt], int_off);

  // optional SNR scaling of the interferer (default: plain addition)
  if (snr_db) {
    double et = 0, ei = 0;
    for (long i = 0; i < clip; ++i) {
      et += static_cast<double>(target[i]) * target[i];
      ei += static_cast<double>(interf[i]) * interf[i];
    }
    if (ei > 0) {
      double g = std::sqrt(et / (ei * std::pow(10.0, *snr_db / 10.0)));
      for (auto& v : interf) v = static_cast<int16_t>(std::lrint(std::clamp(v * g, -32768.0, 32767.0)));
    }
  }

  // shared clip-guard gain so target + interferer == mixture exactly
  long peak = 0;
  for (long i = 0; i < clip; ++i)
    peak = std::max(peak, std::labs(static_cast<long>(target[i]) + interf[i]));
  if (peak > static_cast<long>(0.999 * 32768.0)) {
    double g = 0.9 * 32768.0 / static_cast<double>(peak);
    for (auto& v : target) v = static_cast<int16_t>(std::lrint(v * g));
    for (auto& v : interf) v = static_cast<int16_t>(std::lrint(v * g));
  }
  std::vector<int16_t> mixture(clip);
  for (long i = 0; i < clip; ++i)
    mixture[i] = static_cast<int16_t>(static_cast<long>(target[i]) + interf[i]);

  MixtureSample s;
  s.id = id;
  s.speaker_id = pool.speakers[tgt_idx]->speaker_id;
  s.interferer_id = pool.speakers[int_idx]->speaker_id;
  s.crop_offset_s = static_cast<double>(tgt_off) / sr;
  s.target_wav = "wav/" + id + "_target.wav";
  s.interferer_wav = "wav/" + id + "_interferer.wav";
  s.mixture_wav = "wav/" + id + "_mixture.wav";
  write_wav_s16((fs::path(out_dir) / s.target_wav).string(), target, sr);
  write_wav_s16((fs::path(out_dir) / s.interferer_wav).string(), interf, sr);
  write_wav_s16((fs::path(out_dir) / s.mixture_wav).string(), mixture, sr);

  // reference: a different utterance by the same speaker, kept in place
  fs::path ref_abs = fs::path(corpus.dir) / tgt_utts[ref_utt]->wav_path;
  s.reference_wav = fs::relative(ref_abs, out_dir).generic_string();

  for (int v = 0; v < 10; ++v)
    s.face_variant_ids.push_back(static_cast<uint32_t>(rng.uniform_int(0, 999999)));

  // transcript: tokens whose midpoint falls inside the crop window
  double w0 = s.crop_offset_s, w1 = s.crop_offset_s + clip_seconds;
  std::string transcript;
  for (const auto& tok : tgt_utts[tgt_utt]->tokens) {
    double mid = 0.5 * (tok.start_s + tok.end_s);
    if (mid >= w0 && mid < w1) {
      if (!transcript.empty()) transcript += ' ';
      transcript += tok.token;
    }
  }
  s.transcript = transcript;
  return s;
}

}  // namespace

std::string Manifest::resolve(const std::string& rel_path) const {
  return (fs::path(dir) / rel_path).lexically_normal().string();
}

MixResult build_mixtures(const std::string& corpus_dir, const std::string& out_dir,
                         const MixConfig& cfg) {
  if (cfg.n_train < 0 || cfg.n_test < 0)
    throw ValidationError("mix: sample counts must be non-negative");
  if (cfg.clip_seconds <= 0) throw ValidationError("mix: clip length must be positive");
  CorpusIndex corpus = load_corpus(corpus_dir);
  if (corpus.spec.utterance_seconds < cfg.clip_seconds)
    throw ValidationError("mix: utterances shorter than the requested clip length");

  MixResult result;

  // speakers need >= 2 utterances (reference must differ from target)
  std::vector<const SpeakerIdentity*> usable;
  std::vector<std::vector<const UtteranceInfo*>> usable_utts;
  for (const auto& spk : corpus.speakers) {
    auto utts = corpus.utterances_of(spk.speaker_id);
    if (utts.size() < 2) {
      std::cerr << "mix: warning: excluding speaker " << spk.speaker_id
                << " with fewer than 2 utterances\n";
      result.excluded_speakers.push_back(spk.speaker_id);
      continue;
    }
    usable.push_back(&spk);
    usable_utts.push_back(std::move(utts));
  }
  if (usable.size() < 4)
    throw ValidationError("mix: need at least 4 usable speakers for disjoint train/test splits");

  // speaker-disjoint split
  std::vector<int> order(usable.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng split_rng(mix_seed(cfg.seed, "split"));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.uniform_int(0, static_cast<long>(i) - 1)]);
  size_t n_test_spk = std::max<size_t>(2, usable.size() / 6);
  SpeakerPool test_pool, train_pool;
  for (size_t i = 0; i < order.size(); ++i) {
    SpeakerPool& p = i < n_test_spk ? test_pool : train_pool;
    p.speakers.push_back(usable[order[i]]);
    p.utts.push_back(usable_utts[order[i]]);
  }

  fs::create_directories(fs::path(out_dir) / "wav");

  auto build_partition = [&](const SpeakerPool& pool, const std::string& tag, long count) {
    std::vector<MixtureSample> samples(count);
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "%s-%05ld", tag.c_str(), i);
      samples[i] = make_one(corpus, pool, out_dir, idbuf,
                            mix_seed(cfg.seed, tag, static_cast<uint64_t>(i)), cfg.clip_seconds,
                            cfg.snr_db);
    }
    std::string manifest_path = (fs::path(out_dir) / (tag + ".jsonl")).string();
    save_manifest(manifest_path, samples);
    return manifest_path;
  };

  result.train_manifest = build_partition(train_pool, "train", cfg.n_train);
  result.test_manifest = build_partition(test_pool, "test", cfg.n_test);

  // corpus metadata travels with the manifests; utterance paths are
  // rewritten so they resolve relative to out_dir
  CorpusIndex copy = corpus;
  for (auto& u : copy.utterances)
    u.wav_path = fs::relative(fs::path(corpus.dir) / u.wav_path, out_dir).generic_string();
  std::ofstream f(fs::path(out_dir) / "corpus.json");
  if (!f) throw IoError("mix: cannot write corpus.json in " + out_dir);
  f << corpus_index_to_json(copy);
  return result;
}

void save_manifest(const std::string& path, const std::vector<MixtureSample>& samples) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("manifest: cannot create " + path);
  for (const auto& s : samples) f << sample_to_json(s).dump() << '\n';
  if (!f) throw IoError("manifest: write failed on " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("manifest: cannot open " + path);
  Manifest m;
  m.dir = fs::path(path).parent_path().string();
  if (m.dir.empty()) m.dir = ".";
  std::string line;
  long line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("manifest: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    MixtureSample s = sample_from_json(j);
    if (s.speaker_id == s.interferer_id)
      throw ValidationError("manifest: sample " + s.id + " has identical target and interferer");
    m.samples.push_back(std::move(s));
  }
  // referenced audio must exist
  for (const auto& s : m.samples) {
    for (const std::string* p : {&s.target_wav, &s.interferer_wav, &s.mixture_wav, &s.reference_wav}) {
      if (!fs::exists(m.resolve(*p)))
        throw ValidationError("manifest: sample " + s.id + " references missing file " + *p);
    }
  }
  return m;
}

std::vector<std::vector<int>> iterate_batches(long n_samples, int batch_size,
                                              uint64_t shuffle_seed) {
  if (batch_size < 1) throw ValidationError("batches: batch_size must be positive");
  std::vector<int> order(n_samples);
  for (long i = 0; i < n_samples; ++i) order[i] = static_cast<int>(i);
  Rng rng(shuffle_seed);
  for (long i = n_samples; i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);
  std::vector<std::vector<int>> batches;
  for (long i = 0; i < n_samples; i += batch_size) {
    long hi = std::min(n_samples, i + batch_size);
    batches.emplace_back(order.begin() + i, order.begin() + hi);
  }
  return batches;
}

}  // namespace msep
