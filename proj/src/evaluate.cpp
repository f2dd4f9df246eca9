// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/evaluate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "msep/dataset.hpp"
#include "msep/embeddings.hpp"
#include "msep/errors.hpp"
#include "msep/rng.hpp"
#include "msep/wav.hpp"

namespace fs = std::filesystem;

namespace msep {

namespace {

double sdr_truncated(const Waveform& est, const Waveform& ref, int taps) {
  size_t n = std::min(est.samples.size(), ref.samples.size());
  return sdr_bsseval(std::span(est.samples.data(), n), std::span(ref.samples.data(), n), taps);
}

double mean_of(const std::vector<double>& v) {
  double acc = 0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / v.size();
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  bool all_equal = true;
  for (double x : v) all_equal = all_equal && x == v.front();
  if (all_equal) return 0.0;  // e.g. pose_sigma 0: every variant identical
  double m = mean_of(v);
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / (v.size() - 1));
}

double bootstrap_std(const std::vector<double>& items, int resamples, uint64_t seed) {
  if (items.size() < 2) return 0.0;
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (int b = 0; b < resamples; ++b) {
    double acc = 0;
    for (size_t i = 0; i < items.size(); ++i)
      acc += items[rng.uniform_int(0, static_cast<long>(items.size()) - 1)];
    means[b] = acc / items.size();
  }
  double m = mean_of(means);
  double acc = 0;
  for (double x : means) acc += (x - m) * (x - m);
  return std::sqrt(acc / resamples);
}

std::vector<float> voice_for(const Manifest& manifest, const MixtureSample& s,
                             const Checkpoint& ck) {
  Waveform ref = read_wav(manifest.resolve(s.reference_wav));
  return voice_embedding_oracle(ref, ck.net.config().d_voice, ck.stft_cfg).values;
}

}  // namespace

Waveform separate(const Waveform& mix, const std::vector<float>* voice_emb,
                  const std::vector<float>* face_emb, Checkpoint& ck) {
  const ModelConfig& m = ck.net.config();
  if (m.uses_voice() && !voice_emb)
    throw ValidationError("separate: checkpoint mode " + to_string(m.mode) +
                          " requires a voice embedding");
  if (m.uses_face() && !face_emb)
    throw ValidationError("separate: checkpoint mode " + to_string(m.mode) +
                          " requires a face embedding");

  ComplexSpectrogram spec = stft(mix, ck.stft_cfg);
  MagnitudeSpectrogram mag = magnitude(spec);
  std::vector<double> normed = normalize(mag, ck.stats);
  std::vector<float> normed_f(normed.begin(), normed.end());

  Mask mask = ck.net.forward(normed_f, spec.frames, m.uses_voice() ? voice_emb : nullptr,
                             m.uses_face() ? face_emb : nullptr);
  return istft(apply_mask(spec, mask));
}

EvalResult evaluate_separation(const std::string& manifest_path,
                               const std::string& checkpoint_path, ConditioningMode mode,
                               const std::string& hyp_path, const EvalConfig& cfg) {
  Manifest manifest = load_manifest(manifest_path);
  if (manifest.samples.empty()) throw ValidationError("eval: manifest has no samples");
  Checkpoint ck = load_checkpoint(checkpoint_path);
  const ModelConfig& m = ck.net.config();
  if (m.mode != mode)
    throw ValidationError("eval: requested mode " + to_string(mode) +
                          " does not match checkpoint mode " + to_string(m.mode));
  CorpusIndex corpus = load_corpus(manifest.dir);

  long n = static_cast<long>(manifest.samples.size());
  int n_variants = m.uses_face() ? 10 : 1;

  EvalResult result;
  result.sdr.mode = to_string(mode);
  result.sdr.n_items = n;
  result.sdr.per_item.resize(n * n_variants);
  std::vector<double> baseline(n);
  // sdr[variant][item]
  std::vector<std::vector<double>> by_variant(n_variants, std::vector<double>(n));

  if (m.uses_face()) {
    for (const auto& s : manifest.samples)
      if (s.face_variant_ids.size() < 10)
        throw ValidationError("eval: sample " + s.id + " lacks the 10 face variants");
  }

  std::string first_error;  // exceptions must not cross the omp region
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      const MixtureSample& s = manifest.samples[i];
      Waveform mix = read_wav(manifest.resolve(s.mixture_wav));
      Waveform target = read_wav(manifest.resolve(s.target_wav));

      std::vector<float> voice;
      if (m.uses_voice()) voice = voice_for(manifest, s, ck);

      for (int v = 0; v < n_variants; ++v) {
        std::vector<float> face;
        if (m.uses_face())
          face = face_embedding_synthetic(corpus.speaker(s.speaker_id), s.face_variant_ids[v],
                                          cfg.pose_sigma, m.d_face)
                     .values;
        Waveform est = separate(mix, m.uses_voice() ? &voice : nullptr,
                                m.uses_face() ? &face : nullptr, ck);
        double sdr = sdr_truncated(est, target, cfg.filter_taps);
        by_variant[v][i] = sdr;
        result.sdr.per_item[i * n_variants + v] = {s.id, m.uses_face() ? v : -1, sdr};
        if (v == 0) {
          // unprocessed baseline over the same support as the estimate
          Waveform mix_trunc = mix;
          mix_trunc.samples.resize(std::min(mix.samples.size(), est.samples.size()));
          Waveform tgt_trunc = target;
          tgt_trunc.samples.resize(mix_trunc.samples.size());
          baseline[i] = sdr_truncated(mix_trunc, tgt_trunc, cfg.filter_taps);
        }
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw ValidationError("eval: " + first_error);

  result.sdr.baseline_mean_db = mean_of(baseline);
  if (m.uses_face()) {
    // Table-2 protocol: corpus mean per variant, spread across variants
    std::vector<double> variant_means(n_variants);
    for (int v = 0; v < n_variants; ++v) variant_means[v] = mean_of(by_variant[v]);
    result.sdr.mean_db = mean_of(variant_means);
    result.sdr.std_db = sample_std(variant_means);
    result.sdr.std_kind = "variant";
  } else {
    result.sdr.mean_db = mean_of(by_variant[0]);
    result.sdr.std_db =
        bootstrap_std(by_variant[0], cfg.bootstrap_resamples, mix_seed(cfg.seed, "bootstrap"));
    result.sdr.std_kind = "bootstrap";
  }

  if (!hyp_path.empty()) {
    std::ifstream f(hyp_path);
    if (!f) throw IoError("eval: cannot open hypothesis file " + hyp_path);
    std::map<std::string, std::vector<std::string>> hyps;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw IoError("eval: bad hypothesis line: " + std::string(e.what()));
      }
      std::vector<std::string> words;
      if (j.at("words").is_array())
        words = j.at("words").get<std::vector<std::string>>();
      else
        words = split_words(j.at("words").get<std::string>());
      hyps[j.at("sample_id").get<std::string>()] = std::move(words);
    }

    WerReport wr;
    for (const auto& s : manifest.samples) {
      auto it = hyps.find(s.id);
      if (it == hyps.end()) continue;
      WerCounts c = wer(split_words(s.transcript), it->second);
      wr.per_item.push_back({s.id, c.substitutions, c.deletions, c.insertions, c.ref_words});
      wr.substitutions += c.substitutions;
      wr.deletions += c.deletions;
      wr.insertions += c.insertions;
      wr.ref_words += c.ref_words;
    }
    if (wr.per_item.empty())
      throw ValidationError("eval: hypothesis file matched no manifest sample ids");
    wr.wer = static_cast<double>(wr.substitutions + wr.deletions + wr.insertions) / wr.ref_words;
    result.wer = std::move(wr);
  }
  return result;
}

void write_report_json(const std::string& path, const EvalResult& result) {
  nlohmann::json j;
  j["mode"] = result.sdr.mode;
  j["n_items"] = result.sdr.n_items;
  j["mean_db"] = result.sdr.mean_db;
  j["std_db"] = result.sdr.std_db;
  j["std_kind"] = result.sdr.std_kind;
  j["baseline_mean_db"] = result.sdr.baseline_mean_db;
  j["per_item"] = nlohmann::json::array();
  for (const auto& it : result.sdr.per_item)
    j["per_item"].push_back(
        {{"sample_id", it.sample_id}, {"variant_id", it.variant_id}, {"sdr_db", it.sdr_db}});
  if (result.wer) {
    nlohmann::json w;
    w["wer"] = result.wer->wer;
    w["substitutions"] = result.wer->substitutions;
    w["deletions"] = result.wer->deletions;
    w["insertions"] = result.wer->insertions;
    w["ref_words"] = result.wer->ref_words;
    w["per_item"] = nlohmann::json::array();
    for (const auto& it : result.wer->per_item)
      w["per_item"].push_back({{"sample_id", it.sample_id},
                               {"substitutions", it.substitutions},
                               {"deletions", it.deletions},
                               {"insertions", it.insertions},
                               {"ref_words", it.ref_words}});
    j["wer"] = std::move(w);
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("eval: cannot write report " + path);
  f << j.dump(1) << '\n';
}

void write_report_csv(const std::string& path, const EvalResult& result) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("eval: cannot write csv " + path);
  f << "sample_id,variant_id,sdr_db\n";
  char buf[64];
  for (const auto& it : result.sdr.per_item) {
    std::snprintf(buf, sizeof(buf), "%.6f", it.sdr_db);
    f << it.sample_id << ',' << it.variant_id << ',' << buf << '\n';
  }
}

SwapTestResult swap_test(const std::string& manifest_path, const std::string& checkpoint_path,
                         const EvalConfig& cfg) {
  Manifest manifest = load_manifest(manifest_path);
  if (manifest.samples.empty()) throw ValidationError("swaptest: manifest has no samples");
  Checkpoint ck = load_checkpoint(checkpoint_path);
  const ModelConfig& m = ck.net.config();
  CorpusIndex corpus = load_corpus(manifest.dir);

  long n = static_cast<long>(manifest.samples.size());
  std::vector<int> success_a(n, 0), success_b(n, 0);

  std::string first_error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      const MixtureSample& s = manifest.samples[i];
      Waveform mix = read_wav(manifest.resolve(s.mixture_wav));
      Waveform ref_a = read_wav(manifest.resolve(s.target_wav));
      Waveform ref_b = read_wav(manifest.resolve(s.interferer_wav));

      std::vector<float> voice_a, voice_b, face_a, face_b;
      if (m.uses_voice()) {
        voice_a = voice_for(manifest, s, ck);
        auto utts = corpus.utterances_of(s.interferer_id);
        if (utts.empty())
          throw ValidationError("no corpus utterance for speaker " + s.interferer_id);
        Waveform ref = read_wav((fs::path(corpus.dir) / utts.front()->wav_path).string());
        voice_b = voice_embedding_oracle(ref, m.d_voice, ck.stft_cfg).values;
      }
      if (m.uses_face()) {
        face_a = face_embedding_synthetic(corpus.speaker(s.speaker_id), s.face_variant_ids.at(0),
                                          cfg.pose_sigma, m.d_face)
                     .values;
        face_b = face_embedding_synthetic(corpus.speaker(s.interferer_id), 0, cfg.pose_sigma,
                                          m.d_face)
                     .values;
      }

      Waveform est_a = separate(mix, m.uses_voice() ? &voice_a : nullptr,
                                m.uses_face() ? &face_a : nullptr, ck);
      Waveform est_b = separate(mix, m.uses_voice() ? &voice_b : nullptr,
                                m.uses_face() ? &face_b : nullptr, ck);

      success_a[i] = sdr_truncated(est_a, ref_a, cfg.filter_taps) >
                     sdr_truncated(est_a, ref_b, cfg.filter_taps);
      success_b[i] = sdr_truncated(est_b, ref_b, cfg.filter_taps) >
                     sdr_truncated(est_b, ref_a, cfg.filter_taps);
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw ValidationError("swaptest: " + first_error);

  SwapTestResult out;
  out.trials = 2 * n;
  for (long i = 0; i < n; ++i) out.successes += success_a[i] + success_b[i];
  out.fraction = static_cast<double>(out.successes) / out.trials;
  return out;
}

}  // namespace msep
