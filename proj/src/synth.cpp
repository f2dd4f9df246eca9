// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "msep/errors.hpp"
#include "msep/rng.hpp"
#include "msep/wav.hpp"

namespace fs = std::filesystem;

namespace msep {

namespace {

constexpr int kTokenAlphabet = 32;

struct Biquad {
  // two-pole resonator
  double a1, a2, g;
  double z1 = 0, z2 = 0;

  Biquad(double freq_hz, double bw_hz, double gain, int sr) {
    double r = std::exp(-M_PI * bw_hz / sr);
    double theta = 2.0 * M_PI * freq_hz / sr;
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    g = gain * (1.0 - r);
  }

  double step(double x) {
    double y = g * x + a1 * z1 + a2 * z2;
    z2 = z1;
    z1 = y;
    return y;
  }
};

}  // namespace

void CorpusSpec::validate() const {
  if (n_speakers < 2) throw ValidationError("corpus: need at least 2 speakers");
  if (utterances_per_speaker < 1) throw ValidationError("corpus: need at least 1 utterance");
  if (utterance_seconds < 3.0) throw ValidationError("corpus: utterances must be >= 3 s");
  if (sample_rate <= 0) throw ValidationError("corpus: sample_rate must be positive");
}

const SpeakerIdentity& CorpusIndex::speaker(const std::string& id) const {
  for (const auto& s : speakers)
    if (s.speaker_id == id) return s;
  throw ValidationError("corpus: unknown speaker '" + id + "'");
}

std::vector<const UtteranceInfo*> CorpusIndex::utterances_of(const std::string& speaker_id) const {
  std::vector<const UtteranceInfo*> out;
  for (const auto& u : utterances)
    if (u.speaker_id == speaker_id) out.push_back(&u);
  return out;
}

SpeakerIdentity make_speaker(const CorpusSpec& spec, int speaker_index) {
  SpeakerIdentity id;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%03d", speaker_index);
  id.speaker_id = buf;
  id.seed = mix_seed(spec.seed, "speaker", static_cast<uint64_t>(speaker_index));
  Rng rng(id.seed);

  // f0 on a shuffled geometric grid so no two speakers land on nearly
  // identical pitch (uniform draws produce sub-Hz collisions, which
  // make mixtures of that pair unseparable by any T-F mask)
  int n = spec.n_speakers;
  std::vector<int> slot(n);
  for (int i = 0; i < n; ++i) slot[i] = i;
  Rng grid_rng(mix_seed(spec.seed, "f0-grid"));
  for (int i = n; i > 1; --i) std::swap(slot[i - 1], slot[grid_rng.uniform_int(0, i - 1)]);
  double frac = n > 1 ? static_cast<double>(slot[speaker_index]) / (n - 1) : 0.5;
  id.f0_hz = 92.0 * std::pow(255.0 / 92.0, frac) * (1.0 + rng.uniform(-0.01, 0.01));

  double nyq = spec.sample_rate / 2.0;
  struct Range {
    double lo, hi, bw_lo, bw_hi;
  };
  const Range bands[4] = {{280, 900, 50, 120},
                          {950, 2100, 70, 160},
                          {2150, 2950, 90, 210},
                          {3000, 3700, 120, 260}};
  for (const Range& b : bands) {
    Resonance r;
    r.freq_hz = rng.uniform(b.lo, std::min(b.hi, nyq * 0.93));
    r.bandwidth_hz = rng.uniform(b.bw_lo, b.bw_hi);
    r.gain = std::pow(10.0, rng.uniform(-6.0, 6.0) / 20.0);
    id.envelope.push_back(r);
  }
  return id;
}

Waveform synth_utterance(const CorpusSpec& spec, const SpeakerIdentity& speaker, int utt_index,
                         std::vector<SyllableToken>* tokens) {
  Rng rng(mix_seed(speaker.seed, "utt", static_cast<uint64_t>(utt_index)));
  long n = static_cast<long>(std::llround(spec.utterance_seconds * spec.sample_rate));
  int sr = spec.sample_rate;

  // syllable gating with token timings
  std::vector<SyllableToken> toks;
  std::vector<double> envelope(n, 0.0);
  double t = rng.uniform(0.01, 0.06);
  while (t < spec.utterance_seconds - 0.15) {
    double len = rng.uniform(0.12, 0.30);
    double end = std::min(t + len, spec.utterance_seconds - 0.02);
    int token_id = static_cast<int>(rng.uniform_int(0, kTokenAlphabet - 1));
    toks.push_back({"s" + std::to_string(token_id), t, end});
    long i0 = static_cast<long>(t * sr), i1 = static_cast<long>(end * sr);
    double ramp = 0.025 * sr;
    for (long i = i0; i < i1 && i < n; ++i) {
      double a = 1.0;
      if (i - i0 < ramp) a = 0.5 - 0.5 * std::cos(M_PI * (i - i0) / ramp);
      if (i1 - i < ramp) a = std::min(a, 0.5 - 0.5 * std::cos(M_PI * (i1 - i) / ramp));
      envelope[i] = a;
    }
    t = end + rng.uniform(0.04, 0.15);
  }

  // glottal pulse train: smooth pulses with vibrato plus per-cycle
  // jitter/shimmer, and aspiration noise
  double vib_depth = rng.uniform(0.01, 0.025);
  double vib_rate = rng.uniform(4.0, 7.0);
  double vib_phase = rng.uniform(0.0, 2.0 * M_PI);
  // open phase scales with the pitch period, so the source rolloff
  // knee differs per speaker
  int pulse_w = std::clamp(static_cast<int>(std::lround(0.3 * sr / speaker.f0_hz)), 4, 48);
  std::vector<double> excitation(n, 0.0);
  double phase = rng.uniform(0.0, 1.0);
  double jitter = 0.0;
  for (long i = 0; i < n; ++i) {
    double f0 = speaker.f0_hz * (1.0 + jitter) *
                (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_rate * i / sr + vib_phase));
    phase += f0 / sr;
    if (phase >= 1.0) {
      phase -= 1.0;
      jitter = 0.008 * rng.gaussian();
      double amp = 1.0 + 0.1 * rng.gaussian();  // shimmer
      for (int k = 0; k < pulse_w && i + k < n; ++k)
        excitation[i + k] += amp * (0.5 - 0.5 * std::cos(2.0 * M_PI * k / pulse_w));
    }
    excitation[i] += 0.04 * rng.gaussian();  // aspiration
    excitation[i] *= envelope[i];
  }

  // mild source tilt then parallel resonance branches
  std::vector<double> tilted(n);
  double lp = 0.0;
  for (long i = 0; i < n; ++i) {
    lp = 0.7 * lp + excitation[i];
    tilted[i] = lp;
  }
  Waveform w;
  w.sample_rate = sr;
  w.samples.assign(n, 0.0);
  for (const Resonance& res : speaker.envelope) {
    Biquad bq(res.freq_hz, res.bandwidth_hz, res.gain, sr);
    for (long i = 0; i < n; ++i) w.samples[i] += bq.step(tilted[i]);
  }

  // normalize level; keep RMS within the generator's contract
  double target_rms = rng.uniform(0.05, 0.15);
  double rms = w.rms();
  if (rms < 1e-9) throw NumericalError("synth: silent utterance generated");
  double gain = target_rms / rms;
  double peak = w.peak() * gain;
  if (peak > 0.95) gain *= 0.95 / peak;
  for (auto& s : w.samples) s *= gain;

  if (tokens) *tokens = std::move(toks);
  return w;
}

std::string corpus_index_to_json(const CorpusIndex& idx) {
  nlohmann::json j;
  j["spec"] = {{"n_speakers", idx.spec.n_speakers},
               {"utterances_per_speaker", idx.spec.utterances_per_speaker},
               {"utterance_seconds", idx.spec.utterance_seconds},
               {"sample_rate", idx.spec.sample_rate},
               {"seed", idx.spec.seed}};
  j["speakers"] = nlohmann::json::array();
  for (const auto& s : idx.speakers) {
    nlohmann::json env = nlohmann::json::array();
    for (const auto& r : s.envelope) env.push_back({r.freq_hz, r.bandwidth_hz, r.gain});
    j["speakers"].push_back(
        {{"speaker_id", s.speaker_id}, {"seed", s.seed}, {"f0_hz", s.f0_hz}, {"envelope", env}});
  }
  j["utterances"] = nlohmann::json::array();
  for (const auto& u : idx.utterances) {
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& t : u.tokens) toks.push_back({{"t", t.token}, {"s", t.start_s}, {"e", t.end_s}});
    j["utterances"].push_back({{"speaker_id", u.speaker_id},
                               {"utt", u.utt_index},
                               {"wav", u.wav_path},
                               {"tokens", toks}});
  }
  return j.dump(1);
}

CorpusIndex corpus_index_from_json(const std::string& json_text, const std::string& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corpus.json: parse error: ") + e.what());
  }
  CorpusIndex idx;
  idx.dir = dir;
  const auto& sp = j.at("spec");
  idx.spec.n_speakers = sp.at("n_speakers").get<int>();
  idx.spec.utterances_per_speaker = sp.at("utterances_per_speaker").get<int>();
  idx.spec.utterance_seconds = sp.at("utterance_seconds").get<double>();
  idx.spec.sample_rate = sp.at("sample_rate").get<int>();
  idx.spec.seed = sp.at("seed").get<uint64_t>();
  for (const auto& s : j.at("speakers")) {
    SpeakerIdentity id;
    id.speaker_id = s.at("speaker_id").get<std::string>();
    id.seed = s.at("seed").get<uint64_t>();
    id.f0_hz = s.at("f0_hz").get<double>();
    for (const auto& r : s.at("envelope"))
      id.envelope.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()});
    idx.speakers.push_back(std::move(id));
  }
  for (const auto& u : j.at("utterances")) {
    UtteranceInfo info;
    info.speaker_id = u.at("speaker_id").get<std::string>();
    info.utt_index = u.at("utt").get<int>();
    info.wav_path = u.at("wav").get<std::string>();
    for (const auto& t : u.at("tokens"))
      info.tokens.push_back(
          {t.at("t").get<std::string>(), t.at("s").get<double>(), t.at("e").get<double>()});
    idx.utterances.push_back(std::move(info));
  }
  return idx;
}

CorpusIndex synth_corpus(const CorpusSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(fs::path(out_dir) / "wav");

  CorpusIndex idx;
  idx.spec = spec;
  idx.dir = out_dir;
  for (int s = 0; s < spec.n_speakers; ++s) {
    idx.speakers.push_back(make_speaker(spec, s));
    fs::create_directories(fs::path(out_dir) / "wav" / idx.speakers.back().speaker_id);
  }
  idx.utterances.resize(static_cast<size_t>(spec.n_speakers) * spec.utterances_per_speaker);

#pragma omp parallel for collapse(2) schedule(dynamic)
  for (int s = 0; s < spec.n_speakers; ++s) {
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      const SpeakerIdentity& spk = idx.speakers[s];
      std::vector<SyllableToken> tokens;
      Waveform w = synth_utterance(spec, spk, u, &tokens);

      char buf[32];
      std::snprintf(buf, sizeof(buf), "utt%03d.wav", u);
      fs::path rel = fs::path("wav") / spk.speaker_id / buf;
      write_wav((fs::path(out_dir) / rel).string(), w);

      UtteranceInfo& info = idx.utterances[static_cast<size_t>(s) * spec.utterances_per_speaker + u];
      info.speaker_id = spk.speaker_id;
      info.utt_index = u;
      info.wav_path = rel.generic_string();
      info.tokens = std::move(tokens);
    }
  }

  std::ofstream f(fs::path(out_dir) / "corpus.json");
  if (!f) throw IoError("corpus: cannot write corpus.json in " + out_dir);
  f << corpus_index_to_json(idx);
  return idx;
}

CorpusIndex load_corpus(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "corpus.json");
  if (!f) throw IoError("corpus: cannot open " + dir + "/corpus.json");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return corpus_index_from_json(text, dir);
}

}  // namespace msep
