// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "msep/embeddings.hpp"
#include "msep/waveform.hpp"

namespace msep {

// Synthetic speaker corpus standing in for a real speech dataset.
// Each speaker is a seeded glottal-pulse source with per-speaker f0
// and a 4-resonance envelope; utterances are syllable-gated with
// token-level timing so the WER pipeline has ground-truth transcripts.
struct CorpusSpec {
  int n_speakers = 24;
  int utterances_per_speaker = 12;
  double utterance_seconds = 6.0;
  int sample_rate = 8000;
  uint64_t seed = 1;

  void validate() const;
};

struct SyllableToken {
  std::string token;
  double start_s = 0;
  double end_s = 0;
};

struct UtteranceInfo {
  std::string speaker_id;
  int utt_index = 0;
  std::string wav_path;  // relative to the corpus directory
  std::vector<SyllableToken> tokens;
};

struct CorpusIndex {
  CorpusSpec spec;
  std::vector<SpeakerIdentity> speakers;
  std::vector<UtteranceInfo> utterances;
  std::string dir;

  const SpeakerIdentity& speaker(const std::string& id) const;
  std::vector<const UtteranceInfo*> utterances_of(const std::string& speaker_id) const;
};

SpeakerIdentity make_speaker(const CorpusSpec& spec, int speaker_index);

Waveform synth_utterance(const CorpusSpec& spec, const SpeakerIdentity& speaker, int utt_index,
                         std::vector<SyllableToken>* tokens = nullptr);

// Writes wav/<spk>/<utt>.wav files plus corpus.json (spec + speakers +
// utterance index with token timings). Deterministic per (spec, seed).
CorpusIndex synth_corpus(const CorpusSpec& spec, const std::string& out_dir);

CorpusIndex load_corpus(const std::string& dir);

// corpus.json (de)serialization helpers shared with the mixer.
std::string corpus_index_to_json(const CorpusIndex& idx);
CorpusIndex corpus_index_from_json(const std::string& json_text, const std::string& dir);

}  // namespace msep
