// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "msep/stft.hpp"

namespace msep {

// desk: minutes-scale experiments at 8 kHz; paper: the published-scale
// front-end (16 kHz, 601 bins) and full-width network.
enum class Profile { desk, paper };

Profile parse_profile(const std::string& s);
std::string to_string(Profile p);

StftConfig stft_defaults(Profile p);

struct EmbeddingDefaults {
  int d_voice;
  int d_face;
  double pose_sigma;
};
EmbeddingDefaults embedding_defaults(Profile p);

struct CorpusDefaults {
  int n_speakers;
  int utterances_per_speaker;
  double utterance_seconds;
  int sample_rate;
};
CorpusDefaults corpus_defaults(Profile p);

}  // namespace msep
