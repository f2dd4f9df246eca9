// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/profile.hpp"

#include "msep/errors.hpp"

namespace msep {

Profile parse_profile(const std::string& s) {
  if (s == "desk") return Profile::desk;
  if (s == "paper") return Profile::paper;
  throw ValidationError("unknown profile '" + s + "' (expected desk or paper)");
}

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

StftConfig stft_defaults(Profile p) {
  if (p == Profile::paper) return StftConfig{1200, 400, 160, WindowKind::hann, 16000};
  return StftConfig{512, 200, 80, WindowKind::hann, 8000};
}

EmbeddingDefaults embedding_defaults(Profile p) {
  if (p == Profile::paper) return {256, 512, 0.4};
  return {64, 64, 0.4};
}

CorpusDefaults corpus_defaults(Profile p) {
  if (p == Profile::paper) return {24, 12, 6.0, 16000};
  return {24, 12, 6.0, 8000};
}

}  // namespace msep
