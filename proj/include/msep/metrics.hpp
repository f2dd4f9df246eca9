// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <string>
#include <vector>

namespace msep {

// Single-reference SDR: the estimate is projected onto the span of the
// reference delayed by 0..taps-1 (normal equations with a Toeplitz
// Gram matrix, diagonal regularization 1e-10); SDR compares the
// projection to its residual in dB, clamped to [-100, 100]. With one
// reference there is no interference subspace, so the full multi-source
// decomposition reduces to exactly this projection/residual split.
double sdr_bsseval(std::span<const double> estimate, std::span<const double> reference,
                   int filter_taps = 512);

// Scale-invariant single-coefficient variant, used as a cross-check;
// never exceeds sdr_bsseval on the same pair.
double si_sdr(std::span<const double> estimate, std::span<const double> reference);

inline constexpr double kSdrClampDb = 100.0;

struct WerCounts {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long ref_words = 0;
  double wer = 0.0;  // (S+D+I)/N; may exceed 1
};

// Levenshtein alignment with unit costs; cost ties prefer substitution
// over insertion over deletion.
WerCounts wer(const std::vector<std::string>& reference_words,
              const std::vector<std::string>& hypothesis_words);

std::vector<std::string> split_words(const std::string& text);

}  // namespace msep
