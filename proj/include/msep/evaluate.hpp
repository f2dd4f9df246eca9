// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msep/checkpoint.hpp"
#include "msep/metrics.hpp"
#include "msep/waveform.hpp"

namespace msep {

// Full separation pipeline for one mixture: stft -> normalize ->
// mask -> apply to the unnormalized magnitude -> istft with the
// mixture phase. Embeddings may be null only when the checkpoint's
// conditioning mode does not use them.
Waveform separate(const Waveform& mix, const std::vector<float>* voice_emb,
                  const std::vector<float>* face_emb, Checkpoint& ck);

struct SdrReportItem {
  std::string sample_id;
  int variant_id;  // face-variant index 0..9, or -1 for voice-only
  double sdr_db;
};

struct SdrReport {
  std::string mode;
  long n_items = 0;
  double mean_db = 0;
  double std_db = 0;
  std::string std_kind;  // "variant" (across the 10 face variants) or
                         // "bootstrap" (over items, voice-only)
  double baseline_mean_db = 0;  // raw mixture scored against the target
  std::vector<SdrReportItem> per_item;
};

struct WerReportItem {
  std::string sample_id;
  long substitutions, deletions, insertions, ref_words;
};

struct WerReport {
  long substitutions = 0, deletions = 0, insertions = 0, ref_words = 0;
  double wer = 0;  // pooled: (S+D+I) / N over the corpus
  std::vector<WerReportItem> per_item;
};

struct EvalResult {
  SdrReport sdr;
  std::optional<WerReport> wer;
};

struct EvalConfig {
  double pose_sigma = 0.4;
  uint64_t seed = 1;
  int filter_taps = 512;
  int bootstrap_resamples = 200;
};

EvalResult evaluate_separation(const std::string& manifest_path,
                               const std::string& checkpoint_path, ConditioningMode mode,
                               const std::string& hyp_path = "", const EvalConfig& cfg = {});

void write_report_json(const std::string& path, const EvalResult& result);
void write_report_csv(const std::string& path, const EvalResult& result);

struct SwapTestResult {
  long trials = 0;
  long successes = 0;
  double fraction = 0;
};

// For each test mixture of speakers A and B, separate conditioned on
// A and then on B; a trial succeeds when the estimate is closer (by
// SDR) to its own speaker's clean crop than to the other's.
SwapTestResult swap_test(const std::string& manifest_path, const std::string& checkpoint_path,
                         const EvalConfig& cfg = {});

}  // namespace msep
