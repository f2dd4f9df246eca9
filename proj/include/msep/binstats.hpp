// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "msep/stft.hpp"

namespace msep {

// Per-frequency-bin normalization statistics over a corpus of
// magnitude spectrograms. std is floored at 1e-5 to guard silent bins.
struct BinStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  int bins() const { return static_cast<int>(mean.size()); }
  static constexpr double kStdFloor = 1e-5;
};

class BinStatsAccumulator {
 public:
  void add(const MagnitudeSpectrogram& m);
  long total_frames() const { return frames_; }
  BinStats finalize() const;  // throws if fewer than 2 frames seen

 private:
  std::vector<double> sum_, sumsq_;
  long frames_ = 0;
};

BinStats compute_bin_stats(const std::vector<MagnitudeSpectrogram>& corpus);

// out[t,f] = (m[t,f] - mean[f]) / std[f]
std::vector<double> normalize(const MagnitudeSpectrogram& m, const BinStats& stats);
MagnitudeSpectrogram denormalize(const std::vector<double>& normed, long frames,
                                 const BinStats& stats, const StftConfig& cfg);

}  // namespace msep
