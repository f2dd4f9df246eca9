// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/binstats.hpp"

#include <cmath>
#include <string>

#include "msep/errors.hpp"

namespace msep {

void BinStatsAccumulator::add(const MagnitudeSpectrogram& m) {
  if (sum_.empty()) {
    sum_.assign(m.bins, 0.0);
    sumsq_.assign(m.bins, 0.0);
  } else if (static_cast<int>(sum_.size()) != m.bins) {
    throw ValidationError("binstats: inconsistent bin count across corpus");
  }
  for (long t = 0; t < m.frames; ++t) {
    const double* row = m.data.data() + t * m.bins;
    for (int f = 0; f < m.bins; ++f) {
      sum_[f] += row[f];
      sumsq_[f] += row[f] * row[f];
    }
  }
  frames_ += m.frames;
}

BinStats BinStatsAccumulator::finalize() const {
  if (frames_ < 2)
    throw ValidationError("binstats: need at least 2 frames total, saw " +
                          std::to_string(frames_));
  BinStats s;
  size_t bins = sum_.size();
  s.mean.resize(bins);
  s.stddev.resize(bins);
  for (size_t f = 0; f < bins; ++f) {
    double mean = sum_[f] / frames_;
    double var = sumsq_[f] / frames_ - mean * mean;
    s.mean[f] = mean;
    s.stddev[f] = std::max(std::sqrt(std::max(var, 0.0)), BinStats::kStdFloor);
  }
  return s;
}

BinStats compute_bin_stats(const std::vector<MagnitudeSpectrogram>& corpus) {
  BinStatsAccumulator acc;
  for (const auto& m : corpus) acc.add(m);
  return acc.finalize();
}

std::vector<double> normalize(const MagnitudeSpectrogram& m, const BinStats& stats) {
  if (stats.bins() != m.bins) throw ValidationError("binstats: stats/spectrogram bin mismatch");
  std::vector<double> out(m.data.size());
  for (long t = 0; t < m.frames; ++t) {
    const double* row = m.data.data() + t * m.bins;
    double* dst = out.data() + t * m.bins;
    for (int f = 0; f < m.bins; ++f) dst[f] = (row[f] - stats.mean[f]) / stats.stddev[f];
  }
  return out;
}

MagnitudeSpectrogram denormalize(const std::vector<double>& normed, long frames,
                                 const BinStats& stats, const StftConfig& cfg) {
  int bins = stats.bins();
  if (normed.size() != static_cast<size_t>(frames) * bins)
    throw ValidationError("binstats: denormalize size mismatch");
  MagnitudeSpectrogram m;
  m.frames = frames;
  m.bins = bins;
  m.config = cfg;
  m.data.resize(normed.size());
  for (long t = 0; t < frames; ++t) {
    const double* row = normed.data() + t * bins;
    double* dst = m.data.data() + t * bins;
    for (int f = 0; f < bins; ++f) dst[f] = row[f] * stats.stddev[f] + stats.mean[f];
  }
  return m;
}

}  // namespace msep
