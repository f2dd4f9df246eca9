// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "msep/errors.hpp"

namespace msep {

// Mono time-domain signal, nominal amplitude range [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  Waveform() = default;
  Waveform(std::vector<double> s, int sr) : samples(std::move(s)), sample_rate(sr) {}

  size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }

  double rms() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return std::sqrt(acc / samples.size());
  }

  double peak() const {
    double p = 0.0;
    for (double s : samples) p = std::max(p, std::abs(s));
    return p;
  }

  void validate() const {
    if (sample_rate <= 0) throw ValidationError("waveform: sample_rate must be positive");
    for (double s : samples) {
      if (!std::isfinite(s)) throw ValidationError("waveform: non-finite sample");
    }
  }
};

}  // namespace msep
