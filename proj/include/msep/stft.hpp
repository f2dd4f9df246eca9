// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

#include "msep/waveform.hpp"

namespace msep {

enum class WindowKind { hann };

struct StftConfig {
  int fft_size = 512;
  int win_length = 200;
  int hop_length = 80;
  WindowKind window = WindowKind::hann;
  int sample_rate = 8000;

  int freq_bins() const { return fft_size / 2 + 1; }
  // frames produced for a signal of `len` samples
  long num_frames(long len) const { return (len - win_length) / hop_length + 1; }
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

struct ComplexSpectrogram {
  long frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> data;  // row-major [frames][bins]
  StftConfig config;

  std::complex<double>& at(long t, int f) { return data[t * bins + f]; }
  const std::complex<double>& at(long t, int f) const { return data[t * bins + f]; }
  void validate() const;
};

struct MagnitudeSpectrogram {
  long frames = 0;
  int bins = 0;
  std::vector<double> data;  // row-major [frames][bins], all >= 0
  StftConfig config;

  double& at(long t, int f) { return data[t * bins + f]; }
  const double& at(long t, int f) const { return data[t * bins + f]; }
};

// Periodic Hann analysis window of length `n`.
std::vector<double> hann_window(int n);

// Frame t covers samples [t*hop, t*hop + win), Hann-windowed and
// zero-padded to fft_size; only the non-negative-frequency bins are kept.
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Weighted overlap-add synthesis with window-square normalization
// (epsilon floor 1e-8). Output length is (frames-1)*hop + win.
Waveform istft(const ComplexSpectrogram& s);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& s);
std::vector<double> phase(const ComplexSpectrogram& s);  // [frames*bins] angles

}  // namespace msep
