// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/mel.hpp"

#include <cmath>

#include "msep/errors.hpp"

namespace msep {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(int n_mels, int fft_size, int sample_rate,
                                                double fmin, double fmax) {
  if (n_mels < 1) throw ValidationError("mel: n_mels must be >= 1");
  if (fmax < 0.0) fmax = sample_rate / 2.0;
  if (fmin < 0.0 || fmax <= fmin || fmax > sample_rate / 2.0)
    throw ValidationError("mel: invalid band edges");

  int bins = fft_size / 2 + 1;
  double mel_lo = hz_to_mel(fmin);
  double mel_hi = hz_to_mel(fmax);

  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  std::vector<std::vector<double>> fb(n_mels, std::vector<double>(bins, 0.0));
  for (int m = 0; m < n_mels; ++m) {
    double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / fft_size;
      if (f <= lo || f >= hi) continue;
      fb[m][k] = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
    }
  }
  return fb;
}

}  // namespace msep
