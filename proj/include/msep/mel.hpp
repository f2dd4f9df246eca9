// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

namespace msep {

// Triangular mel filterbank over the linear STFT bins, HTK mel scale.
// Rows are filters, columns the fft_size/2+1 bins. Used by the voice
// embedding oracle; the separation front-end itself stays linear.
std::vector<std::vector<double>> mel_filterbank(int n_mels, int fft_size, int sample_rate,
                                                double fmin = 0.0, double fmax = -1.0);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

}  // namespace msep
