// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/stft.hpp"

#include <cmath>
#include <string>

#include "msep/errors.hpp"
#include "msep/fft.hpp"

namespace msep {

void StftConfig::validate() const {
  if (sample_rate <= 0) throw ValidationError("stft: sample_rate must be positive");
  if (hop_length <= 0) throw ValidationError("stft: hop_length must be positive");
  if (hop_length > win_length)
    throw ValidationError("stft: hop_length must not exceed win_length");
  if (win_length > fft_size) throw ValidationError("stft: win_length must not exceed fft_size");
  if (!Fft::supported(fft_size))
    throw ValidationError("stft: fft_size " + std::to_string(fft_size) +
                          " is not a product of {2,3,5}");
}

void ComplexSpectrogram::validate() const {
  config.validate();
  if (bins != config.freq_bins())
    throw ValidationError("spectrogram: bin count " + std::to_string(bins) +
                          " does not match config freq_bins " +
                          std::to_string(config.freq_bins()));
  if (frames < 1) throw ValidationError("spectrogram: needs at least one frame");
  if (data.size() != static_cast<size_t>(frames) * bins)
    throw ValidationError("spectrogram: data size mismatch");
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate)
    throw ValidationError("stft: waveform sample rate " + std::to_string(w.sample_rate) +
                          " does not match config " + std::to_string(cfg.sample_rate));
  long len = static_cast<long>(w.samples.size());
  if (len < cfg.win_length)
    throw ValidationError("stft: input of " + std::to_string(len) +
                          " samples is shorter than win_length " +
                          std::to_string(cfg.win_length));

  long frames = cfg.num_frames(len);
  int bins = cfg.freq_bins();
  ComplexSpectrogram out;
  out.frames = frames;
  out.bins = bins;
  out.config = cfg;
  out.data.resize(frames * static_cast<long>(bins));

  std::vector<double> window = hann_window(cfg.win_length);
  Fft plan(cfg.fft_size);

#pragma omp parallel
  {
    std::vector<std::complex<double>> buf(cfg.fft_size);
    std::vector<std::complex<double>> spec(cfg.fft_size);
#pragma omp for
    for (long t = 0; t < frames; ++t) {
      const double* src = w.samples.data() + t * cfg.hop_length;
      for (int i = 0; i < cfg.win_length; ++i) buf[i] = src[i] * window[i];
      for (int i = cfg.win_length; i < cfg.fft_size; ++i) buf[i] = 0.0;
      plan.forward(buf.data(), spec.data());
      std::complex<double>* dst = out.data.data() + t * bins;
      for (int f = 0; f < bins; ++f) dst[f] = spec[f];
    }
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& s) {
  s.validate();
  const StftConfig& cfg = s.config;
  int nfft = cfg.fft_size;
  long out_len = (s.frames - 1) * static_cast<long>(cfg.hop_length) + cfg.win_length;

  std::vector<double> window = hann_window(cfg.win_length);
  Fft plan(nfft);

  std::vector<double> acc(out_len, 0.0);
  std::vector<double> norm(out_len, 0.0);
  std::vector<std::complex<double>> spec(nfft);
  std::vector<std::complex<double>> frame(nfft);

  for (long t = 0; t < s.frames; ++t) {
    const std::complex<double>* src = s.data.data() + t * s.bins;
    for (int f = 0; f < s.bins; ++f) spec[f] = src[f];
    for (int f = s.bins; f < nfft; ++f) spec[f] = std::conj(src[nfft - f]);
    plan.inverse(spec.data(), frame.data());
    long base = t * cfg.hop_length;
    for (int i = 0; i < cfg.win_length; ++i) {
      acc[base + i] += frame[i].real() * window[i];
      norm[base + i] += window[i] * window[i];
    }
  }

  // Floor the normalizer at a fraction of its peak: at the very edges
  // the window-square sum decays to ~0 and dividing modified-frame
  // leakage by it would blow up; a relative floor fades the first and
  // last few milliseconds instead. Interior samples are unaffected.
  double norm_max = 0.0;
  for (long i = 0; i < out_len; ++i) norm_max = std::max(norm_max, norm[i]);
  double floor = std::max(1e-8, 0.01 * norm_max);

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  out.samples.resize(out_len);
  for (long i = 0; i < out_len; ++i) out.samples[i] = acc[i] / std::max(norm[i], floor);
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& s) {
  MagnitudeSpectrogram m;
  m.frames = s.frames;
  m.bins = s.bins;
  m.config = s.config;
  m.data.resize(s.data.size());
#pragma omp parallel for
  for (long i = 0; i < static_cast<long>(s.data.size()); ++i) m.data[i] = std::abs(s.data[i]);
  return m;
}

std::vector<double> phase(const ComplexSpectrogram& s) {
  std::vector<double> p(s.data.size());
#pragma omp parallel for
  for (long i = 0; i < static_cast<long>(s.data.size()); ++i)
    p[i] = std::arg(s.data[i]);  // arg(0) == 0 by convention
  return p;
}

}  // namespace msep
