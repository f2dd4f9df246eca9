// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

namespace msep {

// Mixed-radix FFT over sizes N = 2^a * 3^b * 5^c. Covers every
// analysis size used here (512, 1200, ...) without Bluestein.
class Fft {
 public:
  explicit Fft(int n);  // throws ValidationError naming the offending factor

  int size() const { return n_; }

  // Out-of-place transforms; `in` and `out` must not alias.
  void forward(const std::complex<double>* in, std::complex<double>* out) const;
  void inverse(const std::complex<double>* in, std::complex<double>* out) const;

  static bool supported(int n);

 private:
  void transform(const std::complex<double>* in, std::complex<double>* out, int n, int stride,
                 int mult, bool inv) const;

  int n_;
  std::vector<std::complex<double>> root_;  // root_[k] = exp(-2*pi*i*k/N)
};

// One-shot conveniences.
std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x);
std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x);

}  // namespace msep
