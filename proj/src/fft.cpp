// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/fft.hpp"

#include <cmath>
#include <string>

#include "msep/errors.hpp"

namespace msep {

namespace {

// Returns the leftover after dividing out {2,3,5}; 1 means supported.
int leftover_factor(int n) {
  for (int r : {2, 3, 5}) {
    while (n % r == 0) n /= r;
  }
  return n;
}

int smallest_radix(int n) {
  for (int r : {2, 3, 5}) {
    if (n % r == 0) return r;
  }
  return n;
}

}  // namespace

bool Fft::supported(int n) { return n >= 1 && leftover_factor(n) == 1; }

Fft::Fft(int n) : n_(n) {
  if (n < 1) throw ValidationError("fft: size must be >= 1, got " + std::to_string(n));
  int rem = leftover_factor(n);
  if (rem != 1) {
    int p = smallest_radix(rem) == rem ? rem : smallest_radix(rem);
    // report the smallest prime factor outside {2,3,5}
    for (int q = 7; q * q <= rem; q += 2) {
      if (rem % q == 0) {
        p = q;
        break;
      }
    }
    throw ValidationError("fft: size " + std::to_string(n) + " contains unsupported factor " +
                          std::to_string(p) + " (only 2, 3, 5 allowed)");
  }
  root_.resize(n_);
  for (int k = 0; k < n_; ++k) {
    double a = -2.0 * M_PI * k / n_;
    root_[k] = {std::cos(a), std::sin(a)};
  }
}

void Fft::transform(const std::complex<double>* in, std::complex<double>* out, int n, int stride,
                    int mult, bool inv) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  int r = smallest_radix(n);
  int m = n / r;
  for (int j = 0; j < r; ++j) {
    transform(in + static_cast<long>(j) * stride, out + static_cast<long>(j) * m, m, stride * r,
              mult * r, inv);
  }

  if (r == 2) {
    for (int k = 0; k < m; ++k) {
      std::complex<double> w = root_[(static_cast<long>(k) * mult) % n_];
      if (inv) w = std::conj(w);
      std::complex<double> a = out[k];
      std::complex<double> b = out[m + k] * w;
      out[k] = a + b;
      out[m + k] = a - b;
    }
    return;
  }

  std::complex<double> t[5];
  const long step_r = n_ / r;  // index stride for the r-point twiddles
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < r; ++j) {
      std::complex<double> w = root_[(static_cast<long>(j) * k * mult) % n_];
      if (inv) w = std::conj(w);
      t[j] = out[static_cast<long>(j) * m + k] * w;
    }
    for (int q = 0; q < r; ++q) {
      std::complex<double> acc = t[0];
      for (int j = 1; j < r; ++j) {
        std::complex<double> w = root_[(static_cast<long>(j) * q * step_r) % n_];
        if (inv) w = std::conj(w);
        acc += t[j] * w;
      }
      out[static_cast<long>(q) * m + k] = acc;
    }
  }
}

void Fft::forward(const std::complex<double>* in, std::complex<double>* out) const {
  transform(in, out, n_, 1, 1, false);
}

void Fft::inverse(const std::complex<double>* in, std::complex<double>* out) const {
  transform(in, out, n_, 1, 1, true);
  double scale = 1.0 / n_;
  for (int i = 0; i < n_; ++i) out[i] *= scale;
}

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x) {
  Fft plan(static_cast<int>(x.size()));
  std::vector<std::complex<double>> out(x.size());
  plan.forward(x.data(), out.data());
  return out;
}

std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x) {
  Fft plan(static_cast<int>(x.size()));
  std::vector<std::complex<double>> out(x.size());
  plan.inverse(x.data(), out.data());
  return out;
}

}  // namespace msep
