// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include <omp.h>

namespace msep::kernels {

// OpenMP kernels behind the autodiff ops. Every parallel loop partitions
// whole output elements across threads and keeps each inner reduction
// sequential in a fixed order, so results are bit-identical for any
// thread count. Naive serial references live in kernels_ref.hpp.

// C[m,n] (+)= A[m,k] * B[n,k]^T  (row-by-row dot products)
template <typename T>
void matmul_nt(const T* A, const T* B, T* C, long m, long n, long k, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) {
    const T* a = A + i * k;
    T* c = C + i * n;
    for (long j = 0; j < n; ++j) {
      const T* b = B + j * k;
      T acc = 0;
#pragma omp simd reduction(+ : acc)
      for (long p = 0; p < k; ++p) acc += a[p] * b[p];
      c[j] = accumulate ? c[j] + acc : acc;
    }
  }
}

// C[m,n] (+)= A[m,k] * B[k,n]  (axpy over contiguous B rows)
template <typename T>
void matmul_nn(const T* A, const T* B, T* C, long m, long n, long k, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) {
    const T* a = A + i * k;
    T* c = C + i * n;
    if (!accumulate) {
      for (long j = 0; j < n; ++j) c[j] = 0;
    }
    for (long p = 0; p < k; ++p) {
      T av = a[p];
      if (av == T(0)) continue;
      const T* b = B + p * n;
      for (long j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C[k,n] (+)= A[m,k]^T * B[m,n]  (each output row owned by one thread)
template <typename T>
void matmul_tn(const T* A, const T* B, T* C, long m, long n, long k, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (long j = 0; j < k; ++j) {
    T* c = C + j * n;
    if (!accumulate) {
      for (long q = 0; q < n; ++q) c[q] = 0;
    }
    for (long i = 0; i < m; ++i) {
      T av = A[i * k + j];
      if (av == T(0)) continue;
      const T* b = B + i * n;
      for (long q = 0; q < n; ++q) c[q] += av * b[q];
    }
  }
}

struct Conv2dShape {
  long batch, c_in, c_out, t, f;
  int kt, kf, dt, df;

  long in_plane() const { return t * f; }
  long weights_per_out() const { return c_in * kt * kf; }
};

// 'same' cross-correlation with symmetric zero padding (k odd).
// in [B,Cin,T,F], w [Cout,Cin,kt,kf], out [B,Cout,T,F].
template <typename T>
void conv2d_forward(const T* in, const T* w, const T* bias, T* out, const Conv2dShape& s) {
  const long plane = s.in_plane();
  const int ct = (s.kt - 1) / 2, cf = (s.kf - 1) / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (long b = 0; b < s.batch; ++b) {
    for (long co = 0; co < s.c_out; ++co) {
      T* op = out + (b * s.c_out + co) * plane;
      T bv = bias ? bias[co] : T(0);
      for (long i = 0; i < plane; ++i) op[i] = bv;
      for (long ci = 0; ci < s.c_in; ++ci) {
        const T* ip = in + (b * s.c_in + ci) * plane;
        for (int a = 0; a < s.kt; ++a) {
          long toff = static_cast<long>(a - ct) * s.dt;
          long t0 = std::max(0L, -toff), t1 = std::min(s.t, s.t - toff);
          for (int e = 0; e < s.kf; ++e) {
            T wv = w[((co * s.c_in + ci) * s.kt + a) * s.kf + e];
            if (wv == T(0)) continue;
            long foff = static_cast<long>(e - cf) * s.df;
            long f0 = std::max(0L, -foff), f1 = std::min(s.f, s.f - foff);
            for (long t = t0; t < t1; ++t) {
              T* orow = op + t * s.f;
              const T* irow = ip + (t + toff) * s.f + foff;
              for (long f = f0; f < f1; ++f) orow[f] += wv * irow[f];
            }
          }
        }
      }
    }
  }
}

// gin[b,ci,t,f] += sum_{co,a,e} w[co,ci,a,e] * gout[b,co,t - toff, f - foff]
template <typename T>
void conv2d_backward_input(const T* gout, const T* w, T* gin, const Conv2dShape& s) {
  const long plane = s.in_plane();
  const int ct = (s.kt - 1) / 2, cf = (s.kf - 1) / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (long b = 0; b < s.batch; ++b) {
    for (long ci = 0; ci < s.c_in; ++ci) {
      T* gp = gin + (b * s.c_in + ci) * plane;
      for (long co = 0; co < s.c_out; ++co) {
        const T* op = gout + (b * s.c_out + co) * plane;
        for (int a = 0; a < s.kt; ++a) {
          long toff = static_cast<long>(a - ct) * s.dt;
          long t0 = std::max(0L, toff), t1 = std::min(s.t, s.t + toff);
          for (int e = 0; e < s.kf; ++e) {
            T wv = w[((co * s.c_in + ci) * s.kt + a) * s.kf + e];
            if (wv == T(0)) continue;
            long foff = static_cast<long>(e - cf) * s.df;
            long f0 = std::max(0L, foff), f1 = std::min(s.f, s.f + foff);
            for (long t = t0; t < t1; ++t) {
              T* grow = gp + t * s.f;
              const T* orow = op + (t - toff) * s.f - foff;
              for (long f = f0; f < f1; ++f) grow[f] += wv * orow[f];
            }
          }
        }
      }
    }
  }
}

// gw[co,ci,a,e] += sum_{b,t,f} gout[b,co,t,f] * in[b,ci,t+toff,f+foff]
template <typename T>
void conv2d_backward_weights(const T* gout, const T* in, T* gw, T* gbias, const Conv2dShape& s) {
  const long plane = s.in_plane();
  const int ct = (s.kt - 1) / 2, cf = (s.kf - 1) / 2;
#pragma omp parallel for schedule(static)
  for (long co = 0; co < s.c_out; ++co) {
    for (long ci = 0; ci < s.c_in; ++ci) {
      for (int a = 0; a < s.kt; ++a) {
        long toff = static_cast<long>(a - ct) * s.dt;
        long t0 = std::max(0L, -toff), t1 = std::min(s.t, s.t - toff);
        for (int e = 0; e < s.kf; ++e) {
          long foff = static_cast<long>(e - cf) * s.df;
          long f0 = std::max(0L, -foff), f1 = std::min(s.f, s.f - foff);
          double acc = 0.0;
          for (long b = 0; b < s.batch; ++b) {
            const T* op = gout + (b * s.c_out + co) * plane;
            const T* ip = in + (b * s.c_in + ci) * plane;
            for (long t = t0; t < t1; ++t) {
              const T* orow = op + t * s.f;
              const T* irow = ip + (t + toff) * s.f + foff;
              T row = 0;
#pragma omp simd reduction(+ : row)
              for (long f = f0; f < f1; ++f) row += orow[f] * irow[f];
              acc += row;
            }
          }
          gw[((co * s.c_in + ci) * s.kt + a) * s.kf + e] += static_cast<T>(acc);
        }
      }
    }
    if (gbias) {
      double acc = 0.0;
      for (long b = 0; b < s.batch; ++b) {
        const T* op = gout + (b * s.c_out + co) * plane;
        T row = 0;
        for (long i = 0; i < plane; ++i) row += op[i];
        acc += row;
      }
      gbias[co] += static_cast<T>(acc);
    }
  }
}

// Deterministic parallel reduction: fixed 4096-element chunks summed
// serially, chunk partials combined in index order.
template <typename T, typename F>
double chunked_reduce(long n, F&& per_element) {
  constexpr long kChunk = 4096;
  long chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> part(chunks, 0.0);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < chunks; ++c) {
    long lo = c * kChunk, hi = std::min(n, lo + kChunk);
    T acc = 0;
    for (long i = lo; i < hi; ++i) acc += per_element(i);
    part[c] = static_cast<double>(acc);
  }
  double total = 0.0;
  for (double p : part) total += p;
  return total;
}

}  // namespace msep::kernels
