// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "msep/kernels.hpp"

namespace msep::kernels_ref {

// Straight-line serial references for the parallel kernels. Kept for
// correctness tests and the serial-vs-parallel benchmark; no tuning.

template <typename T>
void matmul_nt(const T* A, const T* B, T* C, long m, long n, long k, bool accumulate) {
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) {
      T acc = 0;
      for (long p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
      C[i * n + j] = accumulate ? C[i * n + j] + acc : acc;
    }
}

template <typename T>
void matmul_nn(const T* A, const T* B, T* C, long m, long n, long k, bool accumulate) {
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) {
      T acc = 0;
      for (long p = 0; p < k; ++p) acc += A[i * k + p] * B[p * n + j];
      C[i * n + j] = accumulate ? C[i * n + j] + acc : acc;
    }
}

template <typename T>
void matmul_tn(const T* A, const T* B, T* C, long m, long n, long k, bool accumulate) {
  for (long j = 0; j < k; ++j)
    for (long q = 0; q < n; ++q) {
      T acc = 0;
      for (long i = 0; i < m; ++i) acc += A[i * k + j] * B[i * n + q];
      C[j * n + q] = accumulate ? C[j * n + q] + acc : acc;
    }
}

template <typename T>
void conv2d_forward(const T* in, const T* w, const T* bias, T* out,
                    const kernels::Conv2dShape& s) {
  const long plane = s.in_plane();
  const int ct = (s.kt - 1) / 2, cf = (s.kf - 1) / 2;
  for (long b = 0; b < s.batch; ++b)
    for (long co = 0; co < s.c_out; ++co)
      for (long t = 0; t < s.t; ++t)
        for (long f = 0; f < s.f; ++f) {
          T acc = bias ? bias[co] : T(0);
          for (long ci = 0; ci < s.c_in; ++ci)
            for (int a = 0; a < s.kt; ++a)
              for (int e = 0; e < s.kf; ++e) {
                long ti = t + static_cast<long>(a - ct) * s.dt;
                long fi = f + static_cast<long>(e - cf) * s.df;
                if (ti < 0 || ti >= s.t || fi < 0 || fi >= s.f) continue;
                acc += w[((co * s.c_in + ci) * s.kt + a) * s.kf + e] *
                       in[(b * s.c_in + ci) * plane + ti * s.f + fi];
              }
          out[(b * s.c_out + co) * plane + t * s.f + f] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const T* gout, const T* w, T* gin, const kernels::Conv2dShape& s) {
  const long plane = s.in_plane();
  const int ct = (s.kt - 1) / 2, cf = (s.kf - 1) / 2;
  for (long b = 0; b < s.batch; ++b)
    for (long co = 0; co < s.c_out; ++co)
      for (long t = 0; t < s.t; ++t)
        for (long f = 0; f < s.f; ++f) {
          T g = gout[(b * s.c_out + co) * plane + t * s.f + f];
          for (long ci = 0; ci < s.c_in; ++ci)
            for (int a = 0; a < s.kt; ++a)
              for (int e = 0; e < s.kf; ++e) {
                long ti = t + static_cast<long>(a - ct) * s.dt;
                long fi = f + static_cast<long>(e - cf) * s.df;
                if (ti < 0 || ti >= s.t || fi < 0 || fi >= s.f) continue;
                gin[(b * s.c_in + ci) * plane + ti * s.f + fi] +=
                    g * w[((co * s.c_in + ci) * s.kt + a) * s.kf + e];
              }
        }
}

template <typename T>
void conv2d_backward_weights(const T* gout, const T* in, T* gw, T* gbias,
                             const kernels::Conv2dShape& s) {
  const long plane = s.in_plane();
  const int ct = (s.kt - 1) / 2, cf = (s.kf - 1) / 2;
  for (long b = 0; b < s.batch; ++b)
    for (long co = 0; co < s.c_out; ++co)
      for (long t = 0; t < s.t; ++t)
        for (long f = 0; f < s.f; ++f) {
          T g = gout[(b * s.c_out + co) * plane + t * s.f + f];
          if (gbias) gbias[co] += g;
          for (long ci = 0; ci < s.c_in; ++ci)
            for (int a = 0; a < s.kt; ++a)
              for (int e = 0; e < s.kf; ++e) {
                long ti = t + static_cast<long>(a - ct) * s.dt;
                long fi = f + static_cast<long>(e - cf) * s.df;
                if (ti < 0 || ti >= s.t || fi < 0 || fi >= s.f) continue;
                gw[((co * s.c_in + ci) * s.kt + a) * s.kf + e] +=
                    g * in[(b * s.c_in + ci) * plane + ti * s.f + fi];
              }
        }
}

}  // namespace msep::kernels_ref
