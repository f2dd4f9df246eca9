// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Times the OpenMP kernels against their serial references at
// training-relevant shapes. Run with OMP_NUM_THREADS to scale.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "msep/kernels.hpp"
#include "msep/kernels_ref.hpp"
#include "msep/rng.hpp"

using namespace msep;

namespace {

std::vector<float> randv(Rng& rng, long n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.gaussian());
  return v;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double flops, double ms_ref, double ms_omp) {
  std::printf("%-26s %10.2f ms serial %10.2f ms omp %8.2fx  %7.2f GFLOP/s\n", name, ms_ref, ms_omp,
              ms_ref / ms_omp, flops / (ms_omp * 1e6));
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  Rng rng(7);

  {
    long m = 298, n = 128, k = 600;
    auto a = randv(rng, m * k);
    auto b = randv(rng, n * k);
    std::vector<float> c(m * n);
    double flops = 2.0 * m * n * k;
    double t_ref = time_ms([&] { kernels_ref::matmul_nt(a.data(), b.data(), c.data(), m, n, k, false); }, 5);
    double t_omp = time_ms([&] { kernels::matmul_nt(a.data(), b.data(), c.data(), m, n, k, false); }, 5);
    report("matmul_nt 298x128x600", flops, t_ref, t_omp);
  }

  {
    kernels::Conv2dShape s{4, 4, 4, 298, 257, 3, 3, 2, 1};
    auto in = randv(rng, s.batch * s.c_in * s.t * s.f);
    auto w = randv(rng, s.c_out * s.c_in * s.kt * s.kf);
    auto bias = randv(rng, s.c_out);
    std::vector<float> out(s.batch * s.c_out * s.t * s.f);
    double flops = 2.0 * s.batch * s.c_out * s.c_in * s.t * s.f * s.kt * s.kf;
    double t_ref =
        time_ms([&] { kernels_ref::conv2d_forward(in.data(), w.data(), bias.data(), out.data(), s); }, 3);
    double t_omp =
        time_ms([&] { kernels::conv2d_forward(in.data(), w.data(), bias.data(), out.data(), s); }, 3);
    report("conv2d fwd 4x4x298x257", flops, t_ref, t_omp);

    auto gout = randv(rng, out.size());
    std::vector<float> gin(in.size());
    double t_ref_b = time_ms(
        [&] {
          std::fill(gin.begin(), gin.end(), 0.0f);
          kernels_ref::conv2d_backward_input(gout.data(), w.data(), gin.data(), s);
        },
        3);
    double t_omp_b = time_ms(
        [&] {
          std::fill(gin.begin(), gin.end(), 0.0f);
          kernels::conv2d_backward_input(gout.data(), w.data(), gin.data(), s);
        },
        3);
    report("conv2d bwd-in", flops, t_ref_b, t_omp_b);

    std::vector<float> gw(w.size()), gb(s.c_out);
    double t_ref_w = time_ms(
        [&] {
          std::fill(gw.begin(), gw.end(), 0.0f);
          kernels_ref::conv2d_backward_weights(gout.data(), in.data(), gw.data(), gb.data(), s);
        },
        3);
    double t_omp_w = time_ms(
        [&] {
          std::fill(gw.begin(), gw.end(), 0.0f);
          kernels::conv2d_backward_weights(gout.data(), in.data(), gw.data(), gb.data(), s);
        },
        3);
    report("conv2d bwd-w", flops, t_ref_w, t_omp_w);
  }

  return 0;
}
