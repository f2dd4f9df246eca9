// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <vector>

#include "msep/tensor.hpp"

namespace msep {

// Adam with bias correction; lr is annealed by dividing after each epoch.
template <typename T>
struct AdamState {
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Tensor<T>> m, v;

  void init(const std::vector<Tensor<T>*>& params) {
    m.clear();
    v.clear();
    for (const Tensor<T>* p : params) {
      m.push_back(Tensor<T>::zeros(p->shape));
      v.push_back(Tensor<T>::zeros(p->shape));
    }
  }
};

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
               AdamState<T>& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw ValidationError("adam: params/grads/state size mismatch");
  st.step += 1;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    if (!p.same_shape(g) || !p.same_shape(st.m[i]))
      throw ValidationError("adam: shape mismatch on parameter " + std::to_string(i));
    T* pp = p.ptr();
    const T* gp = g.ptr();
    T* mp = st.m[i].ptr();
    T* vp = st.v[i].ptr();
    for (long j = 0; j < p.numel(); ++j) {
      double gj = gp[j];
      double mj = st.beta1 * mp[j] + (1.0 - st.beta1) * gj;
      double vj = st.beta2 * vp[j] + (1.0 - st.beta2) * gj * gj;
      mp[j] = static_cast<T>(mj);
      vp[j] = static_cast<T>(vj);
      pp[j] = static_cast<T>(pp[j] - st.lr * (mj / bc1) / (std::sqrt(vj / bc2) + st.eps));
    }
  }
}

template <typename T>
void anneal_lr(AdamState<T>& st, double divisor = 1.1) {
  if (divisor < 1.0) throw ValidationError("adam: anneal divisor must be >= 1");
  st.lr /= divisor;
}

}  // namespace msep
