// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "msep/errors.hpp"

namespace msep {

// Dense row-major tensor. Double precision is used for gradient tests,
// single precision for training.
template <typename T>
struct Tensor {
  std::vector<long> shape;
  std::vector<T> data;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(std::vector<long> s) : shape(std::move(s)) { data.assign(numel_of(shape), T(0)); }
  Tensor(std::vector<long> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<long>(data.size()) != numel_of(shape))
      throw ValidationError("tensor: data length does not match shape");
  }

  static long numel_of(const std::vector<long>& s) {
    long n = 1;
    for (long d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<long> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<long> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  long numel() const { return static_cast<long>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  long dim(int i) const { return shape[i]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](long i) { return data[i]; }
  const T& operator[](long i) const { return data[i]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.requires_grad = requires_grad;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace msep
