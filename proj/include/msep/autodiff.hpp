// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "msep/kernels.hpp"
#include "msep/tensor.hpp"

namespace msep {

// Define-by-run reverse-mode tape. Ops run their forward pass eagerly
// and push a backward closure; creation order is a topological order,
// so backward() just replays closures in reverse. One graph instance
// is single-threaded; distinct graphs may run concurrently.
template <typename T>
class Graph {
 public:
  using Id = int;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  // Constant input; no gradient is tracked unless track_grad is set
  // (used by gradient checks that differentiate w.r.t. inputs).
  Id input(Tensor<T> v, bool track_grad = false) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = grad_enabled_ && track_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  // External parameter leaf; backward accumulates into *grad.
  Id param(Tensor<T>* value, Tensor<T>* grad) {
    Node n;
    n.ext_value = value;
    n.ext_grad = grad;
    n.needs_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  const Tensor<T>& val(Id id) const {
    const Node& n = nodes_[id];
    return n.ext_value ? *n.ext_value : n.value;
  }

  Tensor<T>& grad(Id id) {
    Node& n = nodes_[id];
    if (n.ext_grad) return *n.ext_grad;
    if (n.grad.numel() == 0) n.grad = Tensor<T>::zeros(val(id).shape);
    return n.grad;
  }

  bool needs_grad(Id id) const { return nodes_[id].needs_grad; }

  void backward(Id loss) {
    if (!grad_enabled_) throw ValidationError("graph: backward on a no-grad graph");
    if (val(loss).numel() != 1) throw ValidationError("graph: backward needs a scalar loss");
    grad(loss)[0] = T(1);
    for (long i = static_cast<long>(nodes_.size()) - 1; i >= 0; --i) {
      if (nodes_[i].back && nodes_[i].needs_grad) nodes_[i].back(*this);
    }
  }

  // ---- ops ----------------------------------------------------------

  // x [B,Cin,T,F], w [Cout,Cin,kt,kf], b [Cout]; 'same' padding,
  // cross-correlation convention; odd kernel sizes only.
  Id conv2d(Id x, Id w, Id b, int dt, int df) {
    const Tensor<T>& xv = val(x);
    const Tensor<T>& wv = val(w);
    if (xv.rank() != 4 || wv.rank() != 4)
      throw ValidationError("conv2d: expected x[B,C,T,F], w[Co,Ci,kt,kf]");
    if (wv.dim(1) != xv.dim(1)) throw ValidationError("conv2d: channel mismatch");
    if (wv.dim(2) % 2 == 0 || wv.dim(3) % 2 == 0)
      throw ValidationError("conv2d: kernel sizes must be odd for symmetric 'same' padding, got " +
                            std::to_string(wv.dim(2)) + "x" + std::to_string(wv.dim(3)));
    if (dt < 1 || df < 1) throw ValidationError("conv2d: dilation must be >= 1");

    kernels::Conv2dShape s{xv.dim(0), xv.dim(1), wv.dim(0), xv.dim(2), xv.dim(3),
                           static_cast<int>(wv.dim(2)), static_cast<int>(wv.dim(3)), dt, df};
    Tensor<T> out({s.batch, s.c_out, s.t, s.f});
    kernels::conv2d_forward(xv.ptr(), wv.ptr(), b >= 0 ? val(b).ptr() : nullptr, out.ptr(), s);

    Id y = result(std::move(out), {x, w, b});
    record(y, [=](Graph& g) {
      const Tensor<T>& go = g.grad(y);
      if (g.needs_grad(x))
        kernels::conv2d_backward_input(go.ptr(), g.val(w).ptr(), g.grad(x).ptr(), s);
      if (g.needs_grad(w) || (b >= 0 && g.needs_grad(b)))
        kernels::conv2d_backward_weights(go.ptr(), g.val(x).ptr(),
                                         g.needs_grad(w) ? g.grad(w).ptr() : g.scratch(w).ptr(),
                                         b >= 0 && g.needs_grad(b) ? g.grad(b).ptr() : nullptr, s);
    });
    return y;
  }

  // x [..., Din], w [Dout, Din], b [Dout] -> [..., Dout]
  Id linear(Id x, Id w, Id b) {
    const Tensor<T>& xv = val(x);
    const Tensor<T>& wv = val(w);
    long din = xv.shape.back();
    if (wv.rank() != 2 || wv.dim(1) != din)
      throw ValidationError("linear: weight shape " + val(w).shape_str() +
                            " incompatible with input " + xv.shape_str());
    long dout = wv.dim(0);
    long rows = xv.numel() / din;

    std::vector<long> oshape = xv.shape;
    oshape.back() = dout;
    Tensor<T> out(oshape);
    kernels::matmul_nt(xv.ptr(), wv.ptr(), out.ptr(), rows, dout, din, false);
    if (b >= 0) {
      const Tensor<T>& bv = val(b);
      T* op = out.ptr();
#pragma omp parallel for schedule(static)
      for (long r = 0; r < rows; ++r)
        for (long j = 0; j < dout; ++j) op[r * dout + j] += bv[j];
    }

    Id y = result(std::move(out), {x, w, b});
    record(y, [=](Graph& g) {
      const T* go = g.grad(y).ptr();
      if (g.needs_grad(x))
        kernels::matmul_nn(go, g.val(w).ptr(), g.grad(x).ptr(), rows, din, dout, true);
      if (g.needs_grad(w))
        kernels::matmul_tn(go, g.val(x).ptr(), g.grad(w).ptr(), rows, din, dout, true);
      if (b >= 0 && g.needs_grad(b)) {
        T* gb = g.grad(b).ptr();
        for (long r = 0; r < rows; ++r)
          for (long j = 0; j < dout; ++j) gb[j] += go[r * dout + j];
      }
    });
    return y;
  }

  Id relu(Id x) {
    Tensor<T> out = val(x);
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    Id y = result(std::move(out), {x});
    record(y, [=](Graph& g) {
      if (!g.needs_grad(x)) return;
      const Tensor<T>& ov = g.val(y);
      const T* go = g.grad(y).ptr();
      T* gx = g.grad(x).ptr();
      for (long i = 0; i < ov.numel(); ++i)
        if (ov[i] > T(0)) gx[i] += go[i];
    });
    return y;
  }

  Id sigmoid(Id x) {
    Tensor<T> out = val(x);
    for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    Id y = result(std::move(out), {x});
    record(y, [=](Graph& g) {
      if (!g.needs_grad(x)) return;
      const Tensor<T>& ov = g.val(y);
      const T* go = g.grad(y).ptr();
      T* gx = g.grad(x).ptr();
      for (long i = 0; i < ov.numel(); ++i) gx[i] += go[i] * ov[i] * (T(1) - ov[i]);
    });
    return y;
  }

  // Single-direction LSTM. x [B,S,D] -> h [B,S,H]; wx [4H,D], wh [4H,H],
  // b [4H]; gate order i,f,g,o; reverse scans time back-to-front.
  Id lstm(Id x, Id wx, Id wh, Id b, bool reverse) {
    const Tensor<T>& xv = val(x);
    if (xv.rank() != 3) throw ValidationError("lstm: expected input [B,S,D]");
    long B = xv.dim(0), S = xv.dim(1), D = xv.dim(2);
    const Tensor<T>& wxv = val(wx);
    const Tensor<T>& whv = val(wh);
    if (wxv.rank() != 2 || wxv.dim(1) != D) throw ValidationError("lstm: wx shape mismatch");
    long H4 = wxv.dim(0);
    if (H4 % 4 != 0) throw ValidationError("lstm: wx rows must be 4*H");
    long H = H4 / 4;
    if (whv.rank() != 2 || whv.dim(0) != H4 || whv.dim(1) != H)
      throw ValidationError("lstm: wh shape mismatch");

    auto ctx = std::make_shared<LstmCtx>();
    ctx->gates = Tensor<T>({B, S, H4});   // post-activation i,f,g,o
    ctx->cell = Tensor<T>({B, S, H});     // c_t
    ctx->tanh_c = Tensor<T>({B, S, H});   // tanh(c_t)
    Tensor<T> out({B, S, H});

    // pre-gates for all steps in one pass
    kernels::matmul_nt(xv.ptr(), wxv.ptr(), ctx->gates.ptr(), B * S, H4, D, false);
    {
      const Tensor<T>& bv = val(b);
      T* gp = ctx->gates.ptr();
      for (long r = 0; r < B * S; ++r)
        for (long j = 0; j < H4; ++j) gp[r * H4 + j] += bv[j];
    }

    std::vector<T> hprev(B * H, T(0)), cprev(B * H, T(0)), gt(H4);
    for (long s = 0; s < S; ++s) {
      long t = reverse ? S - 1 - s : s;
      // g_t += h_prev @ wh^T (serial matvec; too small to farm out)
      for (long bb = 0; bb < B; ++bb) {
        T* dst = ctx->gates.ptr() + (bb * S + t) * H4;
        const T* hp = hprev.data() + bb * H;
        if (s > 0) {
          const T* whp = whv.ptr();
          for (long j = 0; j < H4; ++j) {
            const T* row = whp + j * H;
            T acc = 0;
            for (long p = 0; p < H; ++p) acc += hp[p] * row[p];
            gt[j] = acc;
          }
        }
        for (long j = 0; j < H4; ++j) {
          T pre = dst[j] + (s > 0 ? gt[j] : T(0));
          T act;
          if (j >= H && j < 2 * H) act = T(1) / (T(1) + std::exp(-pre));       // f
          else if (j >= 2 * H && j < 3 * H) act = std::tanh(pre);              // g
          else act = T(1) / (T(1) + std::exp(-pre));                           // i, o
          dst[j] = act;
        }
        T* cp = ctx->cell.ptr() + (bb * S + t) * H;
        T* tp = ctx->tanh_c.ptr() + (bb * S + t) * H;
        T* op = out.ptr() + (bb * S + t) * H;
        T* cprev_p = cprev.data() + bb * H;
        T* hprev_p = hprev.data() + bb * H;
        for (long j = 0; j < H; ++j) {
          T i_g = dst[j], f_g = dst[H + j], g_g = dst[2 * H + j], o_g = dst[3 * H + j];
          T c = f_g * cprev_p[j] + i_g * g_g;
          cp[j] = c;
          T tc = std::tanh(c);
          tp[j] = tc;
          op[j] = o_g * tc;
          cprev_p[j] = c;
          hprev_p[j] = o_g * tc;
        }
      }
    }

    Id y = result(std::move(out), {x, wx, wh, b});
    record(y, [=](Graph& g) { lstm_backward(g, y, x, wx, wh, b, reverse, B, S, D, H, ctx); });
    return y;
  }

  // Batch normalization over all axes except axis 1. x [B,C,...].
  Id batchnorm_channels(Id x, Id gain, Id shift, Tensor<T>* rmean, Tensor<T>* rvar, bool training,
                        T momentum, T eps) {
    const Tensor<T>& xv = val(x);
    if (xv.rank() < 2) throw ValidationError("batchnorm: rank must be >= 2");
    long B = xv.dim(0), C = xv.dim(1);
    long S = xv.numel() / (B * C);
    return batchnorm_impl(x, gain, shift, rmean, rvar, training, momentum, eps, B, C, S,
                          /*channels_major=*/true);
  }

  // Batch normalization over all axes except the last. x [..., D].
  Id batchnorm_features(Id x, Id gain, Id shift, Tensor<T>* rmean, Tensor<T>* rvar, bool training,
                        T momentum, T eps) {
    const Tensor<T>& xv = val(x);
    long D = xv.shape.back();
    long M = xv.numel() / D;
    return batchnorm_impl(x, gain, shift, rmean, rvar, training, momentum, eps, M, D, 1,
                          /*channels_major=*/false);
  }

  // [B,C,T,F] -> [B,T,C*F]: per-frame flatten of channels x freq.
  Id channels_to_features(Id x) {
    const Tensor<T>& xv = val(x);
    if (xv.rank() != 4) throw ValidationError("channels_to_features: expected [B,C,T,F]");
    long B = xv.dim(0), C = xv.dim(1), S = xv.dim(2), F = xv.dim(3);
    Tensor<T> out({B, S, C * F});
    const T* ip = xv.ptr();
    T* op = out.ptr();
#pragma omp parallel for collapse(2) schedule(static)
    for (long b = 0; b < B; ++b)
      for (long t = 0; t < S; ++t)
        for (long c = 0; c < C; ++c) {
          const T* src = ip + ((b * C + c) * S + t) * F;
          T* dst = op + (b * S + t) * (C * F) + c * F;
          for (long f = 0; f < F; ++f) dst[f] = src[f];
        }
    Id y = result(std::move(out), {x});
    record(y, [=](Graph& g) {
      if (!g.needs_grad(x)) return;
      const T* go = g.grad(y).ptr();
      T* gx = g.grad(x).ptr();
      for (long b = 0; b < B; ++b)
        for (long t = 0; t < S; ++t)
          for (long c = 0; c < C; ++c) {
            const T* src = go + (b * S + t) * (C * F) + c * F;
            T* dst = gx + ((b * C + c) * S + t) * F;
            for (long f = 0; f < F; ++f) dst[f] += src[f];
          }
    });
    return y;
  }

  // [B,T,D1] ++ [B,T,D2] -> [B,T,D1+D2]
  Id concat_features(Id a, Id b) {
    const Tensor<T>& av = val(a);
    const Tensor<T>& bv = val(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(1) != bv.dim(1))
      throw ValidationError("concat_features: leading dims must match");
    long M = av.dim(0) * av.dim(1), D1 = av.dim(2), D2 = bv.dim(2);
    Tensor<T> out({av.dim(0), av.dim(1), D1 + D2});
    for (long r = 0; r < M; ++r) {
      T* dst = out.ptr() + r * (D1 + D2);
      const T* pa = av.ptr() + r * D1;
      const T* pb = bv.ptr() + r * D2;
      for (long i = 0; i < D1; ++i) dst[i] = pa[i];
      for (long i = 0; i < D2; ++i) dst[D1 + i] = pb[i];
    }
    Id y = result(std::move(out), {a, b});
    record(y, [=](Graph& g) {
      const T* go = g.grad(y).ptr();
      if (g.needs_grad(a)) {
        T* ga = g.grad(a).ptr();
        for (long r = 0; r < M; ++r)
          for (long i = 0; i < D1; ++i) ga[r * D1 + i] += go[r * (D1 + D2) + i];
      }
      if (g.needs_grad(b)) {
        T* gb = g.grad(b).ptr();
        for (long r = 0; r < M; ++r)
          for (long i = 0; i < D2; ++i) gb[r * D2 + i] += go[r * (D1 + D2) + D1 + i];
      }
    });
    return y;
  }

  // [B,D] -> [B,S,D]: copy one row onto every time step.
  Id broadcast_rows(Id e, long steps) {
    const Tensor<T>& ev = val(e);
    if (ev.rank() != 2) throw ValidationError("broadcast_rows: expected [B,D]");
    long B = ev.dim(0), D = ev.dim(1);
    Tensor<T> out({B, steps, D});
    for (long b = 0; b < B; ++b)
      for (long t = 0; t < steps; ++t)
        for (long d = 0; d < D; ++d) out.ptr()[(b * steps + t) * D + d] = ev[b * D + d];
    Id y = result(std::move(out), {e});
    record(y, [=](Graph& g) {
      if (!g.needs_grad(e)) return;
      const T* go = g.grad(y).ptr();
      T* ge = g.grad(e).ptr();
      for (long b = 0; b < B; ++b)
        for (long t = 0; t < steps; ++t)
          for (long d = 0; d < D; ++d) ge[b * D + d] += go[(b * steps + t) * D + d];
    });
    return y;
  }

  Id add(Id a, Id b) {
    const Tensor<T>& av = val(a);
    const Tensor<T>& bv = val(b);
    if (!av.same_shape(bv)) throw ValidationError("add: shape mismatch");
    Tensor<T> out = av;
    for (long i = 0; i < out.numel(); ++i) out[i] += bv[i];
    Id y = result(std::move(out), {a, b});
    record(y, [=](Graph& g) {
      const T* go = g.grad(y).ptr();
      if (g.needs_grad(a)) {
        T* ga = g.grad(a).ptr();
        for (long i = 0; i < g.val(a).numel(); ++i) ga[i] += go[i];
      }
      if (g.needs_grad(b)) {
        T* gb = g.grad(b).ptr();
        for (long i = 0; i < g.val(b).numel(); ++i) gb[i] += go[i];
      }
    });
    return y;
  }

  Id mul(Id a, Id b) {
    const Tensor<T>& av = val(a);
    const Tensor<T>& bv = val(b);
    if (!av.same_shape(bv)) throw ValidationError("mul: shape mismatch");
    Tensor<T> out = av;
    for (long i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    Id y = result(std::move(out), {a, b});
    record(y, [=](Graph& g) {
      const T* go = g.grad(y).ptr();
      if (g.needs_grad(a)) {
        T* ga = g.grad(a).ptr();
        const T* pb = g.val(b).ptr();
        for (long i = 0; i < g.val(a).numel(); ++i) ga[i] += go[i] * pb[i];
      }
      if (g.needs_grad(b)) {
        T* gb = g.grad(b).ptr();
        const T* pa = g.val(a).ptr();
        for (long i = 0; i < g.val(b).numel(); ++i) gb[i] += go[i] * pa[i];
      }
    });
    return y;
  }

  // Mean over all elements of the squared difference -> scalar.
  Id mse(Id pred, Id target) {
    const Tensor<T>& pv = val(pred);
    const Tensor<T>& tv = val(target);
    if (!pv.same_shape(tv)) throw ValidationError("mse: shape mismatch");
    long n = pv.numel();
    const T* p = pv.ptr();
    const T* t = tv.ptr();
    double acc = kernels::chunked_reduce<double>(n, [&](long i) {
      double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
      return d * d;
    });
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / n));
    Id y = result(std::move(out), {pred, target});
    record(y, [=](Graph& g) {
      T go = g.grad(y)[0];
      T scale = go * T(2) / static_cast<T>(n);
      const T* pp = g.val(pred).ptr();
      const T* tt = g.val(target).ptr();
      if (g.needs_grad(pred)) {
        T* gp = g.grad(pred).ptr();
        for (long i = 0; i < n; ++i) gp[i] += scale * (pp[i] - tt[i]);
      }
      if (g.needs_grad(target)) {
        T* gt = g.grad(target).ptr();
        for (long i = 0; i < n; ++i) gt[i] -= scale * (pp[i] - tt[i]);
      }
    });
    return y;
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T>* ext_value = nullptr;
    Tensor<T>* ext_grad = nullptr;
    bool needs_grad = false;
    std::function<void(Graph&)> back;
  };

  struct LstmCtx {
    Tensor<T> gates, cell, tanh_c;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
  Tensor<T> scratch_;

  // Throwaway gradient buffer for a dont-care operand.
  Tensor<T>& scratch(Id like) {
    scratch_ = Tensor<T>::zeros(val(like).shape);
    return scratch_;
  }

  Id result(Tensor<T> value, std::initializer_list<Id> inputs) {
    Node n;
    n.value = std::move(value);
    if (grad_enabled_) {
      for (Id i : inputs)
        if (i >= 0 && nodes_[i].needs_grad) n.needs_grad = true;
    }
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  void record(Id y, std::function<void(Graph&)> fn) {
    if (grad_enabled_ && nodes_[y].needs_grad) nodes_[y].back = std::move(fn);
  }

  Id batchnorm_impl(Id x, Id gain, Id shift, Tensor<T>* rmean, Tensor<T>* rvar, bool training,
                    T momentum, T eps, long M, long C, long S, bool channels_major) {
    const Tensor<T>& xv = val(x);
    const Tensor<T>& gv = val(gain);
    if (gv.numel() != C) throw ValidationError("batchnorm: gain size mismatch");
    long per_feature = channels_major ? M * S : M;

    auto ctx = std::make_shared<BnCtx>();
    ctx->xhat = Tensor<T>(xv.shape);
    ctx->invstd.assign(C, 0.0);

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (training) {
      feature_stats(xv, M, C, S, channels_major, mean, var);
      if (rmean && rvar) {
        double unbias = per_feature > 1 ? static_cast<double>(per_feature) / (per_feature - 1) : 1.0;
        for (long c = 0; c < C; ++c) {
          (*rmean)[c] = static_cast<T>((1.0 - momentum) * (*rmean)[c] + momentum * mean[c]);
          (*rvar)[c] = static_cast<T>((1.0 - momentum) * (*rvar)[c] + momentum * var[c] * unbias);
        }
      }
    } else {
      if (!rmean || !rvar) throw ValidationError("batchnorm: eval mode requires running stats");
      for (long c = 0; c < C; ++c) {
        mean[c] = (*rmean)[c];
        var[c] = (*rvar)[c];
      }
    }
    for (long c = 0; c < C; ++c) ctx->invstd[c] = 1.0 / std::sqrt(var[c] + static_cast<double>(eps));

    Tensor<T> out(xv.shape);
    const Tensor<T>& sv = val(shift);
    for_each_feature(xv.ptr(), M, C, S, channels_major, [&](long c, long idx) {
      T xh = static_cast<T>((xv[idx] - mean[c]) * ctx->invstd[c]);
      ctx->xhat[idx] = xh;
      out[idx] = gv[c] * xh + sv[c];
    });

    Id y = result(std::move(out), {x, gain, shift});
    bool train_mode = training;
    record(y, [=](Graph& g) {
      const T* go = g.grad(y).ptr();
      const Tensor<T>& gainv = g.val(gain);
      if (g.needs_grad(gain)) {
        T* gg = g.grad(gain).ptr();
        for_each_feature(go, M, C, S, channels_major,
                         [&](long c, long idx) { gg[c] += go[idx] * ctx->xhat[idx]; });
      }
      if (g.needs_grad(shift)) {
        T* gs = g.grad(shift).ptr();
        for_each_feature(go, M, C, S, channels_major, [&](long c, long idx) { gs[c] += go[idx]; });
      }
      if (!g.needs_grad(x)) return;
      T* gx = g.grad(x).ptr();
      if (!train_mode) {
        for_each_feature(go, M, C, S, channels_major, [&](long c, long idx) {
          gx[idx] += static_cast<T>(go[idx] * gainv[c] * ctx->invstd[c]);
        });
        return;
      }
      // dL/dx = invstd/N * gain * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
      std::vector<double> sum_d(C, 0.0), sum_dx(C, 0.0);
      for_each_feature(go, M, C, S, channels_major, [&](long c, long idx) {
        double d = go[idx] * gainv[c];
        sum_d[c] += d;
        sum_dx[c] += d * ctx->xhat[idx];
      });
      double n = static_cast<double>(per_feature);
      for_each_feature(go, M, C, S, channels_major, [&](long c, long idx) {
        double d = go[idx] * gainv[c];
        gx[idx] += static_cast<T>(ctx->invstd[c] * (d - sum_d[c] / n - ctx->xhat[idx] * sum_dx[c] / n));
      });
    });
    return y;
  }

  struct BnCtx {
    Tensor<T> xhat;
    std::vector<double> invstd;
  };

  template <typename P, typename F>
  static void for_each_feature(P* /*base*/, long M, long C, long S, bool channels_major, F&& fn) {
    if (channels_major) {
      for (long b = 0; b < M; ++b)
        for (long c = 0; c < C; ++c) {
          long base = (b * C + c) * S;
          for (long s = 0; s < S; ++s) fn(c, base + s);
        }
    } else {
      for (long r = 0; r < M; ++r)
        for (long c = 0; c < C; ++c) fn(c, r * C + c);
    }
  }

  static void feature_stats(const Tensor<T>& xv, long M, long C, long S, bool channels_major,
                            std::vector<double>& mean, std::vector<double>& var) {
    long per_feature = channels_major ? M * S : M;
    std::vector<double> sum(C, 0.0), sumsq(C, 0.0);
    for_each_feature(xv.ptr(), M, C, S, channels_major, [&](long c, long idx) {
      double v = xv[idx];
      sum[c] += v;
      sumsq[c] += v * v;
    });
    for (long c = 0; c < C; ++c) {
      mean[c] = sum[c] / per_feature;
      var[c] = std::max(sumsq[c] / per_feature - mean[c] * mean[c], 0.0);
    }
  }

  static void lstm_backward(Graph& g, Id y, Id x, Id wx, Id wh, Id b, bool reverse, long B, long S,
                            long D, long H, std::shared_ptr<LstmCtx> ctx) {
    long H4 = 4 * H;
    const Tensor<T>& go = g.grad(y);
    const Tensor<T>& whv = g.val(wh);
    const Tensor<T>& gates = ctx->gates;
    const Tensor<T>& cell = ctx->cell;
    const Tensor<T>& tanh_c = ctx->tanh_c;

    Tensor<T> dpre({B, S, H4});  // pre-activation gate grads
    std::vector<T> dh(B * H, T(0)), dc(B * H, T(0));

    for (long s = S - 1; s >= 0; --s) {
      long t = reverse ? S - 1 - s : s;
      long tprev = reverse ? t + 1 : t - 1;
      for (long bb = 0; bb < B; ++bb) {
        const T* gate = gates.ptr() + (bb * S + t) * H4;
        const T* cp = cell.ptr() + (bb * S + t) * H;
        const T* tp = tanh_c.ptr() + (bb * S + t) * H;
        const T* cprev = s > 0 ? cell.ptr() + (bb * S + tprev) * H : nullptr;
        T* dp = dpre.ptr() + (bb * S + t) * H4;
        T* dhb = dh.data() + bb * H;
        T* dcb = dc.data() + bb * H;
        (void)cp;
        for (long j = 0; j < H; ++j) {
          T i_g = gate[j], f_g = gate[H + j], g_g = gate[2 * H + j], o_g = gate[3 * H + j];
          T dout = go.ptr()[(bb * S + t) * H + j] + dhb[j];
          T do_ = dout * tp[j];
          T dcv = dcb[j] + dout * o_g * (T(1) - tp[j] * tp[j]);
          T di = dcv * g_g;
          T df = dcv * (s > 0 ? cprev[j] : T(0));
          T dg = dcv * i_g;
          dp[j] = di * i_g * (T(1) - i_g);
          dp[H + j] = df * f_g * (T(1) - f_g);
          dp[2 * H + j] = dg * (T(1) - g_g * g_g);
          dp[3 * H + j] = do_ * o_g * (T(1) - o_g);
          dcb[j] = dcv * f_g;
        }
        // dh_prev = dpre_t @ wh
        if (s > 0) {
          const T* whp = whv.ptr();
          for (long q = 0; q < H; ++q) dhb[q] = T(0);
          for (long j = 0; j < H4; ++j) {
            T d = dp[j];
            if (d == T(0)) continue;
            const T* row = whp + j * H;
            for (long q = 0; q < H; ++q) dhb[q] += d * row[q];
          }
          if (g.needs_grad(wh)) {
            const T* hprev = g.val(y).ptr() + (bb * S + tprev) * H;
            T* gwh = g.grad(wh).ptr();
            for (long j = 0; j < H4; ++j)
              for (long q = 0; q < H; ++q) gwh[j * H + q] += dp[j] * hprev[q];
          }
        } else {
          for (long j = 0; j < H; ++j) dhb[j] = T(0);
        }
      }
    }

    if (g.needs_grad(x))
      kernels::matmul_nn(dpre.ptr(), g.val(wx).ptr(), g.grad(x).ptr(), B * S, D, H4, true);
    if (g.needs_grad(wx))
      kernels::matmul_tn(dpre.ptr(), g.val(x).ptr(), g.grad(wx).ptr(), B * S, D, H4, true);
    if (b >= 0 && g.needs_grad(b)) {
      T* gb = g.grad(b).ptr();
      const T* dp = dpre.ptr();
      for (long r = 0; r < B * S; ++r)
        for (long j = 0; j < H4; ++j) gb[j] += dp[r * H4 + j];
    }
  }
};

}  // namespace msep
