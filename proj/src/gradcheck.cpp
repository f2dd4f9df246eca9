// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <memory>

#include "msep/autodiff.hpp"
#include "msep/rng.hpp"
#include "msep/tensor.hpp"

namespace msep {

namespace {

using G = Graph<double>;

struct Case {
  std::string name;
  std::vector<TensorD> leaves;
  std::function<G::Id(G&, const std::vector<G::Id>&)> build;
};

TensorD randn(Rng& rng, std::vector<long> shape, double scale = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.gaussian();
  return t;
}

// Random values pushed away from zero; keeps relu kinks off the FD path.
TensorD randn_offzero(Rng& rng, std::vector<long> shape, double margin = 0.05) {
  TensorD t = randn(rng, std::move(shape));
  for (auto& v : t.data) v += v >= 0 ? margin : -margin;
  return t;
}

double eval_case(Case& c, std::vector<TensorD>* grads_out) {
  G g(true);
  std::vector<TensorD> gradbuf;
  gradbuf.reserve(c.leaves.size());
  for (auto& t : c.leaves) gradbuf.push_back(TensorD::zeros(t.shape));
  std::vector<G::Id> ids;
  ids.reserve(c.leaves.size());
  for (size_t i = 0; i < c.leaves.size(); ++i) ids.push_back(g.param(&c.leaves[i], &gradbuf[i]));
  G::Id loss = c.build(g, ids);
  double value = g.val(loss)[0];
  if (grads_out) {
    g.backward(loss);
    *grads_out = std::move(gradbuf);
  }
  return value;
}

GradCheckCase run_case(Case c, double h = 1e-4, double tol = 1e-4) {
  std::vector<TensorD> analytic;
  eval_case(c, &analytic);
  double worst = 0.0;
  for (size_t i = 0; i < c.leaves.size(); ++i) {
    for (long j = 0; j < c.leaves[i].numel(); ++j) {
      double orig = c.leaves[i][j];
      c.leaves[i][j] = orig + h;
      double lp = eval_case(c, nullptr);
      c.leaves[i][j] = orig - h;
      double lm = eval_case(c, nullptr);
      c.leaves[i][j] = orig;
      double num = (lp - lm) / (2.0 * h);
      double ana = analytic[i][j];
      if (std::abs(num) < 1e-10 && std::abs(ana) < 1e-10) continue;
      double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  GradCheckCase out;
  out.name = std::move(c.name);
  out.max_rel_err = worst;
  out.tolerance = tol;
  out.pass = worst < tol;
  return out;
}

// Scalar loss via mse against a random target that is drawn once and
// then frozen, so every FD evaluation sees the same loss function.
struct FixedTarget {
  uint64_t seed;
  std::shared_ptr<TensorD> t = std::make_shared<TensorD>();

  G::Id attach(G& g, G::Id y) const {
    if (t->numel() == 0) {
      Rng r(seed);
      *t = randn(r, g.val(y).shape);
    }
    return g.mse(y, g.input(*t));
  }
};

}  // namespace

std::vector<GradCheckCase> run_gradcheck(uint64_t seed) {
  std::vector<GradCheckCase> results;
  Rng rng(seed);

  // conv2d: every mask-net kernel/dilation row at reduced channels
  struct ConvCfg {
    const char* name;
    int kt, kf, dt, df;
    long t, f;
  };
  const ConvCfg conv_cfgs[] = {
      {"conv2d_k1x7_d1x1", 1, 7, 1, 1, 5, 13},   {"conv2d_k7x1_d1x1", 7, 1, 1, 1, 13, 5},
      {"conv2d_k5x5_d2x1", 5, 5, 2, 1, 12, 9},   {"conv2d_k5x5_d4x1", 5, 5, 4, 1, 20, 9},
      {"conv2d_k5x5_d8x1", 5, 5, 8, 1, 36, 9},   {"conv2d_k5x5_d16x1", 5, 5, 16, 1, 40, 9},
      {"conv2d_k1x1_d1x1", 1, 1, 1, 1, 6, 7},
  };
  for (const ConvCfg& cc : conv_cfgs) {
    Case c;
    c.name = cc.name;
    long cin = 2, cout = 3;
    c.leaves.push_back(randn(rng, {2, cin, cc.t, cc.f}));
    c.leaves.push_back(randn(rng, {cout, cin, cc.kt, cc.kf}, 0.4));
    c.leaves.push_back(randn(rng, {cout}, 0.2));
    FixedTarget ft{mix_seed(seed, c.name)};
    c.build = [cc, ft](G& g, const std::vector<G::Id>& ids) {
      G::Id y = g.conv2d(ids[0], ids[1], ids[2], cc.dt, cc.df);
      return ft.attach(g, y);
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "linear";
    c.leaves.push_back(randn(rng, {2, 5, 4}));
    c.leaves.push_back(randn(rng, {6, 4}, 0.5));
    c.leaves.push_back(randn(rng, {6}, 0.2));
    FixedTarget ft{mix_seed(seed, c.name)};
    c.build = [ft](G& g, const std::vector<G::Id>& ids) {
      return ft.attach(g, g.linear(ids[0], ids[1], ids[2]));
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "relu";
    c.leaves.push_back(randn_offzero(rng, {3, 7}));
    FixedTarget ft{mix_seed(seed, c.name)};
    c.build = [ft](G& g, const std::vector<G::Id>& ids) {
      return ft.attach(g, g.relu(ids[0]));
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "sigmoid";
    c.leaves.push_back(randn(rng, {3, 7}));
    FixedTarget ft{mix_seed(seed, c.name)};
    c.build = [ft](G& g, const std::vector<G::Id>& ids) {
      return ft.attach(g, g.sigmoid(ids[0]));
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "batchnorm_channels_train";
    c.leaves.push_back(randn(rng, {3, 4, 5, 6}));
    c.leaves.push_back(randn_offzero(rng, {4}, 0.5));
    c.leaves.push_back(randn(rng, {4}, 0.3));
    FixedTarget ft{mix_seed(seed, c.name)};
    auto rmean = std::make_shared<TensorD>(TensorD::zeros({4}));
    auto rvar = std::make_shared<TensorD>(TensorD::full({4}, 1.0));
    c.build = [ft, rmean, rvar](G& g, const std::vector<G::Id>& ids) {
      G::Id y = g.batchnorm_channels(ids[0], ids[1], ids[2], rmean.get(), rvar.get(), true, 0.1,
                                     1e-5);
      return ft.attach(g, y);
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "batchnorm_features_train";
    c.leaves.push_back(randn(rng, {4, 3, 5}));
    c.leaves.push_back(randn_offzero(rng, {5}, 0.5));
    c.leaves.push_back(randn(rng, {5}, 0.3));
    FixedTarget ft{mix_seed(seed, c.name)};
    auto rmean = std::make_shared<TensorD>(TensorD::zeros({5}));
    auto rvar = std::make_shared<TensorD>(TensorD::full({5}, 1.0));
    c.build = [ft, rmean, rvar](G& g, const std::vector<G::Id>& ids) {
      G::Id y = g.batchnorm_features(ids[0], ids[1], ids[2], rmean.get(), rvar.get(), true, 0.1,
                                     1e-5);
      return ft.attach(g, y);
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "batchnorm_features_eval";
    c.leaves.push_back(randn(rng, {4, 3, 5}));
    c.leaves.push_back(randn_offzero(rng, {5}, 0.5));
    c.leaves.push_back(randn(rng, {5}, 0.3));
    FixedTarget ft{mix_seed(seed, c.name)};
    auto rmean = std::make_shared<TensorD>(randn(rng, {5}, 0.2));
    auto rvar = std::make_shared<TensorD>(TensorD::full({5}, 0.8));
    c.build = [ft, rmean, rvar](G& g, const std::vector<G::Id>& ids) {
      G::Id y = g.batchnorm_features(ids[0], ids[1], ids[2], rmean.get(), rvar.get(), false, 0.1,
                                     1e-5);
      return ft.attach(g, y);
    };
    results.push_back(run_case(std::move(c)));
  }

  for (bool reverse : {false, true}) {
    Case c;
    c.name = reverse ? "lstm_reverse" : "lstm_forward";
    long D = 3, H = 3;
    c.leaves.push_back(randn(rng, {2, 4, D}));
    c.leaves.push_back(randn(rng, {4 * H, D}, 0.5));
    c.leaves.push_back(randn(rng, {4 * H, H}, 0.5));
    c.leaves.push_back(randn(rng, {4 * H}, 0.2));
    FixedTarget ft{mix_seed(seed, c.name)};
    c.build = [ft, reverse](G& g, const std::vector<G::Id>& ids) {
      return ft.attach(g, g.lstm(ids[0], ids[1], ids[2], ids[3], reverse));
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "bilstm_concat";
    long D = 3, H = 2;
    c.leaves.push_back(randn(rng, {1, 5, D}));
    for (int dir = 0; dir < 2; ++dir) {
      c.leaves.push_back(randn(rng, {4 * H, D}, 0.5));
      c.leaves.push_back(randn(rng, {4 * H, H}, 0.5));
      c.leaves.push_back(randn(rng, {4 * H}, 0.2));
    }
    FixedTarget ft{mix_seed(seed, c.name)};
    c.build = [ft](G& g, const std::vector<G::Id>& ids) {
      G::Id fwd = g.lstm(ids[0], ids[1], ids[2], ids[3], false);
      G::Id bwd = g.lstm(ids[0], ids[4], ids[5], ids[6], true);
      return ft.attach(g, g.concat_features(fwd, bwd));
    };
    results.push_back(run_case(std::move(c)));
  }

  {
    Case c;
    c.name = "mse";
    c.leaves.push_back(randn(rng, {4, 6}));
    c.leaves.push_back(randn(rng, {4, 6}));
    c.build = [](G& g, const std::vector<G::Id>& ids) { return g.mse(ids[0], ids[1]); };
    results.push_back(run_case(std::move(c)));
  }

  // composed micro-network: 2 convs + BiLSTM + FC, the full mask-net
  // op sequence at toy sizes
  {
    Case c;
    c.name = "micro_net_2conv_bilstm_fc";
    long T = 6, F = 5, C1 = 2, C2 = 2, H = 2, d_emb = 3;
    long flat = C2 * F;
    c.leaves.push_back(randn(rng, {1, 1, T, F}));              // 0 mix (normalized)
    c.leaves.push_back(randn(rng, {C1, 1, 3, 3}, 0.4));        // 1 conv1 w
    c.leaves.push_back(randn(rng, {C1}, 0.1));                 // 2 conv1 b
    c.leaves.push_back(randn_offzero(rng, {C1}, 0.5));         // 3 bn gain
    c.leaves.push_back(randn(rng, {C1}, 0.2));                 // 4 bn shift
    c.leaves.push_back(randn(rng, {C2, C1, 1, 1}, 0.4));       // 5 conv2 w
    c.leaves.push_back(randn(rng, {C2}, 0.1));                 // 6 conv2 b
    c.leaves.push_back(randn(rng, {1, d_emb}));                // 7 embedding
    for (int dir = 0; dir < 2; ++dir) {                        // 8..13 lstm params
      c.leaves.push_back(randn(rng, {4 * H, flat + d_emb}, 0.4));
      c.leaves.push_back(randn(rng, {4 * H, H}, 0.4));
      c.leaves.push_back(randn(rng, {4 * H}, 0.2));
    }
    c.leaves.push_back(randn(rng, {F, 2 * H}, 0.4));           // 14 fc w
    c.leaves.push_back(randn(rng, {F}, 0.1));                  // 15 fc b
    c.leaves.push_back(randn_offzero(rng, {1, T, F}, 0.3));    // 16 |mix| magnitudes
    c.leaves.push_back(randn(rng, {1, T, F}));                 // 17 |target|
    auto rmean = std::make_shared<TensorD>(TensorD::zeros({C1}));
    auto rvar = std::make_shared<TensorD>(TensorD::full({C1}, 1.0));
    c.build = [=](G& g, const std::vector<G::Id>& ids) {
      G::Id h = g.conv2d(ids[0], ids[1], ids[2], 2, 1);
      h = g.batchnorm_channels(h, ids[3], ids[4], rmean.get(), rvar.get(), true, 0.1, 1e-5);
      h = g.relu(h);
      h = g.conv2d(h, ids[5], ids[6], 1, 1);
      G::Id feats = g.channels_to_features(h);
      G::Id cond = g.concat_features(feats, g.broadcast_rows(ids[7], T));
      G::Id fwd = g.lstm(cond, ids[8], ids[9], ids[10], false);
      G::Id bwd = g.lstm(cond, ids[11], ids[12], ids[13], true);
      G::Id mask = g.sigmoid(g.linear(g.concat_features(fwd, bwd), ids[14], ids[15]));
      G::Id est = g.mul(mask, ids[16]);
      return g.mse(est, ids[17]);
    };
    results.push_back(run_case(std::move(c)));
  }

  return results;
}

bool gradcheck_passed(const std::vector<GradCheckCase>& cases) {
  for (const auto& c : cases)
    if (!c.pass) return false;
  return !cases.empty();
}

}  // namespace msep
