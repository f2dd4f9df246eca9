// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "msep/adam.hpp"
#include "msep/autodiff.hpp"
#include "msep/gradcheck.hpp"
#include "msep/rng.hpp"
#include "oracles.hpp"

using namespace msep;
using G = Graph<double>;

namespace {

TensorD randn(Rng& rng, std::vector<long> shape, double scale = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.gaussian();
  return t;
}

}  // namespace

TEST_CASE("conv2d with a unit 1x1 kernel is the identity") {
  Rng rng(1);
  G g;
  TensorD x = randn(rng, {1, 1, 4, 5});
  G::Id xi = g.input(x);
  G::Id w = g.input(TensorD({1, 1, 1, 1}, {1.0}));
  G::Id y = g.conv2d(xi, w, -1, 1, 1);
  for (long i = 0; i < x.numel(); ++i) CHECK(g.val(y)[i] == x[i]);
}

TEST_CASE("conv2d of all-ones input with a 3x3 ones kernel") {
  G g;
  G::Id x = g.input(TensorD::full({1, 1, 5, 5}, 1.0));
  G::Id w = g.input(TensorD::full({1, 1, 3, 3}, 1.0));
  G::Id y = g.conv2d(x, w, -1, 1, 1);
  const TensorD& out = g.val(y);
  CHECK(out[2 * 5 + 2] == doctest::Approx(9.0));  // center
  CHECK(out[0] == doctest::Approx(4.0));          // corner
  CHECK(out[1] == doctest::Approx(6.0));          // edge
}

TEST_CASE("'same' padding preserves time length under heavy dilation") {
  // kernel (5,5), dilation time 8: pad (5-1)*8/2 = 16 per side
  Rng rng(2);
  G g;
  G::Id x = g.input(randn(rng, {1, 2, 40, 9}));
  G::Id w = g.input(randn(rng, {3, 2, 5, 5}, 0.3));
  G::Id y = g.conv2d(x, w, -1, 8, 1);
  CHECK(g.val(y).shape == std::vector<long>{1, 3, 40, 9});
}

TEST_CASE("even kernel sizes are rejected") {
  Rng rng(3);
  G g;
  G::Id x = g.input(randn(rng, {1, 1, 4, 4}));
  G::Id w = g.input(randn(rng, {1, 1, 2, 3}));
  CHECK_THROWS_AS(g.conv2d(x, w, -1, 1, 1), ValidationError);
}

TEST_CASE("dilated conv equals conv with a zero-inserted kernel") {
  Rng rng(4);
  int k = 3, d = 3;
  TensorD x = randn(rng, {1, 2, 30, 7});
  TensorD w = randn(rng, {2, 2, k, 1});
  // manually dilate along time: size (k-1)*d+1 with zeros between taps
  int kd = (k - 1) * d + 1;
  TensorD wd = TensorD::zeros({2, 2, kd, 1});
  for (long co = 0; co < 2; ++co)
    for (long ci = 0; ci < 2; ++ci)
      for (int a = 0; a < k; ++a)
        wd.data[((co * 2 + ci) * kd + a * d) * 1] = w.data[((co * 2 + ci) * k + a) * 1];

  G g1, g2;
  G::Id y1 = g1.conv2d(g1.input(x), g1.input(w), -1, d, 1);
  G::Id y2 = g2.conv2d(g2.input(x), g2.input(wd), -1, 1, 1);
  REQUIRE(g1.val(y1).numel() == g2.val(y2).numel());
  for (long i = 0; i < g1.val(y1).numel(); ++i) CHECK(g1.val(y1)[i] == g2.val(y2)[i]);  // exact
}

TEST_CASE("lstm with zero weights and biases is silent") {
  Rng rng(5);
  G g;
  G::Id x = g.input(randn(rng, {2, 6, 3}));
  G::Id y = g.lstm(x, g.input(TensorD::zeros({8, 3})), g.input(TensorD::zeros({8, 2})),
                   g.input(TensorD::zeros({8})), false);
  for (long i = 0; i < g.val(y).numel(); ++i) CHECK(g.val(y)[i] == 0.0);
}

TEST_CASE("lstm matches the scalar-loop oracle (T=3, D=2, H=2)") {
  Rng rng(6);
  long T = 3, D = 2, H = 2;
  TensorD x = randn(rng, {1, T, D});
  TensorD wx = randn(rng, {4 * H, D});
  TensorD wh = randn(rng, {4 * H, H});
  TensorD b = randn(rng, {4 * H}, 0.3);

  std::vector<std::vector<double>> ox(T, std::vector<double>(D));
  for (long t = 0; t < T; ++t)
    for (long d = 0; d < D; ++d) ox[t][d] = x.data[t * D + d];
  std::vector<std::vector<double>> owx(4 * H, std::vector<double>(D));
  std::vector<std::vector<double>> owh(4 * H, std::vector<double>(H));
  for (long j = 0; j < 4 * H; ++j) {
    for (long d = 0; d < D; ++d) owx[j][d] = wx.data[j * D + d];
    for (long p = 0; p < H; ++p) owh[j][p] = wh.data[j * H + p];
  }

  for (bool reverse : {false, true}) {
    G g;
    G::Id y = g.lstm(g.input(x), g.input(wx), g.input(wh), g.input(b), reverse);
    auto expect = oracle::scalar_lstm(ox, owx, owh, b.data, reverse);
    for (long t = 0; t < T; ++t)
      for (long j = 0; j < H; ++j)
        CHECK(g.val(y)[t * H + j] == doctest::Approx(expect[t][j]).epsilon(1e-12));
  }
}

TEST_CASE("single-frame bilstm degenerates to two independent cells") {
  Rng rng(7);
  long D = 3, H = 2;
  TensorD x = randn(rng, {1, 1, D});
  TensorD wxf = randn(rng, {4 * H, D}), whf = randn(rng, {4 * H, H}), bf = randn(rng, {4 * H});
  TensorD wxb = randn(rng, {4 * H, D}), whb = randn(rng, {4 * H, H}), bb = randn(rng, {4 * H});

  G g;
  G::Id xi = g.input(x);
  G::Id fwd = g.lstm(xi, g.input(wxf), g.input(whf), g.input(bf), false);
  G::Id bwd = g.lstm(xi, g.input(wxb), g.input(whb), g.input(bb), true);
  G::Id cat = g.concat_features(fwd, bwd);

  // direction flag is irrelevant at T=1
  G g2;
  G::Id f2 = g2.lstm(g2.input(x), g2.input(wxf), g2.input(whf), g2.input(bf), true);
  G::Id b2 = g2.lstm(g2.input(x), g2.input(wxb), g2.input(whb), g2.input(bb), false);
  for (long j = 0; j < H; ++j) {
    CHECK(g.val(cat)[j] == g2.val(f2)[j]);
    CHECK(g.val(cat)[H + j] == g2.val(b2)[j]);
  }
}

TEST_CASE("bilstm direction symmetry under input reversal") {
  Rng rng(8);
  long T = 7, D = 3, H = 2;
  TensorD x = randn(rng, {1, T, D});
  TensorD xr = x;
  for (long t = 0; t < T; ++t)
    for (long d = 0; d < D; ++d) xr.data[t * D + d] = x.data[(T - 1 - t) * D + d];
  TensorD wx = randn(rng, {4 * H, D}), wh = randn(rng, {4 * H, H}), b = randn(rng, {4 * H});

  G g1, g2;
  G::Id fwd_on_rev = g1.lstm(g1.input(xr), g1.input(wx), g1.input(wh), g1.input(b), false);
  G::Id bwd_on_orig = g2.lstm(g2.input(x), g2.input(wx), g2.input(wh), g2.input(b), true);
  for (long t = 0; t < T; ++t)
    for (long j = 0; j < H; ++j)
      CHECK(g1.val(fwd_on_rev)[t * H + j] ==
            doctest::Approx(g2.val(bwd_on_orig)[(T - 1 - t) * H + j]).epsilon(1e-12));
}

TEST_CASE("activation and loss basics") {
  G g;
  G::Id s = g.sigmoid(g.input(TensorD::scalar(0.0)));
  CHECK(g.val(s)[0] == doctest::Approx(0.5));
  G::Id r = g.relu(g.input(TensorD({2}, {-1.0, 2.0})));
  CHECK(g.val(r)[0] == 0.0);
  CHECK(g.val(r)[1] == 2.0);

  Rng rng(9);
  TensorD a = randn(rng, {5, 7});
  G::Id zero = g.mse(g.input(a), g.input(a));
  CHECK(g.val(zero)[0] == 0.0);

  TensorD b = a;
  for (auto& v : b.data) v += 0.3;
  G::Id c2 = g.mse(g.input(a), g.input(b));
  CHECK(g.val(c2)[0] == doctest::Approx(0.09).epsilon(1e-9));

  TensorD p = randn(rng, {4, 6}), q = randn(rng, {4, 6});
  double acc = 0;
  for (long i = 0; i < p.numel(); ++i) acc += (p[i] - q[i]) * (p[i] - q[i]);
  G::Id m = g.mse(g.input(p), g.input(q));
  CHECK(g.val(m)[0] == doctest::Approx(acc / p.numel()).epsilon(1e-12));
}

TEST_CASE("batchnorm of standardized input with unit gain is near-identity") {
  Rng rng(10);
  TensorD x = randn(rng, {8, 3, 10, 5});
  // standardize each channel
  long B = 8, C = 3, S = 50;
  for (long c = 0; c < C; ++c) {
    double sum = 0, sumsq = 0;
    for (long b = 0; b < B; ++b)
      for (long s = 0; s < S; ++s) {
        double v = x.data[(b * C + c) * S + s];
        sum += v;
        sumsq += v * v;
      }
    double mean = sum / (B * S);
    double sd = std::sqrt(sumsq / (B * S) - mean * mean);
    for (long b = 0; b < B; ++b)
      for (long s = 0; s < S; ++s) x.data[(b * C + c) * S + s] = (x.data[(b * C + c) * S + s] - mean) / sd;
  }
  TensorD rmean = TensorD::zeros({C}), rvar = TensorD::full({C}, 1.0);
  G g;
  G::Id y = g.batchnorm_channels(g.input(x), g.input(TensorD::full({C}, 1.0)),
                                 g.input(TensorD::zeros({C})), &rmean, &rvar, true, 0.1, 1e-5);
  for (long i = 0; i < x.numel(); ++i)
    CHECK(g.val(y)[i] == doctest::Approx(x[i]).epsilon(1e-4));
}

TEST_CASE("gradient check: every op and the composed micro-network") {
  auto cases = run_gradcheck(777);
  REQUIRE(!cases.empty());
  for (const auto& c : cases) {
    INFO(c.name, " max_rel_err=", c.max_rel_err);
    CHECK(c.max_rel_err < c.tolerance);
  }
}

TEST_CASE("adam: first step moves a fresh parameter by about lr") {
  TensorF p = TensorF::scalar(0.0f);
  TensorF grad = TensorF::scalar(1.0f);
  AdamState<float> st;
  st.lr = 0.001;
  st.init({&p});
  adam_step<float>({&p}, {&grad}, st);
  CHECK(st.step == 1);
  CHECK(p[0] == doctest::Approx(-0.001).epsilon(1e-4));
}

TEST_CASE("adam: zero gradient leaves fresh parameters unchanged") {
  TensorF p = TensorF({3}, {1.0f, -2.0f, 3.0f});
  TensorF grad = TensorF::zeros({3});
  AdamState<float> st;
  st.init({&p});
  adam_step<float>({&p}, {&grad}, st);
  CHECK(st.step == 1);
  CHECK(p.data == std::vector<float>{1.0f, -2.0f, 3.0f});
}

TEST_CASE("adam: constant gradient gives non-increasing step sizes") {
  TensorD p = TensorD::scalar(0.0);
  TensorD grad = TensorD::scalar(0.7);
  AdamState<double> st;
  st.lr = 0.01;
  st.init({&p});
  double prev = p[0], last_delta = 1e9;
  for (int i = 0; i < 5; ++i) {
    adam_step<double>({&p}, {&grad}, st);
    double delta = std::abs(p[0] - prev);
    CHECK(delta <= last_delta + 1e-12);
    last_delta = delta;
    prev = p[0];
  }
}

TEST_CASE("learning rate anneal sequence") {
  AdamState<float> st;
  st.lr = 0.001;
  anneal_lr(st);
  CHECK(st.lr == doctest::Approx(0.000909090909).epsilon(1e-9));
  anneal_lr(st);
  CHECK(st.lr == doctest::Approx(0.000826446281).epsilon(1e-9));
  for (int i = 0; i < 100; ++i) anneal_lr(st);
  CHECK(st.lr > 0.0);
}

TEST_CASE("identical seeds give bit-identical parameter trajectories") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    TensorF w = TensorF::zeros({4, 3});
    for (auto& v : w.data) v = static_cast<float>(0.1 * rng.gaussian());
    TensorF b = TensorF::zeros({4});
    AdamState<float> st;
    st.init({&w, &b});
    TensorF x({2, 3});
    TensorF target({2, 4});
    for (int step = 0; step < 5; ++step) {
      for (auto& v : x.data) v = static_cast<float>(rng.gaussian());
      for (auto& v : target.data) v = static_cast<float>(rng.gaussian());
      Graph<float> g;
      TensorF gw = TensorF::zeros(w.shape), gb = TensorF::zeros(b.shape);
      auto wi = g.param(&w, &gw);
      auto bi = g.param(&b, &gb);
      auto loss = g.mse(g.sigmoid(g.linear(g.input(x), wi, bi)), g.input(target));
      g.backward(loss);
      adam_step<float>({&w, &b}, {&gw, &gb}, st);
    }
    return std::make_pair(w.data, b.data);
  };
  auto a = run(123), b = run(123), c = run(124);
  CHECK(a == b);        // bitwise equal trajectories
  CHECK(a.first != c.first);  // different seed actually changes the run
}
