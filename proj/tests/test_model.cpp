// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "msep/checkpoint.hpp"
#include "msep/errors.hpp"
#include "msep/model.hpp"
#include "msep/rng.hpp"

using namespace msep;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config(ConditioningMode mode, int freq_bins = 33) {
  ModelConfig cfg;
  cfg.freq_bins = freq_bins;
  cfg.conv = {{2, 1, 3, 1, 1}, {2, 3, 3, 2, 1}, {1, 1, 1, 1, 1}};
  cfg.lstm_hidden = 6;
  cfg.fc_sizes = {12, freq_bins};
  cfg.d_voice = 8;
  cfg.d_face = 5;
  cfg.mode = mode;
  return cfg;
}

TensorF random_input(Rng& rng, long b, long t, long f) {
  TensorF x({b, 1, t, f});
  for (auto& v : x.data) v = static_cast<float>(rng.gaussian());
  return x;
}

std::vector<float> random_unit(Rng& rng, int dim) {
  std::vector<float> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = static_cast<float>(rng.gaussian());
    n += static_cast<double>(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
  return v;
}

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("msep_model_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("paper defaults carry the published layer table") {
  ModelConfig cfg = ModelConfig::defaults(Profile::paper, ConditioningMode::voice_and_face, 601);
  REQUIRE(cfg.conv.size() == 7);
  const int expected[7][5] = {{128, 1, 7, 1, 1}, {128, 7, 1, 1, 1}, {128, 5, 5, 2, 1},
                              {128, 5, 5, 4, 1}, {128, 5, 5, 8, 1}, {128, 5, 5, 16, 1},
                              {8, 1, 1, 1, 1}};
  for (int i = 0; i < 7; ++i) {
    CHECK(cfg.conv[i].out_channels == expected[i][0]);
    CHECK(cfg.conv[i].kt == expected[i][1]);
    CHECK(cfg.conv[i].kf == expected[i][2]);
    CHECK(cfg.conv[i].dt == expected[i][3]);
    CHECK(cfg.conv[i].df == expected[i][4]);
  }
  CHECK(cfg.lstm_hidden == 400);
  CHECK(cfg.fc_sizes == std::vector<int>{601, 601});
  CHECK(cfg.d_voice == 256);
  CHECK(cfg.d_face == 512);

  // conv flat 8*601 + 256 + 512 = 5576 on the BiLSTM input
  CHECK(cfg.conv_flat_dim() == 8 * 601);
  CHECK(cfg.lstm_input_dim() == 5576);
}

TEST_CASE("model config json round trip") {
  ModelConfig cfg = ModelConfig::defaults(Profile::desk, ConditioningMode::face, 257);
  ModelConfig back = ModelConfig::from_json_string(cfg.to_json_string());
  CHECK(back.to_json_string() == cfg.to_json_string());
  CHECK(back.mode == ConditioningMode::face);
  CHECK(back.freq_bins == 257);
}

TEST_CASE("forward yields a [T,F] mask with entries in [0,1]") {
  // desk profile shape example: F=257, T=100, voice-only
  ModelConfig cfg = ModelConfig::defaults(Profile::desk, ConditioningMode::voice, 257);
  CHECK(cfg.d_voice == 64);
  MaskNet net(cfg, 42);
  Rng rng(1);
  std::vector<float> mix(100 * 257);
  for (auto& v : mix) v = static_cast<float>(rng.gaussian());
  std::vector<float> voice = random_unit(rng, cfg.d_voice);
  Mask m = net.forward(mix, 100, &voice, nullptr);
  CHECK(m.frames == 100);
  CHECK(m.bins == 257);
  for (float v : m.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("paper-profile stack preserves shape (reduced channels)") {
  // Table-1 kernels and dilations at slim widths: F=601, T=298 in, 298x601 mask out
  ModelConfig cfg = ModelConfig::defaults(Profile::paper, ConditioningMode::voice, 601);
  for (auto& c : cfg.conv) c.out_channels = std::min(c.out_channels, 3);
  cfg.lstm_hidden = 4;
  cfg.fc_sizes = {16, 601};
  cfg.d_voice = 16;
  MaskNet net(cfg, 7);
  Rng rng(2);
  std::vector<float> mix(298 * 601);
  for (auto& v : mix) v = static_cast<float>(0.3 * rng.gaussian());
  std::vector<float> voice = random_unit(rng, cfg.d_voice);
  Mask m = net.forward(mix, 298, &voice, nullptr);
  CHECK(m.frames == 298);
  CHECK(m.bins == 601);
}

TEST_CASE("zero-initialized final FC gives a flat 0.5 mask") {
  ModelConfig cfg = tiny_config(ConditioningMode::voice);
  MaskNet net(cfg, 9);
  net.tensor("fc2.w").value.fill(0.0f);
  net.tensor("fc2.b").value.fill(0.0f);
  Rng rng(3);
  std::vector<float> mix(20 * cfg.freq_bins);
  for (auto& v : mix) v = static_cast<float>(rng.gaussian());
  std::vector<float> voice = random_unit(rng, cfg.d_voice);
  Mask m = net.forward(mix, 20, &voice, nullptr);
  for (float v : m.values) CHECK(v == 0.5f);
}

TEST_CASE("tiling copies each embedding onto every frame, features first") {
  Graph<float> g;
  auto feats = g.input(TensorF({1, 2, 3}, {1, 2, 3, 4, 5, 6}));
  auto emb = g.input(TensorF({1, 2}, {9, 9}));
  auto out = g.concat_features(feats, g.broadcast_rows(emb, 2));
  CHECK(g.val(out).shape == std::vector<long>{1, 2, 5});
  CHECK(g.val(out).data == std::vector<float>{1, 2, 3, 9, 9, 4, 5, 6, 9, 9});
}

TEST_CASE("conditioned modes reject missing or mis-sized embeddings") {
  ModelConfig cfg = tiny_config(ConditioningMode::voice_and_face);
  MaskNet net(cfg, 5);
  Rng rng(4);
  std::vector<float> mix(8 * cfg.freq_bins, 0.1f);
  std::vector<float> voice = random_unit(rng, cfg.d_voice);
  std::vector<float> face = random_unit(rng, cfg.d_face);

  CHECK_THROWS_WITH_AS(net.forward(mix, 8, nullptr, &face), doctest::Contains("voice"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(net.forward(mix, 8, &voice, nullptr), doctest::Contains("face"),
                       ValidationError);
  std::vector<float> wrong = random_unit(rng, cfg.d_voice + 1);
  CHECK_THROWS_AS(net.forward(mix, 8, &wrong, &face), ValidationError);
  CHECK_NOTHROW(net.forward(mix, 8, &voice, &face));

  // BiLSTM input width: conv flat + d_voice + d_face exactly
  CHECK(cfg.lstm_input_dim() == cfg.conv_flat_dim() + cfg.d_voice + cfg.d_face);
  CHECK(net.tensor("lstm1.fwd.wx").value.dim(1) == cfg.lstm_input_dim());
}

TEST_CASE("masks react to the conditioning vector") {
  ModelConfig cfg = tiny_config(ConditioningMode::voice);
  MaskNet net(cfg, 11);
  Rng rng(5);
  std::vector<float> mix(16 * cfg.freq_bins);
  for (auto& v : mix) v = static_cast<float>(rng.gaussian());
  std::vector<float> emb_a = random_unit(rng, cfg.d_voice);
  std::vector<float> emb_b = random_unit(rng, cfg.d_voice);
  Mask ma = net.forward(mix, 16, &emb_a, nullptr);
  Mask mb = net.forward(mix, 16, &emb_b, nullptr);
  double l2 = 0;
  for (size_t i = 0; i < ma.values.size(); ++i) {
    double d = ma.values[i] - mb.values[i];
    l2 += d * d;
  }
  CHECK(std::sqrt(l2) > 0.0);
}

TEST_CASE("masks on overlapping interior windows agree") {
  ModelConfig cfg = tiny_config(ConditioningMode::voice, 17);
  MaskNet net(cfg, 13);
  Rng rng(6);
  long total = 220;
  std::vector<float> mix(total * cfg.freq_bins);
  for (auto& v : mix) v = static_cast<float>(rng.gaussian());
  std::vector<float> voice = random_unit(rng, cfg.d_voice);

  auto window = [&](long lo, long hi) {
    std::vector<float> w(mix.begin() + lo * cfg.freq_bins, mix.begin() + hi * cfg.freq_bins);
    return net.forward(w, hi - lo, &voice, nullptr);
  };
  Mask a = window(0, 180);
  Mask b = window(40, 220);
  // compare frames 88..132 globally: 48+ frames from every window edge
  for (long t = 88; t < 132; ++t)
    for (int f = 0; f < cfg.freq_bins; ++f)
      CHECK(std::abs(a.values[t * cfg.freq_bins + f] - b.values[(t - 40) * cfg.freq_bins + f]) <
            1e-3);
}

TEST_CASE("apply_mask scales magnitude and keeps phase") {
  StftConfig scfg{64, 32, 16, WindowKind::hann, 8000};
  Rng rng(7);
  ComplexSpectrogram spec;
  spec.frames = 5;
  spec.bins = scfg.freq_bins();
  spec.config = scfg;
  spec.data.resize(spec.frames * spec.bins);
  for (auto& v : spec.data) v = {rng.gaussian(), rng.gaussian()};

  Mask ones{5, spec.bins, std::vector<float>(spec.data.size(), 1.0f)};
  auto same = apply_mask(spec, ones);
  for (size_t i = 0; i < spec.data.size(); ++i) CHECK(same.data[i] == spec.data[i]);

  Mask zeros{5, spec.bins, std::vector<float>(spec.data.size(), 0.0f)};
  auto silent = apply_mask(spec, zeros);
  for (auto v : silent.data) CHECK(std::abs(v) == 0.0);

  Mask half{5, spec.bins, std::vector<float>(spec.data.size(), 0.5f)};
  auto halved = apply_mask(spec, half);
  for (size_t i = 0; i < spec.data.size(); ++i) {
    CHECK(std::abs(halved.data[i]) == doctest::Approx(0.5 * std::abs(spec.data[i])));
    if (std::abs(spec.data[i]) > 0)
      CHECK(std::arg(halved.data[i]) == doctest::Approx(std::arg(spec.data[i])));
  }

  Mask bad{4, spec.bins, std::vector<float>(4 * spec.bins, 1.0f)};
  CHECK_THROWS_AS(apply_mask(spec, bad), ValidationError);
}

TEST_CASE("loss is zero for a unit mask on identical signals") {
  Rng rng(8);
  Graph<float> g;
  TensorF mag({1, 6, 9});
  for (auto& v : mag.data) v = static_cast<float>(std::abs(rng.gaussian()));
  auto ones = g.input(TensorF::full({1, 6, 9}, 1.0f));
  auto loss = g.mse(g.mul(ones, g.input(mag)), g.input(mag));
  CHECK(g.val(loss)[0] == 0.0f);
}

TEST_CASE("checkpoint save/load/save is byte-identical") {
  TempDir tmp;
  ModelConfig cfg = tiny_config(ConditioningMode::voice_and_face);
  MaskNet net(cfg, 99);
  AdamState<float> opt;
  opt.lr = 3e-4;
  opt.step = 17;
  opt.init(net.trainable_values());
  Rng rng(9);
  for (auto& t : opt.m) for (auto& v : t.data) v = static_cast<float>(rng.gaussian());
  for (auto& t : opt.v) for (auto& v : t.data) v = static_cast<float>(std::abs(rng.gaussian()));
  StftConfig scfg{512, 200, 80, WindowKind::hann, 8000};
  BinStats stats;
  stats.mean.assign(cfg.freq_bins, 0.5);
  stats.stddev.assign(cfg.freq_bins, 2.0);

  std::string p1 = (tmp.path / "a.ckpt").string();
  std::string p2 = (tmp.path / "b.ckpt").string();
  save_checkpoint(p1, net, opt, scfg, stats, 3, 1234);
  Checkpoint ck = load_checkpoint(p1);
  CHECK(ck.epoch == 3);
  CHECK(ck.seed == 1234);
  CHECK(ck.opt.step == 17);
  CHECK(ck.opt.lr == doctest::Approx(3e-4));
  CHECK(ck.net.config().mode == ConditioningMode::voice_and_face);
  save_checkpoint(p2, ck.net, ck.opt, ck.stft_cfg, ck.stats, ck.epoch, ck.seed);
  CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("checkpoint loader rejects unknown versions and bad magic") {
  TempDir tmp;
  ModelConfig cfg = tiny_config(ConditioningMode::voice);
  MaskNet net(cfg, 1);
  AdamState<float> opt;
  opt.init(net.trainable_values());
  StftConfig scfg{512, 200, 80, WindowKind::hann, 8000};
  BinStats stats;
  stats.mean.assign(cfg.freq_bins, 0.0);
  stats.stddev.assign(cfg.freq_bins, 1.0);
  std::string path = (tmp.path / "v.ckpt").string();
  save_checkpoint(path, net, opt, scfg, stats, 0, 0);

  std::string bytes = file_bytes(path);
  bytes[4] = 99;  // version field
  std::string bad = (tmp.path / "bad.ckpt").string();
  std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
  CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("version"), IoError);

  bytes[0] = 'X';
  std::ofstream(bad, std::ios::binary).write(bytes.data(), bytes.size());
  CHECK_THROWS_AS(load_checkpoint(bad), IoError);

  std::string trunc = (tmp.path / "trunc.ckpt").string();
  std::ofstream(trunc, std::ios::binary).write(file_bytes(path).data(), 100);
  CHECK_THROWS_AS(load_checkpoint(trunc), IoError);
}
