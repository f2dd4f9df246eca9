// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/model.hpp"

#include <cmath>

#include <json.hpp>

#include "msep/errors.hpp"
#include "msep/rng.hpp"

namespace msep {

namespace {
constexpr float kBnMomentum = 0.1f;
constexpr float kBnEps = 1e-5f;
}  // namespace

ConditioningMode parse_mode(const std::string& s) {
  if (s == "voice") return ConditioningMode::voice;
  if (s == "face") return ConditioningMode::face;
  if (s == "voice_and_face") return ConditioningMode::voice_and_face;
  throw ValidationError("unknown conditioning mode '" + s +
                        "' (expected voice, face or voice_and_face)");
}

std::string to_string(ConditioningMode m) {
  switch (m) {
    case ConditioningMode::voice: return "voice";
    case ConditioningMode::face: return "face";
    default: return "voice_and_face";
  }
}

ModelConfig ModelConfig::defaults(Profile p, ConditioningMode mode, int freq_bins) {
  ModelConfig cfg;
  cfg.freq_bins = freq_bins;
  cfg.mode = mode;
  EmbeddingDefaults emb = embedding_defaults(p);
  cfg.d_voice = emb.d_voice;
  cfg.d_face = emb.d_face;
  if (p == Profile::paper) {
    cfg.conv = {{128, 1, 7, 1, 1}, {128, 7, 1, 1, 1}, {128, 5, 5, 2, 1}, {128, 5, 5, 4, 1},
                {128, 5, 5, 8, 1}, {128, 5, 5, 16, 1}, {8, 1, 1, 1, 1}};
    cfg.lstm_hidden = 400;
  } else {
    cfg.conv = {{3, 1, 7, 1, 1}, {3, 7, 1, 1, 1}, {3, 3, 3, 2, 1}, {3, 3, 3, 4, 1},
                {3, 3, 3, 8, 1}, {3, 3, 3, 16, 1}, {1, 1, 1, 1, 1}};
    cfg.lstm_hidden = 24;
  }
  cfg.fc_sizes = p == Profile::paper ? std::vector<int>{freq_bins, freq_bins}
                                     : std::vector<int>{128, freq_bins};
  return cfg;
}

long ModelConfig::embedding_dim_total() const {
  long d = 0;
  if (uses_voice()) d += d_voice;
  if (uses_face()) d += d_face;
  return d;
}

void ModelConfig::validate() const {
  if (freq_bins < 1) throw ValidationError("model: freq_bins must be positive");
  if (conv.empty()) throw ValidationError("model: conv stack must not be empty");
  for (const ConvSpec& c : conv) {
    if (c.out_channels < 1) throw ValidationError("model: conv channels must be positive");
    if (c.kt % 2 == 0 || c.kf % 2 == 0)
      throw ValidationError("model: conv kernel sizes must be odd");
    if (c.dt < 1 || c.df < 1) throw ValidationError("model: conv dilation must be >= 1");
  }
  if (lstm_hidden < 1) throw ValidationError("model: lstm_hidden must be positive");
  if (fc_sizes.empty() || fc_sizes.back() != freq_bins)
    throw ValidationError("model: last FC size must equal freq_bins");
  if (uses_voice() && d_voice < 1) throw ValidationError("model: d_voice must be positive");
  if (uses_face() && d_face < 1) throw ValidationError("model: d_face must be positive");
}

std::string ModelConfig::to_json_string() const {
  nlohmann::json j;
  j["freq_bins"] = freq_bins;
  j["lstm_hidden"] = lstm_hidden;
  j["fc_sizes"] = fc_sizes;
  j["d_voice"] = d_voice;
  j["d_face"] = d_face;
  j["mode"] = to_string(mode);
  j["conv"] = nlohmann::json::array();
  for (const ConvSpec& c : conv)
    j["conv"].push_back({c.out_channels, c.kt, c.kf, c.dt, c.df});
  return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& s) {
  nlohmann::json j = nlohmann::json::parse(s);
  ModelConfig cfg;
  cfg.freq_bins = j.at("freq_bins").get<int>();
  cfg.lstm_hidden = j.at("lstm_hidden").get<int>();
  cfg.fc_sizes = j.at("fc_sizes").get<std::vector<int>>();
  cfg.d_voice = j.at("d_voice").get<int>();
  cfg.d_face = j.at("d_face").get<int>();
  cfg.mode = parse_mode(j.at("mode").get<std::string>());
  for (const auto& row : j.at("conv"))
    cfg.conv.push_back({row.at(0).get<int>(), row.at(1).get<int>(), row.at(2).get<int>(),
                        row.at(3).get<int>(), row.at(4).get<int>()});
  cfg.validate();
  return cfg;
}

MaskNet::MaskNet(ModelConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto add = [&](const std::string& name, std::vector<long> shape, bool trainable = true) {
    NamedTensor t;
    t.name = name;
    t.value = TensorF::zeros(shape);
    t.grad = TensorF::zeros(std::move(shape));
    t.trainable = trainable;
    tensors_.push_back(std::move(t));
  };

  long cin = 1;
  for (size_t i = 0; i < cfg_.conv.size(); ++i) {
    const ConvSpec& c = cfg_.conv[i];
    std::string base = "conv" + std::to_string(i + 1);
    add(base + ".w", {c.out_channels, cin, c.kt, c.kf});
    add(base + ".b", {c.out_channels});
    if (i + 1 < cfg_.conv.size()) {
      add(base + ".bn.gain", {c.out_channels});
      add(base + ".bn.shift", {c.out_channels});
      add(base + ".bn.rmean", {c.out_channels}, false);
      add(base + ".bn.rvar", {c.out_channels}, false);
    }
    cin = c.out_channels;
  }

  long lstm_in = cfg_.lstm_input_dim();
  long h = cfg_.lstm_hidden;
  for (int layer = 1; layer <= 2; ++layer) {
    for (const char* dir : {"fwd", "bwd"}) {
      std::string base = "lstm" + std::to_string(layer) + "." + dir;
      add(base + ".wx", {4 * h, lstm_in});
      add(base + ".wh", {4 * h, h});
      add(base + ".b", {4 * h});
    }
    lstm_in = 2 * h;
  }

  long fc_in = 2 * h;
  for (size_t j = 0; j < cfg_.fc_sizes.size(); ++j) {
    std::string base = "fc" + std::to_string(j + 1);
    long out = cfg_.fc_sizes[j];
    add(base + ".w", {out, fc_in});
    add(base + ".b", {out});
    if (j + 1 < cfg_.fc_sizes.size()) {
      add(base + ".bn.gain", {out});
      add(base + ".bn.shift", {out});
      add(base + ".bn.rmean", {out}, false);
      add(base + ".bn.rvar", {out}, false);
    }
    fc_in = out;
  }

  init_params(init_seed);
}

void MaskNet::init_params(uint64_t seed) {
  long h = cfg_.lstm_hidden;
  for (NamedTensor& t : tensors_) {
    Rng rng(mix_seed(seed, t.name));
    bool is_lstm = t.name.rfind("lstm", 0) == 0;
    if (t.name.ends_with(".bn.gain") || t.name.ends_with(".bn.rvar")) {
      t.value.fill(1.0f);
    } else if (t.name.ends_with(".bn.shift") || t.name.ends_with(".bn.rmean")) {
      t.value.fill(0.0f);
    } else if (is_lstm && t.name.ends_with(".b")) {
      t.value.fill(0.0f);
      for (long j = h; j < 2 * h; ++j) t.value[j] = 1.0f;  // forget gate bias
    } else if (t.name.ends_with(".b")) {
      t.value.fill(0.0f);
    } else if (is_lstm) {
      double limit = 1.0 / std::sqrt(static_cast<double>(h));
      for (auto& v : t.value.data) v = static_cast<float>(rng.uniform(-limit, limit));
    } else {
      // Xavier-uniform for conv and fc weights
      long fan_in, fan_out;
      if (t.value.rank() == 4) {
        long k = t.value.dim(2) * t.value.dim(3);
        fan_in = t.value.dim(1) * k;
        fan_out = t.value.dim(0) * k;
      } else {
        fan_in = t.value.dim(1);
        fan_out = t.value.dim(0);
      }
      double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : t.value.data) v = static_cast<float>(rng.uniform(-limit, limit));
    }
  }
}

NamedTensor& MaskNet::tensor(const std::string& name) {
  for (NamedTensor& t : tensors_)
    if (t.name == name) return t;
  throw ValidationError("model: unknown tensor '" + name + "'");
}

std::vector<TensorF*> MaskNet::trainable_values() {
  std::vector<TensorF*> out;
  for (NamedTensor& t : tensors_)
    if (t.trainable) out.push_back(&t.value);
  return out;
}

std::vector<const TensorF*> MaskNet::trainable_grads() const {
  std::vector<const TensorF*> out;
  for (const NamedTensor& t : tensors_)
    if (t.trainable) out.push_back(&t.grad);
  return out;
}

std::vector<TensorF*> MaskNet::trainable_grads_mut() {
  std::vector<TensorF*> out;
  for (NamedTensor& t : tensors_)
    if (t.trainable) out.push_back(&t.grad);
  return out;
}

void MaskNet::zero_grads() {
  for (NamedTensor& t : tensors_) t.grad.fill(0.0f);
}

Graph<float>::Id MaskNet::build_forward(Graph<float>& g, Graph<float>::Id mix_norm,
                                        Graph<float>::Id voice_emb, Graph<float>::Id face_emb,
                                        bool training) {
  using Id = Graph<float>::Id;
  const TensorF& x = g.val(mix_norm);
  if (x.rank() != 4 || x.dim(1) != 1)
    throw ValidationError("model: expected input shape [B,1,T,F], got " + x.shape_str());
  if (x.dim(3) != cfg_.freq_bins)
    throw ValidationError("model: input has " + std::to_string(x.dim(3)) +
                          " bins, config expects " + std::to_string(cfg_.freq_bins));
  long batch = x.dim(0), frames = x.dim(2);

  if (cfg_.uses_voice()) {
    if (voice_emb < 0)
      throw ValidationError("model: mode " + to_string(cfg_.mode) +
                            " requires a voice embedding");
    const TensorF& e = g.val(voice_emb);
    if (e.rank() != 2 || e.dim(0) != batch || e.dim(1) != cfg_.d_voice)
      throw ValidationError("model: voice embedding shape " + e.shape_str() + " does not match " +
                            std::to_string(cfg_.d_voice));
  }
  if (cfg_.uses_face()) {
    if (face_emb < 0)
      throw ValidationError("model: mode " + to_string(cfg_.mode) + " requires a face embedding");
    const TensorF& e = g.val(face_emb);
    if (e.rank() != 2 || e.dim(0) != batch || e.dim(1) != cfg_.d_face)
      throw ValidationError("model: face embedding shape " + e.shape_str() + " does not match " +
                            std::to_string(cfg_.d_face));
  }

  auto P = [&](const std::string& name) { return g.param(&tensor(name).value, &tensor(name).grad); };

  Id h = mix_norm;
  for (size_t i = 0; i < cfg_.conv.size(); ++i) {
    const ConvSpec& c = cfg_.conv[i];
    std::string base = "conv" + std::to_string(i + 1);
    h = g.conv2d(h, P(base + ".w"), P(base + ".b"), c.dt, c.df);
    if (i + 1 < cfg_.conv.size()) {
      h = g.batchnorm_channels(h, P(base + ".bn.gain"), P(base + ".bn.shift"),
                               &tensor(base + ".bn.rmean").value, &tensor(base + ".bn.rvar").value,
                               training, kBnMomentum, kBnEps);
      h = g.relu(h);
    }
  }

  // tile the conditioning vectors onto every frame: features, voice, face
  Id feats = g.channels_to_features(h);
  if (cfg_.uses_voice()) feats = g.concat_features(feats, g.broadcast_rows(voice_emb, frames));
  if (cfg_.uses_face()) feats = g.concat_features(feats, g.broadcast_rows(face_emb, frames));

  Id cur = feats;
  for (int layer = 1; layer <= 2; ++layer) {
    std::string base = "lstm" + std::to_string(layer);
    Id fwd = g.lstm(cur, P(base + ".fwd.wx"), P(base + ".fwd.wh"), P(base + ".fwd.b"), false);
    Id bwd = g.lstm(cur, P(base + ".bwd.wx"), P(base + ".bwd.wh"), P(base + ".bwd.b"), true);
    cur = g.concat_features(fwd, bwd);
  }

  for (size_t j = 0; j < cfg_.fc_sizes.size(); ++j) {
    std::string base = "fc" + std::to_string(j + 1);
    cur = g.linear(cur, P(base + ".w"), P(base + ".b"));
    if (j + 1 < cfg_.fc_sizes.size()) {
      cur = g.batchnorm_features(cur, P(base + ".bn.gain"), P(base + ".bn.shift"),
                                 &tensor(base + ".bn.rmean").value,
                                 &tensor(base + ".bn.rvar").value, training, kBnMomentum, kBnEps);
      cur = g.relu(cur);
    } else {
      cur = g.sigmoid(cur);
    }
  }
  return cur;
}

Mask MaskNet::forward(const std::vector<float>& mix_norm, long frames,
                      const std::vector<float>* voice, const std::vector<float>* face) {
  if (mix_norm.size() != static_cast<size_t>(frames) * cfg_.freq_bins)
    throw ValidationError("model: input size does not match frames x freq_bins");
  Graph<float> g(/*grad_enabled=*/false);
  auto xi = g.input(TensorF({1, 1, frames, cfg_.freq_bins}, mix_norm));
  Graph<float>::Id vi = -1, fi = -1;
  if (voice) vi = g.input(TensorF({1, static_cast<long>(voice->size())}, *voice));
  if (face) fi = g.input(TensorF({1, static_cast<long>(face->size())}, *face));
  auto mask_id = build_forward(g, xi, vi, fi, /*training=*/false);
  Mask m;
  m.frames = frames;
  m.bins = cfg_.freq_bins;
  m.values = g.val(mask_id).data;
  return m;
}

ComplexSpectrogram apply_mask(const ComplexSpectrogram& mix, const Mask& mask) {
  if (mask.frames != mix.frames || mask.bins != mix.bins)
    throw ValidationError("apply_mask: mask " + std::to_string(mask.frames) + "x" +
                          std::to_string(mask.bins) + " does not match spectrogram " +
                          std::to_string(mix.frames) + "x" + std::to_string(mix.bins));
  ComplexSpectrogram out = mix;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.values[i];
  return out;
}

}  // namespace msep
