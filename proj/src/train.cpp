// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/train.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include <json.hpp>

#include "msep/adam.hpp"
#include "msep/embeddings.hpp"
#include "msep/errors.hpp"
#include "msep/wav.hpp"

namespace fs = std::filesystem;

namespace msep {

std::vector<int> validation_split(long n, double fraction, uint64_t seed,
                                  std::vector<int>* val_idx) {
  std::vector<int> order(n);
  for (long i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  Rng rng(mix_seed(seed, "valsplit"));
  for (long i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);
  long n_val = std::min(static_cast<long>(std::llround(fraction * n)), n - 1);
  if (n_val < 0) n_val = 0;
  if (val_idx) val_idx->assign(order.end() - n_val, order.end());
  order.resize(n - n_val);
  return order;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("train: batch_size must be positive");
  if (epochs < 1) throw ValidationError("train: epochs must be positive");
  if (initial_lr <= 0) throw ValidationError("train: initial_lr must be positive");
  if (anneal_divisor < 1.0) throw ValidationError("train: anneal_divisor must be >= 1");
  if (checkpoint_dir.empty()) throw ValidationError("train: checkpoint_dir is required");
  if (pose_sigma < 0) throw ValidationError("train: pose_sigma must be >= 0");
  if (validation_fraction < 0 || validation_fraction >= 1)
    throw ValidationError("train: validation_fraction must be in [0, 1)");
}

namespace {

struct Batch {
  TensorF mix_norm;    // [B,1,T,F]
  TensorF mix_mag;     // [B,T,F]
  TensorF target_mag;  // [B,T,F]
  TensorF voice;       // [B,dv] when used
  TensorF face;        // [B,df] when used
};

class Trainer {
 public:
  Trainer(const std::string& manifest_path, const TrainConfig& cfg, MaskNet net,
          AdamState<float> opt, BinStats stats, long start_epoch, uint64_t seed,
          const StftConfig& stft_cfg)
      : cfg_(cfg),
        net_(std::move(net)),
        opt_(std::move(opt)),
        stats_(std::move(stats)),
        start_epoch_(start_epoch),
        seed_(seed),
        manifest_(load_manifest(manifest_path)),
        corpus_(load_corpus(fs::path(manifest_path).parent_path().string())),
        stft_cfg_(stft_cfg) {
    if (cfg_.deterministic) omp_set_num_threads(1);
    const ModelConfig& m = net_.config();
    if (m.mode != cfg_.mode)
      throw ValidationError("train: checkpoint mode " + to_string(m.mode) +
                            " does not match requested mode " + to_string(cfg_.mode));
    if (manifest_.samples.empty()) throw ValidationError("train: manifest has no samples");
    clip_samples_ = 3 * stft_cfg_.sample_rate;  // batches are padded/cropped to exactly 3 s
    frames_ = stft_cfg_.num_frames(clip_samples_);
    if (m.freq_bins != stft_cfg_.freq_bins())
      throw ValidationError("train: model freq_bins does not match the dsp profile");
    if (m.uses_face()) {
      for (const auto& s : manifest_.samples)
        if (s.face_variant_ids.empty())
          throw ValidationError("train: sample " + s.id +
                                " has no face variants but mode needs faces");
    }
    split_validation();
  }

  BinStats& stats() { return stats_; }

  TrainResult run() {
    fs::create_directories(cfg_.checkpoint_dir);
    TrainResult result;
    result.metrics_path = (fs::path(cfg_.checkpoint_dir) / "metrics.jsonl").string();
    std::ofstream metrics(result.metrics_path, start_epoch_ == 0 ? std::ios::trunc : std::ios::app);
    if (!metrics) throw IoError("train: cannot write " + result.metrics_path);

    result.last_checkpoint = (fs::path(cfg_.checkpoint_dir) / "last.ckpt").string();
    result.best_checkpoint = (fs::path(cfg_.checkpoint_dir) / "best.ckpt").string();
    double best_val = std::numeric_limits<double>::infinity();

    for (long epoch = start_epoch_; epoch < cfg_.epochs; ++epoch) {
      auto batches =
          iterate_batches(static_cast<long>(train_idx_.size()), cfg_.batch_size,
                          epoch_shuffle_seed(seed_, epoch));
      Rng face_rng(epoch_face_seed(seed_, epoch));

      double loss_sum = 0;
      long step = 0;
      for (const auto& batch_local : batches) {
        std::vector<int> idx;
        idx.reserve(batch_local.size());
        for (int b : batch_local) idx.push_back(train_idx_[b]);

        auto t0 = std::chrono::steady_clock::now();
        Batch batch = assemble(idx, &face_rng);
        double loss = train_step(batch);
        auto t1 = std::chrono::steady_clock::now();
        long wall_ms =
            cfg_.deterministic
                ? 0
                : std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

        nlohmann::json line = {{"epoch", epoch},
                               {"step", step},
                               {"loss", loss},
                               {"lr", opt_.lr},
                               {"wall_ms", wall_ms}};
        metrics << line.dump() << '\n';
        loss_sum += loss;
        ++step;
      }
      metrics.flush();

      double mean_loss = loss_sum / std::max<long>(1, step);
      result.epoch_mean_loss.push_back(mean_loss);
      double val_loss = val_idx_.empty() ? mean_loss : validation_loss();

      anneal_lr(opt_, cfg_.anneal_divisor);
      save_checkpoint(result.last_checkpoint, net_, opt_, stft_cfg_, stats_, epoch + 1, seed_);
      if (val_loss < best_val) {
        best_val = val_loss;
        save_checkpoint(result.best_checkpoint, net_, opt_, stft_cfg_, stats_, epoch + 1, seed_);
      }
      std::cout << "epoch " << epoch << ": mean_loss=" << mean_loss << " val_loss=" << val_loss
                << " lr=" << opt_.lr << "\n";
    }
    result.best_val_loss = best_val;
    return result;
  }

  static BinStats compute_stats(const std::string& manifest_path, const TrainConfig& cfg) {
    Manifest manifest = load_manifest(manifest_path);
    StftConfig stft_cfg = stft_defaults(cfg.profile);
    BinStatsAccumulator acc;
    for (const auto& s : manifest.samples) {
      Waveform w = read_wav(manifest.resolve(s.mixture_wav));
      acc.add(magnitude(stft(pad_or_crop(w, 3 * stft_cfg.sample_rate), stft_cfg)));
    }
    return acc.finalize();
  }

 private:
  static Waveform pad_or_crop(Waveform w, long n) {
    w.samples.resize(n, 0.0);
    return w;
  }

  void split_validation() {
    train_idx_ = validation_split(static_cast<long>(manifest_.samples.size()),
                                  cfg_.validation_fraction, seed_, &val_idx_);
  }

  const std::vector<float>& voice_embedding(const MixtureSample& s) {
    auto it = voice_cache_.find(s.reference_wav);
    if (it != voice_cache_.end()) return it->second;
    Waveform ref = read_wav(manifest_.resolve(s.reference_wav));
    if (ref.sample_rate != stft_cfg_.sample_rate)
      throw ValidationError("train: reference " + s.reference_wav + " sample rate mismatch");
    ConditionEmbedding e = voice_embedding_oracle(ref, net_.config().d_voice, stft_cfg_);
    return voice_cache_.emplace(s.reference_wav, std::move(e.values)).first->second;
  }

  // face_rng: one uniform draw per sample picks which of the 10
  // variants is visible this epoch; null selects variant 0 (validation)
  Batch assemble(const std::vector<int>& idx, Rng* face_rng) {
    const ModelConfig& m = net_.config();
    long B = static_cast<long>(idx.size());
    Batch batch;
    batch.mix_norm = TensorF({B, 1, frames_, m.freq_bins});
    batch.mix_mag = TensorF({B, frames_, m.freq_bins});
    batch.target_mag = TensorF({B, frames_, m.freq_bins});
    if (m.uses_voice()) batch.voice = TensorF({B, m.d_voice});
    if (m.uses_face()) batch.face = TensorF({B, m.d_face});

    for (long b = 0; b < B; ++b) {
      const MixtureSample& s = manifest_.samples[idx[b]];
      Waveform mix = pad_or_crop(read_wav(manifest_.resolve(s.mixture_wav)), clip_samples_);
      Waveform target = pad_or_crop(read_wav(manifest_.resolve(s.target_wav)), clip_samples_);
      if (mix.sample_rate != stft_cfg_.sample_rate)
        throw ValidationError("train: mixture " + s.mixture_wav + " sample rate mismatch");

      MagnitudeSpectrogram mix_mag = magnitude(stft(mix, stft_cfg_));
      MagnitudeSpectrogram tgt_mag = magnitude(stft(target, stft_cfg_));
      std::vector<double> normed = normalize(mix_mag, stats_);

      long plane = frames_ * m.freq_bins;
      for (long i = 0; i < plane; ++i) {
        batch.mix_norm.ptr()[b * plane + i] = static_cast<float>(normed[i]);
        batch.mix_mag.ptr()[b * plane + i] = static_cast<float>(mix_mag.data[i]);
        batch.target_mag.ptr()[b * plane + i] = static_cast<float>(tgt_mag.data[i]);
      }

      if (m.uses_voice()) {
        const std::vector<float>& v = voice_embedding(s);
        std::copy(v.begin(), v.end(), batch.voice.ptr() + b * m.d_voice);
      }
      if (m.uses_face()) {
        size_t pick = face_rng ? static_cast<size_t>(face_rng->uniform_int(
                                     0, static_cast<long>(s.face_variant_ids.size()) - 1))
                               : 0;
        ConditionEmbedding e = face_embedding_synthetic(
            corpus_.speaker(s.speaker_id), s.face_variant_ids[pick], cfg_.pose_sigma, m.d_face);
        std::copy(e.values.begin(), e.values.end(), batch.face.ptr() + b * m.d_face);
      }
    }
    return batch;
  }

  double graph_loss(Batch& batch, bool training, bool update) {
    const ModelConfig& m = net_.config();
    Graph<float> g(update);
    auto mix_id = g.input(std::move(batch.mix_norm));
    Graph<float>::Id v = m.uses_voice() ? g.input(std::move(batch.voice)) : -1;
    Graph<float>::Id f = m.uses_face() ? g.input(std::move(batch.face)) : -1;
    if (update) net_.zero_grads();
    auto mask = net_.build_forward(g, mix_id, v, f, training);
    auto est = g.mul(mask, g.input(std::move(batch.mix_mag)));
    auto loss = g.mse(est, g.input(std::move(batch.target_mag)));
    double lval = g.val(loss)[0];
    if (!std::isfinite(lval)) throw NumericalError("train: " + non_finite_diagnosis());
    if (update) {
      g.backward(loss);
      for (const NamedTensor& t : net_.tensors())
        for (float gv : t.grad.data)
          if (!std::isfinite(gv))
            throw NumericalError("train: non-finite gradient in parameter tensor " + t.name);
      adam_step(net_.trainable_values(), net_.trainable_grads(), opt_);
    }
    return lval;
  }

  double train_step(Batch& batch) { return graph_loss(batch, /*training=*/true, /*update=*/true); }

  double validation_loss() {
    double sum = 0;
    long count = 0;
    for (size_t i = 0; i < val_idx_.size(); i += cfg_.batch_size) {
      std::vector<int> idx(val_idx_.begin() + i,
                           val_idx_.begin() + std::min(val_idx_.size(), i + cfg_.batch_size));
      Batch batch = assemble(idx, nullptr);
      sum += graph_loss(batch, /*training=*/false, /*update=*/false) * idx.size();
      count += idx.size();
    }
    return sum / std::max<long>(1, count);
  }

  std::string non_finite_diagnosis() const {
    for (const NamedTensor& t : net_.tensors()) {
      for (float v : t.value.data)
        if (!std::isfinite(v)) return "non-finite value in parameter tensor " + t.name;
      for (float v : t.grad.data)
        if (!std::isfinite(v)) return "non-finite gradient in parameter tensor " + t.name;
    }
    return "non-finite loss (parameters are finite; check input data)";
  }

  TrainConfig cfg_;
  MaskNet net_;
  AdamState<float> opt_;
  BinStats stats_;
  long start_epoch_;
  uint64_t seed_;
  Manifest manifest_;
  CorpusIndex corpus_;
  StftConfig stft_cfg_;
  long clip_samples_ = 0;
  long frames_ = 0;
  std::vector<int> train_idx_, val_idx_;
  std::unordered_map<std::string, std::vector<float>> voice_cache_;
};

}  // namespace

TrainResult train(const std::string& manifest_path, const TrainConfig& cfg,
                  const ModelConfig* model_override) {
  cfg.validate();
  StftConfig stft_cfg = stft_defaults(cfg.profile);
  ModelConfig mcfg = model_override
                         ? *model_override
                         : ModelConfig::defaults(cfg.profile, cfg.mode, stft_cfg.freq_bins());
  mcfg.mode = cfg.mode;
  mcfg.validate();

  MaskNet net(mcfg, mix_seed(cfg.seed, "init"));
  AdamState<float> opt;
  opt.lr = cfg.initial_lr;
  opt.init(net.trainable_values());

  BinStats stats = Trainer::compute_stats(manifest_path, cfg);
  Trainer trainer(manifest_path, cfg, std::move(net), std::move(opt), std::move(stats), 0,
                  cfg.seed, stft_cfg);
  return trainer.run();
}

TrainResult resume(const std::string& checkpoint_path, const std::string& manifest_path,
                   const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (static_cast<long>(ck.epoch) >= cfg.epochs)
    throw ValidationError("resume: checkpoint already has " + std::to_string(ck.epoch) +
                          " epochs, target is " + std::to_string(cfg.epochs));
  StftConfig stft_cfg = ck.stft_cfg;
  Trainer trainer(manifest_path, cfg, std::move(ck.net), std::move(ck.opt), std::move(ck.stats),
                  static_cast<long>(ck.epoch), ck.seed, stft_cfg);
  return trainer.run();
}

}  // namespace msep
