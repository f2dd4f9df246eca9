// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "msep/autodiff.hpp"
#include "msep/profile.hpp"
#include "msep/stft.hpp"
#include "msep/tensor.hpp"

namespace msep {

enum class ConditioningMode { voice, face, voice_and_face };

ConditioningMode parse_mode(const std::string& s);
std::string to_string(ConditioningMode m);

struct ConvSpec {
  int out_channels;
  int kt, kf;  // kernel size, time x freq (odd)
  int dt, df;  // dilation, time x freq
};

// Mask estimation net: conv stack -> embedding tiling -> 2 BiLSTM
// layers -> FC stack -> sigmoid mask. The paper-profile defaults carry
// the full published widths; desk defaults are slimmed to train in
// minutes on a workstation.
struct ModelConfig {
  int freq_bins = 257;
  std::vector<ConvSpec> conv;
  int lstm_hidden = 400;      // per direction
  std::vector<int> fc_sizes;  // last entry must equal freq_bins
  int d_voice = 256;
  int d_face = 512;
  ConditioningMode mode = ConditioningMode::voice;

  static ModelConfig defaults(Profile p, ConditioningMode mode, int freq_bins);

  long conv_flat_dim() const { return static_cast<long>(conv.back().out_channels) * freq_bins; }
  long embedding_dim_total() const;
  long lstm_input_dim() const { return conv_flat_dim() + embedding_dim_total(); }
  bool uses_voice() const { return mode != ConditioningMode::face; }
  bool uses_face() const { return mode != ConditioningMode::voice; }
  void validate() const;

  std::string to_json_string() const;
  static ModelConfig from_json_string(const std::string& j);
};

struct NamedTensor {
  std::string name;
  TensorF value;
  TensorF grad;
  bool trainable = true;
};

struct Mask {
  long frames = 0;
  int bins = 0;
  std::vector<float> values;  // row-major [frames][bins], entries in [0,1]
};

class MaskNet {
 public:
  MaskNet(ModelConfig cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  NamedTensor& tensor(const std::string& name);

  std::vector<TensorF*> trainable_values();
  std::vector<const TensorF*> trainable_grads() const;
  std::vector<TensorF*> trainable_grads_mut();
  void zero_grads();

  // Builds the forward pass on the given graph. mix_norm is a
  // [B,1,T,F] input id; voice/face are [B,d] ids or -1 when absent.
  // Returns the mask id, shape [B,T,F].
  Graph<float>::Id build_forward(Graph<float>& g, Graph<float>::Id mix_norm,
                                 Graph<float>::Id voice_emb, Graph<float>::Id face_emb,
                                 bool training);

  // Eval-mode forward for a single sample; embeddings may be null when
  // the mode does not use them.
  Mask forward(const std::vector<float>& mix_norm, long frames, const std::vector<float>* voice,
               const std::vector<float>* face);

 private:
  ModelConfig cfg_;
  std::vector<NamedTensor> tensors_;
  void init_params(uint64_t seed);
};

// Pointwise magnitude scaling; the mixture phase is untouched.
ComplexSpectrogram apply_mask(const ComplexSpectrogram& mix, const Mask& mask);

}  // namespace msep
