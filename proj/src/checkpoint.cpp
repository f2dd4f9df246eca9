// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "msep/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace msep {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'E', 'P'};

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<char*>(&v), 8); }

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), s.size());
}

void write_tensor_data(std::ostream& out, const TensorF& t) {
  out.write(reinterpret_cast<const char*>(t.ptr()), t.numel() * sizeof(float));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw IoError("checkpoint: truncated (u32)");
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw IoError("checkpoint: truncated (u64)");
  return v;
}

double read_f64(std::istream& in) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw IoError("checkpoint: truncated (f64)");
  return v;
}

std::string read_string(std::istream& in) {
  uint32_t n = read_u32(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw IoError("checkpoint: truncated (string)");
  return s;
}

void read_tensor_data(std::istream& in, TensorF& t) {
  if (!in.read(reinterpret_cast<char*>(t.ptr()), t.numel() * sizeof(float)))
    throw IoError("checkpoint: truncated (tensor data)");
}

nlohmann::json stft_to_json(const StftConfig& c) {
  return {{"fft_size", c.fft_size},
          {"win_length", c.win_length},
          {"hop_length", c.hop_length},
          {"window", "hann"},
          {"sample_rate", c.sample_rate}};
}

StftConfig stft_from_json(const nlohmann::json& j) {
  StftConfig c;
  c.fft_size = j.at("fft_size").get<int>();
  c.win_length = j.at("win_length").get<int>();
  c.hop_length = j.at("hop_length").get<int>();
  c.sample_rate = j.at("sample_rate").get<int>();
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const MaskNet& net, const AdamState<float>& opt,
                     const StftConfig& stft_cfg, const BinStats& stats, uint64_t epoch,
                     uint64_t seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot create " + path);

  out.write(kMagic, 4);
  write_u32(out, kCheckpointVersion);

  nlohmann::json cfg;
  cfg["model"] = nlohmann::json::parse(net.config().to_json_string());
  cfg["stft"] = stft_to_json(stft_cfg);
  write_string(out, cfg.dump());

  const auto& tensors = net.tensors();
  write_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    write_string(out, t.name);
    write_u32(out, static_cast<uint32_t>(t.value.rank()));
    for (long d : t.value.shape) write_u32(out, static_cast<uint32_t>(d));
    write_tensor_data(out, t.value);
  }

  // Adam moments, aligned with the trainable tensors in order
  write_u64(out, static_cast<uint64_t>(opt.step));
  write_f64(out, opt.lr);
  write_f64(out, opt.beta1);
  write_f64(out, opt.beta2);
  write_f64(out, opt.eps);
  write_u32(out, static_cast<uint32_t>(opt.m.size()));
  for (size_t i = 0; i < opt.m.size(); ++i) {
    write_u32(out, static_cast<uint32_t>(opt.m[i].numel()));
    write_tensor_data(out, opt.m[i]);
    write_tensor_data(out, opt.v[i]);
  }

  write_u32(out, static_cast<uint32_t>(stats.bins()));
  for (double v : stats.mean) write_f64(out, v);
  for (double v : stats.stddev) write_f64(out, v);

  write_u64(out, epoch);
  write_u64(out, seed);
  if (!out) throw IoError("checkpoint: write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("checkpoint: " + path + " is not a MSEP checkpoint");
  uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version " + std::to_string(version));

  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(read_string(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad config blob: ") + e.what());
  }
  ModelConfig mcfg = ModelConfig::from_json_string(cfg.at("model").dump());
  StftConfig stft_cfg = stft_from_json(cfg.at("stft"));

  Checkpoint ck{MaskNet(mcfg, 0), AdamState<float>{}, stft_cfg, BinStats{}, 0, 0};

  uint32_t n_tensors = read_u32(in);
  if (n_tensors != ck.net.tensors().size())
    throw IoError("checkpoint: tensor count " + std::to_string(n_tensors) +
                  " does not match config (" + std::to_string(ck.net.tensors().size()) + ")");
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = read_string(in);
    NamedTensor& t = ck.net.tensor(name);
    uint32_t rank = read_u32(in);
    std::vector<long> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<long>(read_u32(in));
    if (shape != t.value.shape)
      throw IoError("checkpoint: tensor '" + name + "' has unexpected shape");
    read_tensor_data(in, t.value);
  }

  ck.opt.step = static_cast<long>(read_u64(in));
  ck.opt.lr = read_f64(in);
  ck.opt.beta1 = read_f64(in);
  ck.opt.beta2 = read_f64(in);
  ck.opt.eps = read_f64(in);
  uint32_t n_moments = read_u32(in);
  std::vector<TensorF*> trainable = ck.net.trainable_values();
  if (n_moments != trainable.size())
    throw IoError("checkpoint: moment count does not match trainable tensors");
  ck.opt.init(trainable);
  for (uint32_t i = 0; i < n_moments; ++i) {
    uint32_t numel = read_u32(in);
    if (numel != static_cast<uint32_t>(trainable[i]->numel()))
      throw IoError("checkpoint: moment size mismatch at index " + std::to_string(i));
    read_tensor_data(in, ck.opt.m[i]);
    read_tensor_data(in, ck.opt.v[i]);
  }

  uint32_t bins = read_u32(in);
  ck.stats.mean.resize(bins);
  ck.stats.stddev.resize(bins);
  for (uint32_t f = 0; f < bins; ++f) ck.stats.mean[f] = read_f64(in);
  for (uint32_t f = 0; f < bins; ++f) ck.stats.stddev[f] = read_f64(in);

  ck.epoch = read_u64(in);
  ck.seed = read_u64(in);
  return ck;
}

}  // namespace msep
