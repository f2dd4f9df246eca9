// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "msep/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "msep/errors.hpp"

namespace msep {

namespace {

constexpr uint16_t kFormatPcm = 0x0001;

uint16_t read_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

}  // namespace

int16_t sample_to_s16(double x) {
  double v = std::lrint(x * 32768.0);
  if (v > 32767.0) v = 32767.0;
  if (v < -32768.0) v = -32768.0;
  return static_cast<int16_t>(v);
}

std::vector<int16_t> read_wav_s16(const std::string& path, int* sample_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("wav: cannot open " + path);

  uint8_t riff[12];
  if (!in.read(reinterpret_cast<char*>(riff), 12))
    throw IoError("wav: " + path + ": truncated RIFF header");
  if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(riff + 8, "WAVE", 4) != 0)
    throw IoError("wav: " + path + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  std::vector<int16_t> samples;
  bool have_data = false;

  uint8_t header[8];
  while (in.read(reinterpret_cast<char*>(header), 8)) {
    uint32_t chunk_size = read_u32(header + 4);
    if (std::memcmp(header, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw IoError("wav: " + path + ": fmt chunk too small");
      std::vector<uint8_t> fmt(chunk_size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), chunk_size))
        throw IoError("wav: " + path + ": truncated fmt chunk");
      format = read_u16(fmt.data());
      channels = read_u16(fmt.data() + 2);
      rate = read_u32(fmt.data() + 4);
      bits = read_u16(fmt.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(header, "data", 4) == 0) {
      if (!have_fmt) throw IoError("wav: " + path + ": data chunk before fmt");
      if (format != kFormatPcm)
        throw IoError("wav: " + path + ": unsupported format tag " + std::to_string(format) +
                      " (PCM only)");
      if (channels != 1)
        throw IoError("wav: " + path + ": " + std::to_string(channels) +
                      " channels; only mono is supported");
      if (bits != 16)
        throw IoError("wav: " + path + ": " + std::to_string(bits) +
                      " bits per sample; only 16-bit PCM is supported");
      size_t n = chunk_size / 2;
      samples.resize(n);
      if (!in.read(reinterpret_cast<char*>(samples.data()), n * 2))
        throw IoError("wav: " + path + ": truncated data chunk");
      have_data = true;
      break;
    } else {
      // skip unknown chunk (word-aligned)
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
      if (!in) throw IoError("wav: " + path + ": truncated chunk");
    }
  }
  if (!have_data) throw IoError("wav: " + path + ": missing data chunk");
  if (rate == 0) throw IoError("wav: " + path + ": zero sample rate");
  if (sample_rate) *sample_rate = static_cast<int>(rate);
  return samples;
}

void write_wav_s16(const std::string& path, const std::vector<int16_t>& samples,
                   int sample_rate) {
  if (sample_rate <= 0) throw ValidationError("wav: sample_rate must be positive");
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);

  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(sample_rate));
  put_u32(out, static_cast<uint32_t>(sample_rate) * 2);  // byte rate
  put_u16(out, 2);                                       // block align
  put_u16(out, 16);                                      // bits per sample
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("wav: cannot create " + path);
  f.write(reinterpret_cast<const char*>(out.data()), out.size());
  f.write(reinterpret_cast<const char*>(samples.data()), data_bytes);
  if (!f) throw IoError("wav: write failed on " + path);
}

Waveform read_wav(const std::string& path) {
  int rate = 0;
  std::vector<int16_t> raw = read_wav_s16(path, &rate);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) w.samples[i] = s16_to_sample(raw[i]);
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  w.validate();
  std::vector<int16_t> raw(w.samples.size());
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = sample_to_s16(w.samples[i]);
  write_wav_s16(path, raw, w.sample_rate);
}

}  // namespace msep
