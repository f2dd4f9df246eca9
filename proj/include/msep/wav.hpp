// Copyright 2026 msep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msep/waveform.hpp"

namespace msep {

// RIFF/WAVE, PCM 16-bit little-endian, mono only. Stereo and non-PCM
// inputs are rejected; no resampling is performed anywhere.

Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Raw s16 access; mixtures are summed in the integer domain so that
// target + interferer == mixture holds exactly on the emitted files.
std::vector<int16_t> read_wav_s16(const std::string& path, int* sample_rate);
void write_wav_s16(const std::string& path, const std::vector<int16_t>& samples, int sample_rate);

int16_t sample_to_s16(double x);
inline double s16_to_sample(int16_t v) { return static_cast<double>(v) / 32768.0; }

}  // namespace msep
