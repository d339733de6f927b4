#pragma once

#include <filesystem>

#include "polyvox/common.hpp"

namespace polyvox {

struct Waveform {
  Vector samples;  // [-1, 1] nominal
  int sample_rate = 16000;

  double duration_seconds() const {
    return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
  }
};

// Reads RIFF/WAVE, PCM16 or float32, any channel count (averaged to mono).
Waveform read_wav(const std::filesystem::path& path);

// Linear-interpolation resampler.
Waveform resample(const Waveform& in, int target_rate);

// read + mono + resample to 16 kHz; errors carry the path.
Waveform load_audio_16k(const std::filesystem::path& path);

// 16-bit PCM mono.
void write_wav(const std::filesystem::path& path, const Waveform& wav);

}  // namespace polyvox
