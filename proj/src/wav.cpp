#include "polyvox/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace polyvox {

namespace {

uint32_t read_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint16_t read_u16le(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return uint16_t(b[0] | (b[1] << 8));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio file: " + path.string());

  char riff[4], wave[4];
  in.read(riff, 4);
  read_u32le(in);
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
    throw ParseError("not a RIFF/WAVE file: " + path.string());

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<char> data;

  while (in) {
    char id[4];
    in.read(id, 4);
    if (!in) break;
    uint32_t size = read_u32le(in);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_u16le(in);
      channels = read_u16le(in);
      rate = read_u32le(in);
      read_u32le(in);  // byte rate
      read_u16le(in);  // block align
      bits = read_u16le(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (rate == 0 || channels == 0)
    throw ParseError("missing fmt chunk: " + path.string());
  if (data.empty()) throw DataError("audio file has no samples: " + path.string());

  size_t frame_count = 0;
  Vector mono;
  if (format == 1 && bits == 16) {
    frame_count = data.size() / (2 * channels);
    mono.resize(Eigen::Index(frame_count));
    const int16_t* s = reinterpret_cast<const int16_t*>(data.data());
    for (size_t i = 0; i < frame_count; ++i) {
      double acc = 0;
      for (int c = 0; c < channels; ++c) acc += double(s[i * channels + c]);
      mono(Eigen::Index(i)) = acc / (channels * 32768.0);
    }
  } else if (format == 3 && bits == 32) {
    frame_count = data.size() / (4 * channels);
    mono.resize(Eigen::Index(frame_count));
    const float* s = reinterpret_cast<const float*>(data.data());
    for (size_t i = 0; i < frame_count; ++i) {
      double acc = 0;
      for (int c = 0; c < channels; ++c) acc += double(s[i * channels + c]);
      mono(Eigen::Index(i)) = acc / channels;
    }
  } else {
    throw ParseError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                     std::to_string(bits) + " bit): " + path.string());
  }
  if (frame_count == 0) throw DataError("audio file has no samples: " + path.string());
  return {std::move(mono), int(rate)};
}

Waveform resample(const Waveform& in, int target_rate) {
  if (in.sample_rate == target_rate) return in;
  if (in.samples.size() < 2) throw DataError("audio too short to resample");
  double ratio = double(in.sample_rate) / target_rate;
  Eigen::Index n_out = Eigen::Index(std::floor(double(in.samples.size() - 1) / ratio)) + 1;
  Vector out(n_out);
  for (Eigen::Index i = 0; i < n_out; ++i) {
    double pos = i * ratio;
    Eigen::Index lo = Eigen::Index(pos);
    Eigen::Index hi = std::min(lo + 1, Eigen::Index(in.samples.size() - 1));
    double frac = pos - double(lo);
    out(i) = in.samples(lo) * (1.0 - frac) + in.samples(hi) * frac;
  }
  return {std::move(out), target_rate};
}

Waveform load_audio_16k(const std::filesystem::path& path) {
  return resample(read_wav(path), 16000);
}

void write_wav(const std::filesystem::path& path, const Waveform& wav) {
  auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path.string());

  auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };

  uint32_t n = uint32_t(wav.samples.size());
  out.write("RIFF", 4);
  u32(36 + n * 2);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(uint32_t(wav.sample_rate));
  u32(uint32_t(wav.sample_rate) * 2);
  u16(2);
  u16(16);
  out.write("data", 4);
  u32(n * 2);
  for (Eigen::Index i = 0; i < wav.samples.size(); ++i) {
    double v = std::clamp(wav.samples(i), -1.0, 1.0);
    int16_t s = int16_t(std::lrint(v * 32767.0));
    out.write(reinterpret_cast<const char*>(&s), 2);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace polyvox
