#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "polyvox/dsp.hpp"
#include "polyvox/wav.hpp"

using namespace polyvox;

namespace {

Vector sine(double hz, double seconds, int rate, double amp = 0.5) {
  Eigen::Index n = Eigen::Index(seconds * rate);
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x(i) = amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / rate);
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("dsp");

TEST_CASE("centered framing: 16000 samples at hop 256 gives 63 frames") {
  CHECK(dsp::frame_count(16000, 256) == 63);
  dsp::StftConfig cfg;
  auto spec = dsp::stft(sine(220.0, 1.0, 16000), cfg);
  CHECK(spec.rows() == 63);
  CHECK(spec.cols() == 513);
}

TEST_CASE("stft places a pure tone in the right bin") {
  dsp::StftConfig cfg;
  // bin width = 16000/1024 = 15.625 Hz; 250 Hz -> bin 16
  auto mag = dsp::magnitude(dsp::stft(sine(250.0, 0.5, 16000), cfg));
  Eigen::Index t = mag.rows() / 2;
  Eigen::Index peak;
  mag.row(t).maxCoeff(&peak);
  CHECK(peak == 16);
}

TEST_CASE("istft reconstructs the interior of a signal") {
  dsp::StftConfig cfg;
  Vector x = sine(330.0, 0.7, 16000, 0.4);
  auto spec = dsp::stft(x, cfg);
  Vector y = dsp::istft(spec, cfg);
  CHECK(y.size() == (spec.rows() - 1) * cfg.hop);
  double err = 0.0;
  for (Eigen::Index i = cfg.fft_size; i < y.size() - cfg.fft_size; ++i)
    err = std::max(err, std::abs(y(i) - x(i)));
  CHECK(err < 1e-8);
}

TEST_CASE("mel filterbank shape and coverage") {
  dsp::MelConfig mc;
  Matrix fb = dsp::mel_filterbank(mc, 1024);
  CHECK(fb.rows() == 80);
  CHECK(fb.cols() == 513);
  CHECK(fb.minCoeff() >= 0.0);
  for (int m = 0; m < 80; ++m) CHECK(fb.row(m).sum() > 0.0);
}

TEST_CASE("pitch tracker: silence is unvoiced, pure tones within 5 Hz") {
  dsp::PitchConfig pc;
  Vector silence = Vector::Zero(16000);
  Vector f0 = dsp::track_pitch(silence, 16000, pc);
  CHECK(f0.size() == 63);
  CHECK(f0.maxCoeff() == 0.0);

  for (double hz : {220.0, 440.0, 100.0}) {
    Vector tone = sine(hz, 1.0, 16000);
    Vector t = dsp::track_pitch(tone, 16000, pc);
    int voiced = 0;
    for (Eigen::Index i = 2; i < t.size() - 2; ++i) {
      if (t(i) > 0) {
        ++voiced;
        CHECK(std::abs(t(i) - hz) < 5.0);
      }
    }
    CHECK(voiced > 50);
  }
}

TEST_CASE("wav round trip 16-bit mono") {
  auto dir = std::filesystem::temp_directory_path() / "polyvox_dsp_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "tone.wav";
  Waveform w{sine(220.0, 0.25, 16000), 16000};
  write_wav(path, w);
  Waveform r = read_wav(path);
  CHECK(r.sample_rate == 16000);
  CHECK(r.samples.size() == w.samples.size());
  double err = (r.samples - w.samples).cwiseAbs().maxCoeff();
  CHECK(err < 1.0 / 32000.0);
}

TEST_CASE("resample halves the rate") {
  Waveform w{sine(220.0, 0.5, 32000), 32000};
  Waveform r = resample(w, 16000);
  CHECK(r.sample_rate == 16000);
  CHECK(std::abs(double(r.samples.size()) - 8000.0) <= 2.0);
  dsp::PitchConfig pc;
  Vector f0 = dsp::track_pitch(r.samples, 16000, pc);
  for (Eigen::Index i = 5; i < f0.size() - 5; ++i)
    if (f0(i) > 0) CHECK(std::abs(f0(i) - 220.0) < 5.0);
}

TEST_CASE("wav reader rejects garbage") {
  auto dir = std::filesystem::temp_directory_path() / "polyvox_dsp_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "junk.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "this is not audio";
  }
  CHECK_THROWS_AS((void)read_wav(path), ParseError);
  CHECK_THROWS_AS((void)read_wav(dir / "missing.wav"), IoError);
}

TEST_SUITE_END();
