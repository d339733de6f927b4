#pragma once

#include <complex>

#include "polyvox/common.hpp"

namespace polyvox::dsp {

using ComplexMatrix = Eigen::MatrixXcd;

struct StftConfig {
  int fft_size = 1024;   // power of two
  int win_length = 1024; // <= fft_size, hann
  int hop = 256;
  bool centered = true;  // reflect-pad fft_size/2 on both sides
};

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Frame count of a centered STFT: floor(n / hop) + 1.
Eigen::Index frame_count(Eigen::Index n_samples, int hop);

// Rows = frames, cols = fft_size/2 + 1 bins.
ComplexMatrix stft(const Vector& x, const StftConfig& cfg);
Matrix magnitude(const ComplexMatrix& spec);

// Weighted overlap-add inverse; returns (frames - 1) * hop samples.
Vector istft(const ComplexMatrix& spec, const StftConfig& cfg);

struct MelConfig {
  int sample_rate = 16000;
  int mel_bins = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;
};

// mel_bins x (fft_size/2 + 1), triangular filters on the HTK mel scale.
Matrix mel_filterbank(const MelConfig& cfg, int fft_size);

// log(max(mag * fb^T, floor)); rows = frames, cols = mel bins.
Matrix log_mel(const Matrix& mag, const Matrix& fb, double log_floor);

struct PitchConfig {
  double fmin = 50.0;
  double fmax = 600.0;
  double voicing_threshold = 0.45;  // normalized autocorrelation
  double energy_floor = 1e-8;       // frame power below this is unvoiced
  int win_length = 1024;
  int hop = 256;
};

// Autocorrelation pitch per frame (same centered framing as the STFT);
// 0 marks unvoiced frames.
Vector track_pitch(const Vector& x, int sample_rate, const PitchConfig& cfg);

}  // namespace polyvox::dsp
