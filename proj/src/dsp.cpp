#include "polyvox/dsp.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace polyvox::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

Vector hann(int n) {
  Vector w(n);
  for (int i = 0; i < n; ++i)
    w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

// Reflect-pad `pad` samples on both sides.
Vector reflect_pad(const Vector& x, Eigen::Index pad) {
  const Eigen::Index n = x.size();
  Vector y(n + 2 * pad);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    Eigen::Index src = i - pad;
    if (src < 0) src = -src;
    if (src >= n) src = 2 * (n - 1) - src;
    src = std::clamp<Eigen::Index>(src, 0, n - 1);
    y(i) = x(src);
  }
  return y;
}

}  // namespace

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (!is_pow2(int(n))) throw ShapeError("fft size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * std::numbers::pi / double(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& c : a) c /= double(n);
}

Eigen::Index frame_count(Eigen::Index n_samples, int hop) {
  return n_samples / hop + 1;
}

ComplexMatrix stft(const Vector& x, const StftConfig& cfg) {
  if (!is_pow2(cfg.fft_size)) throw ConfigError("stft: fft_size must be a power of two");
  if (cfg.win_length > cfg.fft_size) throw ConfigError("stft: win_length > fft_size");
  if (x.size() == 0) throw DataError("stft: empty signal");

  const Eigen::Index pad = cfg.centered ? cfg.fft_size / 2 : 0;
  Vector padded = cfg.centered ? reflect_pad(x, pad) : x;
  const Eigen::Index T = cfg.centered
                             ? frame_count(x.size(), cfg.hop)
                             : (x.size() - cfg.fft_size) / cfg.hop + 1;
  const int bins = cfg.fft_size / 2 + 1;
  const Vector win = hann(cfg.win_length);
  const int off = (cfg.fft_size - cfg.win_length) / 2;

  ComplexMatrix spec(T, bins);
  std::vector<std::complex<double>> buf(size_t(cfg.fft_size));
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index start = t * cfg.hop;
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
    for (int i = 0; i < cfg.win_length; ++i) {
      Eigen::Index src = start + i;
      double v = src < padded.size() ? padded(src) : 0.0;
      buf[size_t(off + i)] = v * win(i);
    }
    fft(buf, false);
    for (int b = 0; b < bins; ++b) spec(t, b) = buf[size_t(b)];
  }
  return spec;
}

Matrix magnitude(const ComplexMatrix& spec) { return spec.cwiseAbs(); }

Vector istft(const ComplexMatrix& spec, const StftConfig& cfg) {
  const Eigen::Index T = spec.rows();
  const int bins = cfg.fft_size / 2 + 1;
  if (spec.cols() != bins) throw ShapeError("istft: bin count mismatch");
  const Vector win = hann(cfg.win_length);
  const int off = (cfg.fft_size - cfg.win_length) / 2;

  const Eigen::Index total = (T - 1) * cfg.hop + cfg.fft_size;
  Vector acc = Vector::Zero(total);
  Vector wsum = Vector::Zero(total);
  std::vector<std::complex<double>> buf(size_t(cfg.fft_size));
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int b = 0; b < bins; ++b) buf[size_t(b)] = spec(t, b);
    for (int b = bins; b < cfg.fft_size; ++b)
      buf[size_t(b)] = std::conj(spec(t, cfg.fft_size - b));
    fft(buf, true);
    const Eigen::Index start = t * cfg.hop;
    for (int i = 0; i < cfg.win_length; ++i) {
      acc(start + off + i) += buf[size_t(off + i)].real() * win(i);
      wsum(start + off + i) += win(i) * win(i);
    }
  }
  for (Eigen::Index i = 0; i < total; ++i)
    if (wsum(i) > 1e-9) acc(i) /= wsum(i);

  // Drop the centering pad; output covers (T-1) * hop source samples.
  const Eigen::Index pad = cfg.centered ? cfg.fft_size / 2 : 0;
  const Eigen::Index n_out = (T - 1) * cfg.hop;
  if (n_out <= 0) return Vector::Zero(0);
  return acc.segment(pad, n_out);
}

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

Matrix mel_filterbank(const MelConfig& cfg, int fft_size) {
  const int bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> centers(size_t(cfg.mel_bins) + 2);
  for (size_t i = 0; i < centers.size(); ++i) {
    double m = mel_lo + (mel_hi - mel_lo) * double(i) / double(cfg.mel_bins + 1);
    centers[i] = mel_to_hz(m);
  }
  Matrix fb = Matrix::Zero(cfg.mel_bins, bins);
  for (int m = 0; m < cfg.mel_bins; ++m) {
    double lo = centers[size_t(m)], mid = centers[size_t(m) + 1], hi = centers[size_t(m) + 2];
    for (int b = 0; b < bins; ++b) {
      double f = double(b) * cfg.sample_rate / fft_size;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb(m, b) = w;
    }
  }
  return fb;
}

Matrix log_mel(const Matrix& mag, const Matrix& fb, double log_floor) {
  Matrix mel = mag * fb.transpose();
  return mel.array().max(log_floor).log();
}

Vector track_pitch(const Vector& x, int sample_rate, const PitchConfig& cfg) {
  const Eigen::Index T = frame_count(x.size(), cfg.hop);
  const Eigen::Index pad = cfg.win_length / 2;
  Vector padded = reflect_pad(x, pad);

  const int lag_min = std::max(1, int(std::floor(double(sample_rate) / cfg.fmax)));
  const int lag_max = int(std::ceil(double(sample_rate) / cfg.fmin));
  if (lag_max >= cfg.win_length)
    throw ConfigError("track_pitch: window too short for fmin");

  Vector f0 = Vector::Zero(T);
  Vector frame(cfg.win_length);
  std::vector<double> corr(size_t(lag_max) + 2, 0.0);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index start = t * cfg.hop;
    for (int i = 0; i < cfg.win_length; ++i) {
      Eigen::Index src = start + i;
      frame(i) = src < padded.size() ? padded(src) : 0.0;
    }
    frame.array() -= frame.mean();
    const double r0 = frame.squaredNorm() / cfg.win_length;
    if (r0 < cfg.energy_floor) continue;

    for (int lag = lag_min - 1; lag <= lag_max + 1 && lag < cfg.win_length; ++lag) {
      double s = 0.0;
      for (int i = 0; i + lag < cfg.win_length; ++i) s += frame(i) * frame(i + lag);
      corr[size_t(lag)] = s / ((cfg.win_length - lag) * r0);
    }
    double best = -1.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, corr[size_t(lag)]);
    if (best < cfg.voicing_threshold) continue;

    // Shortest local maximum close to the global peak avoids octave-down
    // errors on strongly periodic signals where period multiples tie.
    int pick = 0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      bool local_max =
          corr[size_t(lag)] >= corr[size_t(lag) - 1] && corr[size_t(lag)] >= corr[size_t(lag) + 1];
      if (local_max && corr[size_t(lag)] >= 0.97 * best) {
        pick = lag;
        break;
      }
    }
    if (pick == 0) continue;
    double refined = double(pick);
    if (pick > lag_min && pick < lag_max) {
      double a = corr[size_t(pick) - 1], b = corr[size_t(pick)], c = corr[size_t(pick) + 1];
      double denom = a - 2.0 * b + c;
      if (std::abs(denom) > 1e-12) refined += 0.5 * (a - c) / denom;
    }
    double hz = double(sample_rate) / refined;
    f0(t) = std::clamp(hz, cfg.fmin, cfg.fmax);
  }
  return f0;
}

}  // namespace polyvox::dsp
