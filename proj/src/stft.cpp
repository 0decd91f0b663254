// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/stft.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace remixsep {

namespace {
constexpr Scalar kPi = 3.14159265358979323846;
}

StftKernels::StftKernels(const StftConfig& cfg) : cfg_(cfg) {
  RS_REQUIRE(cfg.fft_size > 0 && cfg.window_length > 0 && cfg.hop_length > 0,
             "stft: sizes must be positive");
  RS_REQUIRE(cfg.window_length <= cfg.fft_size, "stft: window longer than FFT size");
  RS_REQUIRE(cfg.hop_length <= cfg.window_length, "stft: hop longer than window");
  const int w = cfg.window_length;
  const int nfft = cfg.fft_size;
  const int f = bins();

  window_ = Tensor({w});
  for (int i = 0; i < w; ++i) window_.v[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / w);

  // Real DFT of the zero-padded frame: re[k] = sum_t x[t] cos(2 pi k t / N),
  // im[k] = -sum_t x[t] sin(2 pi k t / N). Only t < window_length is stored.
  dft_re_ = Tensor({w, f});
  dft_im_ = Tensor({w, f});
  for (int ti = 0; ti < w; ++ti)
    for (int k = 0; k < f; ++k) {
      const Scalar ang = 2.0 * kPi * k * ti / nfft;
      dft_re_.v[ti * f + k] = std::cos(ang);
      dft_im_.v[ti * f + k] = -std::sin(ang);
    }

  // Inverse over the stored half spectrum; interior bins carry weight 2 from
  // conjugate symmetry.
  idft_re_ = Tensor({f, w});
  idft_im_ = Tensor({f, w});
  for (int k = 0; k < f; ++k) {
    const Scalar c = (k == 0 || k == nfft - k) ? 1.0 : 2.0;
    for (int ti = 0; ti < w; ++ti) {
      const Scalar ang = 2.0 * kPi * k * ti / nfft;
      idft_re_.v[k * w + ti] = c / nfft * std::cos(ang);
      idft_im_.v[k * w + ti] = -c / nfft * std::sin(ang);
    }
  }
}

std::int64_t StftKernels::num_frames(std::int64_t samples) const {
  RS_REQUIRE(samples >= cfg_.window_length, "stft: input shorter than the analysis window");
  const std::int64_t padded = samples + 2 * pad();
  return (padded - cfg_.window_length) / cfg_.hop_length + 1;
}

Tensor StftKernels::ola_denominator(std::int64_t samples) const {
  const std::int64_t l = num_frames(samples);
  Tensor d({samples});
  for (std::int64_t li = 0; li < l; ++li) {
    const std::int64_t start = li * cfg_.hop_length - pad();
    for (int wi = 0; wi < cfg_.window_length; ++wi) {
      const std::int64_t s = start + wi;
      if (s >= 0 && s < samples) d.v[s] += window_.v[wi] * window_.v[wi];
    }
  }
  for (auto& x : d.v) x = std::max(x, 1e-12);
  return d;
}

std::pair<Value, Value> StftKernels::analyze(Tape& t, Value wave) const {
  const std::int64_t samples = t.val(wave).dim(-1);
  const std::int64_t l = num_frames(samples);
  Value frames = ad::frame_signal(t, wave, cfg_.window_length, cfg_.hop_length, pad(), l);
  Value windowed = ad::mul_rowvec(t, frames, window_);
  Value re = ad::matmul(t, windowed, t.constant(dft_re_));
  Value im = ad::matmul(t, windowed, t.constant(dft_im_));
  return {re, im};
}

Value StftKernels::synthesize(Tape& t, Value re, Value im, std::int64_t samples) const {
  Value tf = ad::add(t, ad::matmul(t, re, t.constant(idft_re_)),
                     ad::matmul(t, im, t.constant(idft_im_)));
  Value windowed = ad::mul_rowvec(t, tf, window_);
  return ad::overlap_add(t, windowed, cfg_.hop_length, pad(), samples, ola_denominator(samples));
}

std::shared_ptr<const StftKernels> get_stft_kernels(const StftConfig& cfg) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const StftKernels>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(cfg.fft_size, cfg.window_length, cfg.hop_length);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto k = std::make_shared<const StftKernels>(cfg);
  cache.emplace(key, k);
  return k;
}

Spectrogram stft_analyze(const Tensor& wave_bt, const StftConfig& cfg) {
  RS_REQUIRE(wave_bt.rank() == 2, "stft_analyze: expects [B, T]");
  RS_REQUIRE(all_finite(wave_bt), "stft_analyze: non-finite input");
  auto kernels = get_stft_kernels(cfg);
  Tape t;
  auto [re, im] = kernels->analyze(t, t.constant(wave_bt));
  return Spectrogram{t.val(re), t.val(im)};
}

Tensor stft_synthesize(const Spectrogram& spec, const StftConfig& cfg, std::int64_t samples) {
  auto kernels = get_stft_kernels(cfg);
  Tape t;
  Value out = kernels->synthesize(t, t.constant(spec.re), t.constant(spec.im), samples);
  return t.val(out);
}

}  // namespace remixsep
