// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_STFT_HPP_
#define REMIXSEP_STFT_HPP_

#include <memory>

#include "remixsep/autodiff.hpp"
#include "remixsep/tensor.hpp"

namespace remixsep {

struct StftConfig {
  int fft_size = 512;
  int window_length = 400;  // Hann
  int hop_length = 160;
};

// Complex spectrogram, frame-major: re/im are [B, L, F] with F = fft/2 + 1.
struct Spectrogram {
  Tensor re;
  Tensor im;
  std::int64_t batch() const { return re.dim(0); }
  std::int64_t frames() const { return re.dim(1); }
  std::int64_t bins() const { return re.dim(2); }
};

// Precomputed analysis/synthesis constants for one StftConfig. The transform
// is a windowed real DFT written as dense matrix products so it runs on the
// autodiff tape with exact adjoints. Signals are framed against a virtual
// zero padding of one window length on each side; synthesis divides by the
// accumulated squared window, which makes analyze->synthesize exact (up to
// float rounding) for every sample.
class StftKernels {
 public:
  explicit StftKernels(const StftConfig& cfg);

  const StftConfig& config() const { return cfg_; }
  int bins() const { return cfg_.fft_size / 2 + 1; }
  int pad() const { return cfg_.window_length; }
  std::int64_t num_frames(std::int64_t samples) const;
  Tensor ola_denominator(std::int64_t samples) const;  // [T], strictly positive

  const Tensor& window() const { return window_; }
  const Tensor& dft_re() const { return dft_re_; }    // [W, F]
  const Tensor& dft_im() const { return dft_im_; }    // [W, F]
  const Tensor& idft_re() const { return idft_re_; }  // [F, W]
  const Tensor& idft_im() const { return idft_im_; }  // [F, W]

  // wave:[B, T] -> (re, im) each [B, L, F].
  std::pair<Value, Value> analyze(Tape& t, Value wave) const;
  // re/im:[..., L, F] -> [..., T]; leading dims pass through.
  Value synthesize(Tape& t, Value re, Value im, std::int64_t samples) const;

 private:
  StftConfig cfg_;
  Tensor window_;
  Tensor dft_re_, dft_im_;
  Tensor idft_re_, idft_im_;
};

std::shared_ptr<const StftKernels> get_stft_kernels(const StftConfig& cfg);

// Plain-tensor front ends used by evaluation and tests.
Spectrogram stft_analyze(const Tensor& wave_bt, const StftConfig& cfg);
Tensor stft_synthesize(const Spectrogram& spec, const StftConfig& cfg, std::int64_t samples);

}  // namespace remixsep

#endif  // REMIXSEP_STFT_HPP_
