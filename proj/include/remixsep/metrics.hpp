// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_METRICS_HPP_
#define REMIXSEP_METRICS_HPP_

#include <optional>
#include <span>
#include <vector>

#include "remixsep/autodiff.hpp"
#include "remixsep/signals.hpp"

namespace remixsep {

struct LossConfig {
  double tau = 1e-3;                  // soft threshold; clamps the SNR at -10*log10(tau) dB
  std::optional<double> l_thres;      // loss-zeroing threshold in dB (off when absent)
};

// Sentinel magnitude used when SI-SDR diverges (perfect or orthogonal
// estimates); keeps metric logs finite.
inline constexpr double kSiSdrCapDb = 300.0;

// Negative thresholded SNR in dB:
//   10*log10(||y - e||^2 + tau*||y||^2) - 10*log10(||y||^2).
// Bounded below by 10*log10(tau); throws std::invalid_argument on a zero
// reference.
double thresholded_snr_loss(std::span<const Scalar> reference, std::span<const Scalar> estimate,
                            double tau = 1e-3);
// Tape version; `reference` may be a constant or gradient-carrying value.
Value thresholded_snr_loss(Tape& t, Value reference, Value estimate, double tau = 1e-3);

// Scale-invariant signal-to-distortion ratio in dB, clamped to
// [-kSiSdrCapDb, kSiSdrCapDb]. Throws std::domain_error when either signal is
// identically zero.
double si_sdr(std::span<const Scalar> reference, std::span<const Scalar> estimate);

// Best-permutation SI-SDR per mixture. Selects the top-power estimates
// (as many as there are references), then maximises the mean SI-SDR over
// reference-to-estimate permutations. Zero estimate channels score the
// negative sentinel instead of throwing. references:[B, M, T] with M <= N.
std::vector<double> evaluate_separation(const SourceEstimates& estimates,
                                        const SourceEstimates& references);
std::vector<double> evaluate_separation(const Tensor& estimates, const Tensor& references);

}  // namespace remixsep

#endif  // REMIXSEP_METRICS_HPP_
