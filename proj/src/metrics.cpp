// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace remixsep {

namespace {
constexpr double kLog10Factor = 10.0 / 2.302585092994045684;  // 10 / ln(10)

double db10(double x) { return 10.0 * std::log10(x); }
}  // namespace

double thresholded_snr_loss(std::span<const Scalar> reference, std::span<const Scalar> estimate,
                            double tau) {
  RS_REQUIRE(tau > 0.0, "thresholded_snr_loss: tau must be positive");
  RS_REQUIRE(reference.size() == estimate.size(), "thresholded_snr_loss: length mismatch");
  const double ref_energy = sum_squares(reference);
  // Reject provable zeros; non-finite references flow through as a NaN loss
  // so the trainer's divergence handler sees them.
  RS_REQUIRE(!(ref_energy <= 0.0), "thresholded_snr_loss: reference is identically zero");
  double resid = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - estimate[i];
    resid += d * d;
  }
  return db10(resid + tau * ref_energy) - db10(ref_energy);
}

Value thresholded_snr_loss(Tape& t, Value reference, Value estimate, double tau) {
  RS_REQUIRE(tau > 0.0, "thresholded_snr_loss: tau must be positive");
  const Tensor& ref = t.val(reference);
  RS_REQUIRE(ref.numel() == t.val(estimate).numel(), "thresholded_snr_loss: length mismatch");
  const double ref_energy = sum_squares(ref.flat());
  RS_REQUIRE(!(ref_energy <= 0.0), "thresholded_snr_loss: reference is identically zero");
  Value resid = ad::sumsq(t, ad::sub(t, reference, estimate));
  Value arg;
  if (t.requires_grad(reference)) {
    arg = ad::add(t, resid, ad::scale(t, ad::sumsq(t, reference), tau));
  } else {
    arg = ad::add_scalar(t, resid, tau * ref_energy);
  }
  return ad::add_scalar(t, ad::scale(t, ad::logv(t, arg), kLog10Factor), -db10(ref_energy));
}

double si_sdr(std::span<const Scalar> reference, std::span<const Scalar> estimate) {
  RS_REQUIRE(reference.size() == estimate.size(), "si_sdr: length mismatch");
  const double ref_energy = sum_squares(reference);
  const double est_energy = sum_squares(estimate);
  if (ref_energy <= 0.0 || est_energy <= 0.0)
    throw std::domain_error("si_sdr: undefined for identically zero signals");
  const double alpha = dot(estimate, reference) / ref_energy;
  const double target_energy = alpha * alpha * ref_energy;
  double dist = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = alpha * reference[i] - estimate[i];
    dist += d * d;
  }
  if (target_energy <= 0.0) return -kSiSdrCapDb;
  if (dist <= 0.0) return kSiSdrCapDb;
  return std::clamp(db10(target_energy / dist), -kSiSdrCapDb, kSiSdrCapDb);
}

std::vector<double> evaluate_separation(const Tensor& estimates, const Tensor& references) {
  RS_REQUIRE(estimates.rank() == 3 && references.rank() == 3,
             "evaluate_separation: expects [B, N, T] tensors");
  RS_REQUIRE(estimates.dim(0) == references.dim(0) && estimates.dim(2) == references.dim(2),
             "evaluate_separation: batch/length mismatch");
  const std::int64_t b = estimates.dim(0), n = estimates.dim(1);
  const std::int64_t m = references.dim(1), len = estimates.dim(2);
  RS_REQUIRE(m <= n, "evaluate_separation: more references than estimates");

  const SelectionIndex sel = select_top_sources(estimates, m);
  std::vector<double> scores(static_cast<std::size_t>(b));
  std::vector<std::int64_t> perm(static_cast<std::size_t>(m));
  for (std::int64_t bi = 0; bi < b; ++bi) {
    // Pairwise SI-SDR between each reference and each selected estimate.
    std::vector<double> table(static_cast<std::size_t>(m * m));
    for (std::int64_t i = 0; i < m; ++i) {
      std::span<const Scalar> ref(references.data() + (bi * m + i) * len,
                                  static_cast<std::size_t>(len));
      for (std::int64_t j = 0; j < m; ++j) {
        std::span<const Scalar> est(estimates.data() + (bi * n + sel.at(bi, j)) * len,
                                    static_cast<std::size_t>(len));
        double s;
        try {
          s = si_sdr(ref, est);
        } catch (const std::domain_error&) {
          s = -kSiSdrCapDb;  // silent estimate channel
        }
        table[i * m + j] = s;
      }
    }
    std::iota(perm.begin(), perm.end(), 0);
    double best = -std::numeric_limits<double>::infinity();
    do {
      double mean = 0.0;
      for (std::int64_t i = 0; i < m; ++i) mean += table[i * m + perm[i]];
      best = std::max(best, mean / static_cast<double>(m));
    } while (std::next_permutation(perm.begin(), perm.end()));
    scores[static_cast<std::size_t>(bi)] = best;
  }
  return scores;
}

std::vector<double> evaluate_separation(const SourceEstimates& estimates,
                                        const SourceEstimates& references) {
  return evaluate_separation(estimates.sources, references.sources);
}

}  // namespace remixsep
