// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_ASSIGNMENTS_HPP_
#define REMIXSEP_ASSIGNMENTS_HPP_

#include <functional>
#include <span>
#include <vector>

#include "remixsep/metrics.hpp"
#include "remixsep/tensor.hpp"

namespace remixsep {

using SignalLossFn =
    std::function<double(std::span<const Scalar>, std::span<const Scalar>)>;

SignalLossFn default_signal_loss(double tau = 1e-3);

// Result of an exhaustive assignment search. Which field is populated depends
// on the operation; loss_db always equals the objective evaluated at the
// returned assignment.
struct AssignmentResult {
  std::vector<int> permutation;           // pit: estimate index per reference
  std::vector<int> mix_assignment;        // mixit: mixture index (0/1) per estimate
  std::vector<std::uint8_t> pair_select1;  // remix-pair p1 (1 -> first pseudo-mixture)
  std::vector<std::uint8_t> pair_select2;  // remix-pair p2
  double loss_db = 0.0;
  std::int64_t candidates_evaluated = 0;
};

// Minimum over injective reference->estimate assignments of the summed loss.
// references:[N_ref, T], estimates:[N_est, T], N_ref <= N_est <= 8.
AssignmentResult pit_loss(const Tensor& references, const Tensor& estimates,
                          const SignalLossFn& loss_fn);

// Minimum over binary 2xN mixing matrices with unit column sums.
// mixtures:[2, T], estimates:[N, T], 2 <= N <= 12.
AssignmentResult mixit_loss(const Tensor& mixtures, const Tensor& estimates,
                            const SignalLossFn& loss_fn);

// Minimum over pairs of binary selection vectors with exactly N_R/2 ones of
//   loss(x1, p1*s1 + (1-p2)*s2) + loss(x2, (1-p1)*s1 + p2*s2).
// N_R even, N_R <= 6.
AssignmentResult remix_pair_loss(std::span<const Scalar> x1, std::span<const Scalar> x2,
                                 const Tensor& solver_out1, const Tensor& solver_out2,
                                 const SignalLossFn& loss_fn);

// Per-item optimal channel permutation aligning solver outputs to shuffled
// targets, plus the batch-mean minimal loss. N_R <= 5.
struct AlignmentResult {
  std::vector<std::int64_t> permutations;  // flattened [B, N_R]: estimate per target channel
  double mean_loss_db = 0.0;
  std::int64_t candidates_per_item = 0;
  std::int64_t at(std::int64_t b, std::int64_t n, std::int64_t n_r) const {
    return permutations[b * n_r + n];
  }
};
AlignmentResult align_to_shuffler(const Tensor& shuffled_targets, const Tensor& solver_out,
                                  const SignalLossFn& loss_fn);

// Gram-expansion searches over the thresholded SNR objective; same argmin and
// loss as the generic versions (up to rounding) in O(candidates * N^2) after
// one pass over the signals. Used inside training steps where the generic
// O(candidates * N * T) evaluation would dominate the step cost.
AssignmentResult mixit_search_fast(std::span<const Scalar> x1, std::span<const Scalar> x2,
                                   const Tensor& estimates, double tau);
AssignmentResult remix_pair_search_fast(std::span<const Scalar> x1, std::span<const Scalar> x2,
                                        const Tensor& solver_out1, const Tensor& solver_out2,
                                        double tau);

}  // namespace remixsep

#endif  // REMIXSEP_ASSIGNMENTS_HPP_
