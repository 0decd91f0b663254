// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_REMIXER_HPP_
#define REMIXSEP_REMIXER_HPP_

#include <random>
#include <vector>

#include "remixsep/autodiff.hpp"
#include "remixsep/tensor.hpp"

namespace remixsep {

// Where the two dominant sources land when remixing between two mixtures.
// `both_tops_to_first` follows the literal placement rule (the highest-power
// source of each mixture goes to the first pseudo-mixture); `tops_stay_home`
// keeps each mixture's dominant source in its own pseudo-mixture.
enum class PairPlacement { both_tops_to_first, tops_stay_home };

// Binary selection vectors for between-two-mixtures remixing. Entry n of pi1
// sends source n of the first mixture to pseudo-mixture 1 (when 1) or 2
// (when 0); pi2 does the opposite for the second mixture's sources.
struct PairRemixPlan {
  std::vector<std::uint8_t> pi1;
  std::vector<std::uint8_t> pi2;
  int n_remix() const { return static_cast<int>(pi1.size()); }
};

// One batch permutation per output channel; perms[n][origin] = destination.
// Channel 0 is the identity. No two sources of a pseudo-mixture may originate
// from the same input mixture.
struct BatchShuffleSpec {
  std::vector<std::vector<std::int64_t>> perms;
  std::uint64_t seed = 0;
  std::int64_t batch() const { return perms.empty() ? 0 : static_cast<std::int64_t>(perms[0].size()); }
  std::int64_t channels() const { return static_cast<std::int64_t>(perms.size()); }
  std::int64_t origin_of(std::int64_t dest, std::int64_t channel) const {
    return inverse_[channel][dest];
  }
  std::vector<std::vector<std::int64_t>> inverse_;  // filled by make/finalize
  void finalize();                                   // builds inverse_, validates bijections
};

bool satisfies_no_recollision(const BatchShuffleSpec& spec);

PairRemixPlan make_pair_plan(std::span<const Scalar> powers1, std::span<const Scalar> powers2,
                             std::mt19937_64& rng,
                             PairPlacement placement = PairPlacement::both_tops_to_first);

// sources1/2:[N_R, T] -> pseudo-mixtures (x1~, x2~) each [T].
std::pair<Tensor, Tensor> remix_pair(const Tensor& sources1, const Tensor& sources2,
                                     const PairRemixPlan& plan);
std::pair<Value, Value> remix_pair(Tape& t, Value sources1, Value sources2,
                                   const PairRemixPlan& plan);

// Rejection-samples channel permutations until no-recollision holds.
// Requires B >= N_R; throws InfeasibleError otherwise (or after the retry cap).
BatchShuffleSpec make_batch_shuffle(std::int64_t batch, std::int64_t n_remix,
                                    std::mt19937_64& rng);

// sources:[B, N_R, T] -> pseudo-mixtures [B, T]: x~_b = sum_n s[origin_of(b, n), n].
Tensor remix_batch(const Tensor& sources, const BatchShuffleSpec& spec);
Value remix_batch(Tape& t, Value sources, const BatchShuffleSpec& spec);

// The per-channel shuffle without the channel sum: out[b, n] =
// sources[origin_of(b, n), n]. Row (b, n) is the n-th target of
// pseudo-mixture b.
Tensor shuffle_sources(const Tensor& sources, const BatchShuffleSpec& spec);

// Inverse of the shuffle on aligned solver outputs, then channel sum:
// reconstructed_b = sum_n aligned[perms[n][b], n].
Tensor unshuffle_and_remix(const Tensor& aligned, const BatchShuffleSpec& spec);
Value unshuffle_and_remix(Tape& t, Value aligned, const BatchShuffleSpec& spec);

}  // namespace remixsep

#endif  // REMIXSEP_REMIXER_HPP_
