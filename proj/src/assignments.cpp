// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/assignments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

namespace remixsep {

namespace {

constexpr int kPitBound = 8;
constexpr int kMixitBound = 12;
constexpr int kPairBound = 6;
constexpr int kAlignBound = 5;

double db10(double x) { return 10.0 * std::log10(x); }

std::span<const Scalar> row(const Tensor& t, std::int64_t r) {
  const std::int64_t len = t.dim(-1);
  return {t.data() + r * len, static_cast<std::size_t>(len)};
}

// All bitmasks over `n` bits with exactly `k` set, ascending.
std::vector<unsigned> masks_with_popcount(int n, int k) {
  std::vector<unsigned> out;
  for (unsigned m = 0; m < (1u << n); ++m)
    if (std::popcount(m) == k) out.push_back(m);
  return out;
}

// q(S) = || x - sum_{n in S} s_n ||^2 from precomputed inner products.
double residual_energy(double x_energy, std::span<const double> cross,
                       std::span<const double> gram, int n, unsigned mask) {
  double q = x_energy;
  for (int a = 0; a < n; ++a) {
    if (!(mask >> a & 1u)) continue;
    q -= 2.0 * cross[a];
    for (int b = 0; b < n; ++b)
      if (mask >> b & 1u) q += gram[a * n + b];
  }
  return std::max(q, 0.0);
}

}  // namespace

SignalLossFn default_signal_loss(double tau) {
  return [tau](std::span<const Scalar> ref, std::span<const Scalar> est) {
    return thresholded_snr_loss(ref, est, tau);
  };
}

AssignmentResult pit_loss(const Tensor& references, const Tensor& estimates,
                          const SignalLossFn& loss_fn) {
  RS_REQUIRE(references.rank() == 2 && estimates.rank() == 2, "pit_loss: expects [N, T]");
  RS_REQUIRE(references.dim(1) == estimates.dim(1), "pit_loss: length mismatch");
  const int n_ref = static_cast<int>(references.dim(0));
  const int n_est = static_cast<int>(estimates.dim(0));
  RS_REQUIRE(n_ref >= 1 && n_ref <= n_est, "pit_loss: need 1 <= N_ref <= N_est");
  if (n_est > kPitBound)
    throw CapabilityError("pit_loss: instance exceeds the exhaustive search bound");

  std::vector<double> cost(static_cast<std::size_t>(n_ref * n_est));
  for (int i = 0; i < n_ref; ++i)
    for (int j = 0; j < n_est; ++j) cost[i * n_est + j] = loss_fn(row(references, i), row(estimates, j));

  AssignmentResult best;
  best.loss_db = std::numeric_limits<double>::infinity();
  std::vector<int> current(static_cast<std::size_t>(n_ref), -1);
  std::vector<bool> used(static_cast<std::size_t>(n_est), false);
  std::int64_t candidates = 0;
  // Depth-first over injective assignments.
  auto recurse = [&](auto&& self, int depth, double acc) -> void {
    if (depth == n_ref) {
      ++candidates;
      // First candidate always lands so that non-finite costs still yield a
      // well-formed (NaN-loss) result the trainer can diagnose.
      if (best.permutation.empty() || acc < best.loss_db) {
        best.loss_db = acc;
        best.permutation = current;
      }
      return;
    }
    for (int j = 0; j < n_est; ++j) {
      if (used[j]) continue;
      used[j] = true;
      current[depth] = j;
      self(self, depth + 1, acc + cost[depth * n_est + j]);
      used[j] = false;
    }
  };
  recurse(recurse, 0, 0.0);
  best.candidates_evaluated = candidates;
  return best;
}

AssignmentResult mixit_loss(const Tensor& mixtures, const Tensor& estimates,
                            const SignalLossFn& loss_fn) {
  RS_REQUIRE(mixtures.rank() == 2 && mixtures.dim(0) == 2, "mixit_loss: mixtures must be [2, T]");
  RS_REQUIRE(estimates.rank() == 2 && estimates.dim(1) == mixtures.dim(1),
             "mixit_loss: estimate shape mismatch");
  const int n = static_cast<int>(estimates.dim(0));
  RS_REQUIRE(n >= 2, "mixit_loss: need at least two estimates");
  if (n > kMixitBound)
    throw CapabilityError("mixit_loss: instance exceeds the exhaustive search bound");

  const std::int64_t len = estimates.dim(1);
  AssignmentResult best;
  best.loss_db = std::numeric_limits<double>::infinity();
  std::vector<Scalar> sum1(static_cast<std::size_t>(len)), sum2(static_cast<std::size_t>(len));
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::fill(sum1.begin(), sum1.end(), 0.0);
    std::fill(sum2.begin(), sum2.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      auto s = row(estimates, j);
      auto& dst = (mask >> j & 1u) ? sum2 : sum1;
      for (std::int64_t i = 0; i < len; ++i) dst[static_cast<std::size_t>(i)] += s[i];
    }
    const double loss = loss_fn(row(mixtures, 0), sum1) + loss_fn(row(mixtures, 1), sum2);
    if (best.mix_assignment.empty() || loss < best.loss_db) {
      best.loss_db = loss;
      best.mix_assignment.assign(static_cast<std::size_t>(n), 0);
      for (int j = 0; j < n; ++j) best.mix_assignment[j] = (mask >> j & 1u) ? 1 : 0;
    }
  }
  best.candidates_evaluated = std::int64_t{1} << n;
  return best;
}

AssignmentResult remix_pair_loss(std::span<const Scalar> x1, std::span<const Scalar> x2,
                                 const Tensor& solver_out1, const Tensor& solver_out2,
                                 const SignalLossFn& loss_fn) {
  RS_REQUIRE(solver_out1.rank() == 2 && solver_out2.rank() == 2,
             "remix_pair_loss: expects [N_R, T]");
  const int n_r = static_cast<int>(solver_out1.dim(0));
  RS_REQUIRE(n_r == solver_out2.dim(0), "remix_pair_loss: channel count mismatch");
  RS_REQUIRE(solver_out1.dim(1) == static_cast<std::int64_t>(x1.size()) &&
                 solver_out2.dim(1) == static_cast<std::int64_t>(x2.size()) &&
                 x1.size() == x2.size(),
             "remix_pair_loss: length mismatch");
  RS_REQUIRE(n_r % 2 == 0, "remix_pair_loss: N_R must be even");
  if (n_r > kPairBound)
    throw CapabilityError("remix_pair_loss: instance exceeds the exhaustive search bound");

  const std::int64_t len = solver_out1.dim(1);
  const auto masks = masks_with_popcount(n_r, n_r / 2);
  AssignmentResult best;
  best.loss_db = std::numeric_limits<double>::infinity();
  std::vector<Scalar> est1(static_cast<std::size_t>(len)), est2(static_cast<std::size_t>(len));
  for (unsigned m1 : masks) {
    for (unsigned m2 : masks) {
      std::fill(est1.begin(), est1.end(), 0.0);
      std::fill(est2.begin(), est2.end(), 0.0);
      for (int j = 0; j < n_r; ++j) {
        auto s1 = row(solver_out1, j);
        auto s2 = row(solver_out2, j);
        auto& d1 = (m1 >> j & 1u) ? est1 : est2;
        auto& d2 = (m2 >> j & 1u) ? est2 : est1;
        for (std::int64_t i = 0; i < len; ++i) {
          d1[static_cast<std::size_t>(i)] += s1[i];
          d2[static_cast<std::size_t>(i)] += s2[i];
        }
      }
      const double loss = loss_fn(x1, est1) + loss_fn(x2, est2);
      if (best.pair_select1.empty() || loss < best.loss_db) {
        best.loss_db = loss;
        best.pair_select1.assign(static_cast<std::size_t>(n_r), 0);
        best.pair_select2.assign(static_cast<std::size_t>(n_r), 0);
        for (int j = 0; j < n_r; ++j) {
          best.pair_select1[j] = (m1 >> j & 1u) ? 1 : 0;
          best.pair_select2[j] = (m2 >> j & 1u) ? 1 : 0;
        }
      }
    }
  }
  best.candidates_evaluated = static_cast<std::int64_t>(masks.size()) *
                              static_cast<std::int64_t>(masks.size());
  return best;
}

AlignmentResult align_to_shuffler(const Tensor& shuffled_targets, const Tensor& solver_out,
                                  const SignalLossFn& loss_fn) {
  RS_REQUIRE(shuffled_targets.rank() == 3 && solver_out.rank() == 3,
             "align_to_shuffler: expects [B, N_R, T]");
  RS_REQUIRE(shuffled_targets.same_shape(solver_out), "align_to_shuffler: shape mismatch");
  const std::int64_t b = shuffled_targets.dim(0);
  const int n_r = static_cast<int>(shuffled_targets.dim(1));
  const std::int64_t len = shuffled_targets.dim(2);
  if (n_r > kAlignBound)
    throw CapabilityError("align_to_shuffler: instance exceeds the exhaustive search bound");

  AlignmentResult result;
  result.permutations.resize(static_cast<std::size_t>(b * n_r));
  std::int64_t factorial = 1;
  for (int i = 2; i <= n_r; ++i) factorial *= i;
  result.candidates_per_item = factorial;

  double total = 0.0;
  std::vector<double> cost(static_cast<std::size_t>(n_r * n_r));
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n_r));
  for (std::int64_t bi = 0; bi < b; ++bi) {
    for (int i = 0; i < n_r; ++i) {
      std::span<const Scalar> tgt(shuffled_targets.data() + (bi * n_r + i) * len,
                                  static_cast<std::size_t>(len));
      for (int j = 0; j < n_r; ++j) {
        std::span<const Scalar> est(solver_out.data() + (bi * n_r + j) * len,
                                    static_cast<std::size_t>(len));
        cost[i * n_r + j] = loss_fn(tgt, est);
      }
    }
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    bool first = true;
    std::vector<std::int64_t> best_perm = perm;
    do {
      double acc = 0.0;
      for (int i = 0; i < n_r; ++i) acc += cost[i * n_r + perm[i]];
      if (first || acc < best) {
        first = false;
        best = acc;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (int i = 0; i < n_r; ++i) result.permutations[bi * n_r + i] = best_perm[i];
    total += best;
  }
  result.mean_loss_db = total / static_cast<double>(b);
  return result;
}

AssignmentResult mixit_search_fast(std::span<const Scalar> x1, std::span<const Scalar> x2,
                                   const Tensor& estimates, double tau) {
  const int n = static_cast<int>(estimates.dim(0));
  RS_REQUIRE(n >= 2, "mixit_search_fast: need at least two estimates");
  if (n > kMixitBound)
    throw CapabilityError("mixit_search_fast: instance exceeds the exhaustive search bound");
  const double e1 = sum_squares(x1), e2 = sum_squares(x2);
  RS_REQUIRE(!(e1 <= 0.0) && !(e2 <= 0.0), "mixit_search_fast: zero mixture");

  std::vector<double> gram(static_cast<std::size_t>(n * n));
  std::vector<double> c1(static_cast<std::size_t>(n)), c2(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    c1[a] = dot(x1, row(estimates, a));
    c2[a] = dot(x2, row(estimates, a));
    for (int b = 0; b <= a; ++b) {
      gram[a * n + b] = gram[b * n + a] = dot(row(estimates, a), row(estimates, b));
    }
  }

  AssignmentResult best;
  best.loss_db = std::numeric_limits<double>::infinity();
  unsigned best_mask = 0;
  bool first = true;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    const unsigned inv = ~mask & ((1u << n) - 1);
    const double q1 = residual_energy(e1, c1, gram, n, inv);   // bit 0 -> mixture 1
    const double q2 = residual_energy(e2, c2, gram, n, mask);  // bit 1 -> mixture 2
    const double loss = db10(q1 + tau * e1) - db10(e1) + db10(q2 + tau * e2) - db10(e2);
    if (first || loss < best.loss_db) {
      first = false;
      best.loss_db = loss;
      best_mask = mask;
    }
  }
  best.mix_assignment.assign(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) best.mix_assignment[j] = (best_mask >> j & 1u) ? 1 : 0;
  best.candidates_evaluated = std::int64_t{1} << n;
  return best;
}

AssignmentResult remix_pair_search_fast(std::span<const Scalar> x1, std::span<const Scalar> x2,
                                        const Tensor& solver_out1, const Tensor& solver_out2,
                                        double tau) {
  const int n_r = static_cast<int>(solver_out1.dim(0));
  RS_REQUIRE(n_r == solver_out2.dim(0), "remix_pair_search_fast: channel count mismatch");
  RS_REQUIRE(n_r % 2 == 0, "remix_pair_search_fast: N_R must be even");
  if (n_r > kPairBound)
    throw CapabilityError("remix_pair_search_fast: instance exceeds the exhaustive search bound");
  const double e1 = sum_squares(x1), e2 = sum_squares(x2);
  RS_REQUIRE(!(e1 <= 0.0) && !(e2 <= 0.0), "remix_pair_search_fast: zero mixture");

  // Joint Gram over the stacked sources [s1; s2].
  const int n2 = 2 * n_r;
  auto src = [&](int a) { return a < n_r ? row(solver_out1, a) : row(solver_out2, a - n_r); };
  std::vector<double> gram(static_cast<std::size_t>(n2 * n2));
  std::vector<double> c1(static_cast<std::size_t>(n2)), c2(static_cast<std::size_t>(n2));
  for (int a = 0; a < n2; ++a) {
    c1[a] = dot(x1, src(a));
    c2[a] = dot(x2, src(a));
    for (int b = 0; b <= a; ++b) gram[a * n2 + b] = gram[b * n2 + a] = dot(src(a), src(b));
  }

  const auto masks = masks_with_popcount(n_r, n_r / 2);
  const unsigned full = (1u << n_r) - 1;
  AssignmentResult best;
  best.loss_db = std::numeric_limits<double>::infinity();
  unsigned bm1 = 0, bm2 = 0;
  bool first = true;
  for (unsigned m1 : masks) {
    for (unsigned m2 : masks) {
      // Estimate for x1 uses s1 where m1 is set and s2 where m2 is clear.
      const unsigned sel1 = m1 | ((~m2 & full) << n_r);
      const unsigned sel2 = (~m1 & full) | (m2 << n_r);
      const double q1 = residual_energy(e1, c1, gram, n2, sel1);
      const double q2 = residual_energy(e2, c2, gram, n2, sel2);
      const double loss = db10(q1 + tau * e1) - db10(e1) + db10(q2 + tau * e2) - db10(e2);
      if (first || loss < best.loss_db) {
        first = false;
        best.loss_db = loss;
        bm1 = m1;
        bm2 = m2;
      }
    }
  }
  best.pair_select1.assign(static_cast<std::size_t>(n_r), 0);
  best.pair_select2.assign(static_cast<std::size_t>(n_r), 0);
  for (int j = 0; j < n_r; ++j) {
    best.pair_select1[j] = (bm1 >> j & 1u) ? 1 : 0;
    best.pair_select2[j] = (bm2 >> j & 1u) ? 1 : 0;
  }
  best.candidates_evaluated = static_cast<std::int64_t>(masks.size()) *
                              static_cast<std::int64_t>(masks.size());
  return best;
}

}  // namespace remixsep
