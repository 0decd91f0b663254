// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/remixer.hpp"

#include <algorithm>
#include <numeric>

namespace remixsep {

namespace {
constexpr int kShuffleRetryCap = 10000;

// Highest- and second-highest-power indices, lowest index winning ties.
std::pair<int, int> top_two(std::span<const Scalar> powers) {
  int top = 0;
  for (int i = 1; i < static_cast<int>(powers.size()); ++i)
    if (powers[i] > powers[top]) top = i;
  int second = -1;
  for (int i = 0; i < static_cast<int>(powers.size()); ++i) {
    if (i == top) continue;
    if (second < 0 || powers[i] > powers[second]) second = i;
  }
  return {top, second};
}

// Fill the undecided entries of `pi` with `ones_needed` ones placed uniformly
// at random.
void fill_random(std::vector<std::uint8_t>& pi, const std::vector<bool>& fixed, int ones_needed,
                 std::mt19937_64& rng) {
  std::vector<int> open;
  for (int i = 0; i < static_cast<int>(pi.size()); ++i)
    if (!fixed[i]) open.push_back(i);
  RS_REQUIRE(ones_needed >= 0 && ones_needed <= static_cast<int>(open.size()),
             "pair plan: cardinality constraint unsatisfiable");
  std::shuffle(open.begin(), open.end(), rng);
  for (int i = 0; i < ones_needed; ++i) pi[open[i]] = 1;
}

}  // namespace

void BatchShuffleSpec::finalize() {
  inverse_.assign(perms.size(), {});
  const std::int64_t b = batch();
  for (std::size_t n = 0; n < perms.size(); ++n) {
    RS_REQUIRE(static_cast<std::int64_t>(perms[n].size()) == b,
               "BatchShuffleSpec: ragged permutation list");
    inverse_[n].assign(static_cast<std::size_t>(b), -1);
    for (std::int64_t origin = 0; origin < b; ++origin) {
      const std::int64_t dest = perms[n][origin];
      RS_REQUIRE(dest >= 0 && dest < b, "BatchShuffleSpec: destination out of range");
      RS_REQUIRE(inverse_[n][dest] < 0, "BatchShuffleSpec: permutation is not a bijection");
      inverse_[n][dest] = origin;
    }
  }
}

bool satisfies_no_recollision(const BatchShuffleSpec& spec) {
  const std::int64_t b = spec.batch();
  const std::int64_t n = spec.channels();
  std::vector<std::int64_t> origins(static_cast<std::size_t>(n));
  for (std::int64_t dest = 0; dest < b; ++dest) {
    for (std::int64_t c = 0; c < n; ++c) origins[c] = spec.origin_of(dest, c);
    std::sort(origins.begin(), origins.end());
    if (std::adjacent_find(origins.begin(), origins.end()) != origins.end()) return false;
  }
  return true;
}

PairRemixPlan make_pair_plan(std::span<const Scalar> powers1, std::span<const Scalar> powers2,
                             std::mt19937_64& rng, PairPlacement placement) {
  const int n_r = static_cast<int>(powers1.size());
  RS_REQUIRE(static_cast<int>(powers2.size()) == n_r, "make_pair_plan: power count mismatch");
  RS_REQUIRE(n_r >= 2, "make_pair_plan: need at least two sources");
  RS_REQUIRE(n_r % 2 == 0, "make_pair_plan: N_R must be even");

  PairRemixPlan plan;
  plan.pi1.assign(static_cast<std::size_t>(n_r), 0);
  plan.pi2.assign(static_cast<std::size_t>(n_r), 0);
  std::vector<bool> fixed1(static_cast<std::size_t>(n_r), false);
  std::vector<bool> fixed2(static_cast<std::size_t>(n_r), false);

  const auto [top1, sec1] = top_two(powers1);
  const auto [top2, sec2] = top_two(powers2);

  // Mixture 1: dominant source to the first pseudo-mixture, runner-up to the
  // second (identical under both placements).
  plan.pi1[top1] = 1;
  plan.pi1[sec1] = 0;
  fixed1[top1] = fixed1[sec1] = true;
  if (placement == PairPlacement::both_tops_to_first) {
    plan.pi2[top2] = 0;  // pi2 == 0 sends the source to the first pseudo-mixture
    plan.pi2[sec2] = 1;
  } else {
    plan.pi2[top2] = 1;
    plan.pi2[sec2] = 0;
  }
  fixed2[top2] = fixed2[sec2] = true;

  const int half = n_r / 2;
  int ones1 = plan.pi1[top1] + plan.pi1[sec1];
  int ones2 = plan.pi2[top2] + plan.pi2[sec2];
  fill_random(plan.pi1, fixed1, half - ones1, rng);
  fill_random(plan.pi2, fixed2, half - ones2, rng);
  return plan;
}

std::pair<Value, Value> remix_pair(Tape& t, Value sources1, Value sources2,
                                   const PairRemixPlan& plan) {
  const Tensor& s1 = t.val(sources1);
  const Tensor& s2 = t.val(sources2);
  const int n_r = plan.n_remix();
  RS_REQUIRE(s1.rank() == 2 && s2.rank() == 2 && s1.same_shape(s2),
             "remix_pair: sources must be matching [N_R, T]");
  RS_REQUIRE(s1.dim(0) == n_r, "remix_pair: plan size mismatch");
  const int half = n_r / 2;
  int c1 = 0, c2 = 0;
  for (int i = 0; i < n_r; ++i) {
    c1 += plan.pi1[i];
    c2 += plan.pi2[i];
  }
  RS_REQUIRE(c1 == half && c2 == half, "remix_pair: plan violates the cardinality constraint");

  std::vector<Scalar> w1(plan.pi1.begin(), plan.pi1.end());
  std::vector<Scalar> w2(plan.pi2.begin(), plan.pi2.end());
  std::vector<Scalar> inv1(static_cast<std::size_t>(n_r)), inv2(static_cast<std::size_t>(n_r));
  for (int i = 0; i < n_r; ++i) {
    inv1[i] = 1.0 - w1[i];
    inv2[i] = 1.0 - w2[i];
  }
  Value x1 = ad::add(t, ad::mix_channels(t, sources1, w1), ad::mix_channels(t, sources2, inv2));
  Value x2 = ad::add(t, ad::mix_channels(t, sources1, inv1), ad::mix_channels(t, sources2, w2));
  return {x1, x2};
}

std::pair<Tensor, Tensor> remix_pair(const Tensor& sources1, const Tensor& sources2,
                                     const PairRemixPlan& plan) {
  Tape t;
  auto [x1, x2] = remix_pair(t, t.constant(sources1), t.constant(sources2), plan);
  return {t.val(x1), t.val(x2)};
}

BatchShuffleSpec make_batch_shuffle(std::int64_t batch, std::int64_t n_remix,
                                    std::mt19937_64& rng) {
  RS_REQUIRE(n_remix >= 1, "make_batch_shuffle: need at least one channel");
  if (batch < n_remix)
    throw InfeasibleError(
        "make_batch_shuffle: batch smaller than channel count leaves no collision-free shuffle");

  BatchShuffleSpec spec;
  spec.perms.resize(static_cast<std::size_t>(n_remix));
  spec.perms[0].resize(static_cast<std::size_t>(batch));
  std::iota(spec.perms[0].begin(), spec.perms[0].end(), 0);

  // origins_used[dest] = origins already feeding pseudo-mixture dest.
  std::vector<std::vector<std::int64_t>> origins_used(static_cast<std::size_t>(batch));
  for (std::int64_t b = 0; b < batch; ++b) origins_used[b].push_back(b);

  std::vector<std::int64_t> perm(static_cast<std::size_t>(batch));
  int retries = 0;
  for (std::int64_t n = 1; n < n_remix; ++n) {
    while (true) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      bool ok = true;
      for (std::int64_t origin = 0; origin < batch && ok; ++origin) {
        const auto& used = origins_used[perm[origin]];
        ok = std::find(used.begin(), used.end(), origin) == used.end();
      }
      if (ok) break;
      if (++retries > kShuffleRetryCap)
        throw InfeasibleError("make_batch_shuffle: retry cap exceeded");
    }
    spec.perms[n] = perm;
    for (std::int64_t origin = 0; origin < batch; ++origin)
      origins_used[perm[origin]].push_back(origin);
  }
  spec.finalize();
  return spec;
}

Value remix_batch(Tape& t, Value sources, const BatchShuffleSpec& spec) {
  const Tensor& s = t.val(sources);
  RS_REQUIRE(s.rank() == 3, "remix_batch: sources must be [B, N_R, T]");
  const std::int64_t b = spec.batch(), n = spec.channels();
  RS_REQUIRE(s.dim(0) == b && s.dim(1) == n, "remix_batch: spec/shape mismatch");
  std::vector<std::int64_t> src_b(static_cast<std::size_t>(b * n));
  std::vector<std::int64_t> src_n(src_b.size());
  for (std::int64_t dest = 0; dest < b; ++dest)
    for (std::int64_t c = 0; c < n; ++c) {
      src_b[dest * n + c] = spec.origin_of(dest, c);
      src_n[dest * n + c] = c;
    }
  return ad::sum_channels(t, ad::reindex(t, sources, std::move(src_b), std::move(src_n), b, n));
}

Tensor remix_batch(const Tensor& sources, const BatchShuffleSpec& spec) {
  Tape t;
  return t.val(remix_batch(t, t.constant(sources), spec));
}

Tensor shuffle_sources(const Tensor& sources, const BatchShuffleSpec& spec) {
  RS_REQUIRE(sources.rank() == 3, "shuffle_sources: sources must be [B, N_R, T]");
  const std::int64_t b = spec.batch(), n = spec.channels(), len = sources.dim(2);
  RS_REQUIRE(sources.dim(0) == b && sources.dim(1) == n, "shuffle_sources: spec/shape mismatch");
  Tensor out({b, n, len});
  for (std::int64_t dest = 0; dest < b; ++dest)
    for (std::int64_t c = 0; c < n; ++c) {
      const Scalar* src = sources.data() + (spec.origin_of(dest, c) * n + c) * len;
      Scalar* dst = out.data() + (dest * n + c) * len;
      std::copy(src, src + len, dst);
    }
  return out;
}

Value unshuffle_and_remix(Tape& t, Value aligned, const BatchShuffleSpec& spec) {
  const Tensor& s = t.val(aligned);
  RS_REQUIRE(s.rank() == 3, "unshuffle_and_remix: expects [B, N_R, T]");
  const std::int64_t b = spec.batch(), n = spec.channels();
  RS_REQUIRE(s.dim(0) == b && s.dim(1) == n, "unshuffle_and_remix: spec/shape mismatch");
  std::vector<std::int64_t> src_b(static_cast<std::size_t>(b * n));
  std::vector<std::int64_t> src_n(src_b.size());
  for (std::int64_t orig = 0; orig < b; ++orig)
    for (std::int64_t c = 0; c < n; ++c) {
      src_b[orig * n + c] = spec.perms[c][orig];
      src_n[orig * n + c] = c;
    }
  return ad::sum_channels(t, ad::reindex(t, aligned, std::move(src_b), std::move(src_n), b, n));
}

Tensor unshuffle_and_remix(const Tensor& aligned, const BatchShuffleSpec& spec) {
  Tape t;
  return t.val(unshuffle_and_remix(t, t.constant(aligned), spec));
}

}  // namespace remixsep
