// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "remixsep/remixer.hpp"
#include "remixsep/signals.hpp"

using namespace remixsep;

namespace {
Tensor random_tensor(std::vector<std::int64_t> shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : t.v) x = u(rng);
  return t;
}
}  // namespace

TEST_CASE("pair plan placement: both dominant sources to the first pseudo-mixture") {
  std::mt19937_64 rng(41);
  // powers1 = [3, 1]: top is 0 -> pi1 = [1, 0].
  // powers2 = [1, 3]: top is 1 -> pi2[1] = 0, pi2[0] = 1 -> pi2 = [1, 0].
  const std::vector<Scalar> p1 = {3.0, 1.0};
  const std::vector<Scalar> p2 = {1.0, 3.0};
  PairRemixPlan plan = make_pair_plan(p1, p2, rng);
  CHECK(plan.pi1 == std::vector<std::uint8_t>{1, 0});
  CHECK(plan.pi2 == std::vector<std::uint8_t>{1, 0});

  // N_R = 2 has no random freedom: every seed gives the same plan.
  for (int s = 0; s < 20; ++s) {
    auto r = make_rng(s);
    PairRemixPlan again = make_pair_plan(p1, p2, r);
    CHECK(again.pi1 == plan.pi1);
    CHECK(again.pi2 == plan.pi2);
  }
}

TEST_CASE("pair plan alternative placement keeps dominants at home") {
  std::mt19937_64 rng(42);
  const std::vector<Scalar> p1 = {3.0, 1.0};
  const std::vector<Scalar> p2 = {1.0, 3.0};
  PairRemixPlan plan = make_pair_plan(p1, p2, rng, PairPlacement::tops_stay_home);
  CHECK(plan.pi1 == std::vector<std::uint8_t>{1, 0});
  CHECK(plan.pi2 == std::vector<std::uint8_t>{0, 1});
}

TEST_CASE("pair plan cardinality holds over 1000 seeded draws at N_R = 6") {
  std::vector<Scalar> p1 = {6, 5, 4, 3, 2, 1};
  std::vector<Scalar> p2 = {1, 2, 3, 4, 5, 6};
  for (int s = 0; s < 1000; ++s) {
    auto rng = make_rng(s, 99);
    PairRemixPlan plan = make_pair_plan(p1, p2, rng);
    int ones1 = 0, ones2 = 0;
    for (int i = 0; i < 6; ++i) {
      ones1 += plan.pi1[i];
      ones2 += plan.pi2[i];
    }
    CHECK(ones1 == 3);
    CHECK(ones2 == 3);
    // Forced entries per the placement rule.
    CHECK(plan.pi1[0] == 1);  // top of mixture 1 -> first pseudo-mixture
    CHECK(plan.pi1[1] == 0);  // runner-up -> second
    CHECK(plan.pi2[5] == 0);  // top of mixture 2 -> first pseudo-mixture
    CHECK(plan.pi2[4] == 1);  // runner-up -> second
  }
}

TEST_CASE("pair plan rejects odd N_R") {
  std::mt19937_64 rng(43);
  std::vector<Scalar> p = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(make_pair_plan(p, p, rng), std::invalid_argument);
}

TEST_CASE("remix_pair traces planned impulses and conserves the total") {
  // Unit impulses at distinct samples make the assignment visible.
  Tensor s1({2, 8});
  Tensor s2({2, 8});
  s1.v[0 * 8 + 0] = 1.0;  // source (1,0) hits sample 0
  s1.v[1 * 8 + 1] = 1.0;  // source (1,1) hits sample 1
  s2.v[0 * 8 + 2] = 1.0;  // source (2,0) hits sample 2
  s2.v[1 * 8 + 3] = 1.0;  // source (2,1) hits sample 3
  PairRemixPlan plan;
  plan.pi1 = {1, 0};
  plan.pi2 = {1, 0};  // source (2,0) -> second pseudo-mixture, (2,1) -> first
  auto [x1, x2] = remix_pair(s1, s2, plan);
  CHECK(x1.v[0] == 1.0);  // pi1[0] = 1
  CHECK(x2.v[1] == 1.0);  // pi1[1] = 0
  CHECK(x2.v[2] == 1.0);  // pi2[0] = 1
  CHECK(x1.v[3] == 1.0);  // pi2[1] = 0
  for (int i = 0; i < 8; ++i) CHECK(x1.v[i] + x2.v[i] ==
                                    s1.v[i] + s1.v[8 + i] + s2.v[i] + s2.v[8 + i]);
}

TEST_CASE("remix_pair on zeros gives zeros and respects conservation under MC") {
  std::mt19937_64 rng(44);
  Tensor zeros = Tensor::zeros({4, 16});
  PairRemixPlan plan;
  plan.pi1 = {1, 1, 0, 0};
  plan.pi2 = {0, 0, 1, 1};
  auto [z1, z2] = remix_pair(zeros, zeros, plan);
  for (auto v : z1.v) CHECK(v == 0.0);
  for (auto v : z2.v) CHECK(v == 0.0);

  // MC-consistent sources: pseudo-mixtures sum to the original mixtures.
  Tensor raw1 = random_tensor({1, 4, 16}, rng);
  Tensor raw2 = random_tensor({1, 4, 16}, rng);
  Tensor x1t = random_tensor({1, 16}, rng);
  Tensor x2t = random_tensor({1, 16}, rng);
  Tensor s1 = mixture_consistency(raw1, x1t);
  Tensor s2 = mixture_consistency(raw2, x2t);
  auto [p1, p2] = remix_pair(Tensor({4, 16}, s1.v), Tensor({4, 16}, s2.v), plan);
  for (int i = 0; i < 16; ++i)
    CHECK(p1.v[i] + p2.v[i] == doctest::Approx(x1t.v[i] + x2t.v[i]).epsilon(1e-10));
}

TEST_CASE("batch shuffle with B = N_R = 2 forces the swap") {
  for (int s = 0; s < 10; ++s) {
    auto rng = make_rng(s, 7);
    BatchShuffleSpec spec = make_batch_shuffle(2, 2, rng);
    CHECK(spec.perms[0] == std::vector<std::int64_t>{0, 1});
    CHECK(spec.perms[1] == std::vector<std::int64_t>{1, 0});
  }
}

TEST_CASE("batch shuffle is infeasible when B < N_R") {
  auto rng = make_rng(1);
  CHECK_THROWS_AS(make_batch_shuffle(1, 2, rng), InfeasibleError);
  CHECK_THROWS_AS(make_batch_shuffle(2, 3, rng), InfeasibleError);
}

TEST_CASE("no-recollision holds for 1000 sampled specs at B=8, N_R=3") {
  for (int s = 0; s < 1000; ++s) {
    auto rng = make_rng(s, 11);
    BatchShuffleSpec spec = make_batch_shuffle(8, 3, rng);
    CHECK(satisfies_no_recollision(spec));
    // Channel 0 is pinned to the identity.
    for (std::int64_t b = 0; b < 8; ++b) CHECK(spec.perms[0][b] == b);
  }
}

TEST_CASE("tight case B = N_R remains solvable") {
  for (int s = 0; s < 200; ++s) {
    auto rng = make_rng(s, 12);
    BatchShuffleSpec spec = make_batch_shuffle(3, 3, rng);
    CHECK(satisfies_no_recollision(spec));
  }
}

TEST_CASE("remix_batch with an identity spec recreates MC mixtures") {
  std::mt19937_64 rng(45);
  Tensor raw = random_tensor({3, 2, 16}, rng);
  Tensor mix = random_tensor({3, 16}, rng);
  Tensor sources = mixture_consistency(raw, mix);

  BatchShuffleSpec identity;
  identity.perms = {{0, 1, 2}, {0, 1, 2}};  // test-only, bypasses no-recollision
  identity.finalize();
  Tensor pseudo = remix_batch(sources, identity);
  for (std::int64_t i = 0; i < mix.numel(); ++i)
    CHECK(pseudo.v[i] == doctest::Approx(mix.v[i]).epsilon(1e-10));

  Tensor zero_pseudo = remix_batch(Tensor::zeros({3, 2, 16}), identity);
  for (auto v : zero_pseudo.v) CHECK(v == 0.0);
}

TEST_CASE("remix_batch hand-computed fixture and total conservation") {
  // B=3, N_R=2 with distinguishable constants.
  Tensor sources({3, 2, 2});
  for (int b = 0; b < 3; ++b)
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 2; ++i) sources.v[(b * 2 + n) * 2 + i] = 10.0 * b + n + 1;
  BatchShuffleSpec spec;
  spec.perms = {{0, 1, 2}, {1, 2, 0}};  // channel 1 shifts items forward
  spec.finalize();
  CHECK(satisfies_no_recollision(spec));
  Tensor pseudo = remix_batch(sources, spec);
  // pseudo[b] = sources[b][0] + sources[origin][1] with origin = perm^-1(b).
  CHECK(pseudo.v[0] == doctest::Approx(1.0 + 22.0));   // origin of 0 in ch1 is item 2
  CHECK(pseudo.v[2] == doctest::Approx(11.0 + 2.0));   // origin of 1 is item 0
  CHECK(pseudo.v[4] == doctest::Approx(21.0 + 12.0));  // origin of 2 is item 1

  double total_pseudo = 0.0, total_sources = 0.0;
  for (auto v : pseudo.v) total_pseudo += v;
  for (auto v : sources.v) total_sources += v;
  CHECK(total_pseudo == doctest::Approx(total_sources).epsilon(1e-12));
}

TEST_CASE("unshuffle_and_remix inverts the shuffle") {
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 100; ++trial) {
    auto srng = make_rng(trial, 13);
    const std::int64_t b = 6, nr = 3, len = 12;
    Tensor raw = random_tensor({b, nr, len}, srng);
    Tensor mix = random_tensor({b, len}, srng);
    Tensor sources = mixture_consistency(raw, mix);
    BatchShuffleSpec spec = make_batch_shuffle(b, nr, srng);

    // A perfect separator returns exactly the shuffled sources.
    Tensor shuffled = shuffle_sources(sources, spec);
    Tensor recon = unshuffle_and_remix(shuffled, spec);
    for (std::int64_t i = 0; i < mix.numel(); ++i)
      CHECK(std::abs(recon.v[i] - mix.v[i]) <= 1e-6);
  }
}

TEST_CASE("unshuffle of zeros is zero") {
  BatchShuffleSpec spec;
  spec.perms = {{0, 1}, {1, 0}};
  spec.finalize();
  Tensor recon = unshuffle_and_remix(Tensor::zeros({2, 2, 8}), spec);
  for (auto v : recon.v) CHECK(v == 0.0);
}

TEST_CASE("shuffled sources of pseudo-mixture b really are its components") {
  std::mt19937_64 rng(47);
  Tensor sources = random_tensor({5, 3, 10}, rng);
  auto srng = make_rng(5, 14);
  BatchShuffleSpec spec = make_batch_shuffle(5, 3, srng);
  Tensor shuffled = shuffle_sources(sources, spec);
  Tensor pseudo = remix_batch(sources, spec);
  for (std::int64_t b = 0; b < 5; ++b)
    for (int i = 0; i < 10; ++i) {
      double sum = 0.0;
      for (int n = 0; n < 3; ++n) sum += shuffled.v[(b * 3 + n) * 10 + i];
      CHECK(sum == doctest::Approx(pseudo.v[b * 10 + i]).epsilon(1e-12));
    }
}
