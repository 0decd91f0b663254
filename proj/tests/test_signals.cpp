// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "remixsep/signals.hpp"

using namespace remixsep;

namespace {
Tensor random_sources(std::int64_t b, std::int64_t n, std::int64_t len, std::mt19937_64& rng) {
  Tensor t({b, n, len});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : t.v) x = u(rng);
  return t;
}
}  // namespace

TEST_CASE("source_power basics") {
  Tensor s({1, 3, 4});
  for (int i = 0; i < 4; ++i) s.v[i] = 1.0;                   // constant ones
  for (int i = 0; i < 4; ++i) s.v[4 + i] = 0.0;               // silence
  const double alt[4] = {1.0, -1.0, 1.0, -1.0};               // alternating sign
  for (int i = 0; i < 4; ++i) s.v[8 + i] = alt[i];
  const Tensor p = source_power(s);
  CHECK(p.v[0] == doctest::Approx(1.0));
  CHECK(p.v[1] == doctest::Approx(0.0));
  CHECK(p.v[2] == doctest::Approx(1.0));
}

TEST_CASE("source_power is invariant under sign flip") {
  std::mt19937_64 rng(3);
  Tensor s = random_sources(2, 3, 16, rng);
  Tensor flipped = s;
  for (auto& x : flipped.v) x = -x;
  CHECK(source_power(s).v == source_power(flipped).v);
}

TEST_CASE("select_top_sources orders by descending power") {
  Tensor s({1, 3, 2});
  // powers 0.1, 0.9, 0.5
  s.v = {0.316227766016838, 0.316227766016838, 0.948683298050514, 0.948683298050514,
         0.707106781186548, 0.707106781186548};
  SelectionIndex sel = select_top_sources(s, 2);
  CHECK(sel.at(0, 0) == 1);
  CHECK(sel.at(0, 1) == 2);

  SelectionIndex all = select_top_sources(s, 3);
  CHECK(all.at(0, 0) == 1);
  CHECK(all.at(0, 1) == 2);
  CHECK(all.at(0, 2) == 0);
}

TEST_CASE("selection tie-break goes to the lowest index") {
  Tensor s({1, 3, 2});
  // powers 0.5, 0.5, 0.1
  const double a = std::sqrt(0.5), c = std::sqrt(0.1);
  s.v = {a, a, a, a, c, c};
  SelectionIndex sel = select_top_sources(s, 1);
  CHECK(sel.at(0, 0) == 0);
}

TEST_CASE("selection errors and invariance to permuting non-selected sources") {
  std::mt19937_64 rng(4);
  Tensor s = random_sources(1, 4, 8, rng);
  CHECK_THROWS_AS(select_top_sources(s, 5), std::invalid_argument);

  SelectionIndex sel = select_top_sources(s, 2);
  // Swap the two non-selected channels and re-select.
  std::vector<std::int64_t> keep = {sel.at(0, 0), sel.at(0, 1)};
  std::vector<std::int64_t> rest;
  for (std::int64_t n = 0; n < 4; ++n)
    if (n != keep[0] && n != keep[1]) rest.push_back(n);
  Tensor swapped = s;
  for (int i = 0; i < 8; ++i)
    std::swap(swapped.v[rest[0] * 8 + i], swapped.v[rest[1] * 8 + i]);
  SelectionIndex sel2 = select_top_sources(swapped, 2);
  CHECK(sel2.at(0, 0) == sel.at(0, 0));
  CHECK(sel2.at(0, 1) == sel.at(0, 1));
}

TEST_CASE("mixture consistency leaves consistent sources unchanged") {
  std::mt19937_64 rng(5);
  Tensor s = random_sources(2, 3, 8, rng);
  Tensor mix({2, 8});
  for (int b = 0; b < 2; ++b)
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 8; ++i) mix.v[b * 8 + i] += s.v[(b * 3 + n) * 8 + i];
  Tensor out = mixture_consistency(s, mix);
  for (std::int64_t i = 0; i < s.numel(); ++i) CHECK(out.v[i] == doctest::Approx(s.v[i]));
}

TEST_CASE("mixture consistency splits the mixture across zero sources") {
  Tensor s = Tensor::zeros({1, 2, 4});
  Tensor mix({1, 4}, {1.0, 2.0, 3.0, 4.0});
  Tensor out = mixture_consistency(s, mix);
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 4; ++i) CHECK(out.v[n * 4 + i] == doctest::Approx(mix.v[i] / 2.0));
}

TEST_CASE("mixture consistency residual formula worked example") {
  // in = [[1,0],[0,1]] per sample, x = [3,3] -> out = [[2,1],[1,2]]
  Tensor s({1, 2, 2}, {1.0, 1.0, 0.0, 0.0});
  Tensor mix({1, 2}, {3.0, 3.0});
  // source 0 = [1,1], source 1 = [0,0]: residual [2,2] split in half
  Tensor out = mixture_consistency(s, mix);
  CHECK(out.v[0] == doctest::Approx(2.0));
  CHECK(out.v[1] == doctest::Approx(2.0));
  CHECK(out.v[2] == doctest::Approx(1.0));
  CHECK(out.v[3] == doctest::Approx(1.0));

  // Interleaved variant: sources [[1,0],[0,1]] per sample.
  Tensor s2({1, 2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor out2 = mixture_consistency(s2, mix);
  CHECK(out2.v[0] == doctest::Approx(2.0));
  CHECK(out2.v[1] == doctest::Approx(1.0));
  CHECK(out2.v[2] == doctest::Approx(1.0));
  CHECK(out2.v[3] == doctest::Approx(2.0));
}

TEST_CASE("mixture consistency is idempotent and exactly consistent") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor s = random_sources(3, 4, 32, rng);
    Tensor mix({3, 32});
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (auto& x : mix.v) x = u(rng);

    Tensor once = mixture_consistency(s, mix);
    Tensor twice = mixture_consistency(once, mix);
    for (std::int64_t i = 0; i < once.numel(); ++i)
      CHECK(std::abs(twice.v[i] - once.v[i]) <=
            1e-6 * std::max(1.0, std::abs(once.v[i])));

    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 32; ++i) {
        double sum = 0.0;
        for (int n = 0; n < 4; ++n) sum += once.v[(b * 4 + n) * 32 + i];
        const double x = mix.v[b * 32 + i];
        CHECK(std::abs(sum - x) <= 1e-5 * std::max(1.0, std::abs(x)));
      }
  }
}

TEST_CASE("mixture consistency rejects empty selections and degenerate shapes") {
  Tensor mix({1, 4});
  CHECK_THROWS_AS(mixture_consistency(Tensor({1, 4}), mix), std::invalid_argument);
  // All-zero mixtures are permitted; the projection splits zeros.
  Tensor s({1, 2, 4}, {1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0});
  Tensor out = mixture_consistency(s, Tensor::zeros({1, 4}));
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += out.v[i] + out.v[4 + i];
  CHECK(sum == doctest::Approx(0.0));
}

TEST_CASE("shuffler estimates must be detached") {
  CHECK_THROWS_AS(SourceEstimates(Tensor({1, 1, 4}), SourceOrigin::shuffler, true),
                  std::invalid_argument);
  SourceEstimates ok(Tensor({1, 1, 4}), SourceOrigin::shuffler, false);
  CHECK(ok.channels() == 1);
}

TEST_CASE("gather_selected picks the chosen channels") {
  std::mt19937_64 rng(8);
  Tensor s = random_sources(2, 4, 8, rng);
  SelectionIndex sel = select_top_sources(s, 2);
  Tensor picked = gather_selected(s, sel);
  CHECK(picked.shape == std::vector<std::int64_t>{2, 2, 8});
  for (int b = 0; b < 2; ++b)
    for (int r = 0; r < 2; ++r)
      for (int i = 0; i < 8; ++i)
        CHECK(picked.v[(b * 2 + r) * 8 + i] == s.v[(b * 4 + sel.at(b, r)) * 8 + i]);
}
