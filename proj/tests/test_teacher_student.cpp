// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "remixsep/teacher_student.hpp"

using namespace remixsep;

namespace {

SeparatorConfig micro_config(int n_outputs) {
  SeparatorConfig cfg;
  cfg.stft = StftConfig{16, 12, 4};
  cfg.n_outputs = n_outputs;
  cfg.hidden = 3;
  cfg.context = 1;
  return cfg;
}

std::uint64_t fnv_hash(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  for (std::size_t i = 0; i < t.v.size() * sizeof(Scalar); ++i)
    h = (h ^ bytes[i]) * 1099511628211ull;
  return h;
}

}  // namespace

TEST_CASE("ema init copies the pretrained weights into both roles") {
  std::mt19937_64 rng(61);
  SeparatorModel pre(micro_config(2), rng);
  TeacherStudentState state = TeacherStudentState::make_ema(pre, 0.8);
  CHECK(state.teacher().flat_params().v == pre.flat_params().v);
  CHECK(state.student().flat_params().v == pre.flat_params().v);
  CHECK(state.epoch() == 0);
}

TEST_CASE("ema update arithmetic on scalar cases") {
  std::mt19937_64 rng(62);
  SeparatorModel pre(micro_config(2), rng);
  for (double alpha : {0.0, 0.8, 1.0}) {
    // theta_T = 1.0, theta_S = 0.0 elementwise -> theta_T becomes alpha.
    SeparatorModel teacher = pre, student = pre;
    teacher.set_flat_params(Tensor::full({pre.param_count()}, 1.0));
    student.set_flat_params(Tensor::zeros({pre.param_count()}));
    TeacherStudentState s2 = TeacherStudentState::make_ema_with_student(teacher, student, alpha);
    s2.epoch_end_update();
    for (double v : s2.teacher().flat_params().v) CHECK(v == doctest::Approx(alpha));
    CHECK(s2.epoch() == 1);
  }
}

TEST_CASE("the teacher-student gap contracts by alpha when the student is held") {
  std::mt19937_64 rng(63);
  SeparatorModel teacher(micro_config(2), rng);
  SeparatorModel student(micro_config(2), rng);
  const double alpha = 0.8;
  TeacherStudentState state = TeacherStudentState::make_ema_with_student(teacher, student, alpha);
  auto gap = [&](const TeacherStudentState& s) {
    const Tensor t = s.teacher().flat_params();
    const Tensor u = s.student().flat_params();
    double g = 0.0;
    for (std::int64_t i = 0; i < t.numel(); ++i) g += (t.v[i] - u.v[i]) * (t.v[i] - u.v[i]);
    return std::sqrt(g);
  };
  const double before = gap(state);
  state.epoch_end_update();
  CHECK(gap(state) == doctest::Approx(alpha * before).epsilon(1e-9));
}

TEST_CASE("ema rejects architecture mismatch; frozen allows different output counts") {
  std::mt19937_64 rng(64);
  SeparatorModel big(micro_config(6), rng);
  SeparatorModel small(micro_config(3), rng);
  CHECK_THROWS_AS(TeacherStudentState::make_ema_with_student(big, small, 0.8),
                  std::invalid_argument);

  TeacherStudentState frozen = TeacherStudentState::make_frozen(big, micro_config(3), rng);
  CHECK(frozen.teacher().config().n_outputs == 6);
  CHECK(frozen.student().config().n_outputs == 3);
}

TEST_CASE("frozen teacher never changes across epochs") {
  std::mt19937_64 rng(65);
  SeparatorModel pre(micro_config(4), rng);
  TeacherStudentState state = TeacherStudentState::make_frozen(pre, micro_config(2), rng);
  const std::uint64_t h0 = fnv_hash(state.teacher().flat_params());
  for (int e = 0; e < 25; ++e) {
    // Move the student arbitrarily; the teacher must not follow.
    Tensor p = state.student().flat_params();
    for (auto& x : p.v) x += 0.01 * (e + 1);
    state.student().set_flat_params(p);
    state.epoch_end_update();
    CHECK(fnv_hash(state.teacher().flat_params()) == h0);
  }
  CHECK(state.epoch() == 25);
}

TEST_CASE("checkpoint ring keeps the top five scores and averages them") {
  std::mt19937_64 rng(66);
  SeparatorModel pre(micro_config(2), rng);
  TeacherStudentState state = TeacherStudentState::make_ema(pre, 0.8);

  CHECK_THROWS_AS(state.average_best(), InvalidStateError);

  // One checkpoint: the average is that checkpoint.
  Tensor p0 = Tensor::full({pre.param_count()}, 0.0);
  state.student().set_flat_params(p0);
  state.record_checkpoint(0.0);
  CHECK(state.average_best().v == p0.v);

  // Constant vectors 0, 2, 4, 6, 8 with rising scores all fit in the ring.
  for (int i = 1; i < 5; ++i) {
    state.student().set_flat_params(Tensor::full({pre.param_count()}, 2.0 * i));
    state.record_checkpoint(static_cast<double>(i));
  }
  CHECK(state.ring_size() == 5);
  for (double v : state.average_best().v) CHECK(v == doctest::Approx(4.0));

  // A sixth, better checkpoint evicts the worst (the zero vector).
  state.student().set_flat_params(Tensor::full({pre.param_count()}, 10.0));
  state.record_checkpoint(99.0);
  CHECK(state.ring_size() == 5);
  for (double v : state.average_best().v) CHECK(v == doctest::Approx((2 + 4 + 6 + 8 + 10) / 5.0));

  // A low-scoring checkpoint must not displace anything.
  state.student().set_flat_params(Tensor::full({pre.param_count()}, -100.0));
  state.record_checkpoint(-5.0);
  for (double v : state.average_best().v) CHECK(v == doctest::Approx(6.0));
}

TEST_CASE("five identical checkpoints average to themselves") {
  std::mt19937_64 rng(67);
  SeparatorModel pre(micro_config(2), rng);
  TeacherStudentState state = TeacherStudentState::make_ema(pre, 0.8);
  for (int i = 0; i < 5; ++i) state.record_checkpoint(1.0);
  const Tensor avg = state.average_best();
  const Tensor expect = pre.flat_params();
  for (std::int64_t i = 0; i < avg.numel(); ++i)
    CHECK(avg.v[i] == doctest::Approx(expect.v[i]).epsilon(1e-15));
}

TEST_CASE("alpha outside [0, 1] is rejected") {
  std::mt19937_64 rng(68);
  SeparatorModel pre(micro_config(2), rng);
  CHECK_THROWS_AS(TeacherStudentState::make_ema(pre, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(TeacherStudentState::make_ema(pre, -0.1), std::invalid_argument);
}
