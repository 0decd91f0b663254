// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/teacher_student.hpp"

#include <algorithm>

namespace remixsep {

TeacherStudentState::TeacherStudentState(SeparatorModel teacher, SeparatorModel student,
                                         UpdateProtocol protocol, double alpha)
    : protocol_(protocol), alpha_(alpha), teacher_(std::move(teacher)),
      student_(std::move(student)) {
  RS_REQUIRE(alpha_ >= 0.0 && alpha_ <= 1.0, "teacher_student: alpha must be in [0, 1]");
}

TeacherStudentState TeacherStudentState::make_ema(const SeparatorModel& pretrained, double alpha) {
  return TeacherStudentState(pretrained, pretrained, UpdateProtocol::ema_epoch_end, alpha);
}

TeacherStudentState TeacherStudentState::make_ema_with_student(const SeparatorModel& teacher,
                                                               const SeparatorModel& student,
                                                               double alpha) {
  RS_REQUIRE(teacher.param_count() == student.param_count(),
             "teacher_student: architecture mismatch under the EMA protocol");
  return TeacherStudentState(teacher, student, UpdateProtocol::ema_epoch_end, alpha);
}

TeacherStudentState TeacherStudentState::make_frozen(const SeparatorModel& pretrained,
                                                     const SeparatorConfig& student_cfg,
                                                     std::mt19937_64& rng) {
  return TeacherStudentState(pretrained, SeparatorModel(student_cfg, rng), UpdateProtocol::frozen,
                             1.0);
}

void TeacherStudentState::epoch_end_update() {
  if (protocol_ == UpdateProtocol::ema_epoch_end) {
    Tensor t = teacher_.flat_params();
    const Tensor s = student_.flat_params();
    for (std::int64_t i = 0; i < t.numel(); ++i)
      t.v[i] = alpha_ * t.v[i] + (1.0 - alpha_) * s.v[i];
    teacher_.set_flat_params(t);
  }
  ++epoch_;
}

void TeacherStudentState::record_checkpoint(double score) {
  ring_.push_back(Scored{score, student_.flat_params()});
  std::stable_sort(ring_.begin(), ring_.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  if (ring_.size() > kRingCapacity) ring_.resize(kRingCapacity);
}

Tensor TeacherStudentState::average_best() const {
  if (ring_.empty()) throw InvalidStateError("average_best: no checkpoints recorded");
  Tensor mean = Tensor::zeros(ring_.front().params.shape);
  for (const Scored& s : ring_) {
    for (std::int64_t i = 0; i < mean.numel(); ++i) mean.v[i] += s.params.v[i];
  }
  const Scalar inv = 1.0 / static_cast<Scalar>(ring_.size());
  for (auto& x : mean.v) x *= inv;
  return mean;
}

}  // namespace remixsep
