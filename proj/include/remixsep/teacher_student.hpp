// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_TEACHER_STUDENT_HPP_
#define REMIXSEP_TEACHER_STUDENT_HPP_

#include <vector>

#include "remixsep/separator.hpp"

namespace remixsep {

enum class UpdateProtocol { ema_epoch_end, frozen };

// Shuffler (teacher) / solver (student) weight management: EMA or frozen
// update protocol plus a best-checkpoint ring for parameter averaging.
class TeacherStudentState {
 public:
  // Same architecture; student starts as an exact copy of the teacher.
  static TeacherStudentState make_ema(const SeparatorModel& pretrained, double alpha);
  // Same as make_ema but with explicit student weights (e.g. when resuming);
  // throws std::invalid_argument on architecture mismatch.
  static TeacherStudentState make_ema_with_student(const SeparatorModel& teacher,
                                                   const SeparatorModel& student, double alpha);
  // Teacher stays fixed forever; the student may have a different output
  // count and is freshly initialized.
  static TeacherStudentState make_frozen(const SeparatorModel& pretrained,
                                         const SeparatorConfig& student_cfg,
                                         std::mt19937_64& rng);

  UpdateProtocol protocol() const { return protocol_; }
  double alpha() const { return alpha_; }
  int epoch() const { return epoch_; }
  const SeparatorModel& teacher() const { return teacher_; }
  const SeparatorModel& student() const { return student_; }
  SeparatorModel& student() { return student_; }

  // theta_T <- alpha * theta_T + (1 - alpha) * theta_S at epoch end; under
  // the frozen protocol the teacher is untouched. Increments the epoch.
  void epoch_end_update();

  // Snapshot the current student parameters; the ring keeps the five
  // best-scoring snapshots (higher is better).
  void record_checkpoint(double score);
  std::size_t ring_size() const { return ring_.size(); }
  // Elementwise mean of the retained snapshots; throws InvalidStateError on
  // an empty ring.
  Tensor average_best() const;

  static constexpr std::size_t kRingCapacity = 5;

 private:
  TeacherStudentState(SeparatorModel teacher, SeparatorModel student, UpdateProtocol protocol,
                      double alpha);
  UpdateProtocol protocol_;
  double alpha_;
  int epoch_ = 0;
  SeparatorModel teacher_;
  SeparatorModel student_;
  struct Scored {
    double score;
    Tensor params;
  };
  std::vector<Scored> ring_;  // sorted by descending score
};

}  // namespace remixsep

#endif  // REMIXSEP_TEACHER_STUDENT_HPP_
