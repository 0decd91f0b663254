// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_TRAINER_HPP_
#define REMIXSEP_TRAINER_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "remixsep/assignments.hpp"
#include "remixsep/datagen.hpp"
#include "remixsep/remixer.hpp"
#include "remixsep/separator.hpp"
#include "remixsep/teacher_student.hpp"

namespace remixsep {

enum class Method {
  pit,
  mixit,
  remixit,
  rccl,
  self_remixing_pair,
  self_remixing_batch,
  remixit_plus_self_remixing,
};

enum class RemixAlgo { pair, in_batch };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct LrDecay {
  double factor = 0.98;
  int every_n_epochs = 2;
};

struct McFlags {
  bool shuffler = true;    // project shuffler sources onto the observed mixtures
  bool solver = false;     // project solver sources onto the pseudo-mixtures
  bool inference = false;  // project at evaluation time
};

struct TrainConfig {
  Method method = Method::mixit;
  int batch_size = 8;
  int grad_accum_steps = 1;
  double peak_lr = 1e-3;
  int warmup_steps = 500;
  LrDecay lr_decay;
  int epochs = 10;
  double alpha = 0.8;
  std::optional<double> l_thres;  // dB; pairs below it contribute zero loss and gradient
  int n_teacher = 6;
  int n_student = 6;
  int n_remix = 3;
  McFlags mc;
  std::uint64_t seed = 0;
  bool semi_supervised = false;
  double unsup_weight = 1.0;
  UpdateProtocol protocol = UpdateProtocol::ema_epoch_end;
  PairPlacement pair_placement = PairPlacement::both_tops_to_first;
  std::optional<RemixAlgo> remix_algo;  // derived from the method when absent
  int hidden = 64;
  int context = 3;
  double weight_decay = 1e-2;
  double tau = 1e-3;
  std::optional<std::int64_t> max_steps;  // cap on micro-steps
  StftConfig stft;
  int sample_rate_hz = 8000;
  bool allow_rccl_in_batch = false;  // test-only override for the collapse regression
  // Reserved: trade recomputation for memory in the rccl double pass. Parsed
  // and persisted but not implemented; steps run with the full tape.
  bool rccl_activation_checkpointing = false;

  RemixAlgo effective_remix_algo() const;
  bool uses_teacher() const;
  void validate() const;
  SeparatorConfig student_config() const;
  SeparatorConfig teacher_config() const;
};

// Config file support (JSON); CLI flags override file values.
TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_to_json_text(const TrainConfig& cfg);

struct Batch {
  Tensor mixtures;    // [B, T]
  Tensor references;  // [B, K, T]; empty when unlabeled
  std::vector<int> n_speech;
  int sample_rate_hz = 8000;
  std::int64_t size() const { return mixtures.dim(0); }
  bool has_references() const { return references.numel() > 0; }
};
Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

// One forward/backward micro-step.
struct StepStats {
  double loss_db = 0.0;
  Tensor solver_grad;   // flat gradient w.r.t. the trained model
  Tensor teacher_grad;  // flat gradient buffer of the shuffler (zero when detached)
  std::size_t tape_bytes = 0;
  std::int64_t candidates = 0;
  int pairs_zeroed = 0;
};

StepStats step_supervised_pit(const Batch& batch, const SeparatorModel& model,
                              const TrainConfig& cfg);
StepStats step_mixit(const Batch& batch, const SeparatorModel& model, const TrainConfig& cfg);
StepStats step_remixit(const Batch& batch, const TeacherStudentState& state,
                       const TrainConfig& cfg, std::mt19937_64& rng);
StepStats step_self_remixing_batch(const Batch& batch, const TeacherStudentState& state,
                                   const TrainConfig& cfg, std::mt19937_64& rng);
StepStats step_remixit_plus_self_remixing(const Batch& batch, const TeacherStudentState& state,
                                          const TrainConfig& cfg, std::mt19937_64& rng);
StepStats step_self_remixing_pair(const Batch& batch, const TeacherStudentState& state,
                                  const TrainConfig& cfg, std::mt19937_64& rng);
StepStats step_rccl(const Batch& batch, const SeparatorModel& model, const TrainConfig& cfg,
                    std::mt19937_64& rng);
StepStats step_semi_supervised(const Batch& labeled, const Batch& in_domain,
                               const TeacherStudentState& state, const TrainConfig& cfg,
                               std::mt19937_64& rng);

// Mean best-permutation SI-SDR against the speech references.
double validation_sisdr(const SeparatorModel& model, const Dataset& ds, bool mc_inference,
                        int batch_size = 8);
// Mean over mixtures of (top source power) / (mixture power); approaches 1
// when the model collapses to passing the mixture through one channel.
double collapse_metric(const SeparatorModel& model, const Dataset& ds, int batch_size = 8);

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;  // micro-steps completed
  double train_loss_db = 0.0;
  double valid_sisdr_db = 0.0;
  double lr = 0.0;
  double collapse = 0.0;
  double wall_time_s = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double initial_valid_sisdr = 0.0;  // pretrained/initial model, same protocol
  double final_valid_sisdr = 0.0;    // averaged checkpoint
  double best_epoch_valid_sisdr = 0.0;
  std::string metrics_path;
  std::string averaged_ckpt_path;
  std::string student_ckpt_path;
  std::string teacher_ckpt_path;  // empty for single-model methods
  std::int64_t total_steps = 0;
};

struct TrainInputs {
  const Dataset* train = nullptr;
  const Dataset* valid = nullptr;
  const Dataset* sup_train = nullptr;  // labeled OOD set for semi-supervised runs
};

TrainReport run_training(const TrainConfig& cfg, const TrainInputs& data,
                         const std::filesystem::path& out_dir,
                         const std::optional<SeparatorModel>& pretrained = std::nullopt);

}  // namespace remixsep

#endif  // REMIXSEP_TRAINER_HPP_
