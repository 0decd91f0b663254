// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_SEPARATOR_HPP_
#define REMIXSEP_SEPARATOR_HPP_

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "remixsep/signals.hpp"
#include "remixsep/stft.hpp"

namespace remixsep {

struct SeparatorConfig {
  StftConfig stft;
  int sample_rate_hz = 8000;
  int n_outputs = 6;
  int hidden = 64;
  int context = 3;  // first-layer frame context (conv kernel over frames)

  int bins() const { return stft.fft_size / 2 + 1; }
};

// Mask-based separator: log-magnitude STFT features feed a two-layer
// convolutional mask net whose sigmoid outputs gate the mixture spectrogram
// per output channel; sources are resynthesized with the mixture phase.
class SeparatorModel {
 public:
  SeparatorModel(const SeparatorConfig& cfg, std::mt19937_64& rng);

  // All masks equal to 1/N regardless of input.
  static SeparatorModel uniform(const SeparatorConfig& cfg);
  // Input-independent per-bin masks, masks:[N, F] in [0, 1].
  static SeparatorModel constant_mask(const SeparatorConfig& cfg, const Tensor& masks);

  const SeparatorConfig& config() const { return cfg_; }
  const StftKernels& kernels() const { return *kernels_; }

  std::int64_t param_count() const;
  Tensor flat_params() const;
  void set_flat_params(const Tensor& flat);

  // Leaf values for one training step; pass the same Vars to every forward
  // whose gradients should accumulate into the same parameters.
  struct Vars {
    Value w1, b1, w2, b2;
  };
  Vars leaf_vars(Tape& t, bool requires_grad) const;
  // wave:[B, T] -> sources:[B, N, T].
  Value forward(Tape& t, const Vars& vars, Value wave) const;
  Tensor gather_flat_grads(const Tape& t, const Vars& vars) const;

  // Gradient-free separation.
  SourceEstimates separate(const Tensor& wave_bt, SourceOrigin origin) const;
  // The time-frequency masks for an input, [B, N, L, F]; diagnostic surface.
  Tensor compute_masks(const Tensor& wave_bt) const;

 private:
  SeparatorModel() = default;
  Value mask_values(Tape& t, const Vars& vars, Value re, Value im) const;
  SeparatorConfig cfg_;
  std::shared_ptr<const StftKernels> kernels_;
  Tensor w1_, b1_, w2_, b2_;  // [kF, H], [H], [H, N*F], [N*F]
};

enum class CheckpointRole : std::uint8_t { generic = 0, shuffler = 1, solver = 2 };

struct Checkpoint {
  SeparatorModel model;
  CheckpointRole role = CheckpointRole::generic;
  std::uint64_t step = 0;

  Checkpoint(SeparatorModel m, CheckpointRole r, std::uint64_t s)
      : model(std::move(m)), role(r), step(s) {}
};

// Versioned little-endian binary container: magic, format version, role,
// architecture descriptor, step counter, then the flat parameter vector.
void save_checkpoint(const std::filesystem::path& path, const SeparatorModel& model,
                     CheckpointRole role, std::uint64_t step);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace remixsep

#endif  // REMIXSEP_SEPARATOR_HPP_
