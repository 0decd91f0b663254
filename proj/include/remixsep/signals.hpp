// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_SIGNALS_HPP_
#define REMIXSEP_SIGNALS_HPP_

#include <vector>

#include "remixsep/autodiff.hpp"
#include "remixsep/tensor.hpp"

namespace remixsep {

// Batch of time-domain mixtures, samples:[B, T].
struct WaveformBatch {
  Tensor samples;
  int sample_rate_hz = 8000;

  WaveformBatch() = default;
  WaveformBatch(Tensor s, int rate);
  std::int64_t batch() const { return samples.dim(0); }
  std::int64_t length() const { return samples.dim(1); }
};

enum class SourceOrigin { shuffler, solver };

// Separated sources per mixture, sources:[B, N, T]. Shuffler outputs are
// constants to the optimizer, so origin == shuffler forces grad_attached off.
struct SourceEstimates {
  Tensor sources;
  SourceOrigin origin = SourceOrigin::solver;
  bool grad_attached = false;

  SourceEstimates() = default;
  SourceEstimates(Tensor s, SourceOrigin o, bool grad);
  std::int64_t batch() const { return sources.dim(0); }
  std::int64_t channels() const { return sources.dim(1); }
  std::int64_t length() const { return sources.dim(2); }
};

// Per batch item, the indices of the selected sources ordered by descending
// power (ties broken toward the lower index).
struct SelectionIndex {
  std::vector<std::int64_t> indices;  // flattened [B, N_R]
  std::int64_t batch = 0;
  std::int64_t n_selected = 0;
  std::int64_t at(std::int64_t b, std::int64_t r) const { return indices[b * n_selected + r]; }
};

// Mean squared amplitude per source: [B, N, T] -> [B, N].
Tensor source_power(const Tensor& sources);
Tensor source_power(const SourceEstimates& est);

SelectionIndex select_top_sources(const Tensor& sources, std::int64_t n_select);
SelectionIndex select_top_sources(const SourceEstimates& est, std::int64_t n_select);

// Uniform-residual projection onto { s : sum_n s[b,n,:] = mixture[b,:] }.
// selected:[B, N_R, T], mixture:[B, T].
Tensor mixture_consistency(const Tensor& selected, const Tensor& mixture);
SourceEstimates mixture_consistency(const SourceEstimates& selected, const WaveformBatch& mixture);

// Tape versions used inside training steps.
Value mixture_consistency(Tape& t, Value selected, Value mixture);
// Gather the selected channels: [B, N, T] -> [B, N_R, T].
Value gather_selected(Tape& t, Value sources, const SelectionIndex& sel);
Tensor gather_selected(const Tensor& sources, const SelectionIndex& sel);

}  // namespace remixsep

#endif  // REMIXSEP_SIGNALS_HPP_
