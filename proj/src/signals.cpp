// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/signals.hpp"

#include <algorithm>
#include <numeric>

namespace remixsep {

WaveformBatch::WaveformBatch(Tensor s, int rate) : samples(std::move(s)), sample_rate_hz(rate) {
  RS_REQUIRE(samples.rank() == 2, "WaveformBatch: samples must be [B, T]");
  RS_REQUIRE(samples.dim(0) >= 1 && samples.dim(1) >= 1, "WaveformBatch: empty batch");
  RS_REQUIRE(sample_rate_hz > 0, "WaveformBatch: sample rate must be positive");
  RS_REQUIRE(all_finite(samples), "WaveformBatch: non-finite samples");
}

SourceEstimates::SourceEstimates(Tensor s, SourceOrigin o, bool grad)
    : sources(std::move(s)), origin(o), grad_attached(grad) {
  RS_REQUIRE(sources.rank() == 3, "SourceEstimates: sources must be [B, N, T]");
  RS_REQUIRE(sources.dim(1) >= 1, "SourceEstimates: need at least one source");
  RS_REQUIRE(all_finite(sources), "SourceEstimates: non-finite entries");
  RS_REQUIRE(origin != SourceOrigin::shuffler || !grad_attached,
             "SourceEstimates: shuffler outputs must be detached");
}

Tensor source_power(const Tensor& sources) {
  RS_REQUIRE(sources.rank() == 3, "source_power: expects [B, N, T]");
  const std::int64_t b = sources.dim(0), n = sources.dim(1), len = sources.dim(2);
  Tensor p({b, n});
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t ni = 0; ni < n; ++ni) {
      std::span<const Scalar> s(sources.data() + (bi * n + ni) * len,
                                static_cast<std::size_t>(len));
      p.v[bi * n + ni] = mean_power(s);
    }
  return p;
}

Tensor source_power(const SourceEstimates& est) { return source_power(est.sources); }

SelectionIndex select_top_sources(const Tensor& sources, std::int64_t n_select) {
  const Tensor p = source_power(sources);
  const std::int64_t b = p.dim(0), n = p.dim(1);
  RS_REQUIRE(n_select >= 1 && n_select <= n, "select_top_sources: selection count out of range");
  SelectionIndex sel;
  sel.batch = b;
  sel.n_selected = n_select;
  sel.indices.resize(static_cast<std::size_t>(b * n_select));
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t bi = 0; bi < b; ++bi) {
    std::iota(order.begin(), order.end(), 0);
    const Scalar* pw = p.data() + bi * n;
    // Descending power; lowest index wins ties.
    std::stable_sort(order.begin(), order.end(),
                     [pw](std::int64_t a, std::int64_t c) { return pw[a] > pw[c]; });
    for (std::int64_t r = 0; r < n_select; ++r) sel.indices[bi * n_select + r] = order[r];
  }
  return sel;
}

SelectionIndex select_top_sources(const SourceEstimates& est, std::int64_t n_select) {
  return select_top_sources(est.sources, n_select);
}

Value mixture_consistency(Tape& t, Value selected, Value mixture) {
  const Tensor& s = t.val(selected);
  const Tensor& x = t.val(mixture);
  RS_REQUIRE(s.rank() == 3, "mixture_consistency: sources must be [B, N_R, T]");
  RS_REQUIRE(x.rank() == 2 && x.dim(0) == s.dim(0) && x.dim(1) == s.dim(2),
             "mixture_consistency: mixture shape mismatch");
  const std::int64_t n_r = s.dim(1);
  RS_REQUIRE(n_r >= 1, "mixture_consistency: no sources selected");
  Value residual = ad::sub(t, mixture, ad::sum_channels(t, selected));
  return ad::bcast_add_channel(t, selected, ad::scale(t, residual, 1.0 / static_cast<Scalar>(n_r)));
}

Tensor mixture_consistency(const Tensor& selected, const Tensor& mixture) {
  Tape t;
  Value out = mixture_consistency(t, t.constant(selected), t.constant(mixture));
  return t.val(out);
}

SourceEstimates mixture_consistency(const SourceEstimates& selected,
                                    const WaveformBatch& mixture) {
  return SourceEstimates(mixture_consistency(selected.sources, mixture.samples), selected.origin,
                         selected.grad_attached);
}

Value gather_selected(Tape& t, Value sources, const SelectionIndex& sel) {
  const Tensor& s = t.val(sources);
  RS_REQUIRE(s.rank() == 3 && s.dim(0) == sel.batch, "gather_selected: batch mismatch");
  std::vector<std::int64_t> src_b(static_cast<std::size_t>(sel.batch * sel.n_selected));
  std::vector<std::int64_t> src_n(src_b.size());
  for (std::int64_t b = 0; b < sel.batch; ++b)
    for (std::int64_t r = 0; r < sel.n_selected; ++r) {
      src_b[b * sel.n_selected + r] = b;
      src_n[b * sel.n_selected + r] = sel.at(b, r);
    }
  return ad::reindex(t, sources, std::move(src_b), std::move(src_n), sel.batch, sel.n_selected);
}

Tensor gather_selected(const Tensor& sources, const SelectionIndex& sel) {
  Tape t;
  Value out = gather_selected(t, t.constant(sources), sel);
  return t.val(out);
}

}  // namespace remixsep
