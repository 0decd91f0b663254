// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "json.hpp"
#include "remixsep/metrics.hpp"
#include "remixsep/optim.hpp"

namespace remixsep {

namespace {

Tensor row_tensor(const Tensor& t, std::int64_t row, std::int64_t len) {
  Tensor out({len});
  std::copy(t.v.begin() + row * len, t.v.begin() + (row + 1) * len, out.v.begin());
  return out;
}

Tensor block_tensor(const Tensor& t, std::int64_t offset, std::vector<std::int64_t> shape) {
  Tensor out(std::move(shape));
  std::copy(t.v.begin() + offset, t.v.begin() + offset + out.numel(), out.v.begin());
  return out;
}

Value mean_of(Tape& t, const std::vector<Value>& scalars, std::int64_t denom) {
  if (scalars.empty()) return t.constant(Tensor::scalar(0.0));
  Value acc = scalars[0];
  for (std::size_t i = 1; i < scalars.size(); ++i) acc = ad::add(t, acc, scalars[i]);
  return ad::scale(t, acc, 1.0 / static_cast<Scalar>(denom));
}

// est:[B, N_R, T] -> est[b, perm[b][n]] per target channel.
Value apply_alignment(Tape& t, Value est, const AlignmentResult& align, std::int64_t b,
                      std::int64_t n_r) {
  std::vector<std::int64_t> src_b(static_cast<std::size_t>(b * n_r));
  std::vector<std::int64_t> src_n(src_b.size());
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t n = 0; n < n_r; ++n) {
      src_b[bi * n_r + n] = bi;
      src_n[bi * n_r + n] = align.at(bi, n, n_r);
    }
  return ad::reindex(t, est, std::move(src_b), std::move(src_n), b, n_r);
}

// Eq-style alignment loss: mean over items of the summed per-channel loss
// against the (already aligned) targets.
Value alignment_loss_value(Tape& t, const Tensor& targets, Value aligned, double tau) {
  const std::int64_t b = targets.dim(0), n_r = targets.dim(1), len = targets.dim(2);
  std::vector<Value> items;
  items.reserve(static_cast<std::size_t>(b));
  for (std::int64_t bi = 0; bi < b; ++bi) {
    Value item;
    for (std::int64_t n = 0; n < n_r; ++n) {
      Value ref = t.constant(row_tensor(targets, bi * n_r + n, len));
      Value est = ad::block(t, aligned, (bi * n_r + n) * len, {len});
      Value term = thresholded_snr_loss(t, ref, est, tau);
      item = (n == 0) ? term : ad::add(t, item, term);
    }
    items.push_back(item);
  }
  return mean_of(t, items, b);
}

// Reconstruction loss against the observed mixtures: mean over items.
Value reconstruction_loss_value(Tape& t, const Tensor& mixtures, Value recon, double tau) {
  const std::int64_t b = mixtures.dim(0), len = mixtures.dim(1);
  std::vector<Value> items;
  items.reserve(static_cast<std::size_t>(b));
  for (std::int64_t bi = 0; bi < b; ++bi) {
    Value ref = t.constant(row_tensor(mixtures, bi, len));
    Value est = ad::block(t, recon, bi * len, {len});
    items.push_back(thresholded_snr_loss(t, ref, est, tau));
  }
  return mean_of(t, items, b);
}

// Top-power channel selection on a [N, T] slice already on the tape.
Value select_top_pair_slice(Tape& t, Value slice_nt, std::int64_t n_keep) {
  const Tensor& v = t.val(slice_nt);
  const std::int64_t n = v.dim(0), len = v.dim(1);
  Tensor as3({1, n, len}, v.v);
  SelectionIndex sel = select_top_sources(as3, n_keep);
  std::vector<std::int64_t> src_b(static_cast<std::size_t>(n_keep), 0);
  std::vector<std::int64_t> src_n(static_cast<std::size_t>(n_keep));
  for (std::int64_t r = 0; r < n_keep; ++r) src_n[r] = sel.at(0, r);
  Value as3v = ad::block(t, slice_nt, 0, {1, n, len});
  Value picked = ad::reindex(t, as3v, std::move(src_b), std::move(src_n), 1, n_keep);
  return ad::block(t, picked, 0, {n_keep, len});
}

int warn_once_flag = 0;
void warn_odd_batch() {
  if (warn_once_flag++ == 0)
    std::cerr << "[remixsep] odd batch size in pair remixing; dropping the last mixture\n";
}

StepStats finalize_step(Tape& t, Value loss, const SeparatorModel& student,
                        const SeparatorModel::Vars& vars, std::int64_t teacher_params) {
  StepStats st;
  st.loss_db = t.val(loss).v[0];
  if (t.requires_grad(loss)) {
    t.backward(loss);
    st.solver_grad = student.gather_flat_grads(t, vars);
  } else {
    st.solver_grad = Tensor::zeros({student.param_count()});
  }
  if (teacher_params > 0) st.teacher_grad = Tensor::zeros({teacher_params});
  st.tape_bytes = t.bytes_live();
  return st;
}

enum class InBatchLoss { alignment, reconstruction, both };

// Shared pipeline for the in-batch remixing methods. When `through_shuffler`
// is set the shuffler pass runs on the tape with the same parameters as the
// solver pass (cycle-consistent training); otherwise the shuffler is the
// detached teacher.
StepStats step_in_batch_impl(const Batch& batch, const SeparatorModel& teacher,
                             const SeparatorModel& student, const TrainConfig& cfg,
                             std::mt19937_64& rng, InBatchLoss which, bool through_shuffler) {
  const std::int64_t b = batch.size();
  const std::int64_t n_r = cfg.n_remix;
  RS_REQUIRE(b >= n_r, "in-batch remixing: batch smaller than N_R");

  Tape t;
  SeparatorModel::Vars vars = student.leaf_vars(t, true);
  Value mixtures = t.constant(batch.mixtures);

  Value shuf_sources;  // [B, N_R, T]
  if (through_shuffler) {
    Value tout = student.forward(t, vars, mixtures);
    SelectionIndex sel_t = select_top_sources(t.val(tout), n_r);
    shuf_sources = gather_selected(t, tout, sel_t);
  } else {
    SourceEstimates tout = teacher.separate(batch.mixtures, SourceOrigin::shuffler);
    SelectionIndex sel_t = select_top_sources(tout, n_r);
    shuf_sources = t.constant(gather_selected(tout.sources, sel_t));
  }
  if (cfg.mc.shuffler) shuf_sources = mixture_consistency(t, shuf_sources, mixtures);

  BatchShuffleSpec spec = make_batch_shuffle(b, n_r, rng);
  Value pseudo = remix_batch(t, shuf_sources, spec);
  const Tensor shuffled_targets = shuffle_sources(t.val(shuf_sources), spec);

  Value out = student.forward(t, vars, pseudo);
  SelectionIndex sel_s = select_top_sources(t.val(out), n_r);
  Value est = gather_selected(t, out, sel_s);
  if (cfg.mc.solver) est = mixture_consistency(t, est, pseudo);

  const AlignmentResult align =
      align_to_shuffler(shuffled_targets, t.val(est), default_signal_loss(cfg.tau));
  Value aligned = apply_alignment(t, est, align, b, n_r);

  Value loss;
  if (which == InBatchLoss::alignment) {
    loss = alignment_loss_value(t, shuffled_targets, aligned, cfg.tau);
  } else {
    Value recon = unshuffle_and_remix(t, aligned, spec);
    Value prop = reconstruction_loss_value(t, batch.mixtures, recon, cfg.tau);
    loss = (which == InBatchLoss::reconstruction)
               ? prop
               : ad::add(t, alignment_loss_value(t, shuffled_targets, aligned, cfg.tau), prop);
  }

  StepStats st = finalize_step(t, loss, student, vars,
                               through_shuffler ? 0 : teacher.param_count());
  st.candidates = align.candidates_per_item;
  return st;
}

// Shared pipeline for between-two-mixtures remixing.
StepStats step_pair_impl(const Batch& batch, const SeparatorModel& teacher,
                         const SeparatorModel& student, const TrainConfig& cfg,
                         std::mt19937_64& rng, bool through_shuffler) {
  const std::int64_t n_r = cfg.n_remix;
  const std::int64_t len = batch.mixtures.dim(1);
  std::int64_t b = batch.size();
  if (b % 2 != 0) {
    warn_odd_batch();
    --b;
  }
  const std::int64_t pairs = b / 2;
  RS_REQUIRE(pairs >= 1, "pair remixing: need at least two mixtures");

  Tape t;
  SeparatorModel::Vars vars = student.leaf_vars(t, true);

  // Shuffler pass: all N_T sources are remixed (N_R == N_T).
  Value tout;
  if (through_shuffler) {
    tout = student.forward(t, vars, t.constant(batch.mixtures));
  } else {
    tout = t.constant(teacher.separate(batch.mixtures, SourceOrigin::shuffler).sources);
  }
  const std::int64_t n_t = t.val(tout).dim(1);
  RS_REQUIRE(n_t == n_r, "pair remixing: N_R must equal the shuffler output count");

  std::vector<Value> pseudo_rows;
  pseudo_rows.reserve(static_cast<std::size_t>(2 * pairs));
  for (std::int64_t p = 0; p < pairs; ++p) {
    const std::int64_t b1 = 2 * p, b2 = 2 * p + 1;
    Value s1 = ad::block(t, tout, b1 * n_t * len, {1, n_t, len});
    Value s2 = ad::block(t, tout, b2 * n_t * len, {1, n_t, len});
    if (cfg.mc.shuffler) {
      s1 = mixture_consistency(t, s1, ad::block(t, t.constant(batch.mixtures), b1 * len, {1, len}));
      s2 = mixture_consistency(t, s2, ad::block(t, t.constant(batch.mixtures), b2 * len, {1, len}));
    }
    Value s1m = ad::block(t, s1, 0, {n_t, len});
    Value s2m = ad::block(t, s2, 0, {n_t, len});
    const Tensor p1 = source_power(Tensor({1, n_t, len}, t.val(s1m).v));
    const Tensor p2 = source_power(Tensor({1, n_t, len}, t.val(s2m).v));
    PairRemixPlan plan = make_pair_plan(p1.flat(), p2.flat(), rng, cfg.pair_placement);
    auto [x1p, x2p] = remix_pair(t, s1m, s2m, plan);
    pseudo_rows.push_back(x1p);
    pseudo_rows.push_back(x2p);
  }
  Value pseudo = ad::concat_rows(t, pseudo_rows);  // [2P, T]

  Value out = student.forward(t, vars, pseudo);
  const std::int64_t n_s = t.val(out).dim(1);

  std::vector<Value> pair_losses;
  StepStats st;
  for (std::int64_t p = 0; p < pairs; ++p) {
    Value est1 = ad::block(t, out, (2 * p) * n_s * len, {n_s, len});
    Value est2 = ad::block(t, out, (2 * p + 1) * n_s * len, {n_s, len});
    if (n_s > n_r) {
      est1 = select_top_pair_slice(t, est1, n_r);
      est2 = select_top_pair_slice(t, est2, n_r);
    }
    if (cfg.mc.solver) {
      Value e1 = ad::block(t, est1, 0, {1, n_r, len});
      Value e2 = ad::block(t, est2, 0, {1, n_r, len});
      e1 = mixture_consistency(t, e1, ad::block(t, pseudo, (2 * p) * len, {1, len}));
      e2 = mixture_consistency(t, e2, ad::block(t, pseudo, (2 * p + 1) * len, {1, len}));
      est1 = ad::block(t, e1, 0, {n_r, len});
      est2 = ad::block(t, e2, 0, {n_r, len});
    }

    std::span<const Scalar> x1(batch.mixtures.data() + (2 * p) * len,
                               static_cast<std::size_t>(len));
    std::span<const Scalar> x2(batch.mixtures.data() + (2 * p + 1) * len,
                               static_cast<std::size_t>(len));
    const AssignmentResult search =
        remix_pair_search_fast(x1, x2, t.val(est1), t.val(est2), cfg.tau);
    st.candidates = search.candidates_evaluated;

    if (cfg.l_thres && search.loss_db < *cfg.l_thres) {
      ++st.pairs_zeroed;  // below the threshold: zero loss, zero gradient
      continue;
    }
    std::vector<Scalar> w1(search.pair_select1.begin(), search.pair_select1.end());
    std::vector<Scalar> w2(search.pair_select2.begin(), search.pair_select2.end());
    std::vector<Scalar> inv1(w1.size()), inv2(w2.size());
    for (std::size_t i = 0; i < w1.size(); ++i) {
      inv1[i] = 1.0 - w1[i];
      inv2[i] = 1.0 - w2[i];
    }
    Value e_for_x1 = ad::add(t, ad::mix_channels(t, est1, w1), ad::mix_channels(t, est2, inv2));
    Value e_for_x2 = ad::add(t, ad::mix_channels(t, est1, inv1), ad::mix_channels(t, est2, w2));
    Value l1 = thresholded_snr_loss(t, t.constant(row_tensor(batch.mixtures, 2 * p, len)),
                                    e_for_x1, cfg.tau);
    Value l2 = thresholded_snr_loss(t, t.constant(row_tensor(batch.mixtures, 2 * p + 1, len)),
                                    e_for_x2, cfg.tau);
    pair_losses.push_back(ad::add(t, l1, l2));
  }

  Value loss = mean_of(t, pair_losses, pairs);
  StepStats out_st = finalize_step(t, loss, student, vars,
                                   through_shuffler ? 0 : teacher.param_count());
  out_st.candidates = st.candidates;
  out_st.pairs_zeroed = st.pairs_zeroed;
  return out_st;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::pit: return "pit";
    case Method::mixit: return "mixit";
    case Method::remixit: return "remixit";
    case Method::rccl: return "rccl";
    case Method::self_remixing_pair: return "self-remixing-pair";
    case Method::self_remixing_batch: return "self-remixing-batch";
    case Method::remixit_plus_self_remixing: return "remixit+self-remixing";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::pit, Method::mixit, Method::remixit, Method::rccl,
                   Method::self_remixing_pair, Method::self_remixing_batch,
                   Method::remixit_plus_self_remixing}) {
    if (to_string(m) == s) return m;
  }
  // Accept underscore spellings as well.
  std::string u = s;
  std::replace(u.begin(), u.end(), '_', '-');
  if (u != s) return method_from_string(u);
  throw std::invalid_argument("unknown method: " + s);
}

RemixAlgo TrainConfig::effective_remix_algo() const {
  if (remix_algo) return *remix_algo;
  switch (method) {
    case Method::rccl:
    case Method::self_remixing_pair:
      return RemixAlgo::pair;
    default:
      return RemixAlgo::in_batch;
  }
}

bool TrainConfig::uses_teacher() const {
  switch (method) {
    case Method::remixit:
    case Method::self_remixing_pair:
    case Method::self_remixing_batch:
    case Method::remixit_plus_self_remixing:
      return true;
    default:
      return false;
  }
}

void TrainConfig::validate() const {
  RS_REQUIRE(batch_size >= 2, "config: batch_size must be at least 2");
  RS_REQUIRE(grad_accum_steps >= 1, "config: grad_accum_steps must be positive");
  RS_REQUIRE(epochs >= 0, "config: negative epoch count");
  RS_REQUIRE(peak_lr > 0.0, "config: peak_lr must be positive");
  RS_REQUIRE(alpha >= 0.0 && alpha <= 1.0, "config: alpha must be in [0, 1]");
  RS_REQUIRE(tau > 0.0, "config: tau must be positive");
  RS_REQUIRE(n_teacher >= 1 && n_student >= 1 && n_remix >= 1, "config: bad channel counts");
  RS_REQUIRE(unsup_weight >= 0.0, "config: unsup_weight must be nonnegative");

  const RemixAlgo algo = effective_remix_algo();
  if (method == Method::rccl && algo == RemixAlgo::in_batch && !allow_rccl_in_batch)
    throw std::invalid_argument(
        "config: in-batch remixing with rccl collapses to the trivial solution and is rejected");
  if (method == Method::self_remixing_pair && algo == RemixAlgo::in_batch)
    throw std::invalid_argument("config: self-remixing-pair requires pair remixing");
  if ((method == Method::self_remixing_batch || method == Method::remixit ||
       method == Method::remixit_plus_self_remixing) &&
      algo == RemixAlgo::pair)
    throw std::invalid_argument("config: this method requires in-batch remixing");

  if (algo == RemixAlgo::pair &&
      (method == Method::rccl || method == Method::self_remixing_pair)) {
    RS_REQUIRE(n_remix % 2 == 0, "config: pair remixing requires even N_R");
    const int shuffler_outputs = method == Method::rccl ? n_student : n_teacher;
    RS_REQUIRE(n_remix == shuffler_outputs,
               "config: pair remixing remixes all shuffler outputs (N_R == N_T)");
    RS_REQUIRE(n_student >= n_remix, "config: solver outputs fewer than N_R");
  }
  if (algo == RemixAlgo::in_batch && method != Method::pit && method != Method::mixit) {
    RS_REQUIRE(batch_size >= n_remix, "config: in-batch remixing requires batch_size >= N_R");
    RS_REQUIRE(n_remix <= n_teacher && n_remix <= n_student,
               "config: N_R exceeds separator outputs");
  }
  if (semi_supervised)
    RS_REQUIRE(method != Method::pit && method != Method::mixit,
               "config: semi-supervised training pairs PIT with a remixing method");
  if (protocol == UpdateProtocol::frozen)
    RS_REQUIRE(uses_teacher(), "config: frozen protocol needs a teacher-based method");
}

SeparatorConfig TrainConfig::student_config() const {
  SeparatorConfig c;
  c.stft = stft;
  c.sample_rate_hz = sample_rate_hz;
  c.n_outputs = n_student;
  c.hidden = hidden;
  c.context = context;
  return c;
}

SeparatorConfig TrainConfig::teacher_config() const {
  SeparatorConfig c = student_config();
  c.n_outputs = n_teacher;
  return c;
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  RS_REQUIRE(!indices.empty(), "make_batch: empty index set");
  const std::int64_t b = static_cast<std::int64_t>(indices.size());
  const std::int64_t len = ds.items[indices[0]].mixture.numel();
  std::int64_t max_k = 0;
  for (std::size_t i : indices)
    max_k = std::max<std::int64_t>(max_k, ds.items[i].references.dim(0));

  Batch batch;
  batch.sample_rate_hz = ds.sample_rate_hz;
  batch.mixtures = Tensor({b, len});
  batch.references = Tensor({b, max_k, len});
  batch.n_speech.resize(static_cast<std::size_t>(b));
  for (std::int64_t bi = 0; bi < b; ++bi) {
    const MixtureRecord& r = ds.items[indices[static_cast<std::size_t>(bi)]];
    RS_REQUIRE(r.mixture.numel() == len, "make_batch: ragged mixture lengths");
    std::copy(r.mixture.v.begin(), r.mixture.v.end(), batch.mixtures.v.begin() + bi * len);
    std::copy(r.references.v.begin(), r.references.v.end(),
              batch.references.v.begin() + bi * max_k * len);
    batch.n_speech[static_cast<std::size_t>(bi)] = r.n_speech;
  }
  return batch;
}

StepStats step_supervised_pit(const Batch& batch, const SeparatorModel& model,
                              const TrainConfig& cfg) {
  if (!batch.has_references())
    throw std::invalid_argument("step_supervised_pit: batch carries no references");
  const std::int64_t b = batch.size();
  const std::int64_t len = batch.mixtures.dim(1);
  const std::int64_t n = model.config().n_outputs;

  Tape t;
  SeparatorModel::Vars vars = model.leaf_vars(t, true);
  Value out = model.forward(t, vars, t.constant(batch.mixtures));
  const Tensor& out_v = t.val(out);
  const SignalLossFn fn = default_signal_loss(cfg.tau);

  std::vector<Value> items;
  std::int64_t candidates = 0;
  for (std::int64_t bi = 0; bi < b; ++bi) {
    const std::int64_t k = batch.n_speech[static_cast<std::size_t>(bi)] + 1;
    const Tensor refs = block_tensor(batch.references, bi * batch.references.dim(1) * len,
                                     {k, len});
    const Tensor ests = block_tensor(out_v, bi * n * len, {n, len});
    const AssignmentResult res = pit_loss(refs, ests, fn);
    candidates = res.candidates_evaluated;
    Value item;
    for (std::int64_t i = 0; i < k; ++i) {
      Value ref = t.constant(row_tensor(refs, i, len));
      Value est = ad::block(t, out, (bi * n + res.permutation[i]) * len, {len});
      Value term = thresholded_snr_loss(t, ref, est, cfg.tau);
      item = (i == 0) ? term : ad::add(t, item, term);
    }
    items.push_back(item);
  }
  Value loss = mean_of(t, items, b);
  StepStats st = finalize_step(t, loss, model, vars, 0);
  st.candidates = candidates;
  return st;
}

StepStats step_mixit(const Batch& batch, const SeparatorModel& model, const TrainConfig& cfg) {
  std::int64_t b = batch.size();
  if (b % 2 != 0) {
    warn_odd_batch();
    --b;
  }
  const std::int64_t pairs = b / 2;
  RS_REQUIRE(pairs >= 1, "step_mixit: need at least two mixtures");
  const std::int64_t len = batch.mixtures.dim(1);
  const std::int64_t n = model.config().n_outputs;

  std::int64_t max_k = 0;
  for (std::int64_t bi = 0; bi < b; ++bi)
    max_k = std::max<std::int64_t>(max_k, batch.n_speech[static_cast<std::size_t>(bi)] + 1);
  if (n < 2 * max_k)
    throw std::invalid_argument(
        "step_mixit: separator output count must be at least twice the source count");

  Tensor moms({pairs, len});
  for (std::int64_t p = 0; p < pairs; ++p)
    for (std::int64_t i = 0; i < len; ++i)
      moms.v[p * len + i] =
          batch.mixtures.v[(2 * p) * len + i] + batch.mixtures.v[(2 * p + 1) * len + i];

  Tape t;
  SeparatorModel::Vars vars = model.leaf_vars(t, true);
  Value out = model.forward(t, vars, t.constant(moms));
  const Tensor& out_v = t.val(out);

  std::vector<Value> items;
  std::int64_t candidates = 0;
  for (std::int64_t p = 0; p < pairs; ++p) {
    std::span<const Scalar> x1(batch.mixtures.data() + (2 * p) * len,
                               static_cast<std::size_t>(len));
    std::span<const Scalar> x2(batch.mixtures.data() + (2 * p + 1) * len,
                               static_cast<std::size_t>(len));
    const Tensor ests = block_tensor(out_v, p * n * len, {n, len});
    const AssignmentResult res = mixit_search_fast(x1, x2, ests, cfg.tau);
    candidates = res.candidates_evaluated;
    std::vector<Scalar> w1(static_cast<std::size_t>(n)), w2(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
      w1[j] = res.mix_assignment[j] == 0 ? 1.0 : 0.0;
      w2[j] = 1.0 - w1[j];
    }
    Value est_nt = ad::block(t, out, p * n * len, {n, len});
    Value e1 = ad::mix_channels(t, est_nt, w1);
    Value e2 = ad::mix_channels(t, est_nt, w2);
    Value l1 = thresholded_snr_loss(t, t.constant(row_tensor(batch.mixtures, 2 * p, len)), e1,
                                    cfg.tau);
    Value l2 = thresholded_snr_loss(t, t.constant(row_tensor(batch.mixtures, 2 * p + 1, len)), e2,
                                    cfg.tau);
    items.push_back(ad::add(t, l1, l2));
  }
  Value loss = mean_of(t, items, pairs);
  StepStats st = finalize_step(t, loss, model, vars, 0);
  st.candidates = candidates;
  return st;
}

StepStats step_remixit(const Batch& batch, const TeacherStudentState& state,
                       const TrainConfig& cfg, std::mt19937_64& rng) {
  return step_in_batch_impl(batch, state.teacher(), state.student(), cfg, rng,
                            InBatchLoss::alignment, false);
}

StepStats step_self_remixing_batch(const Batch& batch, const TeacherStudentState& state,
                                   const TrainConfig& cfg, std::mt19937_64& rng) {
  return step_in_batch_impl(batch, state.teacher(), state.student(), cfg, rng,
                            InBatchLoss::reconstruction, false);
}

StepStats step_remixit_plus_self_remixing(const Batch& batch, const TeacherStudentState& state,
                                          const TrainConfig& cfg, std::mt19937_64& rng) {
  return step_in_batch_impl(batch, state.teacher(), state.student(), cfg, rng, InBatchLoss::both,
                            false);
}

StepStats step_self_remixing_pair(const Batch& batch, const TeacherStudentState& state,
                                  const TrainConfig& cfg, std::mt19937_64& rng) {
  return step_pair_impl(batch, state.teacher(), state.student(), cfg, rng, false);
}

StepStats step_rccl(const Batch& batch, const SeparatorModel& model, const TrainConfig& cfg,
                    std::mt19937_64& rng) {
  if (cfg.effective_remix_algo() == RemixAlgo::in_batch) {
    if (!cfg.allow_rccl_in_batch)
      throw std::invalid_argument("step_rccl: in-batch remixing is rejected for rccl");
    return step_in_batch_impl(batch, model, model, cfg, rng, InBatchLoss::reconstruction, true);
  }
  return step_pair_impl(batch, model, model, cfg, rng, true);
}

StepStats step_semi_supervised(const Batch& labeled, const Batch& in_domain,
                               const TeacherStudentState& state, const TrainConfig& cfg,
                               std::mt19937_64& rng) {
  RS_REQUIRE(labeled.size() >= 1 && in_domain.size() >= 1,
             "step_semi_supervised: both sub-batches must be nonempty");
  StepStats sup = step_supervised_pit(labeled, state.student(), cfg);
  StepStats unsup;
  switch (cfg.method) {
    case Method::remixit: unsup = step_remixit(in_domain, state, cfg, rng); break;
    case Method::self_remixing_batch:
      unsup = step_self_remixing_batch(in_domain, state, cfg, rng);
      break;
    case Method::remixit_plus_self_remixing:
      unsup = step_remixit_plus_self_remixing(in_domain, state, cfg, rng);
      break;
    case Method::self_remixing_pair:
      unsup = step_self_remixing_pair(in_domain, state, cfg, rng);
      break;
    case Method::rccl: unsup = step_rccl(in_domain, state.student(), cfg, rng); break;
    default:
      throw std::invalid_argument("step_semi_supervised: unsupported in-domain method");
  }
  StepStats st;
  st.loss_db = sup.loss_db + cfg.unsup_weight * unsup.loss_db;
  st.solver_grad = sup.solver_grad;
  for (std::int64_t i = 0; i < st.solver_grad.numel(); ++i)
    st.solver_grad.v[i] += cfg.unsup_weight * unsup.solver_grad.v[i];
  st.teacher_grad = unsup.teacher_grad;
  st.tape_bytes = sup.tape_bytes + unsup.tape_bytes;
  st.candidates = unsup.candidates;
  st.pairs_zeroed = unsup.pairs_zeroed;
  return st;
}

double validation_sisdr(const SeparatorModel& model, const Dataset& ds, bool mc_inference,
                        int batch_size) {
  RS_REQUIRE(!ds.items.empty(), "validation_sisdr: empty dataset");
  const std::int64_t n = model.config().n_outputs;
  const std::int64_t len = ds.samples;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t stop = std::min(ds.size(), start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    Batch batch = make_batch(ds, idx);
    SourceEstimates est = model.separate(batch.mixtures, SourceOrigin::solver);
    Tensor sources = est.sources;
    if (mc_inference) sources = mixture_consistency(sources, batch.mixtures);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const MixtureRecord& r = ds.items[idx[i]];
      const std::int64_t m = r.n_speech;  // speech references only
      Tensor est_i = block_tensor(sources, static_cast<std::int64_t>(i) * n * len, {1, n, len});
      Tensor ref_i = block_tensor(r.references, 0, {1, m, len});
      total += evaluate_separation(est_i, ref_i)[0];
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double collapse_metric(const SeparatorModel& model, const Dataset& ds, int batch_size) {
  RS_REQUIRE(!ds.items.empty(), "collapse_metric: empty dataset");
  const std::int64_t n = model.config().n_outputs;
  const std::int64_t len = ds.samples;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t stop = std::min(ds.size(), start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    Batch batch = make_batch(ds, idx);
    SourceEstimates est = model.separate(batch.mixtures, SourceOrigin::solver);
    const Tensor powers = source_power(est);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::int64_t bi = static_cast<std::int64_t>(i);
      double top = 0.0;
      for (std::int64_t c = 0; c < n; ++c) top = std::max(top, powers.v[bi * n + c]);
      std::span<const Scalar> mix(batch.mixtures.data() + bi * len,
                                  static_cast<std::size_t>(len));
      total += top / std::max(mean_power(mix), 1e-30);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

namespace {

std::string format_metrics_line(const EpochRecord& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "{\"epoch\":%d,\"step\":%lld,\"train_loss_db\":%.9g,\"valid_sisdr_db\":%.9g,"
                "\"lr\":%.9g,\"collapse_metric\":%.9g,\"wall_time_s\":%.3f}",
                r.epoch, static_cast<long long>(r.step), r.train_loss_db, r.valid_sisdr_db, r.lr,
                r.collapse, r.wall_time_s);
  return buf;
}

void dump_nan_state(const std::filesystem::path& out_dir, int epoch, std::int64_t step,
                    double loss, const SeparatorModel& model) {
  nlohmann::ordered_json j;
  j["event"] = "non_finite_loss";
  j["epoch"] = epoch;
  j["step"] = step;
  j["loss_db"] = std::isnan(loss) ? "nan" : "inf";
  const Tensor p = model.flat_params();
  j["param_norm"] = std::sqrt(sum_squares(p.flat()));
  j["param_count"] = p.numel();
  std::ofstream os(out_dir / "nan_dump.json");
  os << j.dump(2) << "\n";
}

}  // namespace

TrainReport run_training(const TrainConfig& cfg, const TrainInputs& data,
                         const std::filesystem::path& out_dir,
                         const std::optional<SeparatorModel>& pretrained) {
  cfg.validate();
  RS_REQUIRE(data.train != nullptr && data.valid != nullptr,
             "run_training: train and valid datasets are required");
  if (cfg.semi_supervised)
    RS_REQUIRE(data.sup_train != nullptr, "run_training: semi-supervised runs need sup_train");
  std::filesystem::create_directories(out_dir);

  const bool needs_pretrained = cfg.uses_teacher() || cfg.method == Method::rccl ||
                                cfg.semi_supervised;
  if (needs_pretrained && !pretrained)
    throw std::invalid_argument("run_training: this method refines a pretrained model");

  std::mt19937_64 init_rng = make_rng(cfg.seed, 0x494e4954u);
  TeacherStudentState state = [&]() {
    if (cfg.uses_teacher()) {
      if (cfg.protocol == UpdateProtocol::frozen)
        return TeacherStudentState::make_frozen(*pretrained, cfg.student_config(), init_rng);
      return TeacherStudentState::make_ema(*pretrained, cfg.alpha);
    }
    SeparatorModel model =
        pretrained ? *pretrained : SeparatorModel(cfg.student_config(), init_rng);
    return TeacherStudentState::make_ema(model, 1.0);  // ring holder; teacher unused
  }();

  AdamW opt(state.student().param_count(), cfg.weight_decay);
  Tensor params = state.student().flat_params();
  Tensor grad_accum = Tensor::zeros({state.student().param_count()});
  int accum_count = 0;

  std::ofstream metrics(out_dir / "metrics.jsonl");
  if (!metrics)
    throw std::runtime_error("run_training: cannot write metrics log in " + out_dir.string());

  TrainReport report;
  report.metrics_path = (out_dir / "metrics.jsonl").string();
  report.initial_valid_sisdr = validation_sisdr(state.student(), *data.valid, cfg.mc.inference);
  report.best_epoch_valid_sisdr = -1e30;

  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t micro_steps = 0;
  std::int64_t opt_steps = 0;
  double current_lr = 0.0;

  // Rolling cursor over the labeled set for semi-supervised runs.
  std::vector<std::size_t> sup_order;
  std::size_t sup_cursor = 0;
  int sup_reshuffles = 0;
  const int sup_half = cfg.batch_size / 2;

  auto flush_opt_step = [&](int epoch) {
    if (accum_count == 0) return;
    for (auto& g : grad_accum.v) g /= static_cast<Scalar>(accum_count);
    current_lr = scheduled_lr(cfg.peak_lr, cfg.warmup_steps, cfg.lr_decay.factor,
                              cfg.lr_decay.every_n_epochs, opt_steps + 1, epoch);
    opt.step(params, grad_accum, current_lr);
    state.student().set_flat_params(params);
    ++opt_steps;
    std::fill(grad_accum.v.begin(), grad_accum.v.end(), 0.0);
    accum_count = 0;
  };

  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(data.train->size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng = make_rng(cfg.seed, 0xE0000000ull + epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    int loss_count = 0;
    const std::size_t per_step =
        cfg.semi_supervised ? static_cast<std::size_t>(cfg.batch_size - sup_half)
                            : static_cast<std::size_t>(cfg.batch_size);

    for (std::size_t at = 0; at + per_step <= order.size(); at += per_step) {
      if (cfg.max_steps && micro_steps >= *cfg.max_steps) {
        stop = true;
        break;
      }
      Batch batch = make_batch(*data.train, {order.data() + at, per_step});
      std::mt19937_64 step_rng = make_rng(cfg.seed, 0x50000000ull + micro_steps);

      StepStats st;
      switch (cfg.method) {
        case Method::pit: st = step_supervised_pit(batch, state.student(), cfg); break;
        case Method::mixit: st = step_mixit(batch, state.student(), cfg); break;
        case Method::rccl:
          if (cfg.semi_supervised) break;
          st = step_rccl(batch, state.student(), cfg, step_rng);
          break;
        default: break;
      }
      if (cfg.semi_supervised) {
        if (sup_cursor + sup_half > sup_order.size()) {
          sup_order.resize(data.sup_train->size());
          std::iota(sup_order.begin(), sup_order.end(), 0);
          std::mt19937_64 sup_rng = make_rng(cfg.seed, 0xF0000000ull + sup_reshuffles++);
          std::shuffle(sup_order.begin(), sup_order.end(), sup_rng);
          sup_cursor = 0;
        }
        Batch labeled = make_batch(*data.sup_train,
                                   {sup_order.data() + sup_cursor,
                                    static_cast<std::size_t>(sup_half)});
        sup_cursor += sup_half;
        st = step_semi_supervised(labeled, batch, state, cfg, step_rng);
      } else if (cfg.uses_teacher()) {
        switch (cfg.method) {
          case Method::remixit: st = step_remixit(batch, state, cfg, step_rng); break;
          case Method::self_remixing_batch:
            st = step_self_remixing_batch(batch, state, cfg, step_rng);
            break;
          case Method::self_remixing_pair:
            st = step_self_remixing_pair(batch, state, cfg, step_rng);
            break;
          case Method::remixit_plus_self_remixing:
            st = step_remixit_plus_self_remixing(batch, state, cfg, step_rng);
            break;
          default: break;
        }
      }

      if (!std::isfinite(st.loss_db)) {
        dump_nan_state(out_dir, epoch, micro_steps, st.loss_db, state.student());
        throw std::runtime_error("run_training: non-finite loss; state dumped to nan_dump.json");
      }
      for (std::int64_t i = 0; i < grad_accum.numel(); ++i) grad_accum.v[i] += st.solver_grad.v[i];
      ++accum_count;
      loss_sum += st.loss_db;
      ++loss_count;
      ++micro_steps;
      if (accum_count == cfg.grad_accum_steps) flush_opt_step(epoch);
    }
    flush_opt_step(epoch);

    const double valid = validation_sisdr(state.student(), *data.valid, cfg.mc.inference);
    const double collapse = collapse_metric(state.student(), *data.valid);
    state.record_checkpoint(valid);
    if (cfg.uses_teacher()) state.epoch_end_update();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = micro_steps;
    rec.train_loss_db = loss_count > 0 ? loss_sum / loss_count : 0.0;
    rec.valid_sisdr_db = valid;
    rec.lr = current_lr;
    rec.collapse = collapse;
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    metrics << format_metrics_line(rec) << "\n";
    metrics.flush();
    report.epochs.push_back(rec);
    report.best_epoch_valid_sisdr = std::max(report.best_epoch_valid_sisdr, valid);
  }

  // Averaged best checkpoints are the tested model.
  SeparatorModel averaged = state.student();
  if (state.ring_size() > 0) averaged.set_flat_params(state.average_best());
  report.final_valid_sisdr = validation_sisdr(averaged, *data.valid, cfg.mc.inference);
  report.total_steps = micro_steps;

  const auto avg_path = out_dir / "averaged.ckpt";
  const auto student_path = out_dir / "student.ckpt";
  save_checkpoint(avg_path, averaged, CheckpointRole::solver,
                  static_cast<std::uint64_t>(micro_steps));
  save_checkpoint(student_path, state.student(), CheckpointRole::solver,
                  static_cast<std::uint64_t>(micro_steps));
  report.averaged_ckpt_path = avg_path.string();
  report.student_ckpt_path = student_path.string();
  if (cfg.uses_teacher()) {
    const auto teacher_path = out_dir / "teacher.ckpt";
    save_checkpoint(teacher_path, state.teacher(), CheckpointRole::shuffler,
                    static_cast<std::uint64_t>(micro_steps));
    report.teacher_ckpt_path = teacher_path.string();
  }

  nlohmann::ordered_json j;
  j["method"] = to_string(cfg.method);
  j["seed"] = cfg.seed;
  j["total_steps"] = report.total_steps;
  j["initial_valid_sisdr_db"] = report.initial_valid_sisdr;
  j["best_epoch_valid_sisdr_db"] = report.best_epoch_valid_sisdr;
  j["final_valid_sisdr_db"] = report.final_valid_sisdr;
  j["averaged_checkpoint"] = report.averaged_ckpt_path;
  std::ofstream rj(out_dir / "report.json");
  rj << j.dump(2) << "\n";
  return report;
}

namespace {

nlohmann::ordered_json config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["method"] = to_string(c.method);
  j["batch_size"] = c.batch_size;
  j["grad_accum_steps"] = c.grad_accum_steps;
  j["peak_lr"] = c.peak_lr;
  j["warmup_steps"] = c.warmup_steps;
  j["lr_decay"] = {{"factor", c.lr_decay.factor}, {"every_n_epochs", c.lr_decay.every_n_epochs}};
  j["epochs"] = c.epochs;
  j["alpha"] = c.alpha;
  if (c.l_thres) j["l_thres"] = *c.l_thres;
  j["n_teacher"] = c.n_teacher;
  j["n_student"] = c.n_student;
  j["n_remix"] = c.n_remix;
  j["mc"] = {{"shuffler", c.mc.shuffler}, {"solver", c.mc.solver}, {"inference", c.mc.inference}};
  j["seed"] = c.seed;
  j["semi_supervised"] = c.semi_supervised;
  j["unsup_weight"] = c.unsup_weight;
  j["protocol"] = c.protocol == UpdateProtocol::frozen ? "frozen" : "ema";
  j["pair_placement"] = c.pair_placement == PairPlacement::both_tops_to_first
                            ? "both-tops-to-first"
                            : "tops-stay-home";
  if (c.remix_algo)
    j["remix_algo"] = *c.remix_algo == RemixAlgo::pair ? "pair" : "in-batch";
  j["hidden"] = c.hidden;
  j["context"] = c.context;
  j["weight_decay"] = c.weight_decay;
  j["tau"] = c.tau;
  if (c.max_steps) j["max_steps"] = *c.max_steps;
  j["rccl_activation_checkpointing"] = c.rccl_activation_checkpointing;
  j["stft"] = {{"fft_size", c.stft.fft_size},
               {"window_length", c.stft.window_length},
               {"hop_length", c.stft.hop_length}};
  j["sample_rate_hz"] = c.sample_rate_hz;
  return j;
}

void config_from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("method")) c.method = method_from_string(j["method"].get<std::string>());
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("grad_accum_steps")) c.grad_accum_steps = j["grad_accum_steps"].get<int>();
  if (j.contains("peak_lr")) c.peak_lr = j["peak_lr"].get<double>();
  if (j.contains("warmup_steps")) c.warmup_steps = j["warmup_steps"].get<int>();
  if (j.contains("lr_decay")) {
    const auto& d = j["lr_decay"];
    if (d.contains("factor")) c.lr_decay.factor = d["factor"].get<double>();
    if (d.contains("every_n_epochs")) c.lr_decay.every_n_epochs = d["every_n_epochs"].get<int>();
  }
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
  if (j.contains("l_thres")) c.l_thres = j["l_thres"].get<double>();
  if (j.contains("n_teacher")) c.n_teacher = j["n_teacher"].get<int>();
  if (j.contains("n_student")) c.n_student = j["n_student"].get<int>();
  if (j.contains("n_remix")) c.n_remix = j["n_remix"].get<int>();
  if (j.contains("mc")) {
    const auto& m = j["mc"];
    if (m.contains("shuffler")) c.mc.shuffler = m["shuffler"].get<bool>();
    if (m.contains("solver")) c.mc.solver = m["solver"].get<bool>();
    if (m.contains("inference")) c.mc.inference = m["inference"].get<bool>();
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("semi_supervised")) c.semi_supervised = j["semi_supervised"].get<bool>();
  if (j.contains("unsup_weight")) c.unsup_weight = j["unsup_weight"].get<double>();
  if (j.contains("protocol"))
    c.protocol = j["protocol"].get<std::string>() == "frozen" ? UpdateProtocol::frozen
                                                              : UpdateProtocol::ema_epoch_end;
  if (j.contains("pair_placement"))
    c.pair_placement = j["pair_placement"].get<std::string>() == "tops-stay-home"
                           ? PairPlacement::tops_stay_home
                           : PairPlacement::both_tops_to_first;
  if (j.contains("remix_algo"))
    c.remix_algo = j["remix_algo"].get<std::string>() == "pair" ? RemixAlgo::pair
                                                                : RemixAlgo::in_batch;
  if (j.contains("hidden")) c.hidden = j["hidden"].get<int>();
  if (j.contains("context")) c.context = j["context"].get<int>();
  if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("tau")) c.tau = j["tau"].get<double>();
  if (j.contains("max_steps")) c.max_steps = j["max_steps"].get<std::int64_t>();
  if (j.contains("rccl_activation_checkpointing"))
    c.rccl_activation_checkpointing = j["rccl_activation_checkpointing"].get<bool>();
  if (j.contains("stft")) {
    const auto& s = j["stft"];
    if (s.contains("fft_size")) c.stft.fft_size = s["fft_size"].get<int>();
    if (s.contains("window_length")) c.stft.window_length = s["window_length"].get<int>();
    if (s.contains("hop_length")) c.stft.hop_length = s["hop_length"].get<int>();
  }
  if (j.contains("sample_rate_hz")) c.sample_rate_hz = j["sample_rate_hz"].get<int>();
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text) {
  TrainConfig c;
  config_from_json(nlohmann::json::parse(text), c);
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_train_config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return train_config_from_json_text(text);
}

std::string train_config_to_json_text(const TrainConfig& cfg) { return config_json(cfg).dump(2); }

}  // namespace remixsep
