// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/separator.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace remixsep {

namespace {
constexpr Scalar kFeatureEps = 1e-8;
constexpr char kMagic[8] = {'R', 'S', 'E', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

Scalar logit(Scalar p) {
  p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
  return std::log(p / (1.0 - p));
}

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

SeparatorModel::SeparatorModel(const SeparatorConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg), kernels_(get_stft_kernels(cfg.stft)) {
  RS_REQUIRE(cfg.n_outputs >= 1, "separator: need at least one output channel");
  RS_REQUIRE(cfg.hidden >= 1 && cfg.context >= 1, "separator: bad layer sizes");
  const std::int64_t f = cfg.bins();
  const std::int64_t in1 = static_cast<std::int64_t>(cfg.context) * f;
  const std::int64_t out2 = static_cast<std::int64_t>(cfg.n_outputs) * f;
  w1_ = Tensor({in1, cfg.hidden});
  b1_ = Tensor({cfg.hidden});
  w2_ = Tensor({cfg.hidden, out2});
  b2_ = Tensor({out2});
  const Scalar s1 = std::sqrt(6.0 / static_cast<Scalar>(in1 + cfg.hidden));
  const Scalar s2 = std::sqrt(6.0 / static_cast<Scalar>(cfg.hidden + out2));
  std::uniform_real_distribution<Scalar> u(-1.0, 1.0);
  for (auto& x : w1_.v) x = s1 * u(rng);
  for (auto& x : w2_.v) x = s2 * u(rng);
}

SeparatorModel SeparatorModel::uniform(const SeparatorConfig& cfg) {
  Tensor masks({cfg.n_outputs, cfg.bins()});
  const Scalar m = 1.0 / static_cast<Scalar>(cfg.n_outputs);
  for (auto& x : masks.v) x = m;
  return constant_mask(cfg, masks);
}

SeparatorModel SeparatorModel::constant_mask(const SeparatorConfig& cfg, const Tensor& masks) {
  RS_REQUIRE(masks.rank() == 2 && masks.dim(0) == cfg.n_outputs && masks.dim(1) == cfg.bins(),
             "constant_mask: masks must be [N, F]");
  std::mt19937_64 rng(0);
  SeparatorModel model(cfg, rng);
  for (auto& x : model.w1_.v) x = 0.0;
  for (auto& x : model.w2_.v) x = 0.0;
  for (std::int64_t i = 0; i < masks.numel(); ++i) model.b2_.v[i] = logit(masks.v[i]);
  return model;
}

std::int64_t SeparatorModel::param_count() const {
  return w1_.numel() + b1_.numel() + w2_.numel() + b2_.numel();
}

Tensor SeparatorModel::flat_params() const {
  Tensor flat({param_count()});
  std::int64_t at = 0;
  for (const Tensor* t : {&w1_, &b1_, &w2_, &b2_}) {
    std::copy(t->v.begin(), t->v.end(), flat.v.begin() + at);
    at += t->numel();
  }
  return flat;
}

void SeparatorModel::set_flat_params(const Tensor& flat) {
  RS_REQUIRE(flat.numel() == param_count(), "set_flat_params: size mismatch");
  std::int64_t at = 0;
  for (Tensor* t : {&w1_, &b1_, &w2_, &b2_}) {
    std::copy(flat.v.begin() + at, flat.v.begin() + at + t->numel(), t->v.begin());
    at += t->numel();
  }
}

SeparatorModel::Vars SeparatorModel::leaf_vars(Tape& t, bool requires_grad) const {
  auto push = [&](const Tensor& p) { return requires_grad ? t.leaf(p) : t.constant(p); };
  return Vars{push(w1_), push(b1_), push(w2_), push(b2_)};
}

Value SeparatorModel::forward(Tape& t, const Vars& vars, Value wave) const {
  const Tensor& w = t.val(wave);
  RS_REQUIRE(w.rank() == 2, "separator forward: expects [B, T]");
  const std::int64_t samples = w.dim(1);
  auto [re, im] = kernels_->analyze(t, wave);  // [B, L, F]

  Value masks = mask_values(t, vars, re, im);  // [B, N, L, F]

  // Real-valued masks applied to the complex mixture spectrogram keep the
  // mixture phase.
  Value mre = ad::bcast_mul_channel(t, masks, re);
  Value mim = ad::bcast_mul_channel(t, masks, im);
  return kernels_->synthesize(t, mre, mim, samples);  // [B, N, T]
}

Value SeparatorModel::mask_values(Tape& t, const Vars& vars, Value re, Value im) const {
  // Log-magnitude features.
  Value power = ad::add(t, ad::mul(t, re, re), ad::mul(t, im, im));
  Value feat = ad::scale(t, ad::logv(t, ad::add_scalar(t, power, kFeatureEps)), 0.5);

  Value ctx = ad::unfold_ctx(t, feat, cfg_.context);
  Value h = ad::tanh_act(t, ad::add_bias(t, ad::matmul(t, ctx, vars.w1), vars.b1));
  Value logits = ad::add_bias(t, ad::matmul(t, h, vars.w2), vars.b2);
  return ad::split_channels(t, ad::sigmoid(t, logits), cfg_.n_outputs);
}

Tensor SeparatorModel::compute_masks(const Tensor& wave_bt) const {
  Tape t;
  Vars vars = leaf_vars(t, false);
  auto [re, im] = kernels_->analyze(t, t.constant(wave_bt));
  return t.val(mask_values(t, vars, re, im));
}

Tensor SeparatorModel::gather_flat_grads(const Tape& t, const Vars& vars) const {
  Tensor flat({param_count()});
  std::int64_t at = 0;
  for (Value v : {vars.w1, vars.b1, vars.w2, vars.b2}) {
    const Tensor g = t.grad_or_zero(v);
    std::copy(g.v.begin(), g.v.end(), flat.v.begin() + at);
    at += g.numel();
  }
  return flat;
}

SourceEstimates SeparatorModel::separate(const Tensor& wave_bt, SourceOrigin origin) const {
  RS_REQUIRE(all_finite(wave_bt), "separate: non-finite input");
  Tape t;
  Vars vars = leaf_vars(t, false);
  Value out = forward(t, vars, t.constant(wave_bt));
  return SourceEstimates(t.val(out), origin, false);
}

void save_checkpoint(const std::filesystem::path& path, const SeparatorModel& model,
                     CheckpointRole role, std::uint64_t step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint8_t>(role));
  const SeparatorConfig& c = model.config();
  write_pod(os, static_cast<std::uint32_t>(c.n_outputs));
  write_pod(os, static_cast<std::uint32_t>(c.hidden));
  write_pod(os, static_cast<std::uint32_t>(c.context));
  write_pod(os, static_cast<std::uint32_t>(c.stft.fft_size));
  write_pod(os, static_cast<std::uint32_t>(c.stft.window_length));
  write_pod(os, static_cast<std::uint32_t>(c.stft.hop_length));
  write_pod(os, static_cast<std::uint32_t>(c.sample_rate_hz));
  write_pod(os, step);
  const Tensor flat = model.flat_params();
  write_pod(os, static_cast<std::uint64_t>(flat.numel()));
  os.write(reinterpret_cast<const char*>(flat.data()),
           static_cast<std::streamsize>(flat.numel() * sizeof(Scalar)));
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) throw std::runtime_error("load_checkpoint: unsupported format version");
  const auto role = static_cast<CheckpointRole>(read_pod<std::uint8_t>(is));
  SeparatorConfig cfg;
  cfg.n_outputs = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.hidden = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.context = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.stft.fft_size = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.stft.window_length = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.stft.hop_length = static_cast<int>(read_pod<std::uint32_t>(is));
  cfg.sample_rate_hz = static_cast<int>(read_pod<std::uint32_t>(is));
  const auto step = read_pod<std::uint64_t>(is);
  const auto count = read_pod<std::uint64_t>(is);

  std::mt19937_64 rng(0);
  SeparatorModel model(cfg, rng);
  if (static_cast<std::int64_t>(count) != model.param_count())
    throw std::runtime_error("load_checkpoint: parameter count does not match architecture");
  Tensor flat({static_cast<std::int64_t>(count)});
  is.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(count * sizeof(Scalar)));
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  model.set_flat_params(flat);
  return Checkpoint(std::move(model), role, step);
}

}  // namespace remixsep
