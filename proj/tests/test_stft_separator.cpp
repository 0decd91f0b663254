// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "remixsep/metrics.hpp"
#include "remixsep/separator.hpp"
#include "remixsep/stft.hpp"

using namespace remixsep;

namespace {

constexpr double kPi = 3.14159265358979323846;

Tensor random_wave(std::int64_t b, std::int64_t t, std::mt19937_64& rng) {
  Tensor w({b, t});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : w.v) x = u(rng);
  return w;
}

// Harmonic tone with tapered edges; taper keeps boundary frames narrowband.
std::vector<double> tapered_tone(double f0, int harmonics, std::int64_t t, int rate) {
  std::vector<double> x(static_cast<std::size_t>(t), 0.0);
  for (int h = 1; h <= harmonics; ++h)
    for (std::int64_t i = 0; i < t; ++i)
      x[i] += (1.0 / h) * std::sin(2.0 * kPi * f0 * h * i / rate + 0.3 * h);
  const int ramp = 400;
  for (int i = 0; i < ramp && i < t; ++i) {
    const double g = 0.5 - 0.5 * std::cos(kPi * i / ramp);
    x[i] *= g;
    x[t - 1 - i] *= g;
  }
  return x;
}

}  // namespace

TEST_CASE("stft config invariants") {
  StftConfig bad;
  bad.window_length = 600;  // longer than the FFT
  CHECK_THROWS_AS(StftKernels{bad}, std::invalid_argument);
  bad = StftConfig{};
  bad.hop_length = 500;  // longer than the window
  CHECK_THROWS_AS(StftKernels{bad}, std::invalid_argument);
}

TEST_CASE("analysis dimensions and the zero waveform") {
  StftConfig cfg;
  Tensor zero = Tensor::zeros({2, 4000});
  Spectrogram spec = stft_analyze(zero, cfg);
  CHECK(spec.bins() == 257);
  StftKernels k(cfg);
  CHECK(spec.frames() == k.num_frames(4000));
  for (auto v : spec.re.v) CHECK(v == 0.0);
  for (auto v : spec.im.v) CHECK(v == 0.0);

  Tensor tiny = Tensor::zeros({1, 100});  // shorter than the window
  CHECK_THROWS_AS(stft_analyze(tiny, cfg), std::invalid_argument);
}

TEST_CASE("analyze then synthesize reconstructs random signals") {
  std::mt19937_64 rng(51);
  StftConfig cfg;
  for (int trial = 0; trial < 3; ++trial) {
    Tensor wave = random_wave(2, 2500 + 700 * trial, rng);
    Spectrogram spec = stft_analyze(wave, cfg);
    Tensor back = stft_synthesize(spec, cfg, wave.dim(1));
    double err = 0.0, ref = 0.0;
    for (std::int64_t i = 0; i < wave.numel(); ++i) {
      err += (back.v[i] - wave.v[i]) * (back.v[i] - wave.v[i]);
      ref += wave.v[i] * wave.v[i];
    }
    CHECK(std::sqrt(err / ref) < 1e-4);
    CHECK(std::sqrt(err / ref) < 1e-10);  // the projection pair is numerically exact
  }
}

TEST_CASE("bin-centered tone concentrates where the window transform says") {
  // Oracle values from the closed-form DFT of a Hann(400) window zero-padded
  // to 512: the centre bin carries 0.5208 of the frame energy, the 3-bin
  // neighbourhood 0.9792 (a Hann main lobe always spills into the adjacent
  // bins, so a single bin can never hold 90%).
  StftConfig cfg;
  const int rate = 8000, k = 40;
  const double f = static_cast<double>(k) * rate / cfg.fft_size;  // bin-centered
  const std::int64_t t = 8000;
  Tensor wave({1, t});
  for (std::int64_t i = 0; i < t; ++i) wave.v[i] = std::sin(2.0 * kPi * f * i / rate);
  Spectrogram spec = stft_analyze(wave, cfg);

  const std::int64_t f_bins = spec.bins();
  const std::int64_t mid_frame = spec.frames() / 2;  // interior frame
  std::vector<double> energy(static_cast<std::size_t>(f_bins));
  double total = 0.0;
  for (std::int64_t fi = 0; fi < f_bins; ++fi) {
    const std::int64_t at = mid_frame * f_bins + fi;
    const double c = (fi == 0 || fi == f_bins - 1) ? 1.0 : 2.0;
    energy[fi] = c * (spec.re.v[at] * spec.re.v[at] + spec.im.v[at] * spec.im.v[at]);
    total += energy[fi];
  }
  const double center = energy[k] / total;
  const double three_bin = (energy[k - 1] + energy[k] + energy[k + 1]) / total;
  CHECK(center == doctest::Approx(0.520833).epsilon(1e-3));
  CHECK(three_bin > 0.979);
  // The tone's bin dominates every other bin.
  for (std::int64_t fi = 0; fi < f_bins; ++fi)
    if (fi != k) CHECK(energy[fi] < energy[k]);
}

TEST_CASE("uniform-mask model splits the wave evenly and sums back to it") {
  std::mt19937_64 rng(52);
  SeparatorConfig cfg;
  cfg.n_outputs = 4;
  SeparatorModel model = SeparatorModel::uniform(cfg);
  Tensor wave = random_wave(2, 3200, rng);
  SourceEstimates est = model.separate(wave, SourceOrigin::solver);
  CHECK(est.channels() == 4);
  const std::int64_t t = wave.dim(1);
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t i = 0; i < t; ++i) {
      double sum = 0.0;
      for (int n = 0; n < 4; ++n) {
        const double s = est.sources.v[(b * 4 + n) * t + i];
        CHECK(s == doctest::Approx(wave.v[b * t + i] / 4.0).epsilon(1e-9).scale(1.0));
        sum += s;
      }
      CHECK(sum == doctest::Approx(wave.v[b * t + i]).epsilon(1e-9).scale(1.0));
    }

  Tensor zeros = Tensor::zeros({1, 3200});
  SourceEstimates zest = model.separate(zeros, SourceOrigin::solver);
  for (auto v : zest.sources.v) CHECK(v == 0.0);
}

TEST_CASE("ideal band masks recover disjoint-band tones above 30 dB SI-SDR") {
  const int rate = 8000;
  const std::int64_t t = 16000;
  auto low = tapered_tone(125.0, 4, t, rate);    // up to 500 Hz
  auto high = tapered_tone(1200.0, 2, t, rate);  // 1200 / 2400 Hz
  Tensor mix({1, t});
  for (std::int64_t i = 0; i < t; ++i) mix.v[i] = low[i] + high[i];

  SeparatorConfig cfg;
  cfg.n_outputs = 2;
  Tensor masks({2, cfg.bins()});
  const int split = 51;  // ~800 Hz
  for (int f = 0; f < cfg.bins(); ++f) {
    masks.v[f] = f <= split ? 1.0 : 0.0;
    masks.v[cfg.bins() + f] = f <= split ? 0.0 : 1.0;
  }
  SeparatorModel model = SeparatorModel::constant_mask(cfg, masks);
  SourceEstimates est = model.separate(mix, SourceOrigin::solver);
  std::vector<double> e1(est.sources.v.begin(), est.sources.v.begin() + t);
  std::vector<double> e2(est.sources.v.begin() + t, est.sources.v.begin() + 2 * t);
  CHECK(si_sdr(low, e1) >= 30.0);
  CHECK(si_sdr(high, e2) >= 30.0);
}

TEST_CASE("masks stay in [0, 1] so masked magnitudes never exceed the input") {
  std::mt19937_64 rng(53);
  SeparatorConfig cfg;
  cfg.n_outputs = 3;
  cfg.hidden = 16;
  SeparatorModel model(cfg, rng);
  Tensor wave = random_wave(1, 2000, rng);
  Tensor masks = model.compute_masks(wave);
  for (auto m : masks.v) {
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("forward pass is batch-equivariant and deterministic") {
  std::mt19937_64 rng(54);
  SeparatorConfig cfg;
  cfg.n_outputs = 2;
  cfg.hidden = 8;
  SeparatorModel model(cfg, rng);
  Tensor wave = random_wave(3, 1600, rng);
  SourceEstimates a = model.separate(wave, SourceOrigin::solver);
  SourceEstimates b = model.separate(wave, SourceOrigin::solver);
  CHECK(a.sources.v == b.sources.v);  // bit-identical

  // Swap batch items 0 and 2.
  Tensor swapped = wave;
  for (std::int64_t i = 0; i < 1600; ++i) std::swap(swapped.v[i], swapped.v[2 * 1600 + i]);
  SourceEstimates c = model.separate(swapped, SourceOrigin::solver);
  const std::int64_t block = 2 * 1600;
  for (std::int64_t i = 0; i < block; ++i) {
    CHECK(c.sources.v[i] == a.sources.v[2 * block + i]);
    CHECK(c.sources.v[2 * block + i] == a.sources.v[i]);
  }
}

TEST_CASE("micro-model gradients match finite differences end to end") {
  std::mt19937_64 rng(55);
  SeparatorConfig cfg;
  cfg.stft = StftConfig{16, 12, 4};
  cfg.n_outputs = 2;
  cfg.hidden = 3;
  cfg.context = 1;
  SeparatorModel model(cfg, rng);
  CHECK(model.param_count() == 102);  // ~100-parameter micro-model

  Tensor wave = random_wave(2, 40, rng);
  auto loss_of = [&](const SeparatorModel& m) {
    Tape t;
    auto vars = m.leaf_vars(t, false);
    Value out = m.forward(t, vars, t.constant(wave));
    return t.val(out);
  };
  // Analytic gradient of sum of squares of the output.
  Tape t;
  auto vars = model.leaf_vars(t, true);
  Value out = model.forward(t, vars, t.constant(wave));
  Value loss = ad::sumsq(t, out);
  t.backward(loss);
  const Tensor grad = model.gather_flat_grads(t, vars);
  const double base = t.val(loss).v[0];

  Tensor params = model.flat_params();
  const double eps = 1e-6;
  int checked = 0;
  std::uniform_int_distribution<std::int64_t> pick(0, params.numel() - 1);
  for (int k = 0; k < 30; ++k) {
    const std::int64_t j = pick(rng);
    SeparatorModel up = model, down = model;
    Tensor pu = params, pd = params;
    pu.v[j] += eps;
    pd.v[j] -= eps;
    up.set_flat_params(pu);
    down.set_flat_params(pd);
    const Tensor ou = loss_of(up);
    const Tensor od = loss_of(down);
    double lu = 0.0, ld = 0.0;
    for (auto v : ou.v) lu += v * v;
    for (auto v : od.v) ld += v * v;
    const double fd = (lu - ld) / (2 * eps);
    const double denom = std::max({std::abs(fd), std::abs(grad.v[j]), 1e-8});
    INFO("param ", j, " fd=", fd, " an=", grad.v[j], " base=", base);
    CHECK(std::abs(fd - grad.v[j]) / denom < 1e-3);
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("checkpoint files round-trip the model, role and step") {
  std::mt19937_64 rng(56);
  SeparatorConfig cfg;
  cfg.n_outputs = 3;
  cfg.hidden = 8;
  SeparatorModel model(cfg, rng);
  const auto path = std::filesystem::temp_directory_path() / "remixsep_ckpt_test.bin";
  save_checkpoint(path, model, CheckpointRole::shuffler, 1234);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.role == CheckpointRole::shuffler);
  CHECK(loaded.step == 1234);
  CHECK(loaded.model.config().n_outputs == 3);
  CHECK(loaded.model.config().hidden == 8);
  CHECK(loaded.model.flat_params().v == model.flat_params().v);

  std::ofstream bad(path, std::ios::binary);
  bad << "not a checkpoint";
  bad.close();
  CHECK_THROWS(load_checkpoint(path));
  std::filesystem::remove(path);
}
