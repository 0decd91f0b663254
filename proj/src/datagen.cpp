// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/datagen.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "remixsep/wav_io.hpp"

namespace remixsep {

namespace {
constexpr Scalar kPi = 3.14159265358979323846;
constexpr Scalar kSpeechRms = 0.05;

// Fundamental bands per speech-source index; keeping them apart makes the
// sources mostly disjoint in frequency so a time-frequency mask can separate
// them.
constexpr Scalar kF0Lo[2] = {95.0, 190.0};
constexpr Scalar kF0Hi[2] = {150.0, 290.0};

void scale_to_rms(std::vector<Scalar>& x, Scalar target_rms) {
  Scalar p = 0.0;
  for (Scalar s : x) p += s * s;
  p /= static_cast<Scalar>(x.size());
  const Scalar g = target_rms / std::sqrt(std::max(p, 1e-30));
  for (Scalar& s : x) s *= g;
}

std::vector<Scalar> speech_like_source(int source_index, std::int64_t t, int rate,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<Scalar> uni(0.0, 1.0);
  const Scalar f0 = kF0Lo[source_index] + (kF0Hi[source_index] - kF0Lo[source_index]) * uni(rng);
  const int harmonics = 6 + static_cast<int>(uni(rng) * 5.0);
  const Scalar decay = 0.6 + 0.6 * uni(rng);
  const Scalar fm = 1.5 + 2.5 * uni(rng);
  const Scalar phase_m = 2.0 * kPi * uni(rng);
  std::vector<Scalar> phases(static_cast<std::size_t>(harmonics));
  for (auto& p : phases) p = 2.0 * kPi * uni(rng);

  std::vector<Scalar> x(static_cast<std::size_t>(t), 0.0);
  const Scalar nyquist_margin = 0.45 * rate;
  for (int h = 1; h <= harmonics; ++h) {
    const Scalar f = f0 * h;
    if (f > nyquist_margin) break;
    const Scalar amp = 1.0 / std::pow(static_cast<Scalar>(h), decay);
    const Scalar w = 2.0 * kPi * f / rate;
    const Scalar ph = phases[static_cast<std::size_t>(h - 1)];
    for (std::int64_t i = 0; i < t; ++i) x[i] += amp * std::sin(w * i + ph);
  }
  // Amplitude modulation as a crude speech envelope.
  const Scalar wm = 2.0 * kPi * fm / rate;
  for (std::int64_t i = 0; i < t; ++i) x[i] *= 0.55 + 0.45 * std::sin(wm * i + phase_m);

  scale_to_rms(x, kSpeechRms);
  const Scalar gain_db = -2.0 + 4.0 * uni(rng);
  const Scalar gain = std::pow(10.0, gain_db / 20.0);
  for (Scalar& s : x) s *= gain;
  return x;
}

std::vector<Scalar> lowpass_noise(std::int64_t t, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  std::uniform_real_distribution<Scalar> uni(0.0, 1.0);
  const Scalar a = 0.5 + 0.4 * uni(rng);
  std::vector<Scalar> x(static_cast<std::size_t>(t));
  Scalar prev = 0.0;
  for (auto& s : x) {
    prev = a * prev + (1.0 - a) * gauss(rng);
    s = prev;
  }
  return x;
}

}  // namespace

GeneratedMixture generate_mixture(const MixtureSpec& spec) {
  RS_REQUIRE(spec.n_speech == 1 || spec.n_speech == 2, "generate_mixture: n_speech must be 1 or 2");
  RS_REQUIRE(spec.snr_noise_db >= 10.0 && spec.snr_noise_db <= 20.0,
             "generate_mixture: noise SNR outside [10, 20] dB");
  const std::int64_t t = spec.samples();
  RS_REQUIRE(t >= 1, "generate_mixture: empty signal");

  std::mt19937_64 rng = make_rng(spec.seed, 0x6d69784cu);
  const int k = spec.k();
  Tensor refs({k, t});

  Scalar speech_energy = 0.0;
  for (int s = 0; s < spec.n_speech; ++s) {
    auto x = speech_like_source(s, t, spec.sample_rate_hz, rng);
    for (std::int64_t i = 0; i < t; ++i) refs.v[s * t + i] = x[i];
    speech_energy += sum_squares({x.data(), x.size()});
  }

  auto noise = lowpass_noise(t, rng);
  const Scalar noise_energy = sum_squares({noise.data(), noise.size()});
  // Scale so that 10*log10(speech_energy / noise_energy) hits the target.
  const Scalar target = speech_energy / std::pow(10.0, spec.snr_noise_db / 10.0);
  const Scalar g = std::sqrt(target / std::max(noise_energy, 1e-30));
  for (std::int64_t i = 0; i < t; ++i) refs.v[(k - 1) * t + i] = g * noise[i];

  Tensor mix({t});
  for (int s = 0; s < k; ++s)
    for (std::int64_t i = 0; i < t; ++i) mix.v[i] += refs.v[s * t + i];
  return GeneratedMixture{std::move(mix), std::move(refs)};
}

Tensor make_mom(std::span<const Scalar> x1, std::span<const Scalar> x2) {
  RS_REQUIRE(x1.size() == x2.size(), "make_mom: length mismatch");
  Tensor out({static_cast<std::int64_t>(x1.size())});
  for (std::size_t i = 0; i < x1.size(); ++i) out.v[i] = x1[i] + x2[i];
  return out;
}

Dataset build_dataset(const DatasetSpec& spec) {
  RS_REQUIRE(spec.count >= 1, "build_dataset: empty dataset");
  RS_REQUIRE(spec.n_speech == 0 || spec.n_speech == 1 || spec.n_speech == 2,
             "build_dataset: n_speech must be 0 (mixed), 1 or 2");
  Dataset ds;
  ds.sample_rate_hz = spec.sample_rate_hz;
  ds.items.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(i);
    std::mt19937_64 rng = make_rng(seed, 0x64617461u);
    std::uniform_real_distribution<Scalar> uni(0.0, 1.0);
    MixtureSpec ms;
    ms.n_speech = spec.n_speech != 0 ? spec.n_speech : (uni(rng) < 0.5 ? 1 : 2);
    ms.snr_noise_db = spec.snr_lo_db + (spec.snr_hi_db - spec.snr_lo_db) * uni(rng);
    ms.seed = seed;
    ms.duration_s = spec.duration_s;
    ms.sample_rate_hz = spec.sample_rate_hz;
    GeneratedMixture gm = generate_mixture(ms);

    char id[64];
    std::snprintf(id, sizeof(id), "%s_%06d", spec.id_prefix.c_str(), i);
    ds.items.push_back(MixtureRecord{std::move(gm.mixture), std::move(gm.references), ms.n_speech,
                                     seed, ms.snr_noise_db, id});
  }
  ds.samples = ds.items.front().mixture.numel();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("save_dataset: cannot write manifest in " + dir.string());
  for (const MixtureRecord& r : ds.items) {
    const std::string wav_name = r.id + ".wav";
    const std::int64_t t = r.mixture.numel();
    const std::int64_t k = r.references.dim(0);
    Tensor channels({1 + k, t});
    std::copy(r.mixture.v.begin(), r.mixture.v.end(), channels.v.begin());
    std::copy(r.references.v.begin(), r.references.v.end(), channels.v.begin() + t);
    write_wav(dir / wav_name, channels, ds.sample_rate_hz);

    nlohmann::ordered_json rec;
    rec["id"] = r.id;
    rec["seed"] = r.seed;
    rec["path"] = wav_name;
    rec["n_speech"] = r.n_speech;
    rec["k"] = k;
    rec["snr_db"] = r.snr_db;
    manifest << rec.dump() << "\n";
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.jsonl");
  if (!manifest)
    throw std::runtime_error("load_dataset: cannot open manifest in " + dir.string());
  Dataset ds;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    WavData wav = read_wav(dir / rec.at("path").get<std::string>());
    const std::int64_t k = rec.at("k").get<std::int64_t>();
    RS_REQUIRE(wav.channels.dim(0) == 1 + k, "load_dataset: channel count disagrees with manifest");
    const std::int64_t t = wav.channels.dim(1);
    MixtureRecord r;
    r.id = rec.at("id").get<std::string>();
    r.seed = rec.at("seed").get<std::uint64_t>();
    r.n_speech = rec.at("n_speech").get<int>();
    r.snr_db = rec.at("snr_db").get<double>();
    r.mixture = Tensor({t});
    std::copy(wav.channels.v.begin(), wav.channels.v.begin() + t, r.mixture.v.begin());
    r.references = Tensor({k, t});
    std::copy(wav.channels.v.begin() + t, wav.channels.v.end(), r.references.v.begin());
    ds.items.push_back(std::move(r));
    ds.sample_rate_hz = wav.sample_rate_hz;
  }
  RS_REQUIRE(!ds.items.empty(), "load_dataset: empty manifest");
  ds.samples = ds.items.front().mixture.numel();
  return ds;
}

}  // namespace remixsep
