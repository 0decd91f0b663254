// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_DATAGEN_HPP_
#define REMIXSEP_DATAGEN_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "remixsep/tensor.hpp"

namespace remixsep {

// One synthetic mixture: up to two speech-like sources plus a noise source.
struct MixtureSpec {
  int n_speech = 2;            // 1 or 2
  double snr_noise_db = 15.0;  // speech-to-noise SNR, in [10, 20]
  std::uint64_t seed = 0;
  double duration_s = 2.0;
  int sample_rate_hz = 8000;

  int k() const { return n_speech + 1; }
  std::int64_t samples() const {
    return static_cast<std::int64_t>(duration_s * sample_rate_hz + 0.5);
  }
};

struct GeneratedMixture {
  Tensor mixture;     // [T]
  Tensor references;  // [K, T]; speech sources first, noise last
};

// Speech-like sources are amplitude-modulated harmonic tone complexes with
// per-source fundamental bands; noise is lowpassed Gaussian noise scaled to
// the requested SNR. The mixture is the exact sample-wise sum of the
// references. Deterministic given the spec.
GeneratedMixture generate_mixture(const MixtureSpec& spec);

// Mixture of mixtures: elementwise sum.
Tensor make_mom(std::span<const Scalar> x1, std::span<const Scalar> x2);

struct MixtureRecord {
  Tensor mixture;     // [T]
  Tensor references;  // [K, T]
  int n_speech = 2;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  std::string id;
};

struct Dataset {
  std::vector<MixtureRecord> items;
  int sample_rate_hz = 8000;
  std::int64_t samples = 0;
  std::size_t size() const { return items.size(); }
};

struct DatasetSpec {
  int count = 100;
  std::uint64_t base_seed = 1;  // item i uses base_seed + i; keep ranges disjoint across splits
  double duration_s = 2.0;
  int sample_rate_hz = 8000;
  int n_speech = 2;  // 0 draws 1 or 2 per item
  double snr_lo_db = 10.0;
  double snr_hi_db = 20.0;
  std::string id_prefix = "mix";
};

Dataset build_dataset(const DatasetSpec& spec);

// On-disk cache: one float WAV per mixture (channel 0 = mixture, then the K
// references) plus manifest.jsonl with one record per mixture.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace remixsep

#endif  // REMIXSEP_DATAGEN_HPP_
