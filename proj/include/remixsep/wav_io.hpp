// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_WAV_IO_HPP_
#define REMIXSEP_WAV_IO_HPP_

#include <filesystem>

#include "remixsep/tensor.hpp"

namespace remixsep {

// IEEE float32 WAV, interleaved. channels:[C, T].
void write_wav(const std::filesystem::path& path, const Tensor& channels, int sample_rate_hz);

struct WavData {
  Tensor channels;  // [C, T]
  int sample_rate_hz = 0;
};
WavData read_wav(const std::filesystem::path& path);

}  // namespace remixsep

#endif  // REMIXSEP_WAV_IO_HPP_
