// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/wav_io.hpp"

#include <cstring>
#include <fstream>

namespace remixsep {

namespace {

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void write_wav(const std::filesystem::path& path, const Tensor& channels, int sample_rate_hz) {
  RS_REQUIRE(channels.rank() == 2, "write_wav: expects [C, T]");
  RS_REQUIRE(sample_rate_hz > 0, "write_wav: bad sample rate");
  const std::uint16_t c = static_cast<std::uint16_t>(channels.dim(0));
  const std::uint32_t t = static_cast<std::uint32_t>(channels.dim(1));
  const std::uint32_t data_bytes = c * t * 4;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_wav: cannot open " + path.string());
  os.write("RIFF", 4);
  put<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put<std::uint32_t>(os, 16);
  put<std::uint16_t>(os, 3);  // IEEE float
  put<std::uint16_t>(os, c);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate_hz));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate_hz) * c * 4);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(c * 4));
  put<std::uint16_t>(os, 32);
  os.write("data", 4);
  put<std::uint32_t>(os, data_bytes);
  for (std::uint32_t i = 0; i < t; ++i)
    for (std::uint16_t ch = 0; ch < c; ++ch)
      put<float>(os, static_cast<float>(channels.v[ch * t + i]));
  if (!os) throw std::runtime_error("write_wav: write failed for " + path.string());
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_wav: cannot open " + path.string());
  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("read_wav: not a RIFF file: " + path.string());
  get<std::uint32_t>(is);
  is.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: not a WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<float> samples;
  while (is.read(tag, 4)) {
    const auto size = get<std::uint32_t>(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = get<std::uint16_t>(is);
      channels = get<std::uint16_t>(is);
      rate = get<std::uint32_t>(is);
      get<std::uint32_t>(is);
      get<std::uint16_t>(is);
      bits = get<std::uint16_t>(is);
      is.ignore(size - 16);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      samples.resize(size / 4);
      is.read(reinterpret_cast<char*>(samples.data()), size);
      break;
    } else {
      is.ignore(size);
    }
  }
  if (format != 3 || bits != 32)
    throw std::runtime_error("read_wav: only 32-bit float WAV is supported: " + path.string());
  if (channels == 0 || samples.empty())
    throw std::runtime_error("read_wav: empty or malformed file: " + path.string());

  const std::int64_t t = static_cast<std::int64_t>(samples.size()) / channels;
  Tensor out({channels, t});
  for (std::int64_t i = 0; i < t; ++i)
    for (std::uint16_t ch = 0; ch < channels; ++ch)
      out.v[ch * t + i] = samples[static_cast<std::size_t>(i) * channels + ch];
  return WavData{std::move(out), static_cast<int>(rate)};
}

}  // namespace remixsep
