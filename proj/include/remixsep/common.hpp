// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_COMMON_HPP_
#define REMIXSEP_COMMON_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace remixsep {

// Thrown when an exhaustive search is asked to exceed its instance-size bound.
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a requested combinatorial object cannot exist (e.g. a batch
// shuffle with more channels than batch items).
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when state is not ready for the requested operation.
struct InvalidStateError : std::runtime_error {
  explicit InvalidStateError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
[[noreturn]] inline void throw_invalid_argument(const char* cond, const char* file, int line,
                                                const std::string& msg) {
  std::ostringstream os;
  os << msg << " (failed: " << cond << " at " << file << ":" << line << ")";
  throw std::invalid_argument(os.str());
}
}  // namespace detail

#define RS_REQUIRE(cond, msg)                                                  \
  do {                                                                         \
    if (!(cond)) ::remixsep::detail::throw_invalid_argument(#cond, __FILE__, __LINE__, (msg)); \
  } while (0)

// splitmix64, used to derive independent RNG streams from (seed, tag) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(~stream));
}

}  // namespace remixsep

#endif  // REMIXSEP_COMMON_HPP_
