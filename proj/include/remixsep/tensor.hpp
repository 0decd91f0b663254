// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_TENSOR_HPP_
#define REMIXSEP_TENSOR_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "remixsep/common.hpp"

namespace remixsep {

using Scalar = double;

// Dense row-major tensor. Small and value-semantic; everything in this
// project is desk scale, so copies are cheap enough to keep the code simple.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<Scalar> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)), v(numel_of(shape), 0.0) {}
  Tensor(std::vector<std::int64_t> s, std::vector<Scalar> data)
      : shape(std::move(s)), v(std::move(data)) {
    RS_REQUIRE(static_cast<std::int64_t>(v.size()) == numel_of(shape),
               "tensor data size does not match shape");
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  // dim(-1) is the last dimension.
  std::int64_t dim(int i) const {
    if (i < 0) i += rank();
    RS_REQUIRE(i >= 0 && i < rank(), "tensor dim index out of range");
    return shape[static_cast<std::size_t>(i)];
  }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  Scalar* data() { return v.data(); }
  const Scalar* data() const { return v.data(); }
  std::span<Scalar> flat() { return {v.data(), v.size()}; }
  std::span<const Scalar> flat() const { return {v.data(), v.size()}; }

  static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::int64_t> s, Scalar value) {
    Tensor t(std::move(s));
    for (auto& x : t.v) x = value;
    return t;
  }
  static Tensor scalar(Scalar value) { return Tensor({1}, {value}); }
};

// RNG stream with deterministic derivation from (seed, stream-tag).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(seed, stream));
}

bool all_finite(const Tensor& t);

Scalar dot(std::span<const Scalar> a, std::span<const Scalar> b);
Scalar sum_squares(std::span<const Scalar> a);
// Mean squared amplitude of a signal segment.
Scalar mean_power(std::span<const Scalar> a);

// C[M,N] = A[M,K] * B[K,N]; `accumulate` adds into C instead of overwriting.
void matmul(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k,
            std::int64_t n, bool accumulate);
// C[M,N] = A[M,K] * B[N,K]^T
void matmul_bt(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k,
               std::int64_t n, bool accumulate);
// C[K,N] = A[M,K]^T * B[M,N]
void matmul_at(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k,
               std::int64_t n, bool accumulate);

}  // namespace remixsep

#endif  // REMIXSEP_TENSOR_HPP_
