// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace remixsep {

namespace {
using MatMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MatMapMut = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

bool all_finite(const Tensor& t) {
  for (Scalar x : t.v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Scalar dot(std::span<const Scalar> a, std::span<const Scalar> b) {
  RS_REQUIRE(a.size() == b.size(), "dot: length mismatch");
  Eigen::Map<const Eigen::VectorXd> va(a.data(), static_cast<Eigen::Index>(a.size()));
  Eigen::Map<const Eigen::VectorXd> vb(b.data(), static_cast<Eigen::Index>(b.size()));
  return va.dot(vb);
}

Scalar sum_squares(std::span<const Scalar> a) {
  Eigen::Map<const Eigen::VectorXd> va(a.data(), static_cast<Eigen::Index>(a.size()));
  return va.squaredNorm();
}

Scalar mean_power(std::span<const Scalar> a) {
  RS_REQUIRE(!a.empty(), "mean_power: empty signal");
  return sum_squares(a) / static_cast<Scalar>(a.size());
}

void matmul(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k,
            std::int64_t n, bool accumulate) {
  MatMap ma(a, m, k);
  MatMap mb(b, k, n);
  MatMapMut mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb;
  else
    mc.noalias() = ma * mb;
}

void matmul_bt(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k,
               std::int64_t n, bool accumulate) {
  MatMap ma(a, m, k);
  MatMap mb(b, n, k);
  MatMapMut mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb.transpose();
  else
    mc.noalias() = ma * mb.transpose();
}

void matmul_at(const Scalar* a, const Scalar* b, Scalar* c, std::int64_t m, std::int64_t k,
               std::int64_t n, bool accumulate) {
  MatMap ma(a, m, k);
  MatMap mb(b, m, n);
  MatMapMut mc(c, k, n);
  if (accumulate)
    mc.noalias() += ma.transpose() * mb;
  else
    mc.noalias() = ma.transpose() * mb;
}

}  // namespace remixsep
