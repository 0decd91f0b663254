// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_AUTODIFF_HPP_
#define REMIXSEP_AUTODIFF_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "remixsep/tensor.hpp"

namespace remixsep {

// Handle into a Tape. Invalidated when the tape is destroyed.
struct Value {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode tape. Ops evaluate eagerly (searches need the
// numeric values while the graph is still being built) and record a backward
// closure when any input requires gradients. Nodes created from constants
// carry no closure and allocate no gradient storage, so no-grad forward
// passes cost only their values.
class Tape {
 public:
  Value constant(Tensor t) { return push(std::move(t), false, nullptr); }
  Value leaf(Tensor t) { return push(std::move(t), true, nullptr); }

  const Tensor& val(Value x) const { return nodes_[check(x)].value; }
  bool requires_grad(Value x) const { return nodes_[check(x)].requires_grad; }

  // Gradient of the last backward() target w.r.t. x. Empty tensor if x was
  // never reached (treat as all-zero).
  const Tensor& grad(Value x) const { return nodes_[check(x)].grad; }
  Tensor grad_or_zero(Value x) const {
    const auto& n = nodes_[check(x)];
    return n.grad.numel() > 0 ? n.grad : Tensor::zeros(n.value.shape);
  }

  void backward(Value loss);

  std::size_t num_nodes() const { return nodes_.size(); }
  // Total bytes held by node values and gradients. The tape never frees
  // during a step, so this is also the high-water mark.
  std::size_t bytes_live() const { return bytes_; }

  // --- used by op implementations ---
  using BackFn = std::function<void(Tape&)>;
  Value push(Tensor value, bool requires_grad, BackFn back);
  Tensor& grad_buf(Value x);          // allocates zeros on first touch
  bool grad_touched(Value x) const { return nodes_[check(x)].grad.numel() > 0; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackFn back;
  };
  std::size_t check(Value x) const {
    RS_REQUIRE(x.id >= 0 && static_cast<std::size_t>(x.id) < nodes_.size(),
               "value does not belong to this tape");
    return static_cast<std::size_t>(x.id);
  }
  // Deque keeps references returned by val()/grad() stable while ops keep
  // pushing nodes.
  std::deque<Node> nodes_;
  std::size_t bytes_ = 0;
};

namespace ad {

// Elementwise, same shape.
Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);
// x * c and x + c with scalar constants.
Value scale(Tape& t, Value a, Scalar c);
Value add_scalar(Tape& t, Value a, Scalar c);
// Elementwise nonlinearities.
Value logv(Tape& t, Value a);
Value sigmoid(Tape& t, Value a);
Value tanh_act(Tape& t, Value a);

// x:[..., K] w:[K, N] -> [..., N]; gradients to both inputs.
Value matmul(Tape& t, Value x, Value w);
// x:[..., W] * row vector (constant), broadcast over leading dims.
Value mul_rowvec(Tape& t, Value x, const Tensor& row);
// x:[..., C] + b:[C]
Value add_bias(Tape& t, Value x, Value b);

// x:[B, T] -> [B, L, W]; frame i starts at sample i*hop - pad, out-of-range
// reads are zero.
Value frame_signal(Tape& t, Value x, int win, int hop, int pad, std::int64_t num_frames);
// x:[..., L, W] -> [..., T]: overlap-add at stride hop into a padded buffer,
// trim pad, divide by `denom` ([T], constant, strictly positive).
Value overlap_add(Tape& t, Value x, int hop, int pad, std::int64_t out_len, const Tensor& denom);
// x:[..., L, F] -> [..., L, k*F]: stack k consecutive frames centred on l
// (zero-padded at the edges).
Value unfold_ctx(Tape& t, Value x, int k);
// x:[..., L, N*F] -> [..., N, L, F]
Value split_channels(Tape& t, Value x, std::int64_t n_channels);

// Channel axis is axis 1. x:[B, N, R...], y:[B, R...].
Value sum_channels(Tape& t, Value x);                 // -> [B, R...]
Value bcast_add_channel(Tape& t, Value x, Value y);   // x[b,n,..] + y[b,..]
Value bcast_mul_channel(Tape& t, Value x, Value y);   // x[b,n,..] * y[b,..]

// out[i] = x[src_b[i], src_n[i], ...] for i = flattened (b, n) of the output
// [B_out, N_out, R...]. Adjoint scatter-adds, so source entries may repeat.
Value reindex(Tape& t, Value x, std::vector<std::int64_t> src_b, std::vector<std::int64_t> src_n,
              std::int64_t b_out, std::int64_t n_out);

// x:[N, T] with constant weights [N] -> [T].
Value mix_channels(Tape& t, Value x, std::span<const Scalar> w);
// Contiguous sub-block starting at flat element offset.
Value block(Tape& t, Value x, std::int64_t offset, std::vector<std::int64_t> out_shape);
// Stack equal-shaped values along a new leading dim.
Value concat_rows(Tape& t, const std::vector<Value>& xs);

// Reductions to [1].
Value sumsq(Tape& t, Value a);
Value dotv(Tape& t, Value a, Value b);

}  // namespace ad
}  // namespace remixsep

#endif  // REMIXSEP_AUTODIFF_HPP_
