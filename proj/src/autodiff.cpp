// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/autodiff.hpp"

#include <cmath>

namespace remixsep {

Value Tape::push(Tensor value, bool requires_grad, BackFn back) {
  bytes_ += value.v.size() * sizeof(Scalar);
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.back = requires_grad ? std::move(back) : nullptr;
  nodes_.push_back(std::move(n));
  return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buf(Value x) {
  Node& n = nodes_[check(x)];
  if (n.grad.numel() == 0) {
    n.grad = Tensor::zeros(n.value.shape);
    bytes_ += n.grad.v.size() * sizeof(Scalar);
  }
  return n.grad;
}

void Tape::backward(Value loss) {
  RS_REQUIRE(nodes_[check(loss)].value.numel() == 1, "backward target must be a scalar");
  RS_REQUIRE(nodes_[check(loss)].requires_grad, "backward target does not require gradients");
  grad_buf(loss).v[0] += 1.0;
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back && n.grad.numel() > 0) n.back(*this);
  }
}

namespace ad {
namespace {

bool needs(const Tape& t, Value a) { return t.requires_grad(a); }

// Id the next pushed node will receive; lets backward closures reference
// their own output before it exists.
Value upcoming(const Tape& t) { return Value{static_cast<std::int32_t>(t.num_nodes())}; }

void axpy(Tensor& dst, const Tensor& src, Scalar c) {
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += c * src.v[i];
}

std::vector<std::int64_t> drop_last(const std::vector<std::int64_t>& s, int k = 1) {
  return {s.begin(), s.end() - k};
}

// Rows when a [..., K] tensor is viewed as a matrix with K columns.
std::int64_t lead_rows(const Tensor& t) { return t.numel() / t.dim(-1); }

}  // namespace

Value add(Tape& t, Value a, Value b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  RS_REQUIRE(va.same_shape(vb), "add: shape mismatch");
  Tensor out = va;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += vb.v[i];
  bool rg = needs(t, a) || needs(t, b);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, b, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    if (tp.requires_grad(a)) axpy(tp.grad_buf(a), g, 1.0);
    if (tp.requires_grad(b)) axpy(tp.grad_buf(b), g, 1.0);
  });
}

Value sub(Tape& t, Value a, Value b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  RS_REQUIRE(va.same_shape(vb), "sub: shape mismatch");
  Tensor out = va;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= vb.v[i];
  bool rg = needs(t, a) || needs(t, b);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, b, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    if (tp.requires_grad(a)) axpy(tp.grad_buf(a), g, 1.0);
    if (tp.requires_grad(b)) axpy(tp.grad_buf(b), g, -1.0);
  });
}

Value mul(Tape& t, Value a, Value b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  RS_REQUIRE(va.same_shape(vb), "mul: shape mismatch");
  Tensor out = va;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= vb.v[i];
  bool rg = needs(t, a) || needs(t, b);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, b, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad_buf(a);
      const Tensor& vb2 = tp.val(b);
      for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] * vb2.v[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      const Tensor& va2 = tp.val(a);
      for (std::size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += g.v[i] * va2.v[i];
    }
  });
}

Value scale(Tape& t, Value a, Scalar c) {
  Tensor out = t.val(a);
  for (auto& x : out.v) x *= c;
  bool rg = needs(t, a);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, c, res](Tape& tp) {
    axpy(tp.grad_buf(a), tp.grad(res), c);
  });
}

Value add_scalar(Tape& t, Value a, Scalar c) {
  Tensor out = t.val(a);
  for (auto& x : out.v) x += c;
  bool rg = needs(t, a);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, res](Tape& tp) {
    axpy(tp.grad_buf(a), tp.grad(res), 1.0);
  });
}

Value logv(Tape& t, Value a) {
  Tensor out = t.val(a);
  for (auto& x : out.v) x = std::log(x);
  bool rg = needs(t, a);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    const Tensor& va = tp.val(a);
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[i] / va.v[i];
  });
}

Value sigmoid(Tape& t, Value a) {
  Tensor out = t.val(a);
  for (auto& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  bool rg = needs(t, a);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    const Tensor& y = tp.val(res);
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t i = 0; i < ga.v.size(); ++i)
      ga.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
  });
}

Value tanh_act(Tape& t, Value a) {
  Tensor out = t.val(a);
  for (auto& x : out.v) x = std::tanh(x);
  bool rg = needs(t, a);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    const Tensor& y = tp.val(res);
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t i = 0; i < ga.v.size(); ++i)
      ga.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
  });
}

Value matmul(Tape& t, Value x, Value w) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  RS_REQUIRE(vw.rank() == 2, "matmul: weight must be 2-D");
  const std::int64_t k = vx.dim(-1);
  RS_REQUIRE(k == vw.dim(0), "matmul: inner dimension mismatch");
  const std::int64_t m = lead_rows(vx);
  const std::int64_t n = vw.dim(1);
  std::vector<std::int64_t> out_shape = drop_last(vx.shape);
  out_shape.push_back(n);
  Tensor out(std::move(out_shape));
  remixsep::matmul(vx.data(), vw.data(), out.data(), m, k, n, false);
  bool rg = needs(t, x) || needs(t, w);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, w, m, k, n, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    if (tp.requires_grad(x))
      matmul_bt(g.data(), tp.val(w).data(), tp.grad_buf(x).data(), m, n, k, true);
    if (tp.requires_grad(w))
      matmul_at(tp.val(x).data(), g.data(), tp.grad_buf(w).data(), m, k, n, true);
  });
}

Value mul_rowvec(Tape& t, Value x, const Tensor& row) {
  const Tensor& vx = t.val(x);
  const std::int64_t w = vx.dim(-1);
  RS_REQUIRE(row.numel() == w, "mul_rowvec: row length mismatch");
  const std::int64_t m = lead_rows(vx);
  Tensor out = vx;
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t j = 0; j < w; ++j) out.v[r * w + j] *= row.v[j];
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, row, m, w, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t r = 0; r < m; ++r)
      for (std::int64_t j = 0; j < w; ++j) gx.v[r * w + j] += g.v[r * w + j] * row.v[j];
  });
}

Value add_bias(Tape& t, Value x, Value b) {
  const Tensor& vx = t.val(x);
  const Tensor& vb = t.val(b);
  const std::int64_t c = vx.dim(-1);
  RS_REQUIRE(vb.numel() == c, "add_bias: bias length mismatch");
  const std::int64_t m = lead_rows(vx);
  Tensor out = vx;
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t j = 0; j < c; ++j) out.v[r * c + j] += vb.v[j];
  bool rg = needs(t, x) || needs(t, b);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, b, m, c, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    if (tp.requires_grad(x)) axpy(tp.grad_buf(x), g, 1.0);
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_buf(b);
      for (std::int64_t r = 0; r < m; ++r)
        for (std::int64_t j = 0; j < c; ++j) gb.v[j] += g.v[r * c + j];
    }
  });
}

Value frame_signal(Tape& t, Value x, int win, int hop, int pad, std::int64_t num_frames) {
  const Tensor& vx = t.val(x);
  RS_REQUIRE(vx.rank() == 2, "frame_signal: expects [B, T]");
  const std::int64_t bsz = vx.dim(0), tlen = vx.dim(1);
  Tensor out({bsz, num_frames, win});
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (std::int64_t l = 0; l < num_frames; ++l) {
      const std::int64_t start = l * hop - pad;
      Scalar* dst = out.data() + (b * num_frames + l) * win;
      const Scalar* src = vx.data() + b * tlen;
      for (int w = 0; w < win; ++w) {
        const std::int64_t s = start + w;
        dst[w] = (s >= 0 && s < tlen) ? src[s] : 0.0;
      }
    }
  }
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, win, hop, pad, num_frames, bsz, tlen, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t b = 0; b < bsz; ++b) {
      for (std::int64_t l = 0; l < num_frames; ++l) {
        const std::int64_t start = l * hop - pad;
        const Scalar* gsrc = g.data() + (b * num_frames + l) * win;
        Scalar* gdst = gx.data() + b * tlen;
        for (int w = 0; w < win; ++w) {
          const std::int64_t s = start + w;
          if (s >= 0 && s < tlen) gdst[s] += gsrc[w];
        }
      }
    }
  });
}

Value overlap_add(Tape& t, Value x, int hop, int pad, std::int64_t out_len, const Tensor& denom) {
  const Tensor& vx = t.val(x);
  RS_REQUIRE(vx.rank() >= 2, "overlap_add: expects [..., L, W]");
  RS_REQUIRE(denom.numel() == out_len, "overlap_add: denom length mismatch");
  const std::int64_t w = vx.dim(-1), l = vx.dim(-2);
  const std::int64_t m = vx.numel() / (l * w);
  std::vector<std::int64_t> out_shape = drop_last(vx.shape, 2);
  out_shape.push_back(out_len);
  Tensor out(std::move(out_shape));
  for (std::int64_t r = 0; r < m; ++r) {
    Scalar* dst = out.data() + r * out_len;
    const Scalar* src = vx.data() + r * l * w;
    for (std::int64_t li = 0; li < l; ++li) {
      const std::int64_t start = li * hop - pad;
      for (std::int64_t wi = 0; wi < w; ++wi) {
        const std::int64_t s = start + wi;
        if (s >= 0 && s < out_len) dst[s] += src[li * w + wi];
      }
    }
    for (std::int64_t s = 0; s < out_len; ++s) dst[s] /= denom.v[s];
  }
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, hop, pad, out_len, denom, m, l, w, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t r = 0; r < m; ++r) {
      const Scalar* gsrc = g.data() + r * out_len;
      Scalar* gdst = gx.data() + r * l * w;
      for (std::int64_t li = 0; li < l; ++li) {
        const std::int64_t start = li * hop - pad;
        for (std::int64_t wi = 0; wi < w; ++wi) {
          const std::int64_t s = start + wi;
          if (s >= 0 && s < out_len) gdst[li * w + wi] += gsrc[s] / denom.v[s];
        }
      }
    }
  });
}

Value unfold_ctx(Tape& t, Value x, int k) {
  const Tensor& vx = t.val(x);
  RS_REQUIRE(vx.rank() >= 2, "unfold_ctx: expects [..., L, F]");
  const std::int64_t f = vx.dim(-1), l = vx.dim(-2);
  const std::int64_t m = vx.numel() / (l * f);
  const int half = k / 2;
  std::vector<std::int64_t> out_shape = drop_last(vx.shape);
  out_shape.back() = l;
  out_shape.push_back(static_cast<std::int64_t>(k) * f);
  Tensor out(std::move(out_shape));
  for (std::int64_t r = 0; r < m; ++r) {
    const Scalar* src = vx.data() + r * l * f;
    Scalar* dst = out.data() + r * l * k * f;
    for (std::int64_t li = 0; li < l; ++li)
      for (int j = 0; j < k; ++j) {
        const std::int64_t ls = li + j - half;
        Scalar* d = dst + (li * k + j) * f;
        if (ls >= 0 && ls < l) {
          const Scalar* s = src + ls * f;
          for (std::int64_t fi = 0; fi < f; ++fi) d[fi] = s[fi];
        } else {
          for (std::int64_t fi = 0; fi < f; ++fi) d[fi] = 0.0;
        }
      }
  }
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, k, half, m, l, f, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t r = 0; r < m; ++r) {
      Scalar* gdst = gx.data() + r * l * f;
      const Scalar* gsrc = g.data() + r * l * k * f;
      for (std::int64_t li = 0; li < l; ++li)
        for (int j = 0; j < k; ++j) {
          const std::int64_t ls = li + j - half;
          if (ls < 0 || ls >= l) continue;
          const Scalar* gs = gsrc + (li * k + j) * f;
          Scalar* gd = gdst + ls * f;
          for (std::int64_t fi = 0; fi < f; ++fi) gd[fi] += gs[fi];
        }
    }
  });
}

Value split_channels(Tape& t, Value x, std::int64_t n_channels) {
  const Tensor& vx = t.val(x);
  RS_REQUIRE(vx.rank() >= 2, "split_channels: expects [..., L, N*F]");
  const std::int64_t nf = vx.dim(-1), l = vx.dim(-2);
  RS_REQUIRE(nf % n_channels == 0, "split_channels: last dim not divisible by channel count");
  const std::int64_t f = nf / n_channels;
  const std::int64_t m = vx.numel() / (l * nf);
  std::vector<std::int64_t> out_shape = drop_last(vx.shape, 2);
  out_shape.push_back(n_channels);
  out_shape.push_back(l);
  out_shape.push_back(f);
  Tensor out(std::move(out_shape));
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t n = 0; n < n_channels; ++n)
      for (std::int64_t li = 0; li < l; ++li) {
        const Scalar* s = vx.data() + (r * l + li) * nf + n * f;
        Scalar* d = out.data() + ((r * n_channels + n) * l + li) * f;
        for (std::int64_t fi = 0; fi < f; ++fi) d[fi] = s[fi];
      }
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, n_channels, m, l, f, nf, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t r = 0; r < m; ++r)
      for (std::int64_t n = 0; n < n_channels; ++n)
        for (std::int64_t li = 0; li < l; ++li) {
          Scalar* gd = gx.data() + (r * l + li) * nf + n * f;
          const Scalar* gs = g.data() + ((r * n_channels + n) * l + li) * f;
          for (std::int64_t fi = 0; fi < f; ++fi) gd[fi] += gs[fi];
        }
  });
}

Value sum_channels(Tape& t, Value x) {
  const Tensor& vx = t.val(x);
  RS_REQUIRE(vx.rank() >= 3, "sum_channels: expects [B, N, ...]");
  const std::int64_t b = vx.dim(0), n = vx.dim(1);
  const std::int64_t r = vx.numel() / (b * n);
  std::vector<std::int64_t> out_shape = {b};
  out_shape.insert(out_shape.end(), vx.shape.begin() + 2, vx.shape.end());
  Tensor out(std::move(out_shape));
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t ni = 0; ni < n; ++ni) {
      const Scalar* s = vx.data() + (bi * n + ni) * r;
      Scalar* d = out.data() + bi * r;
      for (std::int64_t ri = 0; ri < r; ++ri) d[ri] += s[ri];
    }
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, b, n, r, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t bi = 0; bi < b; ++bi)
      for (std::int64_t ni = 0; ni < n; ++ni) {
        Scalar* gd = gx.data() + (bi * n + ni) * r;
        const Scalar* gs = g.data() + bi * r;
        for (std::int64_t ri = 0; ri < r; ++ri) gd[ri] += gs[ri];
      }
  });
}

namespace {

Value bcast_channel_impl(Tape& t, Value x, Value y, bool is_mul) {
  const Tensor& vx = t.val(x);
  const Tensor& vy = t.val(y);
  RS_REQUIRE(vx.rank() >= 3, "bcast channel op: expects [B, N, ...]");
  const std::int64_t b = vx.dim(0), n = vx.dim(1);
  const std::int64_t r = vx.numel() / (b * n);
  RS_REQUIRE(vy.numel() == b * r && vy.dim(0) == b, "bcast channel op: shape mismatch");
  Tensor out = vx;
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t ni = 0; ni < n; ++ni) {
      Scalar* d = out.data() + (bi * n + ni) * r;
      const Scalar* s = vy.data() + bi * r;
      if (is_mul)
        for (std::int64_t ri = 0; ri < r; ++ri) d[ri] *= s[ri];
      else
        for (std::int64_t ri = 0; ri < r; ++ri) d[ri] += s[ri];
    }
  bool rg = needs(t, x) || needs(t, y);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, y, b, n, r, is_mul, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    if (tp.requires_grad(x)) {
      Tensor& gx = tp.grad_buf(x);
      if (is_mul) {
        const Tensor& vy2 = tp.val(y);
        for (std::int64_t bi = 0; bi < b; ++bi)
          for (std::int64_t ni = 0; ni < n; ++ni) {
            Scalar* gd = gx.data() + (bi * n + ni) * r;
            const Scalar* gs = g.data() + (bi * n + ni) * r;
            const Scalar* s = vy2.data() + bi * r;
            for (std::int64_t ri = 0; ri < r; ++ri) gd[ri] += gs[ri] * s[ri];
          }
      } else {
        axpy(gx, g, 1.0);
      }
    }
    if (tp.requires_grad(y)) {
      Tensor& gy = tp.grad_buf(y);
      const Tensor& vx2 = tp.val(x);
      for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t ni = 0; ni < n; ++ni) {
          Scalar* gd = gy.data() + bi * r;
          const Scalar* gs = g.data() + (bi * n + ni) * r;
          const Scalar* s = vx2.data() + (bi * n + ni) * r;
          if (is_mul)
            for (std::int64_t ri = 0; ri < r; ++ri) gd[ri] += gs[ri] * s[ri];
          else
            for (std::int64_t ri = 0; ri < r; ++ri) gd[ri] += gs[ri];
        }
    }
  });
}

}  // namespace

Value bcast_add_channel(Tape& t, Value x, Value y) { return bcast_channel_impl(t, x, y, false); }
Value bcast_mul_channel(Tape& t, Value x, Value y) { return bcast_channel_impl(t, x, y, true); }

Value reindex(Tape& t, Value x, std::vector<std::int64_t> src_b, std::vector<std::int64_t> src_n,
              std::int64_t b_out, std::int64_t n_out) {
  const Tensor& vx = t.val(x);
  RS_REQUIRE(vx.rank() >= 3, "reindex: expects [B, N, ...]");
  RS_REQUIRE(static_cast<std::int64_t>(src_b.size()) == b_out * n_out &&
                 src_b.size() == src_n.size(),
             "reindex: index size mismatch");
  const std::int64_t bx = vx.dim(0), nx = vx.dim(1);
  const std::int64_t r = vx.numel() / (bx * nx);
  std::vector<std::int64_t> out_shape = {b_out, n_out};
  out_shape.insert(out_shape.end(), vx.shape.begin() + 2, vx.shape.end());
  Tensor out(std::move(out_shape));
  for (std::int64_t i = 0; i < b_out * n_out; ++i) {
    RS_REQUIRE(src_b[i] >= 0 && src_b[i] < bx && src_n[i] >= 0 && src_n[i] < nx,
               "reindex: source index out of range");
    const Scalar* s = vx.data() + (src_b[i] * nx + src_n[i]) * r;
    Scalar* d = out.data() + i * r;
    for (std::int64_t ri = 0; ri < r; ++ri) d[ri] = s[ri];
  }
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg,
                [x, src_b = std::move(src_b), src_n = std::move(src_n), b_out, n_out, nx, r,
                 res](Tape& tp) {
                  const Tensor& g = tp.grad(res);
                  Tensor& gx = tp.grad_buf(x);
                  for (std::int64_t i = 0; i < b_out * n_out; ++i) {
                    Scalar* gd = gx.data() + (src_b[i] * nx + src_n[i]) * r;
                    const Scalar* gs = g.data() + i * r;
                    for (std::int64_t ri = 0; ri < r; ++ri) gd[ri] += gs[ri];
                  }
                });
}

Value mix_channels(Tape& t, Value x, std::span<const Scalar> w) {
  const Tensor& vx = t.val(x);
  RS_REQUIRE(vx.rank() == 2, "mix_channels: expects [N, T]");
  const std::int64_t n = vx.dim(0), len = vx.dim(1);
  RS_REQUIRE(static_cast<std::int64_t>(w.size()) == n, "mix_channels: weight count mismatch");
  Tensor out({len});
  for (std::int64_t ni = 0; ni < n; ++ni) {
    const Scalar* s = vx.data() + ni * len;
    for (std::int64_t i = 0; i < len; ++i) out.v[i] += w[ni] * s[i];
  }
  bool rg = needs(t, x);
  Value res = upcoming(t);
  std::vector<Scalar> wcopy(w.begin(), w.end());
  return t.push(std::move(out), rg, [x, wcopy = std::move(wcopy), n, len, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t ni = 0; ni < n; ++ni) {
      Scalar* gd = gx.data() + ni * len;
      for (std::int64_t i = 0; i < len; ++i) gd[i] += wcopy[ni] * g.v[i];
    }
  });
}

Value block(Tape& t, Value x, std::int64_t offset, std::vector<std::int64_t> out_shape) {
  const Tensor& vx = t.val(x);
  const std::int64_t n = Tensor::numel_of(out_shape);
  RS_REQUIRE(offset >= 0 && offset + n <= vx.numel(), "block: out of range");
  Tensor out(std::move(out_shape));
  for (std::int64_t i = 0; i < n; ++i) out.v[i] = vx.v[offset + i];
  bool rg = needs(t, x);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [x, offset, n, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    Tensor& gx = tp.grad_buf(x);
    for (std::int64_t i = 0; i < n; ++i) gx.v[offset + i] += g.v[i];
  });
}

Value concat_rows(Tape& t, const std::vector<Value>& xs) {
  RS_REQUIRE(!xs.empty(), "concat_rows: empty input");
  const Tensor& first = t.val(xs[0]);
  const std::int64_t row = first.numel();
  bool rg = false;
  for (Value x : xs) {
    RS_REQUIRE(t.val(x).same_shape(first), "concat_rows: shape mismatch");
    rg = rg || needs(t, x);
  }
  std::vector<std::int64_t> out_shape = {static_cast<std::int64_t>(xs.size())};
  out_shape.insert(out_shape.end(), first.shape.begin(), first.shape.end());
  Tensor out(std::move(out_shape));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& v = t.val(xs[i]);
    for (std::int64_t j = 0; j < row; ++j) out.v[i * row + j] = v.v[j];
  }
  Value res = upcoming(t);
  std::vector<Value> xcopy = xs;
  return t.push(std::move(out), rg, [xcopy = std::move(xcopy), row, res](Tape& tp) {
    const Tensor& g = tp.grad(res);
    for (std::size_t i = 0; i < xcopy.size(); ++i) {
      if (!tp.requires_grad(xcopy[i])) continue;
      Tensor& gx = tp.grad_buf(xcopy[i]);
      for (std::int64_t j = 0; j < row; ++j) gx.v[j] += g.v[i * row + j];
    }
  });
}

Value sumsq(Tape& t, Value a) {
  const Tensor& va = t.val(a);
  Tensor out = Tensor::scalar(sum_squares(va.flat()));
  bool rg = needs(t, a);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, res](Tape& tp) {
    const Scalar g = tp.grad(res).v[0];
    const Tensor& va2 = tp.val(a);
    Tensor& ga = tp.grad_buf(a);
    for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += 2.0 * g * va2.v[i];
  });
}

Value dotv(Tape& t, Value a, Value b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  RS_REQUIRE(va.numel() == vb.numel(), "dotv: length mismatch");
  Tensor out = Tensor::scalar(dot(va.flat(), vb.flat()));
  bool rg = needs(t, a) || needs(t, b);
  Value res = upcoming(t);
  return t.push(std::move(out), rg, [a, b, res](Tape& tp) {
    const Scalar g = tp.grad(res).v[0];
    if (tp.requires_grad(a)) axpy(tp.grad_buf(a), tp.val(b), g);
    if (tp.requires_grad(b)) axpy(tp.grad_buf(b), tp.val(a), g);
  });
}

}  // namespace ad
}  // namespace remixsep
