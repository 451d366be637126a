// lipspeech/core/nn_ops.hpp

// Copyright 2026  The lipspeech authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "lipspeech/core/tensor.hpp"

namespace lipspeech {

// Convolutions are im2col + GEMM. Backward recomputes the column buffer
// instead of keeping it, so activation memory stays at one tensor per layer.

namespace detail {

constexpr index_t kMaxColElems = index_t(6) * 1024 * 1024;

// --- 1D -------------------------------------------------------------------

inline index_t conv_out_len(index_t t, index_t k, index_t stride, index_t pad,
                            index_t dilation) {
  return (t + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

template <typename S>
void im2col1d(const S* x, index_t cin, index_t t, index_t k, index_t stride,
              index_t pad, index_t dilation, index_t t_out, S* cols) {
  for (index_t c = 0; c < cin; ++c) {
    for (index_t kk = 0; kk < k; ++kk) {
      S* row = cols + (c * k + kk) * t_out;
      const S* src = x + c * t;
      for (index_t o = 0; o < t_out; ++o) {
        const index_t ti = o * stride + kk * dilation - pad;
        row[o] = (ti >= 0 && ti < t) ? src[ti] : S(0);
      }
    }
  }
}

template <typename S>
void col2im1d_add(const S* cols, index_t cin, index_t t, index_t k, index_t stride,
                  index_t pad, index_t dilation, index_t t_out, S* gx) {
  for (index_t c = 0; c < cin; ++c) {
    for (index_t kk = 0; kk < k; ++kk) {
      const S* row = cols + (c * k + kk) * t_out;
      S* dst = gx + c * t;
      for (index_t o = 0; o < t_out; ++o) {
        const index_t ti = o * stride + kk * dilation - pad;
        if (ti >= 0 && ti < t) dst[ti] += row[o];
      }
    }
  }
}

// --- 2D -------------------------------------------------------------------

template <typename S>
void im2col2d(const S* x, index_t cin, index_t h, index_t w, index_t kh, index_t kw,
              index_t sh, index_t sw, index_t ph, index_t pw, index_t ho, index_t wo,
              S* cols) {
  const index_t cols_n = ho * wo;
  for (index_t c = 0; c < cin; ++c) {
    for (index_t ky = 0; ky < kh; ++ky) {
      for (index_t kx = 0; kx < kw; ++kx) {
        S* row = cols + ((c * kh + ky) * kw + kx) * cols_n;
        const S* src = x + c * h * w;
        index_t o = 0;
        for (index_t y = 0; y < ho; ++y) {
          const index_t sy = y * sh + ky - ph;
          for (index_t xw = 0; xw < wo; ++xw, ++o) {
            const index_t sx = xw * sw + kx - pw;
            row[o] = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? src[sy * w + sx] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im2d_add(const S* cols, index_t cin, index_t h, index_t w, index_t kh,
                  index_t kw, index_t sh, index_t sw, index_t ph, index_t pw,
                  index_t ho, index_t wo, S* gx) {
  const index_t cols_n = ho * wo;
  for (index_t c = 0; c < cin; ++c) {
    for (index_t ky = 0; ky < kh; ++ky) {
      for (index_t kx = 0; kx < kw; ++kx) {
        const S* row = cols + ((c * kh + ky) * kw + kx) * cols_n;
        S* dst = gx + c * h * w;
        index_t o = 0;
        for (index_t y = 0; y < ho; ++y) {
          const index_t sy = y * sh + ky - ph;
          for (index_t xw = 0; xw < wo; ++xw, ++o) {
            const index_t sx = xw * sw + kx - pw;
            if (sy >= 0 && sy < h && sx >= 0 && sx < w) dst[sy * w + sx] += row[o];
          }
        }
      }
    }
  }
}

// --- 3D, chunked over output frames ---------------------------------------

template <typename S>
void im2col3d(const S* x, index_t cin, index_t t, index_t h, index_t w, index_t kt,
              index_t kh, index_t kw, index_t st, index_t sh, index_t sw, index_t pt,
              index_t ph, index_t pw, index_t t0, index_t t1, index_t ho, index_t wo,
              S* cols) {
  const index_t cols_n = (t1 - t0) * ho * wo;
  const index_t plane = h * w;
  for (index_t c = 0; c < cin; ++c) {
    for (index_t kz = 0; kz < kt; ++kz) {
      for (index_t ky = 0; ky < kh; ++ky) {
        for (index_t kx = 0; kx < kw; ++kx) {
          S* row = cols + (((c * kt + kz) * kh + ky) * kw + kx) * cols_n;
          const S* src = x + c * t * plane;
          index_t o = 0;
          for (index_t tz = t0; tz < t1; ++tz) {
            const index_t sz = tz * st + kz - pt;
            const bool tok = sz >= 0 && sz < t;
            for (index_t y = 0; y < ho; ++y) {
              const index_t sy = y * sh + ky - ph;
              const bool yok = tok && sy >= 0 && sy < h;
              for (index_t xw = 0; xw < wo; ++xw, ++o) {
                const index_t sx = xw * sw + kx - pw;
                row[o] = (yok && sx >= 0 && sx < w) ? src[sz * plane + sy * w + sx]
                                                    : S(0);
              }
            }
          }
        }
      }
    }
  }
}

template <typename S>
void col2im3d_add(const S* cols, index_t cin, index_t t, index_t h, index_t w,
                  index_t kt, index_t kh, index_t kw, index_t st, index_t sh,
                  index_t sw, index_t pt, index_t ph, index_t pw, index_t t0,
                  index_t t1, index_t ho, index_t wo, S* gx) {
  const index_t cols_n = (t1 - t0) * ho * wo;
  const index_t plane = h * w;
  for (index_t c = 0; c < cin; ++c) {
    for (index_t kz = 0; kz < kt; ++kz) {
      for (index_t ky = 0; ky < kh; ++ky) {
        for (index_t kx = 0; kx < kw; ++kx) {
          const S* row = cols + (((c * kt + kz) * kh + ky) * kw + kx) * cols_n;
          S* dst = gx + c * t * plane;
          index_t o = 0;
          for (index_t tz = t0; tz < t1; ++tz) {
            const index_t sz = tz * st + kz - pt;
            const bool tok = sz >= 0 && sz < t;
            for (index_t y = 0; y < ho; ++y) {
              const index_t sy = y * sh + ky - ph;
              const bool yok = tok && sy >= 0 && sy < h;
              for (index_t xw = 0; xw < wo; ++xw, ++o) {
                const index_t sx = xw * sw + kx - pw;
                if (yok && sx >= 0 && sx < w) dst[sz * plane + sy * w + sx] += row[o];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv1d: x [B, Cin, T], w [Cout, Cin/groups, K], optional bias [Cout].

template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 index_t stride = 1, index_t pad = 0, index_t dilation = 1,
                 index_t groups = 1) {
  require<ShapeError>(x.ndim() == 3 && w.ndim() == 3, "conv1d: bad ranks");
  const index_t bsz = x.dim(0), cin = x.dim(1), t = x.dim(2);
  const index_t cout = w.dim(0), k = w.dim(2);
  require<ShapeError>(cin % groups == 0 && cout % groups == 0,
                      "conv1d: channels not divisible by groups");
  require<ShapeError>(w.dim(1) == cin / groups, "conv1d: weight in-channels ",
                      w.dim(1), " expected ", cin / groups);
  const index_t t_out = detail::conv_out_len(t, k, stride, pad, dilation);
  require<ShapeError>(t_out >= 1, "conv1d: input length ", t, " too short");
  const bool has_b = b.defined();
  auto out = has_b ? detail::op_result<S>({bsz, cout, t_out}, {x, w, b})
                   : detail::op_result<S>({bsz, cout, t_out}, {x, w});
  const index_t cig = cin / groups, cog = cout / groups;
  const index_t rows = cig * k;
  std::vector<S> cols(size_t(rows * t_out));
  for (index_t n = 0; n < bsz; ++n) {
    for (index_t g = 0; g < groups; ++g) {
      detail::im2col1d(x.data() + (n * cin + g * cig) * t, cig, t, k, stride, pad,
                       dilation, t_out, cols.data());
      gemm(w.data() + g * cog * rows, cols.data(),
           out.data() + (n * cout + g * cog) * t_out, cog, rows, t_out);
    }
  }
  if (has_b) {
    S* yd = out.data();
    const S* bd = b.data();
    for (index_t n = 0; n < bsz; ++n)
      for (index_t c = 0; c < cout; ++c)
        for (index_t i = 0; i < t_out; ++i) yd[(n * cout + c) * t_out + i] += bd[c];
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = has_b ? b.impl() : nullptr;
    out.impl()->grad_fn = [=](TensorImpl<S>& node) {
      const index_t rows = cig * k;
      std::vector<S> cols(size_t(rows * t_out));
      std::vector<S> gcols(size_t(rows * t_out));
      for (index_t n = 0; n < bsz; ++n) {
        for (index_t g = 0; g < groups; ++g) {
          const S* gy = node.grad.data() + (n * cout + g * cog) * t_out;
          if (wi->requires_grad) {
            detail::im2col1d(xi->data.data() + (n * cin + g * cig) * t, cig, t, k,
                             stride, pad, dilation, t_out, cols.data());
            gemm(gy, cols.data(), wi->ensure_grad() + g * cog * rows, cog, t_out,
                 rows, false, true, true);
          }
          if (xi->requires_grad) {
            gemm(wi->data.data() + g * cog * rows, gy, gcols.data(), rows, cog,
                 t_out, true, false, false);
            detail::col2im1d_add(gcols.data(), cig, t, k, stride, pad, dilation,
                                 t_out, xi->ensure_grad() + (n * cin + g * cig) * t);
          }
        }
      }
      if (bi && bi->requires_grad) {
        S* g = bi->ensure_grad();
        for (index_t n = 0; n < bsz; ++n)
          for (index_t c = 0; c < cout; ++c) {
            S acc = S(0);
            const S* gy = node.grad.data() + (n * cout + c) * t_out;
            for (index_t i = 0; i < t_out; ++i) acc += gy[i];
            g[c] += acc;
          }
      }
    };
  }
  return out;
}

// conv_transpose1d: x [B, Cin, T], w [Cin, Cout, K], stride s.
// Output is trimmed symmetrically to exactly T*s frames.
template <typename S>
Tensor<S> conv_transpose1d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                           index_t stride) {
  require<ShapeError>(x.ndim() == 3 && w.ndim() == 3, "conv_transpose1d: bad ranks");
  const index_t bsz = x.dim(0), cin = x.dim(1), t = x.dim(2);
  require<ShapeError>(w.dim(0) == cin, "conv_transpose1d: weight in-channels");
  const index_t cout = w.dim(1), k = w.dim(2);
  require<ShapeError>(k >= stride, "conv_transpose1d: kernel < stride");
  const index_t t_full = (t - 1) * stride + k;
  const index_t t_out = t * stride;
  const index_t left = (k - stride) / 2;
  const bool has_b = b.defined();
  auto out = has_b ? detail::op_result<S>({bsz, cout, t_out}, {x, w, b})
                   : detail::op_result<S>({bsz, cout, t_out}, {x, w});
  // cols[c_out*k + kk, t] = sum_cin w[cin, c_out, kk] * x[cin, t]
  const index_t rows = cout * k;
  std::vector<S> cols(size_t(rows * t));
  std::vector<S> full(size_t(cout * t_full));
  for (index_t n = 0; n < bsz; ++n) {
    gemm(w.data(), x.data() + n * cin * t, cols.data(), rows, cin, t, true, false);
    std::fill(full.begin(), full.end(), S(0));
    for (index_t c = 0; c < cout; ++c)
      for (index_t kk = 0; kk < k; ++kk) {
        const S* row = cols.data() + (c * k + kk) * t;
        S* dst = full.data() + c * t_full + kk;
        for (index_t i = 0; i < t; ++i) dst[i * stride] += row[i];
      }
    S* yd = out.data() + n * cout * t_out;
    for (index_t c = 0; c < cout; ++c) {
      const S* src = full.data() + c * t_full + left;
      S* dst = yd + c * t_out;
      if (has_b) {
        const S bv = b.data()[c];
        for (index_t i = 0; i < t_out; ++i) dst[i] = src[i] + bv;
      } else {
        std::copy(src, src + t_out, dst);
      }
    }
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = has_b ? b.impl() : nullptr;
    out.impl()->grad_fn = [=](TensorImpl<S>& node) {
      const index_t rows = cout * k;
      std::vector<S> gfull(size_t(cout * t_full));
      std::vector<S> gcols(size_t(rows * t));
      for (index_t n = 0; n < bsz; ++n) {
        std::fill(gfull.begin(), gfull.end(), S(0));
        const S* gy = node.grad.data() + n * cout * t_out;
        for (index_t c = 0; c < cout; ++c)
          std::copy(gy + c * t_out, gy + (c + 1) * t_out,
                    gfull.data() + c * t_full + left);
        for (index_t c = 0; c < cout; ++c)
          for (index_t kk = 0; kk < k; ++kk) {
            S* row = gcols.data() + (c * k + kk) * t;
            const S* src = gfull.data() + c * t_full + kk;
            for (index_t i = 0; i < t; ++i) row[i] = src[i * stride];
          }
        if (xi->requires_grad)
          gemm(wi->data.data(), gcols.data(), xi->ensure_grad() + n * cin * t, cin,
               rows, t, false, false, true);
        if (wi->requires_grad)
          gemm(xi->data.data() + n * cin * t, gcols.data(), wi->ensure_grad(), cin,
               t, rows, false, true, true);
        if (bi && bi->requires_grad) {
          S* g = bi->ensure_grad();
          for (index_t c = 0; c < cout; ++c) {
            S acc = S(0);
            for (index_t i = 0; i < t_out; ++i) acc += gy[c * t_out + i];
            g[c] += acc;
          }
        }
      }
    };
  }
  return out;
}

// conv2d: x [B, Cin, H, W], w [Cout, Cin, KH, KW].
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 std::array<index_t, 2> stride, std::array<index_t, 2> pad) {
  require<ShapeError>(x.ndim() == 4 && w.ndim() == 4, "conv2d: bad ranks");
  const index_t bsz = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
  require<ShapeError>(w.dim(1) == cin, "conv2d: in-channels ", w.dim(1), " vs ", cin);
  const index_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const index_t ho = detail::conv_out_len(h, kh, stride[0], pad[0], 1);
  const index_t wo = detail::conv_out_len(ww, kw, stride[1], pad[1], 1);
  require<ShapeError>(ho >= 1 && wo >= 1, "conv2d: input ", h, "x", ww,
                      " too small for kernel");
  const bool has_b = b.defined();
  auto out = has_b ? detail::op_result<S>({bsz, cout, ho, wo}, {x, w, b})
                   : detail::op_result<S>({bsz, cout, ho, wo}, {x, w});
  const index_t rows = cin * kh * kw, cols_n = ho * wo;
  std::vector<S> cols(size_t(rows * cols_n));
  for (index_t n = 0; n < bsz; ++n) {
    detail::im2col2d(x.data() + n * cin * h * ww, cin, h, ww, kh, kw, stride[0],
                     stride[1], pad[0], pad[1], ho, wo, cols.data());
    gemm(w.data(), cols.data(), out.data() + n * cout * cols_n, cout, rows, cols_n);
  }
  if (has_b) {
    S* yd = out.data();
    const S* bd = b.data();
    for (index_t n = 0; n < bsz; ++n)
      for (index_t c = 0; c < cout; ++c)
        for (index_t i = 0; i < cols_n; ++i) yd[(n * cout + c) * cols_n + i] += bd[c];
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = has_b ? b.impl() : nullptr;
    const index_t sh = stride[0], sw = stride[1], ph = pad[0], pw = pad[1];
    out.impl()->grad_fn = [=](TensorImpl<S>& node) {
      const index_t rows = cin * kh * kw, cols_n = ho * wo;
      std::vector<S> cols(size_t(rows * cols_n));
      std::vector<S> gcols(size_t(rows * cols_n));
      for (index_t n = 0; n < bsz; ++n) {
        const S* gy = node.grad.data() + n * cout * cols_n;
        if (wi->requires_grad) {
          detail::im2col2d(xi->data.data() + n * cin * h * ww, cin, h, ww, kh, kw,
                           sh, sw, ph, pw, ho, wo, cols.data());
          gemm(gy, cols.data(), wi->ensure_grad(), cout, cols_n, rows, false, true,
               true);
        }
        if (xi->requires_grad) {
          gemm(wi->data.data(), gy, gcols.data(), rows, cout, cols_n, true, false,
               false);
          detail::col2im2d_add(gcols.data(), cin, h, ww, kh, kw, sh, sw, ph, pw, ho,
                               wo, xi->ensure_grad() + n * cin * h * ww);
        }
      }
      if (bi && bi->requires_grad) {
        S* g = bi->ensure_grad();
        for (index_t n = 0; n < bsz; ++n)
          for (index_t c = 0; c < cout; ++c) {
            S acc = S(0);
            const S* gy = node.grad.data() + (n * cout + c) * cols_n;
            for (index_t i = 0; i < cols_n; ++i) acc += gy[i];
            g[c] += acc;
          }
      }
    };
  }
  return out;
}

// conv3d: x [B, Cin, T, H, W], w [Cout, Cin, KT, KH, KW].
template <typename S>
Tensor<S> conv3d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 std::array<index_t, 3> stride, std::array<index_t, 3> pad) {
  require<ShapeError>(x.ndim() == 5 && w.ndim() == 5, "conv3d: bad ranks");
  const index_t bsz = x.dim(0), cin = x.dim(1), t = x.dim(2), h = x.dim(3),
                ww = x.dim(4);
  require<ShapeError>(w.dim(1) == cin, "conv3d: in-channels ", w.dim(1), " vs ", cin);
  const index_t cout = w.dim(0), kt = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  const index_t to = detail::conv_out_len(t, kt, stride[0], pad[0], 1);
  const index_t ho = detail::conv_out_len(h, kh, stride[1], pad[1], 1);
  const index_t wo = detail::conv_out_len(ww, kw, stride[2], pad[2], 1);
  require<ShapeError>(to >= 1 && ho >= 1 && wo >= 1, "conv3d: input too small");
  const bool has_b = b.defined();
  auto out = has_b ? detail::op_result<S>({bsz, cout, to, ho, wo}, {x, w, b})
                   : detail::op_result<S>({bsz, cout, to, ho, wo}, {x, w});
  const index_t rows = cin * kt * kh * kw;
  const index_t chunk = std::max<index_t>(
      1, detail::kMaxColElems / std::max<index_t>(1, rows * ho * wo));
  std::vector<S> cols(size_t(rows * std::min(chunk, to) * ho * wo));
  const index_t in_sz = cin * t * h * ww, out_sz = cout * to * ho * wo;
  for (index_t n = 0; n < bsz; ++n) {
    for (index_t t0 = 0; t0 < to; t0 += chunk) {
      const index_t t1 = std::min(to, t0 + chunk);
      const index_t cn = (t1 - t0) * ho * wo;
      detail::im2col3d(x.data() + n * in_sz, cin, t, h, ww, kt, kh, kw, stride[0],
                       stride[1], stride[2], pad[0], pad[1], pad[2], t0, t1, ho, wo,
                       cols.data());
      // Output layout [C, T, H, W]: a time chunk is not contiguous across
      // channels, so GEMM lands in cols-order then rows are scattered.
      std::vector<S> ychunk(size_t(cout * cn));
      gemm(w.data(), cols.data(), ychunk.data(), cout, rows, cn);
      S* yd = out.data() + n * out_sz;
      for (index_t c = 0; c < cout; ++c)
        std::copy(ychunk.data() + c * cn, ychunk.data() + (c + 1) * cn,
                  yd + c * to * ho * wo + t0 * ho * wo);
    }
  }
  if (has_b) {
    S* yd = out.data();
    const S* bd = b.data();
    const index_t plane = to * ho * wo;
    for (index_t n = 0; n < bsz; ++n)
      for (index_t c = 0; c < cout; ++c)
        for (index_t i = 0; i < plane; ++i) yd[(n * cout + c) * plane + i] += bd[c];
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = has_b ? b.impl() : nullptr;
    const auto st = stride;
    const auto pd = pad;
    out.impl()->grad_fn = [=](TensorImpl<S>& node) {
      const index_t rows = cin * kt * kh * kw;
      const index_t chunk = std::max<index_t>(
          1, detail::kMaxColElems / std::max<index_t>(1, rows * ho * wo));
      std::vector<S> cols(size_t(rows * std::min(chunk, to) * ho * wo));
      std::vector<S> gcols(cols.size());
      for (index_t n = 0; n < bsz; ++n) {
        for (index_t t0 = 0; t0 < to; t0 += chunk) {
          const index_t t1 = std::min(to, t0 + chunk);
          const index_t cn = (t1 - t0) * ho * wo;
          std::vector<S> gychunk(size_t(cout * cn));
          const S* gy = node.grad.data() + n * out_sz;
          for (index_t c = 0; c < cout; ++c)
            std::copy(gy + c * to * ho * wo + t0 * ho * wo,
                      gy + c * to * ho * wo + t1 * ho * wo, gychunk.data() + c * cn);
          if (wi->requires_grad) {
            detail::im2col3d(xi->data.data() + n * in_sz, cin, t, h, ww, kt, kh, kw,
                             st[0], st[1], st[2], pd[0], pd[1], pd[2], t0, t1, ho,
                             wo, cols.data());
            gemm(gychunk.data(), cols.data(), wi->ensure_grad(), cout, cn, rows,
                 false, true, true);
          }
          if (xi->requires_grad) {
            gemm(wi->data.data(), gychunk.data(), gcols.data(), rows, cout, cn, true,
                 false, false);
            detail::col2im3d_add(gcols.data(), cin, t, h, ww, kt, kh, kw, st[0],
                                 st[1], st[2], pd[0], pd[1], pd[2], t0, t1, ho, wo,
                                 xi->ensure_grad() + n * in_sz);
          }
        }
      }
      if (bi && bi->requires_grad) {
        S* g = bi->ensure_grad();
        const index_t plane = to * ho * wo;
        for (index_t n = 0; n < bsz; ++n)
          for (index_t c = 0; c < cout; ++c) {
            S acc = S(0);
            const S* gy = node.grad.data() + (n * cout + c) * plane;
            for (index_t i = 0; i < plane; ++i) acc += gy[i];
            g[c] += acc;
          }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling

// 2x2/stride-2 max pool over the last two axes of [B, C, H, W] or
// [B, C, T, H, W]; truncates odd borders.
template <typename S>
Tensor<S> maxpool_hw(const Tensor<S>& x) {
  require<ShapeError>(x.ndim() == 4 || x.ndim() == 5, "maxpool_hw: rank");
  const int nd = x.ndim();
  const index_t h = x.dim(nd - 2), w = x.dim(nd - 1);
  const index_t ho = h / 2, wo = w / 2;
  require<ShapeError>(ho >= 1 && wo >= 1, "maxpool_hw: input too small");
  index_t outer = 1;
  for (int i = 0; i < nd - 2; ++i) outer *= x.dim(i);
  Shape out_shape = x.shape();
  out_shape[size_t(nd - 2)] = ho;
  out_shape[size_t(nd - 1)] = wo;
  auto out = detail::op_result<S>(out_shape, {x});
  std::vector<index_t> argmax(size_t(out.numel()));
  const S* xd = x.data();
  S* yd = out.data();
  index_t o = 0;
  for (index_t p = 0; p < outer; ++p) {
    const S* plane = xd + p * h * w;
    for (index_t y = 0; y < ho; ++y)
      for (index_t xw = 0; xw < wo; ++xw, ++o) {
        index_t best = (2 * y) * w + 2 * xw;
        S bv = plane[best];
        const index_t cand[3] = {(2 * y) * w + 2 * xw + 1, (2 * y + 1) * w + 2 * xw,
                                 (2 * y + 1) * w + 2 * xw + 1};
        for (index_t c : cand)
          if (plane[c] > bv) {
            bv = plane[c];
            best = c;
          }
        yd[o] = bv;
        argmax[size_t(o)] = p * h * w + best;
      }
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, argmax = std::move(argmax)](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      for (size_t i = 0; i < node.grad.size(); ++i) g[argmax[i]] += node.grad[i];
    };
  }
  return out;
}

// avg pool over time for [B, C, T]; zero-padded, divisor is the kernel size.
template <typename S>
Tensor<S> avgpool1d(const Tensor<S>& x, index_t k, index_t stride, index_t pad) {
  require<ShapeError>(x.ndim() == 3, "avgpool1d: rank");
  const index_t outer = x.dim(0) * x.dim(1), t = x.dim(2);
  const index_t to = (t + 2 * pad - k) / stride + 1;
  require<ShapeError>(to >= 1, "avgpool1d: too short");
  auto out = detail::op_result<S>({x.dim(0), x.dim(1), to}, {x});
  const S* xd = x.data();
  S* yd = out.data();
  const S inv = S(1) / S(k);
  for (index_t p = 0; p < outer; ++p)
    for (index_t o = 0; o < to; ++o) {
      S acc = S(0);
      for (index_t kk = 0; kk < k; ++kk) {
        const index_t ti = o * stride + kk - pad;
        if (ti >= 0 && ti < t) acc += xd[p * t + ti];
      }
      yd[p * to + o] = acc * inv;
    }
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, k, stride, pad, outer, t, to](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      const S inv = S(1) / S(k);
      for (index_t p = 0; p < outer; ++p)
        for (index_t o = 0; o < to; ++o) {
          const S gy = node.grad[p * to + o] * inv;
          for (index_t kk = 0; kk < k; ++kk) {
            const index_t ti = o * stride + kk - pad;
            if (ti >= 0 && ti < t) g[p * t + ti] += gy;
          }
        }
    };
  }
  return out;
}

// Mean over all trailing spatial axes: [B, C, ...] -> [B, C].
template <typename S>
Tensor<S> global_avg_spatial(const Tensor<S>& x) {
  require<ShapeError>(x.ndim() >= 3, "global_avg_spatial: rank");
  const index_t bsz = x.dim(0), c = x.dim(1);
  index_t sp = 1;
  for (int i = 2; i < x.ndim(); ++i) sp *= x.dim(i);
  auto out = detail::op_result<S>({bsz, c}, {x});
  const S* xd = x.data();
  S* yd = out.data();
  const S inv = S(1) / S(sp);
  for (index_t i = 0; i < bsz * c; ++i) {
    S acc = S(0);
    for (index_t j = 0; j < sp; ++j) acc += xd[i * sp + j];
    yd[i] = acc * inv;
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, bsz, c, sp](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      const S inv = S(1) / S(sp);
      for (index_t i = 0; i < bsz * c; ++i) {
        const S gy = node.grad[i] * inv;
        for (index_t j = 0; j < sp; ++j) g[i * sp + j] += gy;
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over channel axis 1.
//
// Training mode normalizes with batch statistics and updates running buffers
// in place; eval mode is the affine transform under the running statistics.
// Only per-channel mean/invstd are saved for backward; x-hat is recomputed.

template <typename S>
Tensor<S> batch_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     std::vector<S>* running_mean, std::vector<S>* running_var,
                     bool training, double momentum = 0.1, double eps = 1e-5) {
  require<ShapeError>(x.ndim() >= 2, "batch_norm: rank");
  const index_t bsz = x.dim(0), c = x.dim(1);
  index_t sp = 1;
  for (int i = 2; i < x.ndim(); ++i) sp *= x.dim(i);
  require<ShapeError>(gamma.numel() == c && beta.numel() == c, "batch_norm: affine");
  require<ShapeError>(index_t(running_mean->size()) == c &&
                          index_t(running_var->size()) == c,
                      "batch_norm: buffers");
  const index_t n_per_c = bsz * sp;
  auto out = detail::op_result<S>(x.shape(), {x, gamma, beta});
  std::vector<S> mu(static_cast<size_t>(c));
  std::vector<S> invstd(static_cast<size_t>(c));
  const S* xd = x.data();
  if (training) {
    require<ShapeError>(n_per_c > 1, "batch_norm: needs >1 element per channel");
    for (index_t ch = 0; ch < c; ++ch) {
      double s = 0;
      for (index_t b = 0; b < bsz; ++b) {
        const S* p = xd + (b * c + ch) * sp;
        for (index_t j = 0; j < sp; ++j) s += double(p[j]);
      }
      const double m = s / double(n_per_c);
      double v = 0;
      for (index_t b = 0; b < bsz; ++b) {
        const S* p = xd + (b * c + ch) * sp;
        for (index_t j = 0; j < sp; ++j) {
          const double d = double(p[j]) - m;
          v += d * d;
        }
      }
      const double var_b = v / double(n_per_c);
      mu[size_t(ch)] = S(m);
      invstd[size_t(ch)] = S(1.0 / std::sqrt(var_b + eps));
      const double var_u = v / double(n_per_c - 1);
      (*running_mean)[size_t(ch)] =
          S((1.0 - momentum) * double((*running_mean)[size_t(ch)]) + momentum * m);
      (*running_var)[size_t(ch)] =
          S((1.0 - momentum) * double((*running_var)[size_t(ch)]) + momentum * var_u);
    }
  } else {
    for (index_t ch = 0; ch < c; ++ch) {
      mu[size_t(ch)] = (*running_mean)[size_t(ch)];
      invstd[size_t(ch)] =
          S(1.0 / std::sqrt(double((*running_var)[size_t(ch)]) + eps));
    }
  }
  S* yd = out.data();
  const S* gd = gamma.data();
  const S* bd = beta.data();
  for (index_t b = 0; b < bsz; ++b)
    for (index_t ch = 0; ch < c; ++ch) {
      const S m = mu[size_t(ch)], is = invstd[size_t(ch)];
      const S ga = gd[ch], be = bd[ch];
      const S* p = xd + (b * c + ch) * sp;
      S* q = yd + (b * c + ch) * sp;
      for (index_t j = 0; j < sp; ++j) q[j] = ga * (p[j] - m) * is + be;
    }
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto gi = gamma.impl();
    auto bi = beta.impl();
    out.impl()->grad_fn = [xi, gi, bi, mu = std::move(mu), invstd = std::move(invstd),
                           bsz, c, sp, n_per_c, training](TensorImpl<S>& node) {
      std::vector<double> dbeta(size_t(c), 0), dgamma(size_t(c), 0);
      const S* xd = xi->data.data();
      for (index_t b = 0; b < bsz; ++b)
        for (index_t ch = 0; ch < c; ++ch) {
          const S m = mu[size_t(ch)], is = invstd[size_t(ch)];
          const S* gy = node.grad.data() + (b * c + ch) * sp;
          const S* p = xd + (b * c + ch) * sp;
          double db = 0, dg = 0;
          for (index_t j = 0; j < sp; ++j) {
            db += double(gy[j]);
            dg += double(gy[j]) * double((p[j] - m) * is);
          }
          dbeta[size_t(ch)] += db;
          dgamma[size_t(ch)] += dg;
        }
      if (bi->requires_grad) {
        S* g = bi->ensure_grad();
        for (index_t ch = 0; ch < c; ++ch) g[ch] += S(dbeta[size_t(ch)]);
      }
      if (gi->requires_grad) {
        S* g = gi->ensure_grad();
        for (index_t ch = 0; ch < c; ++ch) g[ch] += S(dgamma[size_t(ch)]);
      }
      if (xi->requires_grad) {
        S* gx = xi->ensure_grad();
        const S* gd = gi->data.data();
        for (index_t b = 0; b < bsz; ++b)
          for (index_t ch = 0; ch < c; ++ch) {
            const S m = mu[size_t(ch)], is = invstd[size_t(ch)];
            const S ga = gd[ch];
            const S* gy = node.grad.data() + (b * c + ch) * sp;
            const S* p = xd + (b * c + ch) * sp;
            S* q = gx + (b * c + ch) * sp;
            if (training) {
              const S mdb = S(dbeta[size_t(ch)] / double(n_per_c));
              const S mdg = S(dgamma[size_t(ch)] / double(n_per_c));
              for (index_t j = 0; j < sp; ++j) {
                const S xh = (p[j] - m) * is;
                q[j] += ga * is * (gy[j] - mdb - xh * mdg);
              }
            } else {
              for (index_t j = 0; j < sp; ++j) q[j] += ga * is * gy[j];
            }
          }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout

// Standard elementwise dropout with inverted scaling.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  require(p < 1.0, "dropout: p must be < 1");
  auto out = detail::op_result<S>(x.shape(), {x});
  const S scale = S(1.0 / (1.0 - p));
  std::vector<S> mask(size_t(x.numel()));
  const S* xd = x.data();
  S* yd = out.data();
  for (index_t i = 0; i < x.numel(); ++i) {
    mask[size_t(i)] = rng.uniform() < p ? S(0) : scale;
    yd[i] = xd[i] * mask[size_t(i)];
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, mask = std::move(mask)](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      for (size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * mask[i];
    };
  }
  return out;
}

// Channel-wise dropout: zeroes whole feature maps of [B, C, ...].
template <typename S>
Tensor<S> channel_dropout(const Tensor<S>& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  require(p < 1.0, "channel_dropout: p must be < 1");
  require<ShapeError>(x.ndim() >= 2, "channel_dropout: rank");
  const index_t bsz = x.dim(0), c = x.dim(1);
  index_t sp = 1;
  for (int i = 2; i < x.ndim(); ++i) sp *= x.dim(i);
  auto out = detail::op_result<S>(x.shape(), {x});
  const S scale = S(1.0 / (1.0 - p));
  std::vector<S> mask(size_t(bsz * c));
  for (auto& m : mask) m = rng.uniform() < p ? S(0) : scale;
  const S* xd = x.data();
  S* yd = out.data();
  for (index_t i = 0; i < bsz * c; ++i) {
    const S m = mask[size_t(i)];
    for (index_t j = 0; j < sp; ++j) yd[i * sp + j] = xd[i * sp + j] * m;
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, mask = std::move(mask), sp](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      const index_t nc = index_t(mask.size());
      for (index_t i = 0; i < nc; ++i) {
        const S m = mask[size_t(i)];
        for (index_t j = 0; j < sp; ++j)
          g[i * sp + j] += node.grad[i * sp + j] * m;
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Padding and broadcast helpers

// Pad one axis; reflect padding mirrors without repeating the edge sample.
template <typename S>
Tensor<S> pad_axis(const Tensor<S>& x, int axis, index_t left, index_t right,
                   bool reflect) {
  require<ShapeError>(axis >= 0 && axis < x.ndim(), "pad_axis: axis");
  const index_t dim = x.dim(axis);
  if (reflect)
    require<ShapeError>(left < dim && right < dim, "pad_axis: reflect pad too wide");
  index_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  Shape out_shape = x.shape();
  out_shape[size_t(axis)] = dim + left + right;
  const index_t odim = out_shape[size_t(axis)];
  auto out = detail::op_result<S>(out_shape, {x});
  std::vector<index_t> src_of(size_t(odim), -1);
  for (index_t i = 0; i < odim; ++i) {
    const index_t rel = i - left;
    if (rel >= 0 && rel < dim) src_of[size_t(i)] = rel;
    else if (reflect) src_of[size_t(i)] = rel < 0 ? -rel : 2 * dim - 2 - rel;
  }
  const S* xd = x.data();
  S* yd = out.data();
  for (index_t o = 0; o < outer; ++o)
    for (index_t i = 0; i < odim; ++i) {
      S* dst = yd + (o * odim + i) * inner;
      const index_t s = src_of[size_t(i)];
      if (s < 0) std::fill(dst, dst + inner, S(0));
      else std::copy(xd + (o * dim + s) * inner, xd + (o * dim + s + 1) * inner, dst);
    }
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, src_of = std::move(src_of), outer, inner, dim,
                           odim](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      for (index_t o = 0; o < outer; ++o)
        for (index_t i = 0; i < odim; ++i) {
          const index_t s = src_of[size_t(i)];
          if (s < 0) continue;
          const S* gy = node.grad.data() + (o * odim + i) * inner;
          S* gx = g + (o * dim + s) * inner;
          for (index_t j = 0; j < inner; ++j) gx[j] += gy[j];
        }
    };
  }
  return out;
}

// [B, D] -> [B, T, D] with the row repeated T times.
template <typename S>
Tensor<S> repeat_rows(const Tensor<S>& x, index_t t) {
  require<ShapeError>(x.ndim() == 2, "repeat_rows: rank");
  const index_t bsz = x.dim(0), d = x.dim(1);
  auto out = detail::op_result<S>({bsz, t, d}, {x});
  const S* xd = x.data();
  S* yd = out.data();
  for (index_t b = 0; b < bsz; ++b)
    for (index_t i = 0; i < t; ++i)
      std::copy(xd + b * d, xd + (b + 1) * d, yd + (b * t + i) * d);
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, bsz, t, d](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      for (index_t b = 0; b < bsz; ++b)
        for (index_t i = 0; i < t; ++i) {
          const S* gy = node.grad.data() + (b * t + i) * d;
          for (index_t j = 0; j < d; ++j) g[b * d + j] += gy[j];
        }
    };
  }
  return out;
}

}  // namespace lipspeech
