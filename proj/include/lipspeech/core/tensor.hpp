// lipspeech/core/tensor.hpp

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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lipspeech/core/common.hpp"
#include "lipspeech/core/gemm.hpp"
#include "lipspeech/core/rng.hpp"

namespace lipspeech {

// Dense n-dimensional tensor with a dynamic reverse-mode autodiff tape.
// Scalar type is a template parameter: training runs in float, numerical
// test oracles instantiate double.

namespace autograd {
inline bool& grad_mode() {
  thread_local bool mode = true;
  return mode;
}
inline std::uint64_t& seq_counter() {
  thread_local std::uint64_t c = 0;
  return c;
}
}  // namespace autograd

struct NoGradGuard {
  NoGradGuard() : prev_(autograd::grad_mode()) { autograd::grad_mode() = false; }
  ~NoGradGuard() { autograd::grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename S>
struct TensorImpl {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorImpl<S>>> parents;
  std::function<void(TensorImpl<S>&)> grad_fn;

  index_t numel() const { return index_t(data.size()); }
  S* ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), S(0));
    return grad.data();
  }
};

template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;
  explicit Tensor(Shape shape, S fill = S(0)) {
    impl_ = std::make_shared<TensorImpl<S>>();
    const index_t n = shape_numel(shape);
    impl_->shape = std::move(shape);
    impl_->data.assign(size_t(n), fill);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, S v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(S v) { return Tensor({1}, v); }

  static Tensor from(Shape shape, std::vector<S> values) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<S>>();
    require<ShapeError>(index_t(values.size()) == shape_numel(shape),
                        "Tensor::from: ", values.size(), " values for shape ",
                        shape_str(shape));
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(values);
    return t;
  }

  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.impl_->data) v = S(rng.normal(0.0, stddev));
    return t;
  }

  static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.impl_->data) v = S(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return int(impl_->shape.size()); }
  index_t dim(int i) const { return impl_->shape[size_t(i)]; }
  index_t numel() const { return impl_->numel(); }

  S* data() { return impl_->data.data(); }
  const S* data() const { return impl_->data.data(); }
  std::vector<S>& vec() { return impl_->data; }
  const std::vector<S>& vec() const { return impl_->data; }

  S item() const {
    require<ShapeError>(numel() == 1, "Tensor::item: numel ", numel());
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  S* grad() { return impl_->ensure_grad(); }
  const std::vector<S>& grad_vec() const { return impl_->grad; }
  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
  }

  // Copy of the values, cut off from the tape.
  Tensor detach() const {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<S>>();
    t.impl_->shape = impl_->shape;
    t.impl_->data = impl_->data;
    return t;
  }

  bool all_finite() const {
    for (S v : impl_->data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  // Reverse pass from a scalar root. Nodes fire in reverse creation order,
  // which is a valid topological order for a tape built forward.
  void backward() {
    require<ShapeError>(numel() == 1, "backward: root must be scalar");
    std::vector<TensorImpl<S>*> nodes;
    std::unordered_set<TensorImpl<S>*> seen;
    std::vector<TensorImpl<S>*> stack{impl_.get()};
    seen.insert(impl_.get());
    while (!stack.empty()) {
      auto* n = stack.back();
      stack.pop_back();
      nodes.push_back(n);
      for (auto& p : n->parents) {
        if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
      }
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const TensorImpl<S>* a, const TensorImpl<S>* b) { return a->seq > b->seq; });
    impl_->ensure_grad()[0] = S(1);
    for (auto* n : nodes) {
      if (n->grad_fn && !n->grad.empty()) n->grad_fn(*n);
    }
  }

  std::shared_ptr<TensorImpl<S>> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<S>> impl_;
};

namespace detail {

// Allocates the output of an op and wires it into the tape when any parent
// participates in autodiff. The caller fills data and assigns grad_fn iff
// the returned tensor requires grad.
template <typename S>
Tensor<S> op_result(Shape shape, std::initializer_list<Tensor<S>> parents) {
  Tensor<S> out(std::move(shape));
  if (!autograd::grad_mode()) return out;
  bool need = false;
  for (const auto& p : parents)
    if (p.requires_grad()) need = true;
  if (!need) return out;
  auto impl = out.impl();
  impl->requires_grad = true;
  impl->seq = ++autograd::seq_counter();
  for (const auto& p : parents) impl->parents.push_back(p.impl());
  return out;
}

template <typename S>
Tensor<S> op_result(Shape shape, const std::vector<Tensor<S>>& parents) {
  Tensor<S> out(std::move(shape));
  if (!autograd::grad_mode()) return out;
  bool need = false;
  for (const auto& p : parents)
    if (p.requires_grad()) need = true;
  if (!need) return out;
  auto impl = out.impl();
  impl->requires_grad = true;
  impl->seq = ++autograd::seq_counter();
  for (const auto& p : parents) impl->parents.push_back(p.impl());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename S, typename F, typename DF>
Tensor<S> unary_elementwise(const Tensor<S>& x, F f, DF dfdx) {
  auto out = detail::op_result<S>(x.shape(), {x});
  const S* xd = x.data();
  S* yd = out.data();
  const index_t n = x.numel();
  for (index_t i = 0; i < n; ++i) yd[i] = f(xd[i]);
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, dfdx](TensorImpl<S>& node) {
      if (!xi->requires_grad) return;
      S* g = xi->ensure_grad();
      const index_t n = node.numel();
      for (index_t i = 0; i < n; ++i)
        g[i] += node.grad[i] * dfdx(xi->data[i], node.data[i]);
    };
  }
  return out;
}

template <typename S>
Tensor<S> neg(const Tensor<S>& x) {
  return unary_elementwise(x, [](S v) { return -v; }, [](S, S) { return S(-1); });
}

template <typename S>
Tensor<S> abs_op(const Tensor<S>& x) {
  return unary_elementwise(
      x, [](S v) { return std::abs(v); },
      [](S xv, S) { return xv > S(0) ? S(1) : (xv < S(0) ? S(-1) : S(0)); });
}

template <typename S>
Tensor<S> square(const Tensor<S>& x) {
  return unary_elementwise(x, [](S v) { return v * v; },
                           [](S xv, S) { return S(2) * xv; });
}

template <typename S>
Tensor<S> sqrt_op(const Tensor<S>& x) {
  return unary_elementwise(x, [](S v) { return std::sqrt(v); },
                           [](S, S yv) { return S(0.5) / yv; });
}

template <typename S>
Tensor<S> exp_op(const Tensor<S>& x) {
  return unary_elementwise(x, [](S v) { return std::exp(v); },
                           [](S, S yv) { return yv; });
}

template <typename S>
Tensor<S> log_op(const Tensor<S>& x) {
  return unary_elementwise(x, [](S v) { return std::log(v); },
                           [](S xv, S) { return S(1) / xv; });
}

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& x) {
  return unary_elementwise(x, [](S v) { return std::tanh(v); },
                           [](S, S yv) { return S(1) - yv * yv; });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  return unary_elementwise(
      x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
      [](S, S yv) { return yv * (S(1) - yv); });
}

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& x, S slope) {
  return unary_elementwise(
      x, [slope](S v) { return v >= S(0) ? v : slope * v; },
      [slope](S xv, S) { return xv >= S(0) ? S(1) : slope; });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  return leaky_relu(x, S(0));
}

template <typename S>
Tensor<S> mul_scalar(const Tensor<S>& x, S a) {
  return unary_elementwise(x, [a](S v) { return a * v; }, [a](S, S) { return a; });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& x, S a) {
  return unary_elementwise(x, [a](S v) { return v + a; }, [](S, S) { return S(1); });
}

template <typename S, typename F, typename DFX, typename DFY>
Tensor<S> binary_elementwise(const Tensor<S>& x, const Tensor<S>& y, F f, DFX dfdx,
                             DFY dfdy) {
  require<ShapeError>(x.shape() == y.shape(), "binary op: shape mismatch ",
                      shape_str(x.shape()), " vs ", shape_str(y.shape()));
  auto out = detail::op_result<S>(x.shape(), {x, y});
  const S* xd = x.data();
  const S* yd = y.data();
  S* zd = out.data();
  const index_t n = x.numel();
  for (index_t i = 0; i < n; ++i) zd[i] = f(xd[i], yd[i]);
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto yi = y.impl();
    out.impl()->grad_fn = [xi, yi, dfdx, dfdy](TensorImpl<S>& node) {
      const index_t n = node.numel();
      if (xi->requires_grad) {
        S* g = xi->ensure_grad();
        for (index_t i = 0; i < n; ++i)
          g[i] += node.grad[i] * dfdx(xi->data[i], yi->data[i]);
      }
      if (yi->requires_grad) {
        S* g = yi->ensure_grad();
        for (index_t i = 0; i < n; ++i)
          g[i] += node.grad[i] * dfdy(xi->data[i], yi->data[i]);
      }
    };
  }
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& x, const Tensor<S>& y) {
  return binary_elementwise(x, y, [](S a, S b) { return a + b; },
                            [](S, S) { return S(1); }, [](S, S) { return S(1); });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& x, const Tensor<S>& y) {
  return binary_elementwise(x, y, [](S a, S b) { return a - b; },
                            [](S, S) { return S(1); }, [](S, S) { return S(-1); });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& x, const Tensor<S>& y) {
  return binary_elementwise(x, y, [](S a, S b) { return a * b; },
                            [](S, S b) { return b; }, [](S a, S) { return a; });
}

template <typename S>
Tensor<S> div_op(const Tensor<S>& x, const Tensor<S>& y) {
  return binary_elementwise(x, y, [](S a, S b) { return a / b; },
                            [](S, S b) { return S(1) / b; },
                            [](S a, S b) { return -a / (b * b); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  auto out = detail::op_result<S>({1}, {x});
  S acc = S(0);
  const S* xd = x.data();
  const index_t n = x.numel();
  for (index_t i = 0; i < n; ++i) acc += xd[i];
  out.data()[0] = acc;
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      const S gy = node.grad[0];
      for (size_t i = 0; i < xi->data.size(); ++i) g[i] += gy;
    };
  }
  return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
  return mul_scalar(sum(x), S(1) / S(x.numel()));
}

// ---------------------------------------------------------------------------
// Shape ops

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
  index_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < new_shape.size(); ++i) {
    if (new_shape[i] == -1) {
      require<ShapeError>(infer < 0, "reshape: more than one -1");
      infer = int(i);
    } else {
      known *= new_shape[i];
    }
  }
  if (infer >= 0) new_shape[size_t(infer)] = x.numel() / known;
  require<ShapeError>(shape_numel(new_shape) == x.numel(), "reshape: ",
                      shape_str(x.shape()), " -> ", shape_str(new_shape));
  auto out = detail::op_result<S>(new_shape, {x});
  std::copy(x.data(), x.data() + x.numel(), out.data());
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      for (size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    };
  }
  return out;
}

namespace detail {
inline std::vector<index_t> row_major_strides(const Shape& s) {
  std::vector<index_t> st(s.size(), 1);
  for (int i = int(s.size()) - 2; i >= 0; --i) st[size_t(i)] = st[size_t(i) + 1] * s[size_t(i) + 1];
  return st;
}
}  // namespace detail

template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<int>& perm) {
  const int nd = x.ndim();
  require<ShapeError>(int(perm.size()) == nd, "permute: rank mismatch");
  Shape out_shape(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) out_shape[size_t(i)] = x.dim(perm[size_t(i)]);
  auto out = detail::op_result<S>(out_shape, {x});
  auto in_strides = detail::row_major_strides(x.shape());
  std::vector<index_t> src_stride(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) src_stride[size_t(i)] = in_strides[size_t(perm[size_t(i)])];
  const S* xd = x.data();
  S* yd = out.data();
  const index_t n = x.numel();
  std::vector<index_t> idx(size_t(nd), 0);
  index_t src = 0;
  for (index_t flat = 0; flat < n; ++flat) {
    yd[flat] = xd[src];
    for (int d = nd - 1; d >= 0; --d) {
      idx[size_t(d)]++;
      src += src_stride[size_t(d)];
      if (idx[size_t(d)] < out_shape[size_t(d)]) break;
      src -= src_stride[size_t(d)] * out_shape[size_t(d)];
      idx[size_t(d)] = 0;
    }
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto strides = src_stride;
    auto oshape = out_shape;
    out.impl()->grad_fn = [xi, strides, oshape](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      const int nd = int(oshape.size());
      std::vector<index_t> idx(size_t(nd), 0);
      index_t src = 0;
      const index_t n = node.numel();
      for (index_t flat = 0; flat < n; ++flat) {
        g[src] += node.grad[flat];
        for (int d = nd - 1; d >= 0; --d) {
          idx[size_t(d)]++;
          src += strides[size_t(d)];
          if (idx[size_t(d)] < oshape[size_t(d)]) break;
          src -= strides[size_t(d)] * oshape[size_t(d)];
          idx[size_t(d)] = 0;
        }
      }
    };
  }
  return out;
}

// Contiguous slice along one axis.
template <typename S>
Tensor<S> slice(const Tensor<S>& x, int axis, index_t start, index_t len) {
  require<ShapeError>(axis >= 0 && axis < x.ndim(), "slice: bad axis");
  require<ShapeError>(start >= 0 && start + len <= x.dim(axis), "slice: range [",
                      start, ",", start + len, ") out of dim ", x.dim(axis));
  Shape out_shape = x.shape();
  out_shape[size_t(axis)] = len;
  index_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const index_t dim = x.dim(axis);
  auto out = detail::op_result<S>(out_shape, {x});
  const S* xd = x.data();
  S* yd = out.data();
  for (index_t o = 0; o < outer; ++o) {
    std::copy(xd + (o * dim + start) * inner, xd + (o * dim + start + len) * inner,
              yd + o * len * inner);
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, outer, inner, dim, start, len](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      for (index_t o = 0; o < outer; ++o) {
        const S* gy = node.grad.data() + o * len * inner;
        S* gx = g + (o * dim + start) * inner;
        for (index_t i = 0; i < len * inner; ++i) gx[i] += gy[i];
      }
    };
  }
  return out;
}

template <typename S>
Tensor<S> cat(const std::vector<Tensor<S>>& xs, int axis) {
  require<ShapeError>(!xs.empty(), "cat: empty input");
  Shape out_shape = xs[0].shape();
  index_t total = 0;
  for (const auto& t : xs) {
    require<ShapeError>(t.ndim() == int(out_shape.size()), "cat: rank mismatch");
    for (int d = 0; d < t.ndim(); ++d)
      if (d != axis)
        require<ShapeError>(t.dim(d) == out_shape[size_t(d)], "cat: dim mismatch");
    total += t.dim(axis);
  }
  out_shape[size_t(axis)] = total;
  auto out = detail::op_result<S>(out_shape, xs);
  index_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[size_t(i)];
  for (int i = axis + 1; i < int(out_shape.size()); ++i) inner *= out_shape[size_t(i)];
  S* yd = out.data();
  index_t off = 0;
  std::vector<index_t> lens;
  for (const auto& t : xs) {
    const index_t len = t.dim(axis);
    lens.push_back(len);
    const S* xd = t.data();
    for (index_t o = 0; o < outer; ++o) {
      std::copy(xd + o * len * inner, xd + (o + 1) * len * inner,
                yd + (o * total + off) * inner);
    }
    off += len;
  }
  if (out.requires_grad()) {
    std::vector<std::shared_ptr<TensorImpl<S>>> impls;
    for (const auto& t : xs) impls.push_back(t.impl());
    out.impl()->grad_fn = [impls, lens, outer, inner, total](TensorImpl<S>& node) {
      index_t off = 0;
      for (size_t k = 0; k < impls.size(); ++k) {
        const index_t len = lens[k];
        if (impls[k]->requires_grad) {
          S* g = impls[k]->ensure_grad();
          for (index_t o = 0; o < outer; ++o) {
            const S* gy = node.grad.data() + (o * total + off) * inner;
            S* gx = g + o * len * inner;
            for (index_t i = 0; i < len * inner; ++i) gx[i] += gy[i];
          }
        }
        off += len;
      }
    };
  }
  return out;
}

template <typename S>
Tensor<S> flip(const Tensor<S>& x, int axis) {
  index_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const index_t dim = x.dim(axis);
  auto out = detail::op_result<S>(x.shape(), {x});
  const S* xd = x.data();
  S* yd = out.data();
  for (index_t o = 0; o < outer; ++o)
    for (index_t d = 0; d < dim; ++d)
      std::copy(xd + (o * dim + d) * inner, xd + (o * dim + d + 1) * inner,
                yd + (o * dim + (dim - 1 - d)) * inner);
  if (out.requires_grad()) {
    auto xi = x.impl();
    out.impl()->grad_fn = [xi, outer, inner, dim](TensorImpl<S>& node) {
      S* g = xi->ensure_grad();
      for (index_t o = 0; o < outer; ++o)
        for (index_t d = 0; d < dim; ++d) {
          const S* gy = node.grad.data() + (o * dim + (dim - 1 - d)) * inner;
          S* gx = g + (o * dim + d) * inner;
          for (index_t i = 0; i < inner; ++i) gx[i] += gy[i];
        }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  require<ShapeError>(a.ndim() == 2 && b.ndim() == 2, "matmul: rank must be 2");
  require<ShapeError>(a.dim(1) == b.dim(0), "matmul: inner dims ", a.dim(1), " vs ",
                      b.dim(0));
  const index_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = detail::op_result<S>({m, n}, {a, b});
  gemm(a.data(), b.data(), out.data(), m, k, n);
  if (out.requires_grad()) {
    auto ai = a.impl();
    auto bi = b.impl();
    out.impl()->grad_fn = [ai, bi, m, k, n](TensorImpl<S>& node) {
      if (ai->requires_grad)
        gemm(node.grad.data(), bi->data.data(), ai->ensure_grad(), m, n, k, false,
             true, true);
      if (bi->requires_grad)
        gemm(ai->data.data(), node.grad.data(), bi->ensure_grad(), k, m, n, true,
             false, true);
    };
  }
  return out;
}

// y = x * w^T + b with x [n, in], w [out, in], b [out] (optional).
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  require<ShapeError>(x.ndim() == 2 && w.ndim() == 2, "linear: rank must be 2");
  require<ShapeError>(x.dim(1) == w.dim(1), "linear: in features ", x.dim(1), " vs ",
                      w.dim(1));
  const index_t n = x.dim(0), in = x.dim(1), out_f = w.dim(0);
  const bool has_b = b.defined();
  if (has_b)
    require<ShapeError>(b.numel() == out_f, "linear: bias size ", b.numel());
  auto out = has_b ? detail::op_result<S>({n, out_f}, {x, w, b})
                   : detail::op_result<S>({n, out_f}, {x, w});
  gemm(x.data(), w.data(), out.data(), n, in, out_f, false, true);
  if (has_b) {
    S* yd = out.data();
    const S* bd = b.data();
    for (index_t i = 0; i < n; ++i)
      for (index_t j = 0; j < out_f; ++j) yd[i * out_f + j] += bd[j];
  }
  if (out.requires_grad()) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto bi = has_b ? b.impl() : nullptr;
    out.impl()->grad_fn = [xi, wi, bi, n, in, out_f](TensorImpl<S>& node) {
      if (xi->requires_grad)
        gemm(node.grad.data(), wi->data.data(), xi->ensure_grad(), n, out_f, in,
             false, false, true);
      if (wi->requires_grad)
        gemm(node.grad.data(), xi->data.data(), wi->ensure_grad(), out_f, n, in,
             true, false, true);
      if (bi && bi->requires_grad) {
        S* g = bi->ensure_grad();
        for (index_t i = 0; i < n; ++i)
          for (index_t j = 0; j < out_f; ++j) g[j] += node.grad[i * out_f + j];
      }
    };
  }
  return out;
}

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w) {
  return linear(x, w, Tensor<S>());
}

// ---------------------------------------------------------------------------
// Classification loss

// Mean cross entropy over rows of logits [n, c] against integer labels.
template <typename S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits,
                                const std::vector<index_t>& labels) {
  require<ShapeError>(logits.ndim() == 2, "softmax_cross_entropy: rank must be 2");
  const index_t n = logits.dim(0), c = logits.dim(1);
  require<ShapeError>(index_t(labels.size()) == n, "softmax_cross_entropy: labels");
  auto out = detail::op_result<S>({1}, {logits});
  std::vector<S> probs(size_t(n * c));
  const S* ld = logits.data();
  double loss = 0;
  for (index_t i = 0; i < n; ++i) {
    const S* row = ld + i * c;
    S mx = row[0];
    for (index_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0;
    for (index_t j = 0; j < c; ++j) z += std::exp(double(row[j] - mx));
    for (index_t j = 0; j < c; ++j)
      probs[size_t(i * c + j)] = S(std::exp(double(row[j] - mx)) / z);
    require<ShapeError>(labels[size_t(i)] >= 0 && labels[size_t(i)] < c,
                        "softmax_cross_entropy: label out of range");
    loss -= std::log(std::max(1e-300, double(probs[size_t(i * c + labels[size_t(i)])])));
  }
  out.data()[0] = S(loss / double(n));
  if (out.requires_grad()) {
    auto li = logits.impl();
    out.impl()->grad_fn = [li, probs = std::move(probs), labels, n, c](TensorImpl<S>& node) {
      S* g = li->ensure_grad();
      const S gy = node.grad[0] / S(n);
      for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < c; ++j) {
          S p = probs[size_t(i * c + j)];
          if (j == labels[size_t(i)]) p -= S(1);
          g[i * c + j] += gy * p;
        }
      }
    };
  }
  return out;
}

}  // namespace lipspeech
