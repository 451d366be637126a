// lipspeech/nn/module.hpp

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

#include <string>
#include <utility>
#include <vector>

#include "lipspeech/core/nn_ops.hpp"
#include "lipspeech/core/tensor.hpp"

namespace lipspeech {

// Base class providing a named parameter/buffer tree for optimizers and
// checkpoints. Registration happens in constructors; names are dotted paths.
template <typename S>
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  std::vector<std::pair<std::string, Tensor<S>*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<S>*>> out;
    collect_params("", out);
    return out;
  }

  std::vector<std::pair<std::string, std::vector<S>*>> named_buffers() {
    std::vector<std::pair<std::string, std::vector<S>*>> out;
    collect_buffers("", out);
    return out;
  }

  std::vector<Tensor<S>*> parameters() {
    std::vector<Tensor<S>*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  void set_training(bool mode) {
    training_ = mode;
    for (auto& [name, child] : children_) child->set_training(mode);
  }
  bool is_training() const { return training_; }

  void set_requires_grad(bool v) {
    for (auto* p : parameters()) p->set_requires_grad(v);
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  index_t num_parameters() {
    index_t n = 0;
    for (auto* p : parameters()) n += p->numel();
    return n;
  }

 protected:
  void register_parameter(const std::string& name, Tensor<S>& t) {
    t.set_requires_grad(true);
    params_.emplace_back(name, &t);
  }
  void register_buffer(const std::string& name, std::vector<S>& b) {
    buffers_.emplace_back(name, &b);
  }
  void register_module(const std::string& name, Module<S>& m) {
    children_.emplace_back(name, &m);
  }

  bool training_ = true;

 private:
  void collect_params(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor<S>*>>& out) {
    for (auto& [name, t] : params_) out.emplace_back(prefix + name, t);
    for (auto& [name, child] : children_)
      child->collect_params(prefix + name + ".", out);
  }
  void collect_buffers(const std::string& prefix,
                       std::vector<std::pair<std::string, std::vector<S>*>>& out) {
    for (auto& [name, b] : buffers_) out.emplace_back(prefix + name, b);
    for (auto& [name, child] : children_)
      child->collect_buffers(prefix + name + ".", out);
  }

  std::vector<std::pair<std::string, Tensor<S>*>> params_;
  std::vector<std::pair<std::string, std::vector<S>*>> buffers_;
  std::vector<std::pair<std::string, Module<S>*>> children_;
};

namespace init {
// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for conv and
// linear layers.
template <typename S>
void fan_in_uniform(Tensor<S>& w, index_t fan_in, Rng& rng) {
  const double k = 1.0 / std::sqrt(double(fan_in));
  for (auto& v : w.vec()) v = S(rng.uniform(-k, k));
}
}  // namespace init

template <typename S>
class Linear : public Module<S> {
 public:
  Linear(index_t in, index_t out, Rng& rng, bool bias = true)
      : w(Shape{out, in}), b(bias ? Shape{out} : Shape{0}) {
    init::fan_in_uniform(w, in, rng);
    this->register_parameter("weight", w);
    if (bias) {
      init::fan_in_uniform(b, in, rng);
      this->register_parameter("bias", b);
    }
  }
  Tensor<S> forward(const Tensor<S>& x) {
    return b.numel() ? linear(x, w, b) : linear(x, w);
  }
  Tensor<S> w, b;
};

template <typename S>
class Conv1d : public Module<S> {
 public:
  Conv1d(index_t in, index_t out, index_t kernel, Rng& rng, index_t stride = 1,
         index_t pad = 0, index_t dilation = 1, index_t groups = 1)
      : w(Shape{out, in / groups, kernel}), b(Shape{out}), stride_(stride),
        pad_(pad), dilation_(dilation), groups_(groups) {
    init::fan_in_uniform(w, (in / groups) * kernel, rng);
    init::fan_in_uniform(b, (in / groups) * kernel, rng);
    this->register_parameter("weight", w);
    this->register_parameter("bias", b);
  }
  Tensor<S> forward(const Tensor<S>& x) {
    return conv1d(x, w, b, stride_, pad_, dilation_, groups_);
  }
  Tensor<S> w, b;

 private:
  index_t stride_, pad_, dilation_, groups_;
};

template <typename S>
class ConvTranspose1d : public Module<S> {
 public:
  ConvTranspose1d(index_t in, index_t out, index_t kernel, index_t stride, Rng& rng)
      : w(Shape{in, out, kernel}), b(Shape{out}), stride_(stride) {
    init::fan_in_uniform(w, in * kernel, rng);
    init::fan_in_uniform(b, in * kernel, rng);
    this->register_parameter("weight", w);
    this->register_parameter("bias", b);
  }
  Tensor<S> forward(const Tensor<S>& x) { return conv_transpose1d(x, w, b, stride_); }
  Tensor<S> w, b;

 private:
  index_t stride_;
};

template <typename S>
class Conv2d : public Module<S> {
 public:
  Conv2d(index_t in, index_t out, std::array<index_t, 2> kernel, Rng& rng,
         std::array<index_t, 2> stride = {1, 1}, std::array<index_t, 2> pad = {0, 0})
      : w(Shape{out, in, kernel[0], kernel[1]}), b(Shape{out}), stride_(stride),
        pad_(pad) {
    init::fan_in_uniform(w, in * kernel[0] * kernel[1], rng);
    init::fan_in_uniform(b, in * kernel[0] * kernel[1], rng);
    this->register_parameter("weight", w);
    this->register_parameter("bias", b);
  }
  Tensor<S> forward(const Tensor<S>& x) { return conv2d(x, w, b, stride_, pad_); }
  Tensor<S> w, b;

 private:
  std::array<index_t, 2> stride_, pad_;
};

template <typename S>
class Conv3d : public Module<S> {
 public:
  Conv3d(index_t in, index_t out, std::array<index_t, 3> kernel, Rng& rng,
         std::array<index_t, 3> stride = {1, 1, 1},
         std::array<index_t, 3> pad = {0, 0, 0})
      : w(Shape{out, in, kernel[0], kernel[1], kernel[2]}), b(Shape{out}),
        stride_(stride), pad_(pad) {
    init::fan_in_uniform(w, in * kernel[0] * kernel[1] * kernel[2], rng);
    init::fan_in_uniform(b, in * kernel[0] * kernel[1] * kernel[2], rng);
    this->register_parameter("weight", w);
    this->register_parameter("bias", b);
  }
  Tensor<S> forward(const Tensor<S>& x) { return conv3d(x, w, b, stride_, pad_); }
  Tensor<S> w, b;

 private:
  std::array<index_t, 3> stride_, pad_;
};

template <typename S>
class BatchNorm : public Module<S> {
 public:
  explicit BatchNorm(index_t channels, double momentum = 0.1, double eps = 1e-5)
      : gamma(Shape{channels}, S(1)), beta(Shape{channels}, S(0)),
        running_mean(size_t(channels), S(0)), running_var(size_t(channels), S(1)),
        momentum_(momentum), eps_(eps) {
    this->register_parameter("weight", gamma);
    this->register_parameter("bias", beta);
    this->register_buffer("running_mean", running_mean);
    this->register_buffer("running_var", running_var);
  }
  Tensor<S> forward(const Tensor<S>& x) {
    return batch_norm(x, gamma, beta, &running_mean, &running_var, this->training_,
                      momentum_, eps_);
  }
  Tensor<S> gamma, beta;
  std::vector<S> running_mean, running_var;

 private:
  double momentum_, eps_;
};

// Two-layer-capable bidirectional GRU. Gate order follows the usual
// (reset, update, candidate) convention.
template <typename S>
class Gru : public Module<S> {
 public:
  Gru(index_t input, index_t hidden, index_t layers, bool bidirectional, Rng& rng)
      : input_(input), hidden_(hidden), layers_(layers),
        dirs_(bidirectional ? 2 : 1) {
    for (index_t l = 0; l < layers_; ++l) {
      const index_t in = l == 0 ? input_ : hidden_ * dirs_;
      for (index_t d = 0; d < dirs_; ++d) {
        auto& p = cells_.emplace_back();
        p.w_ih = Tensor<S>(Shape{3 * hidden_, in});
        p.w_hh = Tensor<S>(Shape{3 * hidden_, hidden_});
        p.b_ih = Tensor<S>(Shape{3 * hidden_});
        p.b_hh = Tensor<S>(Shape{3 * hidden_});
        init::fan_in_uniform(p.w_ih, hidden_, rng);
        init::fan_in_uniform(p.w_hh, hidden_, rng);
        init::fan_in_uniform(p.b_ih, hidden_, rng);
        init::fan_in_uniform(p.b_hh, hidden_, rng);
      }
    }
    for (size_t i = 0; i < cells_.size(); ++i) {
      const std::string base =
          "l" + std::to_string(i / size_t(dirs_)) +
          (dirs_ == 2 ? (i % 2 ? ".bwd" : ".fwd") : std::string(".fwd"));
      this->register_parameter(base + ".w_ih", cells_[i].w_ih);
      this->register_parameter(base + ".w_hh", cells_[i].w_hh);
      this->register_parameter(base + ".b_ih", cells_[i].b_ih);
      this->register_parameter(base + ".b_hh", cells_[i].b_hh);
    }
  }

  // x: [B, T, input] -> [B, T, hidden * dirs]
  Tensor<S> forward(const Tensor<S>& x) {
    require<ShapeError>(x.ndim() == 3 && x.dim(2) == input_, "Gru: input shape ",
                        shape_str(x.shape()));
    Tensor<S> cur = x;
    for (index_t l = 0; l < layers_; ++l) {
      std::vector<Tensor<S>> dir_out;
      for (index_t d = 0; d < dirs_; ++d) {
        auto& cell = cells_[size_t(l * dirs_ + d)];
        Tensor<S> seq = d == 0 ? cur : flip(cur, 1);
        auto out = run_direction(seq, cell);
        dir_out.push_back(d == 0 ? out : flip(out, 1));
      }
      cur = dirs_ == 2 ? cat(dir_out, 2) : dir_out[0];
    }
    return cur;
  }

  // Hidden state of the last time step of the last layer (forward direction
  // only); used by encoders that summarize a sequence.
  Tensor<S> forward_last(const Tensor<S>& x) {
    auto out = forward(x);
    auto last = slice(out, 1, out.dim(1) - 1, 1);
    return reshape(last, {out.dim(0), out.dim(2)});
  }

 private:
  struct Cell {
    Tensor<S> w_ih, w_hh, b_ih, b_hh;
  };

  Tensor<S> run_direction(const Tensor<S>& x, Cell& cell) {
    const index_t bsz = x.dim(0), t = x.dim(1), in = x.dim(2);
    const index_t h = hidden_;
    auto gx_all = linear(reshape(x, {bsz * t, in}), cell.w_ih, cell.b_ih);
    gx_all = reshape(gx_all, {bsz, t, 3 * h});
    Tensor<S> hstate = Tensor<S>::zeros({bsz, h});
    std::vector<Tensor<S>> outs;
    outs.reserve(size_t(t));
    for (index_t step = 0; step < t; ++step) {
      auto gx = reshape(slice(gx_all, 1, step, 1), {bsz, 3 * h});
      auto gh = linear(hstate, cell.w_hh, cell.b_hh);
      auto r = sigmoid(add(slice(gx, 1, 0, h), slice(gh, 1, 0, h)));
      auto z = sigmoid(add(slice(gx, 1, h, h), slice(gh, 1, h, h)));
      auto n = tanh_op(add(slice(gx, 1, 2 * h, h), mul(r, slice(gh, 1, 2 * h, h))));
      // h' = n + z * (h - n)
      hstate = add(n, mul(z, sub(hstate, n)));
      outs.push_back(reshape(hstate, {bsz, 1, h}));
    }
    return cat(outs, 1);
  }

  index_t input_, hidden_, layers_, dirs_;
  std::vector<Cell> cells_;
};

}  // namespace lipspeech
