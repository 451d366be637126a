// tests/testing/gradcheck.hpp

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

#include <cmath>
#include <functional>
#include <vector>

#include "lipspeech/core/tensor.hpp"

namespace lipspeech::testing {

// Compares reverse-mode gradients against central finite differences.
// loss_fn must rebuild the graph from the referenced parameters each call.
inline double max_rel_grad_err(const std::function<Tensor<double>()>& loss_fn,
                               std::vector<Tensor<double>> params,
                               double h = 1e-4, index_t max_coords_per_param = 400) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  auto loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    p.grad();  // ensure allocated even if untouched
    analytic.push_back(p.grad_vec());
  }
  double worst = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const index_t n = p.numel();
    const index_t step = std::max<index_t>(1, n / max_coords_per_param);
    for (index_t i = 0; i < n; i += step) {
      const double orig = p.data()[i];
      double lp, lm;
      {
        NoGradGuard ng;
        p.data()[i] = orig + h;
        lp = loss_fn().item();
        p.data()[i] = orig - h;
        lm = loss_fn().item();
        p.data()[i] = orig;
      }
      const double numeric = (lp - lm) / (2 * h);
      const double a = analytic[pi][size_t(i)];
      const double denom = std::max({1e-6, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace lipspeech::testing
