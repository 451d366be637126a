// lipspeech/core/gemm.hpp

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

#include <Eigen/Core>

#include "lipspeech/core/common.hpp"

namespace lipspeech {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<RowMat<S>>;
template <typename S>
using CMapMat = Eigen::Map<const RowMat<S>>;

// C[m,n] (+)= op(A) * op(B), all row-major contiguous. Dimensions are those
// of op(A)=[m,k] and op(B)=[k,n].
template <typename S>
void gemm(const S* a, const S* b, S* c, index_t m, index_t k, index_t n,
          bool trans_a = false, bool trans_b = false, bool accumulate = false) {
  CMapMat<S> ma(a, trans_a ? k : m, trans_a ? m : k);
  CMapMat<S> mb(b, trans_b ? n : k, trans_b ? k : n);
  MapMat<S> mc(c, m, n);
  if (!trans_a && !trans_b) {
    if (accumulate) mc.noalias() += ma * mb;
    else mc.noalias() = ma * mb;
  } else if (trans_a && !trans_b) {
    if (accumulate) mc.noalias() += ma.transpose() * mb;
    else mc.noalias() = ma.transpose() * mb;
  } else if (!trans_a && trans_b) {
    if (accumulate) mc.noalias() += ma * mb.transpose();
    else mc.noalias() = ma * mb.transpose();
  } else {
    if (accumulate) mc.noalias() += ma.transpose() * mb.transpose();
    else mc.noalias() = ma.transpose() * mb.transpose();
  }
}

}  // namespace lipspeech
