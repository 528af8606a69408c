// Copyright (c) 2026 The kgirnet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <random>
#include <string>

#include "kgirnet/autodiff.hpp"

namespace kgirnet::nn {

using ad::Index;
using ad::Matrix;
using ad::Parameter;
using ad::ParameterSet;

/// Optimizer parameter groups (separate learning rates).
enum Group : int { kEncoderGroup = 0, kDecoderGroup = 1 };

/// Affine map x W + b for row-vector inputs.
struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, Index in, Index out, int group,
         std::mt19937_64& rng) {
    weight = &params.add(name + ".weight", in, out, group);
    bias = &params.add(name + ".bias", 1, out, group);
    ad::xavier_init(*weight, rng);
  }

  template <class Ctx, class V>
  typename Ctx::Value operator()(Ctx& ctx, const V& x) const {
    return ad::add_row(ad::matmul(x, ctx.param(*weight)), ctx.param(*bias));
  }
};

/// Single-layer LSTM with gate order (input, forget, cell, output).
struct Lstm {
  Parameter* input_weight = nullptr;   // in x 4h
  Parameter* hidden_weight = nullptr;  // h x 4h
  Parameter* bias = nullptr;           // 1 x 4h
  Index hidden = 0;

  Lstm() = default;
  Lstm(ParameterSet& params, const std::string& name, Index in, Index h, int group, std::mt19937_64& rng)
      : hidden(h) {
    input_weight = &params.add(name + ".input_weight", in, 4 * h, group);
    hidden_weight = &params.add(name + ".hidden_weight", h, 4 * h, group);
    bias = &params.add(name + ".bias", 1, 4 * h, group);
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));
    ad::uniform_init(*input_weight, rng, scale);
    ad::uniform_init(*hidden_weight, rng, scale);
    bias->value.block(0, h, 1, h).setOnes();  // forget-gate bias
  }

  template <class V>
  struct State {
    V h;
    V c;
  };

  /// One step given the precomputed input projection `xw` (1 x 4h).
  template <class Ctx, class V>
  State<typename Ctx::Value> step(Ctx& ctx, const V& xw, const State<typename Ctx::Value>& prev) const {
    using ad::mul;
    using ad::sigmoid;
    using ad::slice_cols;
    using ad::tanh;
    auto z = ad::add_row(ad::add(xw, ad::matmul(prev.h, ctx.param(*hidden_weight))), ctx.param(*bias));
    auto i = sigmoid(slice_cols(z, 0, hidden));
    auto f = sigmoid(slice_cols(z, hidden, hidden));
    auto g = tanh(slice_cols(z, 2 * hidden, hidden));
    auto o = sigmoid(slice_cols(z, 3 * hidden, hidden));
    auto c = ad::add(mul(f, prev.c), mul(i, g));
    auto h = mul(o, tanh(c));
    return {h, c};
  }

  template <class Ctx>
  State<typename Ctx::Value> zero_state(Ctx& ctx) const {
    return {ctx.constant(Matrix::Zero(1, hidden)), ctx.constant(Matrix::Zero(1, hidden))};
  }
};

}  // namespace kgirnet::nn
