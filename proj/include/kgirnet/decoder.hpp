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

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "kgirnet/autodiff.hpp"
#include "kgirnet/dataset.hpp"
#include "kgirnet/encoder.hpp"
#include "kgirnet/error.hpp"
#include "kgirnet/nn.hpp"

namespace kgirnet {

/// Recurrent state of the response decoder: LSTM pair plus the token that
/// will be fed at the next step.
template <class V>
struct DecoderState {
  nn::Lstm::State<V> lstm;
  int prev_token = Vocabulary::sos_id;
};

template <class V>
struct Attention {
  V weights;  // 1 x N
  V context;  // 1 x h
};

/// Encoder states plus their attention key projection, computed once per input.
template <class V>
struct DecoderMemory {
  V states;  // N x h
  V keys;    // N x a
};

template <class V>
struct StepOutput {
  V logits;         // 1 x v_od
  V probabilities;  // softmax(logits)
  DecoderState<V> state;
};

/// LSTM decoder with concat attention over the encoder states and an output
/// projection over the full vocabulary (words + relation tokens).
class Decoder {
 public:
  Decoder() = default;
  Decoder(ad::ParameterSet& params, int vocab_size, int embedding_dim, int hidden, double dropout,
          std::mt19937_64& rng)
      : hidden_(hidden), dropout_(dropout) {
    const int g = nn::kDecoderGroup;
    embedding_ = &params.add("decoder.embedding", vocab_size, embedding_dim, g);
    ad::uniform_init(*embedding_, rng, 0.1);
    lstm_ = nn::Lstm(params, "decoder.lstm", embedding_dim, hidden, g, rng);
    attn_encoder_ = &params.add("decoder.attn.encoder_weight", hidden, hidden, g);
    attn_decoder_ = &params.add("decoder.attn.decoder_weight", hidden, hidden, g);
    attn_score_ = &params.add("decoder.attn.score_weight", hidden, 1, g);
    ad::xavier_init(*attn_encoder_, rng);
    ad::xavier_init(*attn_decoder_, rng);
    ad::xavier_init(*attn_score_, rng);
    output_ = nn::Linear(params, "decoder.output", 2 * static_cast<ad::Index>(hidden), vocab_size, g, rng);
  }

  int hidden() const { return hidden_; }
  const nn::Linear& output_layer() const { return output_; }

  template <class Ctx>
  DecoderMemory<typename Ctx::Value> memory(Ctx& ctx, const typename Ctx::Value& encoder_states) const {
    return {encoder_states, ad::matmul(encoder_states, ctx.param(*attn_encoder_))};
  }

  template <class Ctx>
  DecoderState<typename Ctx::Value> initial_state(const EncoderOutput<typename Ctx::Value>& enc) const {
    return {enc.final_state, Vocabulary::sos_id};
  }

  /// alpha = softmax(w_s tanh(W_c [h_i; h_t])) over encoder rows i, context = alpha H.
  template <class Ctx>
  Attention<typename Ctx::Value> attend(Ctx& ctx, const DecoderMemory<typename Ctx::Value>& mem,
                                        const typename Ctx::Value& h) const {
    auto pre = ad::tanh(ad::add_row(mem.keys, ad::matmul(h, ctx.param(*attn_decoder_))));
    auto weights = ad::softmax_rows(ad::transpose(ad::matmul(pre, ctx.param(*attn_score_))));
    auto context = ad::matmul(weights, mem.states);
    return {weights, context};
  }

  template <class Ctx>
  Attention<typename Ctx::Value> attend(Ctx& ctx, const typename Ctx::Value& encoder_states,
                                        const typename Ctx::Value& h) const {
    require(ad::value_of(encoder_states).rows() >= 1, "attend: no encoder states");
    return attend(ctx, memory(ctx, encoder_states), h);
  }

  /// Feed `state.prev_token`, advance the LSTM, attend, project to v_od.
  template <class Ctx>
  StepOutput<typename Ctx::Value> step(Ctx& ctx, const DecoderState<typename Ctx::Value>& state,
                                       const DecoderMemory<typename Ctx::Value>& mem) const {
    auto x = ctx.dropout(ad::gather_rows(ctx.param(*embedding_), {state.prev_token}), dropout_);
    auto lstm = lstm_.step(ctx, ad::matmul(x, ctx.param(*lstm_.input_weight)), state.lstm);
    auto attn = attend(ctx, mem, lstm.h);
    auto features = ctx.dropout(ad::concat_cols(lstm.h, attn.context), dropout_);
    auto logits = output_(ctx, features);
    auto probs = ad::softmax_rows(logits);
    return {logits, probs, DecoderState<typename Ctx::Value>{lstm, state.prev_token}};
  }

 private:
  int hidden_ = 0;
  double dropout_ = 0.0;
  ad::Parameter* embedding_ = nullptr;
  nn::Lstm lstm_;
  ad::Parameter* attn_encoder_ = nullptr;
  ad::Parameter* attn_decoder_ = nullptr;
  ad::Parameter* attn_score_ = nullptr;
  nn::Linear output_;
};

/// Hadamard product of the decoder distribution and the vocabulary gate,
/// renormalized. If the product vanishes, relation tokens are dropped from
/// the decoder distribution instead.
inline Eigen::VectorXd fuse(const Eigen::VectorXd& o_dec, const Eigen::VectorXd& gate,
                            std::size_t relation_offset) {
  if (o_dec.size() != gate.size())
    throw ContractError("fuse: distribution and gate lengths differ");
  Eigen::VectorXd out = o_dec.cwiseProduct(gate);
  const double total = out.sum();
  if (total > 0.0) return out / total;
  spdlog::warn("fuse: gate annihilated the distribution; falling back to word tokens");
  out = o_dec;
  out.tail(out.size() - static_cast<Eigen::Index>(relation_offset)).setZero();
  const double words = out.sum();
  return words > 0.0 ? Eigen::VectorXd(out / words) : out;
}

// ---------------------------------------------------------------------------
// Beam search

template <class State>
struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  State state{};
  bool finished = false;
};

template <class State>
struct BeamResult {
  Hypothesis<State> best;
  bool unfinished = false;  // no hypothesis reached <EOS> within max_len
};

namespace detail {
/// Higher score first; equal scores prefer the lexicographically smaller sequence.
inline bool better(double sa, const std::vector<int>& ta, double sb, const std::vector<int>& tb) {
  if (sa != sb) return sa > sb;
  return ta < tb;
}
}  // namespace detail

/**
 * Breadth-limited search over a step model.
 *
 * `Model` provides:
 *   State start() const;
 *   std::pair<Eigen::VectorXd, Carry> step(const State&) const;  // next-token distribution
 *   State advance(const Carry&, int token) const;
 *
 * Zero-probability tokens are never expanded. Hypotheses ending in `eos` are
 * retired once selected into the beam; the best retired one is returned.
 */
template <class Model>
auto beam_search(const Model& model, int beam_width, int max_len, int eos) {
  require(beam_width >= 1, "beam_search: beam_width must be >= 1");
  require(max_len >= 1, "beam_search: max_len must be >= 1");
  using State = decltype(model.start());
  using Hyp = Hypothesis<State>;

  std::vector<Hyp> alive{Hyp{{}, 0.0, model.start(), false}};
  std::vector<Hyp> finished;

  struct Candidate {
    std::size_t parent;
    int token;
    double score;
    std::vector<int> tokens;
  };

  for (int t = 0; t < max_len && !alive.empty(); ++t) {
    using Carry = typename decltype(model.step(std::declval<const State&>()))::second_type;
    std::vector<Carry> carries;
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      auto [probs, carry] = model.step(alive[i].state);
      carries.push_back(std::move(carry));
      for (Eigen::Index y = 0; y < probs.size(); ++y) {
        if (!(probs(y) > 0.0)) continue;
        std::vector<int> tokens = alive[i].tokens;
        tokens.push_back(static_cast<int>(y));
        candidates.push_back({i, static_cast<int>(y), alive[i].log_prob + std::log(probs(y)), std::move(tokens)});
      }
    }
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(beam_width));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        return detail::better(a.score, a.tokens, b.score, b.tokens);
                      });
    std::vector<Hyp> next;
    for (std::size_t c = 0; c < keep; ++c) {
      Candidate& cand = candidates[c];
      if (cand.token == eos) {
        finished.push_back(Hyp{std::move(cand.tokens), cand.score, State{}, true});
      } else {
        next.push_back(Hyp{std::move(cand.tokens), cand.score, model.advance(carries[cand.parent], cand.token), false});
      }
    }
    alive = std::move(next);

    // Extensions can only lose probability mass.
    if (!finished.empty() && !alive.empty()) {
      double best_finished = finished.front().log_prob;
      for (const auto& h : finished) best_finished = std::max(best_finished, h.log_prob);
      double best_alive = alive.front().log_prob;
      for (const auto& h : alive) best_alive = std::max(best_alive, h.log_prob);
      if (best_finished > best_alive) break;
    }
  }

  auto pick = [](std::vector<Hyp>& pool) {
    return *std::min_element(pool.begin(), pool.end(), [](const Hyp& a, const Hyp& b) {
      return detail::better(a.log_prob, a.tokens, b.log_prob, b.tokens);
    });
  };
  BeamResult<State> result;
  if (!finished.empty()) {
    result.best = pick(finished);
  } else {
    require(!alive.empty(), "beam_search: no expandable hypothesis");
    result.best = pick(alive);
    result.unfinished = true;
    spdlog::debug("beam_search: no hypothesis finished within {} steps", max_len);
  }
  return result;
}

/// Argmax decoding (lowest id on ties), stopping at `eos` or max_len.
template <class Model>
auto greedy_search(const Model& model, int max_len, int eos) {
  using State = decltype(model.start());
  Hypothesis<State> h{{}, 0.0, model.start(), false};
  for (int t = 0; t < max_len; ++t) {
    auto [probs, carry] = model.step(h.state);
    Eigen::Index y = 0;
    probs.maxCoeff(&y);
    h.tokens.push_back(static_cast<int>(y));
    h.log_prob += std::log(probs(y));
    if (y == eos) {
      h.finished = true;
      break;
    }
    h.state = model.advance(carry, static_cast<int>(y));
  }
  return h;
}

/// Step model over a trained decoder, optionally gated.
class DecoderSearchModel {
 public:
  using State = DecoderState<ad::Matrix>;
  using Carry = DecoderState<ad::Matrix>;

  DecoderSearchModel(const Decoder& decoder, DecoderMemory<ad::Matrix> memory, State start,
                     std::optional<Eigen::VectorXd> gate, std::size_t relation_offset)
      : decoder_(&decoder), memory_(std::move(memory)), start_(std::move(start)), gate_(std::move(gate)),
        relation_offset_(relation_offset) {}

  State start() const { return start_; }

  std::pair<Eigen::VectorXd, Carry> step(const State& s) const {
    ad::Eval ctx;
    auto out = decoder_->step(ctx, s, memory_);
    Eigen::VectorXd probs = out.probabilities.row(0).transpose();
    if (gate_) probs = fuse(probs, *gate_, relation_offset_);
    return {std::move(probs), std::move(out.state)};
  }

  State advance(const Carry& c, int token) const {
    State s = c;
    s.prev_token = token;
    return s;
  }

 private:
  const Decoder* decoder_;
  DecoderMemory<ad::Matrix> memory_;
  State start_;
  std::optional<Eigen::VectorXd> gate_;
  std::size_t relation_offset_;
};

}  // namespace kgirnet
