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

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kgirnet/autodiff.hpp"
#include "kgirnet/dataset.hpp"
#include "kgirnet/embeddings.hpp"
#include "kgirnet/error.hpp"
#include "kgirnet/nn.hpp"

namespace kgirnet {

enum class EncoderKind { transformer, static_embeddings };
enum class EntityHeadKind { cnn, linear };

inline std::string to_string(EncoderKind k) {
  return k == EncoderKind::transformer ? "transformer" : "static";
}
inline EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "transformer" || s == "pretrained-transformer") return EncoderKind::transformer;
  if (s == "static" || s == "static-embeddings") return EncoderKind::static_embeddings;
  throw ParseError("unknown encoder kind '" + s + "'");
}
inline std::string to_string(EntityHeadKind k) { return k == EntityHeadKind::cnn ? "cnn" : "linear"; }
inline EntityHeadKind parse_entity_head_kind(const std::string& s) {
  if (s == "cnn") return EntityHeadKind::cnn;
  if (s == "linear") return EntityHeadKind::linear;
  throw ParseError("unknown entity head kind '" + s + "'");
}

struct EncoderConfig {
  EncoderKind kind = EncoderKind::transformer;
  int max_len = 128;  // contextual encoder input limit, including [CLS]/[SEP]
  int d_model = 128;
  int layers = 2;
  int heads = 4;
  int ffn = 256;
  int min_word_piece_freq = 2;
  bool finetune_static = false;
  double dropout = 0.1;
};

struct EntityHeadConfig {
  EntityHeadKind kind = EntityHeadKind::cnn;
  int filters = 300;
  std::vector<int> kernel_sizes{3, 4, 5};
  int hidden = 500;
  double dropout = 0.1;
};

/// Contextual encoder output: one state per input token plus an aggregate.
template <class V>
struct EncodedQuery {
  V token_states;  // n x d_ctx
  V aggregate;     // 1 x d_ctx
};

/// Recurrent encoder output.
template <class V>
struct EncoderOutput {
  V states;  // N x h_dim
  nn::Lstm::State<V> final_state;
};

// ---------------------------------------------------------------------------
// Word-piece segmentation

/// Greedy longest-match-first sub-word segmentation with "##" continuation
/// pieces. Words that cannot be segmented map to [UNK].
class WordPiece {
 public:
  static constexpr const char* kPadPiece = "[PAD]";
  static constexpr const char* kUnkPiece = "[UNK]";
  static constexpr const char* kClsPiece = "[CLS]";
  static constexpr const char* kSepPiece = "[SEP]";

  WordPiece() { reset({}); }
  explicit WordPiece(const std::vector<std::string>& pieces) { reset(pieces); }

  /// Whole words seen at least `min_freq` times plus every character in
  /// initial and continuation form.
  static WordPiece build(const std::vector<Tokens>& sentences, int min_freq) {
    std::map<std::string, int> freq;
    std::set<std::string> chars;
    for (const auto& s : sentences)
      for (const auto& w : s) {
        ++freq[w];
        for (char c : w) chars.insert(std::string(1, c));
      }
    std::vector<std::string> pieces;
    for (const auto& c : chars) {
      pieces.push_back(c);
      pieces.push_back("##" + c);
    }
    for (const auto& [w, n] : freq)
      if (n >= min_freq && w.size() > 1) pieces.push_back(w);
    return WordPiece(pieces);
  }

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  int id(const std::string& piece) const {
    auto it = index_.find(piece);
    return it == index_.end() ? unk_id() : it->second;
  }
  int unk_id() const { return 1; }
  int cls_id() const { return 2; }
  int sep_id() const { return 3; }

  std::vector<int> segment(const std::string& word) const {
    if (auto it = index_.find(word); it != index_.end()) return {it->second};
    std::vector<int> out;
    std::size_t start = 0;
    while (start < word.size()) {
      std::size_t end = word.size();
      int found = -1;
      while (end > start) {
        std::string piece = word.substr(start, end - start);
        if (start > 0) piece = "##" + piece;
        if (auto it = index_.find(piece); it != index_.end()) {
          found = it->second;
          break;
        }
        --end;
      }
      if (found < 0) return {unk_id()};
      out.push_back(found);
      start = end;
    }
    return out;
  }

 private:
  void reset(const std::vector<std::string>& pieces) {
    pieces_.clear();
    index_.clear();
    for (const char* s : {kPadPiece, kUnkPiece, kClsPiece, kSepPiece, kEou}) add(s);
    for (const auto& p : pieces) add(p);
  }
  void add(const std::string& p) {
    if (index_.try_emplace(p, static_cast<int>(pieces_.size())).second) pieces_.push_back(p);
  }

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Contextual encoders

/// Frozen (by default) static word-embedding lookup. The aggregate is the mean
/// of the token states.
class StaticEncoder {
 public:
  StaticEncoder() = default;
  StaticEncoder(ad::ParameterSet& params, std::vector<std::string> words, const StaticEmbeddings& embeddings,
                bool trainable, std::mt19937_64& rng)
      : words_(std::move(words)) {
    words_.insert(words_.begin(), kUnk);
    words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
    for (std::size_t i = 0; i < words_.size(); ++i) index_.try_emplace(words_[i], static_cast<int>(i));
    dim_ = embeddings.dim();
    require(dim_ > 0, "static encoder needs a non-empty embedding table");
    table_ = &params.add("encoder.static.table", static_cast<ad::Index>(words_.size()), dim_, nn::kEncoderGroup);
    table_->trainable = trainable;
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (const auto* v = embeddings.find(words_[i]))
        table_->value.row(static_cast<ad::Index>(i)) = v->transpose();
      else
        for (int j = 0; j < dim_; ++j) table_->value(static_cast<ad::Index>(i), j) = dist(rng);
    }
  }

  int dim() const { return dim_; }
  const std::vector<std::string>& words() const { return words_; }

  template <class Ctx>
  EncodedQuery<typename Ctx::Value> encode(Ctx& ctx, const Tokens& tokens) const {
    std::vector<int> ids;
    for (const auto& t : tokens) {
      auto it = index_.find(t);
      ids.push_back(it == index_.end() ? 0 : it->second);
    }
    auto states = ad::gather_rows(ctx.param(*table_), ids);
    auto aggregate = ad::mean_rows(states);
    return {states, aggregate};
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  ad::Parameter* table_ = nullptr;
  int dim_ = 0;
};

/// Bidirectional post-norm transformer encoder over word pieces with
/// [CLS] ... [SEP] framing. Piece states are mean-pooled back to one state
/// per input token; the aggregate is the [CLS] state.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ad::ParameterSet& params, WordPiece pieces, const EncoderConfig& cfg, std::mt19937_64& rng)
      : pieces_(std::move(pieces)), cfg_(cfg) {
    require(cfg.d_model % cfg.heads == 0, "d_model must be divisible by heads");
    const auto d = static_cast<ad::Index>(cfg.d_model);
    const int g = nn::kEncoderGroup;
    token_embedding_ = &params.add("encoder.tf.token_embedding", static_cast<ad::Index>(pieces_.size()), d, g);
    position_embedding_ = &params.add("encoder.tf.position_embedding", cfg.max_len, d, g);
    ad::uniform_init(*token_embedding_, rng, 0.1);
    ad::uniform_init(*position_embedding_, rng, 0.1);
    embed_norm_ = norm(params, "encoder.tf.embed_norm", d);
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = "encoder.tf.layer" + std::to_string(l);
      Layer layer;
      layer.query = nn::Linear(params, p + ".query", d, d, g, rng);
      layer.key = nn::Linear(params, p + ".key", d, d, g, rng);
      layer.value = nn::Linear(params, p + ".value", d, d, g, rng);
      layer.attn_out = nn::Linear(params, p + ".attn_out", d, d, g, rng);
      layer.attn_norm = norm(params, p + ".attn_norm", d);
      layer.ffn_in = nn::Linear(params, p + ".ffn_in", d, cfg.ffn, g, rng);
      layer.ffn_out = nn::Linear(params, p + ".ffn_out", cfg.ffn, d, g, rng);
      layer.ffn_norm = norm(params, p + ".ffn_norm", d);
      layers_.push_back(layer);
    }
  }

  int dim() const { return cfg_.d_model; }
  const WordPiece& pieces() const { return pieces_; }

  /// Piece ids with [CLS]/[SEP] and, per original token kept, the range of
  /// its pieces. Oldest tokens are dropped first when over max_len.
  struct Segmentation {
    std::vector<int> ids;
    std::vector<std::pair<int, int>> spans;  // [begin, end) into ids
    std::size_t dropped = 0;
  };

  Segmentation segment(const Tokens& tokens) const {
    std::vector<std::vector<int>> per_token;
    for (const auto& t : tokens) per_token.push_back(pieces_.segment(t));
    std::size_t total = 2;
    std::size_t first = per_token.size();
    while (first > 0 && total + per_token[first - 1].size() <= static_cast<std::size_t>(cfg_.max_len)) {
      total += per_token[first - 1].size();
      --first;
    }
    if (first == per_token.size() && !per_token.empty()) {
      // Most recent token alone overflows the window: keep its leading pieces.
      --first;
      per_token[first].resize(static_cast<std::size_t>(std::max(1, cfg_.max_len - 2)));
    }
    Segmentation s;
    s.dropped = first;
    s.ids.push_back(pieces_.cls_id());
    for (std::size_t i = first; i < per_token.size(); ++i) {
      const int b = static_cast<int>(s.ids.size());
      s.ids.insert(s.ids.end(), per_token[i].begin(), per_token[i].end());
      s.spans.emplace_back(b, static_cast<int>(s.ids.size()));
    }
    s.ids.push_back(pieces_.sep_id());
    return s;
  }

  template <class Ctx>
  EncodedQuery<typename Ctx::Value> encode(Ctx& ctx, const Tokens& tokens) const {
    const Segmentation seg = segment(tokens);
    const auto m = static_cast<ad::Index>(seg.ids.size());
    std::vector<int> positions(seg.ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

    auto x = ad::add(ad::gather_rows(ctx.param(*token_embedding_), seg.ids),
                     ad::gather_rows(ctx.param(*position_embedding_), positions));
    x = ctx.dropout(apply_norm(ctx, embed_norm_, x), cfg_.dropout);
    for (const auto& layer : layers_) x = block(ctx, layer, x);

    ad::Matrix pool = ad::Matrix::Zero(static_cast<ad::Index>(seg.spans.size()), m);
    for (std::size_t i = 0; i < seg.spans.size(); ++i) {
      const auto [b, e] = seg.spans[i];
      for (int j = b; j < e; ++j) pool(static_cast<ad::Index>(i), j) = 1.0 / (e - b);
    }
    auto states = ad::matmul(ctx.constant(std::move(pool)), x);
    auto aggregate = ad::row(x, 0);
    return {states, aggregate};
  }

 private:
  struct Norm {
    ad::Parameter* gamma = nullptr;
    ad::Parameter* beta = nullptr;
  };
  struct Layer {
    nn::Linear query, key, value, attn_out;
    Norm attn_norm;
    nn::Linear ffn_in, ffn_out;
    Norm ffn_norm;
  };

  static Norm norm(ad::ParameterSet& params, const std::string& name, ad::Index d) {
    Norm n;
    n.gamma = &params.add(name + ".gamma", 1, d, nn::kEncoderGroup);
    n.beta = &params.add(name + ".beta", 1, d, nn::kEncoderGroup);
    n.gamma->value.setOnes();
    return n;
  }

  template <class Ctx, class V>
  typename Ctx::Value apply_norm(Ctx& ctx, const Norm& n, const V& x) const {
    return ad::layer_norm_rows(x, ctx.param(*n.gamma), ctx.param(*n.beta));
  }

  template <class Ctx, class V>
  typename Ctx::Value block(Ctx& ctx, const Layer& layer, const V& x) const {
    const ad::Index dh = cfg_.d_model / cfg_.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    auto q = layer.query(ctx, x);
    auto k = layer.key(ctx, x);
    auto v = layer.value(ctx, x);
    std::vector<typename Ctx::Value> heads;
    for (int h = 0; h < cfg_.heads; ++h) {
      auto qh = ad::slice_cols(q, h * dh, dh);
      auto kh = ad::slice_cols(k, h * dh, dh);
      auto vh = ad::slice_cols(v, h * dh, dh);
      auto attn = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt));
      heads.push_back(ad::matmul(attn, vh));
    }
    auto attended = ctx.dropout(layer.attn_out(ctx, ad::concat_cols(heads)), cfg_.dropout);
    auto y = apply_norm(ctx, layer.attn_norm, ad::add(x, attended));
    auto ff = ctx.dropout(layer.ffn_out(ctx, ad::relu(layer.ffn_in(ctx, y))), cfg_.dropout);
    return apply_norm(ctx, layer.ffn_norm, ad::add(y, ff));
  }

  WordPiece pieces_;
  EncoderConfig cfg_;
  ad::Parameter* token_embedding_ = nullptr;
  ad::Parameter* position_embedding_ = nullptr;
  Norm embed_norm_;
  std::vector<Layer> layers_;
};

/// Pluggable contextual encoder.
class ContextualEncoder {
 public:
  ContextualEncoder() = default;
  explicit ContextualEncoder(StaticEncoder e) : impl_(std::move(e)) {}
  explicit ContextualEncoder(TransformerEncoder e) : impl_(std::move(e)) {}

  int dim() const {
    return std::visit([](const auto& e) { return e.dim(); }, impl_);
  }
  EncoderKind kind() const {
    return std::holds_alternative<StaticEncoder>(impl_) ? EncoderKind::static_embeddings
                                                         : EncoderKind::transformer;
  }
  const StaticEncoder* as_static() const { return std::get_if<StaticEncoder>(&impl_); }
  const TransformerEncoder* as_transformer() const { return std::get_if<TransformerEncoder>(&impl_); }

  /// encode_query: contextual state per input token. Over-long inputs lose
  /// their oldest tokens first, so the row count can be below tokens.size()
  /// only when the input exceeds the encoder limit.
  template <class Ctx>
  EncodedQuery<typename Ctx::Value> encode(Ctx& ctx, const Tokens& tokens) const {
    require(!tokens.empty(), "encode_query: empty input");
    return std::visit([&](const auto& e) { return e.encode(ctx, tokens); }, impl_);
  }

 private:
  std::variant<StaticEncoder, TransformerEncoder> impl_;
};

// ---------------------------------------------------------------------------
// Entity detection

/// Predicts the core entity of the query. Linear head: softmax(C W + b) over
/// the aggregate. CNN head: 1-d convolutions of several widths over the
/// token states, ReLU, max-over-time, then a ReLU hidden layer.
class EntityHead {
 public:
  EntityHead() = default;
  EntityHead(ad::ParameterSet& params, const EntityHeadConfig& cfg, int input_dim, int entity_count,
             std::mt19937_64& rng)
      : cfg_(cfg), entity_count_(entity_count) {
    require(entity_count >= 1, "detect_entity: entity_count must be >= 1");
    const int g = nn::kDecoderGroup;
    if (cfg.kind == EntityHeadKind::linear) {
      output_ = nn::Linear(params, "entity.linear", input_dim, entity_count, g, rng);
      return;
    }
    for (int k : cfg.kernel_sizes)
      convs_.emplace_back(params, "entity.conv" + std::to_string(k), static_cast<ad::Index>(k) * input_dim,
                          cfg.filters, g, rng);
    hidden_ = nn::Linear(params, "entity.hidden", static_cast<ad::Index>(cfg.filters) * static_cast<ad::Index>(cfg.kernel_sizes.size()),
                         cfg.hidden, g, rng);
    output_ = nn::Linear(params, "entity.output", cfg.hidden, entity_count, g, rng);
  }

  int entity_count() const { return entity_count_; }
  EntityHeadKind kind() const { return cfg_.kind; }
  const nn::Linear& output_layer() const { return output_; }

  template <class Ctx>
  typename Ctx::Value logits(Ctx& ctx, const EncodedQuery<typename Ctx::Value>& enc) const {
    if (cfg_.kind == EntityHeadKind::linear) return output_(ctx, enc.aggregate);
    std::vector<typename Ctx::Value> pooled;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      auto windows = ad::unfold_rows(enc.token_states, cfg_.kernel_sizes[i]);
      pooled.push_back(ad::max_rows(ad::relu(convs_[i](ctx, windows))));
    }
    auto features = ctx.dropout(ad::concat_cols(pooled), cfg_.dropout);
    auto hidden = ctx.dropout(ad::relu(hidden_(ctx, features)), cfg_.dropout);
    return output_(ctx, hidden);
  }

  /// detect_entity: probability distribution over all KG entities.
  template <class Ctx>
  typename Ctx::Value probabilities(Ctx& ctx, const EncodedQuery<typename Ctx::Value>& enc) const {
    return ad::softmax_rows(logits(ctx, enc));
  }

 private:
  EntityHeadConfig cfg_;
  int entity_count_ = 0;
  std::vector<nn::Linear> convs_;
  nn::Linear hidden_;
  nn::Linear output_;
};

// ---------------------------------------------------------------------------
// Recurrent input encoder

class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(ad::ParameterSet& params, int input_dim, int hidden, double dropout, std::mt19937_64& rng)
      : lstm_(params, "encoder.lstm", input_dim, hidden, nn::kDecoderGroup, rng), dropout_(dropout) {}

  int hidden() const { return static_cast<int>(lstm_.hidden); }
  const nn::Lstm& lstm() const { return lstm_; }

  /// encode_sequence: one recurrent state per token state.
  template <class Ctx>
  EncoderOutput<typename Ctx::Value> encode(Ctx& ctx, const typename Ctx::Value& token_states) const {
    const auto n = ad::value_of(token_states).rows();
    require(n >= 1, "encode_sequence: empty input");
    auto x = ctx.dropout(token_states, dropout_);
    auto projected = ad::matmul(x, ctx.param(*lstm_.input_weight));
    auto state = lstm_.zero_state(ctx);
    std::vector<typename Ctx::Value> hs;
    for (ad::Index i = 0; i < n; ++i) {
      state = lstm_.step(ctx, ad::row(projected, i), state);
      hs.push_back(state.h);
    }
    return {ad::concat_rows(hs), state};
  }

 private:
  nn::Lstm lstm_;
  double dropout_ = 0.0;
};

}  // namespace kgirnet
