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

#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgirnet/autodiff.hpp"
#include "kgirnet/dataset.hpp"
#include "kgirnet/decoder.hpp"
#include "kgirnet/embeddings.hpp"
#include "kgirnet/encoder.hpp"
#include "kgirnet/graph_laplacian.hpp"
#include "kgirnet/kg_store.hpp"

namespace kgirnet {

struct ModelConfig {
  EncoderConfig encoder;
  EntityHeadConfig entity_head;
  int hidden = 256;             // LSTM hidden size (encoder and decoder)
  int decoder_embedding = 256;  // decoder input embedding size
  double dropout = 0.1;         // recurrent layers
  int k = 2;                    // sub-graph radius
  bool subgraph_gate = true;    // Hadamard gating at inference
  bool intermediate = true;     // train on relation-token responses
  int beam_width = 5;
  int max_len = 30;                  // decoded tokens, <EOS> included
  int max_context = 100;             // tokens kept by build_context
  double low_confidence = 0.5;       // entity probability below this is flagged
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"encoder",
       {{"kind", to_string(c.encoder.kind)},
        {"max_len", c.encoder.max_len},
        {"d_model", c.encoder.d_model},
        {"layers", c.encoder.layers},
        {"heads", c.encoder.heads},
        {"ffn", c.encoder.ffn},
        {"min_word_piece_freq", c.encoder.min_word_piece_freq},
        {"finetune_static", c.encoder.finetune_static},
        {"dropout", c.encoder.dropout}}},
      {"entity_head",
       {{"kind", to_string(c.entity_head.kind)},
        {"filters", c.entity_head.filters},
        {"kernel_sizes", c.entity_head.kernel_sizes},
        {"hidden", c.entity_head.hidden},
        {"dropout", c.entity_head.dropout}}},
      {"hidden", c.hidden},
      {"decoder_embedding", c.decoder_embedding},
      {"dropout", c.dropout},
      {"k", c.k},
      {"subgraph_gate", c.subgraph_gate},
      {"intermediate", c.intermediate},
      {"beam_width", c.beam_width},
      {"max_len", c.max_len},
      {"max_context", c.max_context},
      {"low_confidence", c.low_confidence},
  };
}

/// Reads known keys over the defaults in `c`; absent keys keep their value.
inline void merge_json(ModelConfig& c, const nlohmann::json& j) {
  auto get = [](const nlohmann::json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    if (e.contains("kind")) c.encoder.kind = parse_encoder_kind(e.at("kind").get<std::string>());
    get(e, "max_len", c.encoder.max_len);
    get(e, "d_model", c.encoder.d_model);
    get(e, "layers", c.encoder.layers);
    get(e, "heads", c.encoder.heads);
    get(e, "ffn", c.encoder.ffn);
    get(e, "min_word_piece_freq", c.encoder.min_word_piece_freq);
    get(e, "finetune_static", c.encoder.finetune_static);
    get(e, "dropout", c.encoder.dropout);
  }
  if (j.contains("entity_head")) {
    const auto& e = j.at("entity_head");
    if (e.contains("kind")) c.entity_head.kind = parse_entity_head_kind(e.at("kind").get<std::string>());
    get(e, "filters", c.entity_head.filters);
    get(e, "kernel_sizes", c.entity_head.kernel_sizes);
    get(e, "hidden", c.entity_head.hidden);
    get(e, "dropout", c.entity_head.dropout);
  }
  get(j, "hidden", c.hidden);
  get(j, "decoder_embedding", c.decoder_embedding);
  get(j, "dropout", c.dropout);
  get(j, "k", c.k);
  get(j, "subgraph_gate", c.subgraph_gate);
  get(j, "intermediate", c.intermediate);
  get(j, "beam_width", c.beam_width);
  get(j, "max_len", c.max_len);
  get(j, "max_context", c.max_context);
  get(j, "low_confidence", c.low_confidence);
}

/// Everything the pipeline returns for one query.
struct Response {
  Tokens surface;
  Tokens intermediate;
  EntityId entity;
  double entity_probability = 0.0;
  bool low_confidence = false;
  std::vector<RelationId> relations;  // relation tokens emitted, ascending
  std::vector<std::string> objects;   // KG objects substituted back
  std::vector<std::string> unresolved;
  bool unfinished = false;
  double log_prob = 0.0;
};

/// Input vocabularies the contextual encoder is built from.
struct EncoderInputs {
  std::vector<std::string> words;  // static encoder rows
  WordPiece pieces;                // transformer segmentation
};

inline EncoderInputs encoder_inputs(const std::vector<Example>& examples, const ModelConfig& cfg) {
  std::vector<Tokens> sentences;
  std::set<std::string> words;
  for (const auto& ex : examples) {
    sentences.push_back(ex.context);
    words.insert(ex.context.begin(), ex.context.end());
  }
  return {std::vector<std::string>(words.begin(), words.end()),
          WordPiece::build(sentences, cfg.encoder.min_word_piece_freq)};
}

/// Encoder, entity head, recurrent encoder and gated decoder over one KG.
class KgirNet {
 public:
  KgirNet(ModelConfig cfg, std::shared_ptr<const KnowledgeGraph> kg, Vocabulary vocab,
          std::shared_ptr<const StaticEmbeddings> embeddings, const EncoderInputs& inputs, std::uint64_t seed)
      : cfg_(std::move(cfg)), kg_(std::move(kg)), vocab_(std::move(vocab)), embeddings_(std::move(embeddings)),
        inputs_(inputs) {
    require(kg_ && kg_->entity_count() >= 1, "model needs a non-empty KG");
    require(embeddings_ != nullptr, "model needs a static embedding table");
    std::mt19937_64 rng(seed);
    if (cfg_.encoder.kind == EncoderKind::static_embeddings)
      encoder_ = ContextualEncoder(StaticEncoder(params_, inputs_.words, *embeddings_, cfg_.encoder.finetune_static, rng));
    else
      encoder_ = ContextualEncoder(TransformerEncoder(params_, inputs_.pieces, cfg_.encoder, rng));
    entity_head_ = EntityHead(params_, cfg_.entity_head, encoder_.dim(), static_cast<int>(kg_->entity_count()), rng);
    sequence_encoder_ = SequenceEncoder(params_, encoder_.dim(), cfg_.hidden, cfg_.dropout, rng);
    decoder_ = Decoder(params_, static_cast<int>(vocab_.size()), cfg_.decoder_embedding, cfg_.hidden, cfg_.dropout, rng);
  }

  KgirNet(const KgirNet&) = delete;
  KgirNet& operator=(const KgirNet&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }
  const KnowledgeGraph& kg() const { return *kg_; }
  std::shared_ptr<const KnowledgeGraph> kg_ptr() const { return kg_; }
  const Vocabulary& vocab() const { return vocab_; }
  const StaticEmbeddings& embeddings() const { return *embeddings_; }
  std::shared_ptr<const StaticEmbeddings> embeddings_ptr() const { return embeddings_; }
  const EncoderInputs& inputs() const { return inputs_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  const ContextualEncoder& encoder() const { return encoder_; }
  const EntityHead& entity_head() const { return entity_head_; }
  const SequenceEncoder& sequence_encoder() const { return sequence_encoder_; }
  const Decoder& decoder() const { return decoder_; }

  /// Summed token cross-entropy over target + <EOS> (teacher forced) plus the
  /// entity cross-entropy when the example has a gold entity.
  /// Encoders need at least one token; an empty context reads as <UNK>.
  static Tokens non_empty(Tokens context) {
    if (context.empty()) context.emplace_back(kUnk);
    return context;
  }

  template <class Ctx>
  typename Ctx::Value example_loss(Ctx& ctx, const Tokens& context, const Tokens& target,
                                   std::optional<EntityId> entity) const {
    auto enc = encoder_.encode(ctx, non_empty(context));
    auto loss = ctx.constant(ad::Matrix::Zero(1, 1));
    if (entity) {
      auto log_probs = ad::log_softmax_rows(entity_head_.logits(ctx, enc));
      loss = ad::add(loss, ad::scale(ad::pick(log_probs, 0, entity->value), -1.0));
    }
    auto seq = sequence_encoder_.encode(ctx, enc.token_states);
    auto mem = decoder_.memory(ctx, seq.states);
    DecoderState<typename Ctx::Value> state = decoder_.template initial_state<Ctx>(seq);
    std::vector<int> targets = vocab_.encode(target);
    targets.push_back(Vocabulary::eos_id);
    for (int y : targets) {
      auto out = decoder_.step(ctx, state, mem);
      loss = ad::add(loss, ad::scale(ad::pick(ad::log_softmax_rows(out.logits), 0, y), -1.0));
      state = out.state;
      state.prev_token = y;
    }
    return loss;
  }

  /// Entity distribution for a context (inference).
  Eigen::VectorXd detect_entity(const Tokens& context) const {
    ad::Eval ctx;
    auto enc = encoder_.encode(ctx, non_empty(context));
    return entity_head_.probabilities(ctx, enc).row(0).transpose();
  }

  /// Vocabulary gate for `query` around entity `e`.
  VocabGate gate_for(const Tokens& query, EntityId e) const {
    const SubGraph sub = k_hop_subgraph(*kg_, e, cfg_.k);
    return project_gate(graph_encode(sub, feature_similarity(query, sub, *kg_, *embeddings_)), sub, *kg_, vocab_);
  }

  /// Full pipeline: entity detection, sub-graph gate, beam decoding,
  /// relexicalization.
  Response generate(const std::vector<Tokens>& history, const Tokens& query) const {
    const Tokens context = non_empty(build_context(history, query, static_cast<std::size_t>(cfg_.max_context)));
    ad::Eval ctx;
    auto enc = encoder_.encode(ctx, context);
    const Eigen::VectorXd entity_probs = entity_head_.probabilities(ctx, enc).row(0).transpose();
    Eigen::Index best = 0;
    entity_probs.maxCoeff(&best);

    Response r;
    r.entity = EntityId{static_cast<std::int32_t>(best)};
    r.entity_probability = entity_probs(best);
    r.low_confidence = r.entity_probability < cfg_.low_confidence;

    auto seq = sequence_encoder_.encode(ctx, enc.token_states);
    std::optional<Eigen::VectorXd> gate;
    if (cfg_.subgraph_gate) gate = gate_for(query, r.entity);
    DecoderSearchModel search(decoder_, decoder_.memory(ctx, seq.states),
                              decoder_.initial_state<ad::Eval>(seq), std::move(gate), vocab_.relation_offset());
    auto result = beam_search(search, cfg_.beam_width, cfg_.max_len, Vocabulary::eos_id);
    r.unfinished = result.unfinished;
    r.log_prob = result.best.log_prob;

    std::set<RelationId> used;
    for (int id : result.best.tokens) {
      if (id == Vocabulary::eos_id) break;
      r.intermediate.push_back(vocab_.token(id));
      if (vocab_.is_relation(id)) used.insert(vocab_.relation_of(id));
    }
    r.relations.assign(used.begin(), used.end());
    auto relex = relexicalize(r.intermediate, r.entity, *kg_);
    r.surface = std::move(relex.tokens);
    r.objects = std::move(relex.objects);
    r.unresolved = std::move(relex.unresolved);
    return r;
  }

 private:
  ModelConfig cfg_;
  std::shared_ptr<const KnowledgeGraph> kg_;
  Vocabulary vocab_;
  std::shared_ptr<const StaticEmbeddings> embeddings_;
  EncoderInputs inputs_;
  ad::ParameterSet params_;
  ContextualEncoder encoder_;
  EntityHead entity_head_;
  SequenceEncoder sequence_encoder_;
  Decoder decoder_;
};

}  // namespace kgirnet
