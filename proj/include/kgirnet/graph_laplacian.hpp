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

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <vector>

#include "kgirnet/dataset.hpp"
#include "kgirnet/embeddings.hpp"
#include "kgirnet/error.hpp"
#include "kgirnet/kg_store.hpp"

namespace kgirnet {

/// One relevance feature per sub-graph element (nodes, then edges).
using FeatureVector = Eigen::VectorXd;
/// Propagated element scores, same indexing as FeatureVector.
using GraphEncoding = Eigen::VectorXd;
/// Multiplicative mask over the output vocabulary.
using VocabGate = Eigen::VectorXd;

namespace detail {
inline text::Tokens split_label_tokens(const text::Tokens& tokens) {
  text::Tokens out;
  for (const auto& t : tokens)
    for (auto& part : text::label_tokens(t)) out.push_back(std::move(part));
  return out;
}
}  // namespace detail

/// Cosine between the mean query embedding and the mean embedding of each
/// element's label tokens. 0 when either side has no known token.
inline FeatureVector feature_similarity(const text::Tokens& query, const SubGraph& sub,
                                        const KnowledgeGraph& kg, const StaticEmbeddings& embeddings) {
  FeatureVector f = FeatureVector::Zero(static_cast<Eigen::Index>(sub.index_size()));
  const auto q = embeddings.mean(detail::split_label_tokens(query));
  if (!q) return f;
  for (std::size_t i = 0; i < sub.index_size(); ++i) {
    const auto l = embeddings.mean(text::label_tokens(element_label(kg, sub, i)));
    if (l) f(static_cast<Eigen::Index>(i)) = std::clamp(cosine(*q, *l), -1.0, 1.0);
  }
  return f;
}

/// One step of row-normalized propagation D^-1 (A + I) f over the sub-graph
/// index. Every row of A + I has at least the self entry, so D is invertible.
inline GraphEncoding graph_encode(const SubGraph& sub, const FeatureVector& f) {
  if (static_cast<std::size_t>(f.size()) != sub.index_size())
    throw ContractError("graph_encode: feature length " + std::to_string(f.size()) +
                        " != sub-graph index size " + std::to_string(sub.index_size()));
  GraphEncoding g(f.size());
  for (std::size_t i = 0; i < sub.index_size(); ++i) {
    double acc = f(static_cast<Eigen::Index>(i));
    for (int j : sub.neighbors[i]) acc += f(j);
    g(static_cast<Eigen::Index>(i)) = acc / static_cast<double>(sub.neighbors[i].size() + 1);
  }
  return g;
}

/// Highest encoding score of each relation over its edge elements.
inline std::map<RelationId, double> relation_scores(const SubGraph& sub, const KnowledgeGraph& kg,
                                                    const Eigen::VectorXd& element_scores) {
  std::map<RelationId, double> best;
  for (std::size_t j = 0; j < sub.edge_ids.size(); ++j) {
    const RelationId r = kg.triple(sub.edge_ids[j]).relation;
    const double s = element_scores(static_cast<Eigen::Index>(sub.edge_index(j)));
    auto [it, inserted] = best.try_emplace(r, s);
    if (!inserted) it->second = std::max(it->second, s);
  }
  return best;
}

/// Word and special tokens pass with 1. Relation tokens get the relation's
/// best encoding score clamped at 0, or exactly 0 when the relation has no
/// edge in the sub-graph.
inline VocabGate project_gate(const GraphEncoding& g, const SubGraph& sub, const KnowledgeGraph& kg,
                              const Vocabulary& vocab) {
  VocabGate gate = VocabGate::Ones(static_cast<Eigen::Index>(vocab.size()));
  gate.tail(static_cast<Eigen::Index>(vocab.relation_count())).setZero();
  for (const auto& [r, score] : relation_scores(sub, kg, g))
    gate(vocab.relation_token_id(r)) = std::max(0.0, score);
  return gate;
}

struct RankedRelation {
  RelationId relation;
  double score = 0.0;
};

namespace detail {
inline std::vector<RankedRelation> rank(const std::map<RelationId, double>& scores) {
  std::vector<RankedRelation> out;
  for (const auto& [r, s] : scores) out.push_back({r, s});
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedRelation& a, const RankedRelation& b) { return a.score > b.score; });
  return out;
}
}  // namespace detail

/// Unsupervised relation linking: relations of the k-hop sub-graph of `e`
/// ranked by propagated score, ties by ascending relation id.
inline std::vector<RankedRelation> relation_link(const text::Tokens& query, const KnowledgeGraph& kg,
                                                 EntityId e, int k, const StaticEmbeddings& embeddings) {
  const SubGraph sub = k_hop_subgraph(kg, e, k);
  const GraphEncoding g = graph_encode(sub, feature_similarity(query, sub, kg, embeddings));
  return detail::rank(relation_scores(sub, kg, g));
}

/// Baseline without propagation: relations ranked by the raw similarity of
/// their own label to the query.
inline std::vector<RankedRelation> similarity_link(const text::Tokens& query, const KnowledgeGraph& kg,
                                                   EntityId e, int k, const StaticEmbeddings& embeddings) {
  const SubGraph sub = k_hop_subgraph(kg, e, k);
  return detail::rank(relation_scores(sub, kg, feature_similarity(query, sub, kg, embeddings)));
}

}  // namespace kgirnet
