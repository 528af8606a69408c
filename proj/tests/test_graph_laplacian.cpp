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


#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "kgirnet/evaluation.hpp"
#include "kgirnet/graph_laplacian.hpp"
#include "test_support.hpp"

namespace kgirnet {
namespace {

using testing::fixture_embeddings;
using testing::fixture_kg;

StaticEmbeddings hand_table() {
  StaticEmbeddings emb(3);
  emb.add("director", Eigen::Vector3d(1, 0, 0));
  emb.add("film", Eigen::Vector3d(0, 1, 0));
  emb.add("directed", Eigen::Vector3d(1, 1, 0));
  emb.add("by", Eigen::Vector3d(0, 0, 1));
  emb.add("rating", Eigen::Vector3d(0, 1, 1));
  return emb;
}

KnowledgeGraph hand_kg() {
  KnowledgeGraph kg;
  kg.add_triple("m", "directed_by", "p");
  kg.add_triple("m", "rating", "r");
  return kg;
}

std::size_t element_of(const KnowledgeGraph& kg, const SubGraph& sub, const std::string& relation) {
  for (std::size_t j = 0; j < sub.edge_ids.size(); ++j)
    if (kg.label(kg.triple(sub.edge_ids[j]).relation) == relation) return sub.edge_index(j);
  throw std::runtime_error("no edge " + relation);
}

TEST(FeatureSimilarity, HandComputedCosines) {
  const auto kg = hand_kg();
  const auto emb = hand_table();
  const auto sub = k_hop_subgraph(kg, kg.entity("m"), 1);
  const auto f = feature_similarity({"director", "film"}, sub, kg, emb);
  // query mean (.5,.5,0); directed_by mean (.5,.5,.5); rating (0,1,1).
  EXPECT_NEAR(f(static_cast<Eigen::Index>(element_of(kg, sub, "directed_by"))), std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_NEAR(f(static_cast<Eigen::Index>(element_of(kg, sub, "rating"))), 0.5, 1e-12);
  for (std::size_t i = 0; i < sub.node_count(); ++i) EXPECT_EQ(f(static_cast<Eigen::Index>(i)), 0.0);  // OOV labels
}

TEST(FeatureSimilarity, SelfSimilarityAndUnknownQuery) {
  const auto kg = hand_kg();
  const auto emb = hand_table();
  const auto sub = k_hop_subgraph(kg, kg.entity("m"), 1);
  EXPECT_NEAR(feature_similarity({"rating"}, sub, kg, emb)(static_cast<Eigen::Index>(element_of(kg, sub, "rating"))),
              1.0, 1e-6);
  EXPECT_EQ(feature_similarity({"zzz"}, sub, kg, emb).norm(), 0.0);
}

TEST(GraphEncode, StarMatchesDenseOracle) {
  KnowledgeGraph kg;
  kg.add_triple("c", "r1", "l1");
  kg.add_triple("c", "r2", "l2");
  const auto sub = k_hop_subgraph(kg, kg.entity("c"), 1);
  ASSERT_EQ(sub.index_size(), 5u);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(5);
  f(0) = 1.0;  // center node
  const Eigen::MatrixXd a_tilde = sub.adjacency() + Eigen::MatrixXd::Identity(5, 5);
  const Eigen::VectorXd degree = a_tilde.rowwise().sum();
  const Eigen::VectorXd oracle = degree.cwiseInverse().asDiagonal() * (a_tilde * f);
  EXPECT_LE((graph_encode(sub, f) - oracle).cwiseAbs().maxCoeff(), 1e-15);
  // Center has two incident edges: 1/3. Each edge touches the center: 1/3.
  EXPECT_DOUBLE_EQ(oracle(0), 1.0 / 3.0);
}

TEST(GraphEncode, UniformFixedPointAndLinearity) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto kg = testing::random_kg(rng, 20, 5, 30);
    const auto sub = k_hop_subgraph(kg, EntityId{static_cast<std::int32_t>(trial % kg.entity_count())}, 2);
    const auto m = static_cast<Eigen::Index>(sub.index_size());
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
    EXPECT_EQ(graph_encode(sub, ones), ones);
    Eigen::VectorXd f(m), g(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      f(i) = n(rng);
      g(i) = n(rng);
    }
    const double alpha = n(rng), beta = n(rng);
    const Eigen::VectorXd lhs = graph_encode(sub, alpha * f + beta * g);
    const Eigen::VectorXd rhs = alpha * graph_encode(sub, f) + beta * graph_encode(sub, g);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(GraphEncode, RejectsWrongLength) {
  const auto kg = hand_kg();
  const auto sub = k_hop_subgraph(kg, kg.entity("m"), 1);
  EXPECT_THROW(graph_encode(sub, Eigen::VectorXd::Ones(2)), ContractError);
}

TEST(ProjectGate, MasksRelationsOutsideTheSubgraph) {
  KnowledgeGraph kg;
  kg.add_triple("avatar", "directed_by", "james_cameron");
  kg.add_triple("titanic", "rating", "7.9");
  kg.add_triple("italy", "coach", "roberto_mancini");
  const Vocabulary vocab = build_vocab(std::vector<Tokens>{{"who", "directed", "avatar"}}, kg);
  const auto sub = k_hop_subgraph(kg, kg.entity("avatar"), 2);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(sub.index_size()), 0.7);
  const auto gate = project_gate(g, sub, kg, vocab);
  EXPECT_DOUBLE_EQ(gate(vocab.relation_token_id(kg.relation("directed_by"))), 0.7);
  EXPECT_EQ(gate(vocab.relation_token_id(kg.relation("rating"))), 0.0);
  EXPECT_EQ(gate(vocab.relation_token_id(kg.relation("coach"))), 0.0);
  for (std::size_t i = 0; i < vocab.word_count(); ++i) EXPECT_EQ(gate(static_cast<Eigen::Index>(i)), 1.0);
}

TEST(ProjectGate, EmptySubgraphAndNegativeScores) {
  KnowledgeGraph kg;
  kg.add_triple("a", "r1", "b");
  kg.add_triple("c", "r2", "d");
  const Vocabulary vocab = build_vocab(std::vector<Tokens>{{"hello"}}, kg);
  const auto alone = k_hop_subgraph(kg, kg.entity("a"), 0);
  const auto gate = project_gate(Eigen::VectorXd::Ones(1), alone, kg, vocab);
  EXPECT_EQ(gate.tail(2).norm(), 0.0);
  EXPECT_EQ(gate.head(static_cast<Eigen::Index>(vocab.word_count())).minCoeff(), 1.0);
  const auto sub = k_hop_subgraph(kg, kg.entity("a"), 1);
  const auto clamped = project_gate(Eigen::VectorXd::Constant(3, -0.4), sub, kg, vocab);
  EXPECT_EQ(clamped(vocab.relation_token_id(kg.relation("r1"))), 0.0);
}

TEST(ProjectGate, NonzeroPositionsAreTheSubgraphRelations) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> pos(0.05, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto kg = testing::random_kg(rng, 25, 10, 30);
    const Vocabulary vocab = build_vocab(std::vector<Tokens>{{"w"}}, kg);
    const auto sub = k_hop_subgraph(kg, EntityId{0}, 2);
    Eigen::VectorXd g(static_cast<Eigen::Index>(sub.index_size()));
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = pos(rng);
    const auto gate = project_gate(g, sub, kg, vocab);
    std::set<std::int32_t> nonzero, expected;
    for (std::size_t id = vocab.word_count(); id < vocab.size(); ++id)
      if (gate(static_cast<Eigen::Index>(id)) != 0.0) nonzero.insert(vocab.relation_of(static_cast<int>(id)).value);
    for (const auto& t : sub.edge_ids) expected.insert(kg.triple(t).relation.value);
    EXPECT_EQ(nonzero, expected);
  }
}

// ---------------------------------------------------------------------------

TEST(RelationLink, SingleRelationRanksFirst) {
  KnowledgeGraph kg;
  kg.add_triple("a", "only", "b");
  const auto ranked = relation_link({"anything"}, kg, kg.entity("a"), 2, hand_table());
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(kg.label(ranked[0].relation), "only");
}

TEST(RelationLink, DirectorAndRatingQueryOnAvatar) {
  const auto& kg = *fixture_kg();
  const Tokens q = text::tokenize("who is the director of avatar and how was it rated");
  const auto ranked = relation_link(q, kg, kg.entity("avatar"), 2, *fixture_embeddings());
  ASSERT_GE(ranked.size(), 3u);
  const std::set<std::string> top2{kg.label(ranked[0].relation), kg.label(ranked[1].relation)};
  EXPECT_EQ(top2, (std::set<std::string>{"directed_by", "rating"}));
  EXPECT_GT(ranked[1].score, ranked[2].score);
}

TEST(RelationLink, RankingInvariantToQueryScale) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 25; ++trial) {
    const auto kg = testing::random_kg(rng, 15, 6, 25);
    auto random_vec = [&] {
      Eigen::VectorXd v(8);
      for (int i = 0; i < 8; ++i) v(i) = n(rng);
      return v;
    };
    StaticEmbeddings base(8), scaled(8);
    const Eigen::VectorXd q = random_vec();
    const double c = scale(rng);
    base.add("query_word", q);
    scaled.add("query_word", c * q);
    for (std::size_t i = 0; i < kg.entity_count(); ++i) {
      const auto v = random_vec();
      base.add(kg.label(EntityId{static_cast<std::int32_t>(i)}), v);
      scaled.add(kg.label(EntityId{static_cast<std::int32_t>(i)}), v);
    }
    for (std::size_t r = 0; r < kg.relation_count(); ++r) {
      const auto v = random_vec();
      base.add(kg.label(RelationId{static_cast<std::int32_t>(r)}), v);
      scaled.add(kg.label(RelationId{static_cast<std::int32_t>(r)}), v);
    }
    const auto a = relation_link({"query_word"}, kg, EntityId{0}, 2, base);
    const auto b = relation_link({"query_word"}, kg, EntityId{0}, 2, scaled);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].relation, b[i].relation);
  }
}

TEST(RelationLink, LaplacianBeatsSimilarityBaseline) {
  const KnowledgeGraph kg = load_kg(testing::data_path("linking/kg.tsv"));
  const StaticEmbeddings emb = load_embeddings(testing::data_path("linking/embeddings.txt"));
  const auto rows = load_relation_link_tsv(testing::data_path("linking/questions.tsv"));
  ASSERT_EQ(rows.size(), 200u);
  const auto lap = relation_link_accuracy(
      [&](const Tokens& q, EntityId e) { return relation_link(q, kg, e, 2, emb); }, kg, rows);
  const auto base = relation_link_accuracy(
      [&](const Tokens& q, EntityId e) { return similarity_link(q, kg, e, 2, emb); }, kg, rows);
  EXPECT_EQ(lap.total, 200u);
  EXPECT_EQ(lap.missing_entity, 0u);
  EXPECT_GT(lap.accuracy, base.accuracy);
}

}  // namespace
}  // namespace kgirnet
