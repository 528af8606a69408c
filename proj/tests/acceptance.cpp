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


// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "kgirnet/evaluation.hpp"
#include "kgirnet/training.hpp"
#include "test_support.hpp"

namespace {

using namespace kgirnet;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome fixed_point() {
  std::mt19937_64 rng(17);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto kg = testing::random_kg(rng, 20, 5, 30);
    const auto sub = k_hop_subgraph(kg, EntityId{static_cast<std::int32_t>(trial % kg.entity_count())}, 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sub.index_size()));
    worst = std::max(worst, (graph_encode(sub, ones) - ones).cwiseAbs().maxCoeff());
  }
  const double s = seconds_since(t0);
  return {worst == 0.0 && s < 1.0, fmt::format("max |Z1 - 1| = {:g}, {:.3f} s for 100 graphs", worst, s)};
}

Outcome linearity() {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto kg = testing::random_kg(rng, 20, 5, 30);
    const auto sub = k_hop_subgraph(kg, EntityId{static_cast<std::int32_t>(trial % kg.entity_count())}, 2);
    const auto m = static_cast<Eigen::Index>(sub.index_size());
    Eigen::VectorXd f(m), g(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      f(i) = n(rng);
      g(i) = n(rng);
    }
    const double a = n(rng), b = n(rng);
    const Eigen::VectorXd d = graph_encode(sub, a * f + b * g) - (a * graph_encode(sub, f) + b * graph_encode(sub, g));
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-9, fmt::format("max deviation {:.3g} (tol 1e-9)", worst)};
}

Outcome gate_soundness() {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  auto kg = std::make_shared<const KnowledgeGraph>(testing::random_kg(rng, 60, 10, 70));
  auto emb = std::make_shared<StaticEmbeddings>(6);
  std::vector<std::string> words{"who", "is", "what", "the"};
  for (std::size_t i = 0; i < kg->entity_count(); ++i) words.push_back(kg->label(EntityId{static_cast<std::int32_t>(i)}));
  for (std::size_t r = 0; r < kg->relation_count(); ++r) words.push_back(kg->label(RelationId{static_cast<std::int32_t>(r)}));
  for (const auto& w : words) {
    Eigen::VectorXd v(6);
    for (int i = 0; i < 6; ++i) v(i) = n(rng);
    emb->add(w, v);
  }
  std::vector<std::string> rel_tokens;
  for (std::size_t r = 0; r < kg->relation_count(); ++r)
    rel_tokens.push_back(relation_token(*kg, RelationId{static_cast<std::int32_t>(r)}));

  std::size_t responses = 0, emitted = 0, violations = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig cfg = testing::tiny_config(EncoderKind::static_embeddings, EntityHeadKind::linear);
    cfg.k = 2;
    KgirNet model(cfg, kg, Vocabulary({"who", "is", "what", "the"}, rel_tokens), emb, EncoderInputs{words, {}}, seed);
    model.params().at("decoder.output.bias").value.rightCols(static_cast<Eigen::Index>(rel_tokens.size())).setConstant(4.0);
    for (int q = 0; q < 100; ++q) {
      Tokens query{words[rng() % 4], words[rng() % 4], words[4 + rng() % kg->entity_count()]};
      const Response r = model.generate({}, query);
      ++responses;
      const auto allowed_list = subgraph_relations(*kg, k_hop_subgraph(*kg, r.entity, 2));
      const std::set<RelationId> allowed(allowed_list.begin(), allowed_list.end());
      const VocabGate gate = model.gate_for(query, r.entity);
      for (RelationId rel : r.relations) {
        ++emitted;
        if (!allowed.count(rel) || gate(model.vocab().relation_token_id(rel)) <= 0.0) ++violations;
      }
    }
  }
  return {violations == 0 && emitted > 0,
          fmt::format("{} responses, {} relation tokens emitted, {} outside the 2-hop sub-graph", responses, emitted,
                      violations)};
}

Outcome beam_exhaustive() {
  int mismatches = 0, greedy_mismatches = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const testing::ToyModel m{seed, 5};
    const auto [tokens, lp] = testing::exhaustive_best(m, 3, 4);
    const auto beam = beam_search(m, 125, 3, 4);
    if (beam.unfinished || beam.best.tokens != tokens || std::abs(beam.best.log_prob - lp) > 1e-12) ++mismatches;
    const auto narrow = beam_search(m, 1, 3, 4);
    if (narrow.best.tokens != greedy_search(m, 3, 4).tokens) ++greedy_mismatches;
  }
  return {mismatches == 0 && greedy_mismatches == 0,
          fmt::format("{} / 50 exhaustive mismatches, {} / 50 greedy mismatches", mismatches, greedy_mismatches)};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(101);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    LabelSet p, g;
    for (int k = static_cast<int>(rng() % 6); k > 0; --k) p.insert("o" + std::to_string(rng() % 8));
    for (int k = static_cast<int>(rng() % 6); k > 0; --k) g.insert("o" + std::to_string(rng() % 8));
    int hit = 0;
    for (const auto& a : p)
      for (const auto& b : g) hit += a == b;
    const double oracle = p.empty() && g.empty() ? 1.0 : hit ? 2.0 * hit / double(p.size() + g.size()) : 0.0;
    if (std::abs(entity_f1(p, g).f1 - oracle) > 1e-12) ++bad;
  }
  const Tokens c = text::tokenize("your doctorappointment is on friday at 11am");
  const double self = bleu({c}, {c});
  return {bad == 0 && std::abs(self - 100.0) < 1e-9,
          fmt::format("{} / 100 F1 mismatches, BLEU(c, c) = {:.6f}", bad, self)};
}

Outcome gradients() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (auto enc : {EncoderKind::static_embeddings, EncoderKind::transformer})
    for (auto head : {EntityHeadKind::linear, EntityHeadKind::cnn}) {
      auto model = testing::tiny_model(enc, head);
      const auto r = testing::gradient_check(*model, testing::tiny_example(), 8, 1e-4, 1e-5);
      worst = std::max(worst, r.max_relative_error);
      checked += r.checked;
    }
  return {worst <= 1e-4 && checked > 0, fmt::format("max relative error {:.3g} over {} coordinates", worst, checked)};
}

Outcome overfit() {
  TrainConfig cfg;
  cfg.preset = "kgirnet_nb";
  apply_preset(cfg.model, cfg.preset);
  cfg.batch_size = 8;
  cfg.lr_encoder = 1e-3;
  cfg.lr_decoder = 3e-3;
  cfg.max_steps = 300;
  cfg.epochs = 1000;
  cfg.eval_every = 1000;
  cfg.patience = 0;
  const auto examples = testing::fixture_examples();
  const auto t0 = Clock::now();
  auto model = build_model(cfg, testing::fixture_kg(), testing::fixture_embeddings(), examples);
  const double before = batch_loss(*model, examples);
  const auto result = train(*model, cfg, examples, {});
  const double after = batch_loss(*model, examples);
  const double f1 = evaluate(*model, examples).entity_f1;
  const double s = seconds_since(t0);
  const double reduction = 1.0 - after / before;
  return {result.steps <= 300 && f1 >= 90.0 && reduction >= 0.9 && s <= 600.0,
          fmt::format("{} steps, loss {:.4f} -> {:.4f} ({:.1f}% lower), entity F1 {:.1f}, {:.0f} s", result.steps,
                      before, after, 100.0 * reduction, f1, s)};
}

Outcome linking() {
  const KnowledgeGraph kg = load_kg(testing::data_path("linking/kg.tsv"));
  const StaticEmbeddings emb = load_embeddings(testing::data_path("linking/embeddings.txt"));
  const auto rows = load_relation_link_tsv(testing::data_path("linking/questions.tsv"));
  const auto lap = relation_link_accuracy(
      [&](const Tokens& q, EntityId e) { return relation_link(q, kg, e, 2, emb); }, kg, rows);
  const auto base = relation_link_accuracy(
      [&](const Tokens& q, EntityId e) { return similarity_link(q, kg, e, 2, emb); }, kg, rows);
  return {lap.accuracy > base.accuracy,
          fmt::format("propagated {:.3f} vs similarity {:.3f} on {} questions", lap.accuracy, base.accuracy, lap.total)};
}

Outcome roundtrip() {
  std::mt19937_64 rng(31);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto c = testing::synthesize_roundtrip_case(rng);
    if (relexicalize(delexicalize(c.response, c.entity, c.kg), c.entity, c.kg).tokens != c.response) ++bad;
  }
  return {bad == 0, fmt::format("{} / 100 responses changed", bad)};
}

Outcome corpus_counts() {
  const auto s = corpus_stats(load_corpus(testing::data_path("stats.jsonl"), Domain::in_car, *testing::fixture_kg()));
  return {s.dialogues == 3 && s.utterances == 6 && s.kg_grounded == 4,
          fmt::format("dialogues {}, utterances {}, KG-grounded {}", s.dialogues, s.utterances, s.kg_grounded)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"graph-encoding-fixed-point", fixed_point},
      {"graph-encoding-linearity", linearity},
      {"gate-soundness", gate_soundness},
      {"beam-search-exhaustive-and-greedy", beam_exhaustive},
      {"entity-f1-and-bleu-oracles", metric_oracles},
      {"gradient-check", gradients},
      {"overfit-smoke", overfit},
      {"relation-linking-beats-similarity", linking},
      {"delex-relex-roundtrip", roundtrip},
      {"corpus-statistics", corpus_counts},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
