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
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgirnet/dataset.hpp"
#include "kgirnet/graph_laplacian.hpp"
#include "kgirnet/kg_store.hpp"
#include "kgirnet/model.hpp"

namespace kgirnet {

using LabelSet = std::set<std::string>;

// ---------------------------------------------------------------------------
// Entity F1

struct SetScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Set precision/recall/F1. Both sets empty scores 1 by convention.
inline SetScore entity_f1(const LabelSet& predicted, const LabelSet& gold) {
  if (predicted.empty() && gold.empty()) return {1.0, 1.0, 1.0};
  std::size_t hit = 0;
  for (const auto& p : predicted) hit += gold.count(p);
  SetScore s;
  s.precision = predicted.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(predicted.size());
  s.recall = gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

/// Mean per-question F1 over questions with a non-empty gold set, in [0, 1].
inline double mean_entity_f1(const std::vector<std::pair<LabelSet, LabelSet>>& pairs) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [pred, gold] : pairs) {
    if (gold.empty()) continue;
    total += entity_f1(pred, gold).f1;
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

/// KG node labels mentioned in `tokens`, by longest match against the
/// sub-graph's node labels (spaced or underscore form). The center entity is
/// not an answer object and is skipped.
inline LabelSet extract_objects(const Tokens& tokens, const KnowledgeGraph& kg, const SubGraph& sub) {
  std::map<Tokens, std::string> forms;
  std::size_t longest = 0;
  for (EntityId e : sub.node_ids) {
    if (e == sub.center) continue;
    const auto& label = kg.label(e);
    for (Tokens form : {text::label_tokens(label), Tokens{label}}) {
      if (form.empty()) continue;
      longest = std::max(longest, form.size());
      forms.emplace(std::move(form), label);
    }
  }
  LabelSet out;
  for (std::size_t i = 0; i < tokens.size();) {
    std::size_t step = 1;
    for (std::size_t len = std::min(longest, tokens.size() - i); len >= 1; --len) {
      Tokens span(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
      if (auto it = forms.find(span); it != forms.end()) {
        out.insert(it->second);
        step = len;
        break;
      }
    }
    i += step;
  }
  return out;
}

// ---------------------------------------------------------------------------
// BLEU

/// Corpus BLEU (x100) with clipped n-gram precision up to order 4 and the
/// brevity penalty. Orders for which the candidate corpus has no n-grams are
/// left out of the geometric mean.
inline double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int max_order = 4) {
  require(candidates.size() == references.size(), "bleu: candidate/reference count mismatch");
  std::vector<double> matches(static_cast<std::size_t>(max_order), 0.0);
  std::vector<double> totals(static_cast<std::size_t>(max_order), 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& c = candidates[s];
    const auto& r = references[s];
    cand_len += static_cast<double>(c.size());
    ref_len += static_cast<double>(r.size());
    for (int n = 1; n <= max_order; ++n) {
      std::map<Tokens, int> ref_counts, cand_counts;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= r.size(); ++i)
        ++ref_counts[Tokens(r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(i) + n)];
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= c.size(); ++i)
        ++cand_counts[Tokens(c.begin() + static_cast<std::ptrdiff_t>(i), c.begin() + static_cast<std::ptrdiff_t>(i) + n)];
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        matches[static_cast<std::size_t>(n - 1)] += std::min(count, it == ref_counts.end() ? 0 : it->second);
        totals[static_cast<std::size_t>(n - 1)] += count;
      }
    }
  }
  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < max_order; ++n) {
    if (totals[static_cast<std::size_t>(n)] == 0.0) continue;
    if (matches[static_cast<std::size_t>(n)] == 0.0) return 0.0;
    log_sum += std::log(matches[static_cast<std::size_t>(n)] / totals[static_cast<std::size_t>(n)]);
    ++orders;
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return 100.0 * bp * std::exp(log_sum / orders);
}

// ---------------------------------------------------------------------------
// METEOR (exact-match stage)

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

/// Exact unigram alignment. Each candidate token takes the reference position
/// right after the previous match when it fits (extending a chunk), otherwise
/// the first unused matching position.
inline MeteorStats meteor_align(const Tokens& candidate, const Tokens& reference) {
  MeteorStats s;
  s.candidate_length = candidate.size();
  s.reference_length = reference.size();
  std::vector<bool> used(reference.size(), false);
  long prev_c = -2, prev_r = -2;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    long chosen = -1;
    const long next = prev_r + 1;
    if (prev_c == static_cast<long>(i) - 1 && next >= 0 && next < static_cast<long>(reference.size()) &&
        !used[static_cast<std::size_t>(next)] && reference[static_cast<std::size_t>(next)] == candidate[i])
      chosen = next;
    for (std::size_t j = 0; chosen < 0 && j < reference.size(); ++j)
      if (!used[j] && reference[j] == candidate[i]) chosen = static_cast<long>(j);
    if (chosen < 0) continue;
    used[static_cast<std::size_t>(chosen)] = true;
    if (!(prev_c == static_cast<long>(i) - 1 && chosen == prev_r + 1)) ++s.chunks;
    ++s.matches;
    prev_c = static_cast<long>(i);
    prev_r = chosen;
  }
  return s;
}

/// Segment METEOR in [0, 1]. A complete, single-chunk match has no
/// fragmentation penalty.
inline double meteor_segment(const Tokens& candidate, const Tokens& reference, const MeteorParams& p = {}) {
  if (candidate.empty() && reference.empty()) return 1.0;
  const MeteorStats s = meteor_align(candidate, reference);
  if (s.matches == 0) return 0.0;
  const double m = static_cast<double>(s.matches);
  const double precision = m / static_cast<double>(s.candidate_length);
  const double recall = m / static_cast<double>(s.reference_length);
  const double fmean = precision * recall / (p.alpha * precision + (1.0 - p.alpha) * recall);
  const bool perfect = s.matches == s.candidate_length && s.matches == s.reference_length && s.chunks == 1;
  const double frag = perfect ? 0.0 : static_cast<double>(s.chunks) / m;
  return fmean * (1.0 - p.gamma * std::pow(frag, p.beta));
}

/// Mean segment METEOR, x100.
inline double meteor(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                     const MeteorParams& p = {}) {
  require(candidates.size() == references.size(), "meteor: candidate/reference count mismatch");
  if (candidates.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += meteor_segment(candidates[i], references[i], p);
  return 100.0 * total / static_cast<double>(candidates.size());
}

// ---------------------------------------------------------------------------
// Relation linking accuracy

struct RelationLinkRow {
  std::string query;
  std::string entity;
  std::string relation;
};

/// TSV rows: query<TAB>entity<TAB>gold relation.
inline std::vector<RelationLinkRow> load_relation_link_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open relation-link file '" + path + "'");
  std::vector<RelationLinkRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() != 3) throw ParseError(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    rows.push_back({f[0], f[1], f[2]});
  }
  return rows;
}

struct LinkAccuracy {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t missing_entity = 0;
};

/// Fraction of rows whose top-ranked relation is the gold one. `linker` maps
/// (query tokens, entity) to a ranked relation list. Rows naming an entity
/// outside the KG count as wrong.
template <class Linker>
LinkAccuracy relation_link_accuracy(const Linker& linker, const KnowledgeGraph& kg,
                                    const std::vector<RelationLinkRow>& rows) {
  LinkAccuracy acc;
  acc.total = rows.size();
  for (const auto& row : rows) {
    const auto e = kg.find_entity(row.entity);
    if (!e) {
      ++acc.missing_entity;
      spdlog::warn("relation-link: entity '{}' not in KG; counted as incorrect", row.entity);
      continue;
    }
    const std::vector<RankedRelation> ranked = linker(text::tokenize(row.query), *e);
    if (!ranked.empty() && kg.label(ranked.front().relation) == text::normalize_label(row.relation)) ++acc.correct;
  }
  acc.accuracy = acc.total ? static_cast<double>(acc.correct) / static_cast<double>(acc.total) : 0.0;
  return acc;
}

// ---------------------------------------------------------------------------
// Dialogue evaluation

struct ExampleRecord {
  std::string dialogue_id;
  Tokens query;
  Tokens gold;
  Tokens predicted;
  Tokens intermediate;
  std::string gold_entity;
  std::string predicted_entity;
  bool kg_grounded = false;
  LabelSet gold_objects;
  LabelSet predicted_objects;
  double f1 = 0.0;
};

struct EvalReport {
  double bleu = 0.0;       // %
  double meteor = 0.0;     // %
  double entity_f1 = 0.0;  // %, mean over KG-grounded questions
  double entity_accuracy = 0.0;  // %, over examples with a gold entity
  std::size_t examples = 0;
  std::size_t kg_grounded = 0;
  std::vector<ExampleRecord> records;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["bleu"] = bleu;
    j["meteor"] = meteor;
    j["entity_f1"] = entity_f1;
    j["entity_accuracy"] = entity_accuracy;
    j["examples"] = examples;
    j["kg_grounded"] = kg_grounded;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records)
      j["records"].push_back({{"dialogue_id", r.dialogue_id},
                              {"query", text::join(r.query)},
                              {"gold", text::join(r.gold)},
                              {"predicted", text::join(r.predicted)},
                              {"intermediate", text::join(r.intermediate)},
                              {"gold_entity", r.gold_entity},
                              {"predicted_entity", r.predicted_entity},
                              {"kg_grounded", r.kg_grounded},
                              {"gold_objects", r.gold_objects},
                              {"predicted_objects", r.predicted_objects},
                              {"f1", r.f1}});
    return j;
  }
};

/// Generate a response for every example and score it. BLEU/METEOR cover all
/// examples; Entity F1 covers KG-grounded ones (gold entity and relations).
inline EvalReport evaluate(const KgirNet& model, const std::vector<Example>& examples) {
  const KnowledgeGraph& kg = model.kg();
  EvalReport report;
  std::vector<Tokens> candidates, references;
  std::vector<std::pair<LabelSet, LabelSet>> f1_pairs;
  std::size_t with_entity = 0, entity_hits = 0;
  for (const auto& ex : examples) {
    const Response r = model.generate(ex.history, ex.query);
    ExampleRecord rec;
    rec.dialogue_id = ex.dialogue_id;
    rec.query = ex.query;
    rec.gold = ex.reference;
    rec.predicted = r.surface;
    rec.intermediate = r.intermediate;
    rec.predicted_entity = kg.label(r.entity);
    if (ex.entity) {
      rec.gold_entity = kg.label(*ex.entity);
      ++with_entity;
      if (*ex.entity == r.entity) ++entity_hits;
    }
    rec.kg_grounded = ex.entity.has_value() && !ex.relations.empty();
    if (rec.kg_grounded) {
      rec.gold_objects = extract_objects(ex.reference, kg, k_hop_subgraph(kg, *ex.entity, model.config().k));
      rec.predicted_objects = extract_objects(r.surface, kg, k_hop_subgraph(kg, r.entity, model.config().k));
      rec.f1 = entity_f1(rec.predicted_objects, rec.gold_objects).f1;
      f1_pairs.emplace_back(rec.predicted_objects, rec.gold_objects);
      ++report.kg_grounded;
    }
    candidates.push_back(r.surface);
    references.push_back(ex.reference);
    report.records.push_back(std::move(rec));
  }
  report.examples = examples.size();
  report.bleu = bleu(candidates, references);
  report.meteor = meteor(candidates, references);
  report.entity_f1 = 100.0 * mean_entity_f1(f1_pairs);
  report.entity_accuracy =
      with_entity ? 100.0 * static_cast<double>(entity_hits) / static_cast<double>(with_entity) : 0.0;
  return report;
}

}  // namespace kgirnet
