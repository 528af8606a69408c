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
#include <compare>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgirnet/error.hpp"
#include "kgirnet/text.hpp"

namespace kgirnet {

/// Dense integer id of a KG node. Literal objects ("7.8", "friday") are nodes too.
struct EntityId {
  std::int32_t value = -1;
  auto operator<=>(const EntityId&) const = default;
};

/// Dense integer id of a relation label.
struct RelationId {
  std::int32_t value = -1;
  auto operator<=>(const RelationId&) const = default;
};

/// Index into KnowledgeGraph::triples(); one per stored fact.
struct TripleId {
  std::int32_t value = -1;
  auto operator<=>(const TripleId&) const = default;
};

struct Triple {
  EntityId subject;
  RelationId relation;
  EntityId object;
  auto operator<=>(const Triple&) const = default;
};

/// k-hop neighborhood of an entity. Nodes and edges share one index:
/// positions [0, nodes) are node_ids, [nodes, index_size) are edge_ids. Each
/// edge element is adjacent to its two endpoint nodes and nothing else.
struct SubGraph {
  EntityId center;
  int radius = 0;
  std::vector<EntityId> node_ids;
  std::vector<TripleId> edge_ids;
  std::vector<std::vector<int>> neighbors;  // adjacency list over the combined index

  std::size_t index_size() const { return node_ids.size() + edge_ids.size(); }
  std::size_t node_count() const { return node_ids.size(); }
  std::size_t edge_index(std::size_t edge) const { return node_ids.size() + edge; }

  /// Dense symmetric 0/1 adjacency matrix (no self loops).
  Eigen::MatrixXd adjacency() const {
    const auto n = static_cast<Eigen::Index>(index_size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < neighbors.size(); ++i)
      for (int j : neighbors[i]) a(static_cast<Eigen::Index>(i), j) = 1.0;
    return a;
  }
};

}  // namespace kgirnet

template <>
struct std::hash<kgirnet::EntityId> {
  std::size_t operator()(const kgirnet::EntityId& id) const noexcept {
    return std::hash<std::int32_t>{}(id.value);
  }
};
template <>
struct std::hash<kgirnet::RelationId> {
  std::size_t operator()(const kgirnet::RelationId& id) const noexcept {
    return std::hash<std::int32_t>{}(id.value);
  }
};

namespace kgirnet {

/// Labelled, undirected multi-graph of facts. Immutable once built.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  std::size_t entity_count() const { return entity_labels_.size(); }
  std::size_t relation_count() const { return relation_labels_.size(); }
  std::size_t triple_count() const { return triples_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }
  const Triple& triple(TripleId id) const { return triples_.at(static_cast<std::size_t>(id.value)); }

  const std::string& label(EntityId id) const {
    if (id.value < 0 || static_cast<std::size_t>(id.value) >= entity_labels_.size())
      throw NotFoundError("unknown entity id " + std::to_string(id.value));
    return entity_labels_[static_cast<std::size_t>(id.value)];
  }
  const std::string& label(RelationId id) const {
    if (id.value < 0 || static_cast<std::size_t>(id.value) >= relation_labels_.size())
      throw NotFoundError("unknown relation id " + std::to_string(id.value));
    return relation_labels_[static_cast<std::size_t>(id.value)];
  }

  std::optional<EntityId> find_entity(std::string_view label) const {
    auto it = entity_index_.find(text::normalize_label(label));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<RelationId> find_relation(std::string_view label) const {
    auto it = relation_index_.find(text::normalize_label(label));
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
  }
  EntityId entity(std::string_view label) const {
    if (auto id = find_entity(label)) return *id;
    throw NotFoundError("unknown entity '" + std::string(label) + "'");
  }
  RelationId relation(std::string_view label) const {
    if (auto id = find_relation(label)) return *id;
    throw NotFoundError("unknown relation '" + std::string(label) + "'");
  }

  /// Triples incident to `e` in either direction, ascending.
  const std::vector<TripleId>& incident(EntityId e) const {
    check(e);
    return incident_[static_cast<std::size_t>(e.value)];
  }

  /// Objects of (e, r, *), ascending by id.
  std::vector<EntityId> objects(EntityId e, RelationId r) const {
    check(e);
    label(r);
    std::vector<EntityId> out;
    for (TripleId t : incident(e)) {
      const Triple& tr = triple(t);
      if (tr.subject == e && tr.relation == r) out.push_back(tr.object);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Relations r with some (e, r, *) stored, ascending.
  std::vector<RelationId> outgoing_relations(EntityId e) const {
    std::set<RelationId> out;
    for (TripleId t : incident(e))
      if (triple(t).subject == e) out.insert(triple(t).relation);
    return {out.begin(), out.end()};
  }

  void check(EntityId e) const { label(e); }

  /// Builder used by the loader and tests. Labels are normalized; duplicate
  /// triples are ignored. Returns false for a duplicate.
  bool add_triple(std::string_view subject, std::string_view relation, std::string_view object) {
    const EntityId s = intern_entity(subject);
    const RelationId r = intern_relation(relation);
    const EntityId o = intern_entity(object);
    const Triple t{s, r, o};
    if (!seen_.insert(t).second) return false;
    const TripleId id{static_cast<std::int32_t>(triples_.size())};
    triples_.push_back(t);
    incident_[static_cast<std::size_t>(s.value)].push_back(id);
    if (o != s) incident_[static_cast<std::size_t>(o.value)].push_back(id);
    return true;
  }

  EntityId intern_entity(std::string_view raw) {
    auto label = text::normalize_label(raw);
    if (label.empty()) throw ParseError("empty entity label");
    auto [it, inserted] =
        entity_index_.try_emplace(label, EntityId{static_cast<std::int32_t>(entity_labels_.size())});
    if (inserted) {
      entity_labels_.push_back(label);
      incident_.emplace_back();
    }
    return it->second;
  }

  RelationId intern_relation(std::string_view raw) {
    auto label = text::normalize_label(raw);
    if (label.empty()) throw ParseError("empty relation label");
    auto [it, inserted] = relation_index_.try_emplace(
        label, RelationId{static_cast<std::int32_t>(relation_labels_.size())});
    if (inserted) relation_labels_.push_back(label);
    return it->second;
  }

 private:
  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::vector<Triple> triples_;
  std::vector<std::vector<TripleId>> incident_;
  std::set<Triple> seen_;
};

/// Parse a tab-separated triple stream: subject<TAB>relation<TAB>object per
/// line. Blank lines and lines starting with '#' are skipped.
inline KnowledgeGraph parse_kg(std::istream& in, std::string_view source = "<stream>") {
  KnowledgeGraph kg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto fields = text::split(line, '\t');
    const bool ok = fields.size() == 3 && std::all_of(fields.begin(), fields.end(), [](const auto& f) {
                      return !text::trim(f).empty();
                    });
    if (!ok)
      throw ParseError(std::string(source) + ":" + std::to_string(lineno) +
                       ": expected 3 tab-separated fields");
    kg.add_triple(fields[0], fields[1], fields[2]);
  }
  return kg;
}

inline KnowledgeGraph load_kg(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open triple file '" + path + "'");
  return parse_kg(in, path);
}

/// Triples in insertion order; parse_kg on the output rebuilds identical ids.
inline void write_kg(std::ostream& out, const KnowledgeGraph& kg) {
  for (const auto& t : kg.triples())
    out << kg.label(t.subject) << '\t' << kg.label(t.relation) << '\t' << kg.label(t.object) << '\n';
}

/// Nodes within `k` hops of `center` plus every triple whose endpoints are
/// both inside that node set. Node and edge ids are ascending.
inline SubGraph k_hop_subgraph(const KnowledgeGraph& kg, EntityId center, int k) {
  kg.check(center);
  require(k >= 0, "k_hop_subgraph: k must be non-negative");

  std::unordered_map<EntityId, int> dist{{center, 0}};
  std::vector<EntityId> frontier{center};
  for (int depth = 1; depth <= k && !frontier.empty(); ++depth) {
    std::vector<EntityId> next;
    for (EntityId e : frontier) {
      for (TripleId t : kg.incident(e)) {
        const Triple& tr = kg.triple(t);
        const EntityId other = tr.subject == e ? tr.object : tr.subject;
        if (dist.try_emplace(other, depth).second) next.push_back(other);
      }
    }
    frontier = std::move(next);
  }

  SubGraph sub;
  sub.center = center;
  sub.radius = k;
  for (const auto& [e, d] : dist) sub.node_ids.push_back(e);
  std::sort(sub.node_ids.begin(), sub.node_ids.end());

  std::set<TripleId> edges;
  for (EntityId e : sub.node_ids)
    for (TripleId t : kg.incident(e)) {
      const Triple& tr = kg.triple(t);
      if (dist.count(tr.subject) && dist.count(tr.object)) edges.insert(t);
    }
  sub.edge_ids.assign(edges.begin(), edges.end());

  std::unordered_map<EntityId, int> position;
  for (std::size_t i = 0; i < sub.node_ids.size(); ++i)
    position[sub.node_ids[i]] = static_cast<int>(i);
  sub.neighbors.assign(sub.index_size(), {});
  for (std::size_t j = 0; j < sub.edge_ids.size(); ++j) {
    const Triple& tr = kg.triple(sub.edge_ids[j]);
    const int edge = static_cast<int>(sub.edge_index(j));
    std::set<int> ends{position.at(tr.subject), position.at(tr.object)};
    for (int node : ends) {
      sub.neighbors[static_cast<std::size_t>(edge)].push_back(node);
      sub.neighbors[static_cast<std::size_t>(node)].push_back(edge);
    }
  }
  return sub;
}

/// Surface labels of every object o with (e, r, o) stored, sorted
/// alphabetically. Underscores in labels become spaces.
inline std::vector<std::string> lookup(const KnowledgeGraph& kg, EntityId e, RelationId r) {
  std::vector<std::string> out;
  for (EntityId o : kg.objects(e, r)) out.push_back(text::surface(kg.label(o)));
  std::sort(out.begin(), out.end());
  return out;
}

/// Relations carried by the sub-graph's edges, ascending, deduplicated.
inline std::vector<RelationId> subgraph_relations(const KnowledgeGraph& kg, const SubGraph& sub) {
  std::set<RelationId> out;
  for (TripleId t : sub.edge_ids) out.insert(kg.triple(t).relation);
  return {out.begin(), out.end()};
}

/// Label of element `i` of the sub-graph's combined index.
inline const std::string& element_label(const KnowledgeGraph& kg, const SubGraph& sub, std::size_t i) {
  if (i < sub.node_count()) return kg.label(sub.node_ids[i]);
  return kg.label(kg.triple(sub.edge_ids[i - sub.node_count()]).relation);
}

/// Debug dump: one line per index element, "<i> <kind> <label>: <neighbors>".
inline void write_adjacency_list(std::ostream& out, const KnowledgeGraph& kg, const SubGraph& sub) {
  out << "# center=" << kg.label(sub.center) << " k=" << sub.radius
      << " index_size=" << sub.index_size() << "\n";
  for (std::size_t i = 0; i < sub.index_size(); ++i) {
    out << i << (i < sub.node_count() ? " node " : " edge ") << element_label(kg, sub, i) << ":";
    for (int j : sub.neighbors[i]) out << ' ' << j;
    out << "\n";
  }
}

}  // namespace kgirnet
