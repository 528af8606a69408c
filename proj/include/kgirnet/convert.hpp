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

// Converters from source corpus layouts to the JSONL interchange format
// read by load_corpus.
//
// kvret:      JSON array of {"dialogue": [{"turn": "driver"|"assistant",
//             "data": {"utterance": ..., ["entity": ..., "relations": [...]]}}],
//             "scenario": {"uuid": ...}}
// turns-tsv:  one turn per line, dialogue_id<TAB>speaker<TAB>text
//             [<TAB>entity[<TAB>rel1,rel2]]; dialogues are contiguous.

#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgirnet/dataset.hpp"
#include "kgirnet/kg_store.hpp"

namespace kgirnet::convert {

struct RawTurn {
  std::string speaker;  // "user" | "system"
  std::string text;
  std::optional<std::string> entity;
  std::vector<std::string> relations;
};

struct RawDialogue {
  std::string id;
  std::vector<RawTurn> turns;
};

inline std::string canonical_speaker(const std::string& s, const std::string& where) {
  const std::string l = text::lower(text::trim(s));
  if (l == "user" || l == "driver") return "user";
  if (l == "system" || l == "assistant") return "system";
  throw ParseError(where + ": unknown speaker '" + s + "'");
}

/// Consecutive turns by one speaker are merged into one.
inline void append_turn(RawDialogue& d, RawTurn t) {
  if (!d.turns.empty() && d.turns.back().speaker == t.speaker) {
    RawTurn& prev = d.turns.back();
    prev.text += " " + t.text;
    if (!prev.entity) prev.entity = t.entity;
    prev.relations.insert(prev.relations.end(), t.relations.begin(), t.relations.end());
    return;
  }
  d.turns.push_back(std::move(t));
}

inline std::vector<RawDialogue> read_kvret(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("kvret: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("kvret: top level must be an array");
  std::vector<RawDialogue> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& jd = doc[i];
    RawDialogue d;
    d.id = "kvret-" + std::to_string(i);
    if (jd.contains("scenario") && jd["scenario"].contains("uuid") && jd["scenario"]["uuid"].is_string())
      d.id = jd["scenario"]["uuid"].get<std::string>();
    if (!jd.contains("dialogue") || !jd["dialogue"].is_array())
      throw ParseError("kvret dialogue '" + d.id + "': missing 'dialogue' array");
    for (const auto& jt : jd["dialogue"]) {
      if (!jt.contains("turn") || !jt.contains("data") || !jt["data"].contains("utterance"))
        throw ParseError("kvret dialogue '" + d.id + "': turn needs 'turn' and 'data.utterance'");
      RawTurn t;
      t.speaker = canonical_speaker(jt["turn"].get<std::string>(), "kvret dialogue '" + d.id + "'");
      t.text = jt["data"]["utterance"].get<std::string>();
      const auto& data = jt["data"];
      if (data.contains("entity") && data["entity"].is_string()) t.entity = data["entity"].get<std::string>();
      if (data.contains("relations") && data["relations"].is_array())
        t.relations = data["relations"].get<std::vector<std::string>>();
      append_turn(d, std::move(t));
    }
    if (!d.turns.empty()) out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<RawDialogue> read_turns_tsv(std::istream& in) {
  std::vector<RawDialogue> out;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const std::string where = "turns-tsv line " + std::to_string(lineno);
    auto f = text::split(line, '\t');
    if (f.size() < 3 || f.size() > 5) throw ParseError(where + ": expected 3 to 5 tab-separated fields");
    RawTurn t;
    t.speaker = canonical_speaker(f[1], where);
    t.text = f[2];
    if (f.size() >= 4 && !text::trim(f[3]).empty()) t.entity = std::string(text::trim(f[3]));
    if (f.size() == 5)
      for (const auto& r : text::split(f[4], ','))
        if (!text::trim(r).empty()) t.relations.emplace_back(text::trim(r));
    if (out.empty() || out.back().id != f[0]) {
      if (seen.count(f[0])) throw ParseError(where + ": dialogue '" + f[0] + "' is not contiguous");
      seen[f[0]] = out.size();
      out.push_back({f[0], {}});
    }
    append_turn(out.back(), std::move(t));
  }
  return out;
}

/// Fills in entity/relations for unannotated system turns: among the KG
/// entities mentioned so far (most recent first), the one whose objects
/// account for the most spans of the response wins. Turns with no object
/// mention stay unannotated.
inline void annotate(RawDialogue& d, const KnowledgeGraph& kg) {
  std::map<Tokens, EntityId> forms;
  std::size_t longest = 0;
  for (std::size_t i = 0; i < kg.entity_count(); ++i) {
    const EntityId e{static_cast<std::int32_t>(i)};
    Tokens f = text::label_tokens(kg.label(e));
    longest = std::max(longest, f.size());
    forms.emplace(std::move(f), e);
  }
  std::vector<EntityId> mentioned;  // most recent last
  auto scan = [&](const Tokens& toks) {
    for (std::size_t i = 0; i < toks.size();) {
      std::size_t step = 1;
      for (std::size_t len = std::min(longest, toks.size() - i); len >= 1; --len) {
        Tokens span(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i + len));
        if (auto it = forms.find(span); it != forms.end()) {
          std::erase(mentioned, it->second);
          mentioned.push_back(it->second);
          step = len;
          break;
        }
      }
      i += step;
    }
  };
  for (auto& t : d.turns) {
    const Tokens toks = text::tokenize(t.text);
    if (t.speaker == "system" && !t.entity) {
      std::optional<EntityId> best;
      std::set<RelationId> best_rels;
      std::size_t best_count = 0;
      for (auto it = mentioned.rbegin(); it != mentioned.rend(); ++it) {
        std::set<RelationId> rels;
        std::size_t count = 0;
        for (const auto& tok : delexicalize(toks, *it, kg))
          if (is_relation_token(tok)) {
            rels.insert(*kg.find_relation(tok.substr(2)));
            ++count;
          }
        if (count > best_count) {
          best = *it;
          best_rels = rels;
          best_count = count;
        }
      }
      if (best) {
        t.entity = kg.label(*best);
        for (RelationId r : best_rels) t.relations.push_back(kg.label(r));
      }
    }
    scan(toks);
  }
}

inline nlohmann::json to_interchange(const RawDialogue& d, Domain domain) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : d.turns) {
    nlohmann::json j{{"speaker", t.speaker}, {"text", t.text}};
    if (t.entity) j["entity"] = *t.entity;
    if (!t.relations.empty()) j["relations"] = t.relations;
    turns.push_back(std::move(j));
  }
  return {{"id", d.id}, {"domain", to_string(domain)}, {"turns", std::move(turns)}};
}

inline void write_jsonl(std::ostream& out, const std::vector<RawDialogue>& dialogues, Domain domain) {
  for (const auto& d : dialogues) out << to_interchange(d, domain).dump() << '\n';
}

}  // namespace kgirnet::convert
