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
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "kgirnet/error.hpp"
#include "kgirnet/kg_store.hpp"
#include "kgirnet/text.hpp"

namespace kgirnet {

using text::Tokens;

enum class Speaker { user, system };
enum class Domain { in_car, soccer };

inline std::string to_string(Domain d) { return d == Domain::in_car ? "in-car" : "soccer"; }
inline std::string to_string(Speaker s) { return s == Speaker::user ? "user" : "system"; }

inline Domain parse_domain(std::string_view s) {
  if (s == "in-car" || s == "incar" || s == "in_car") return Domain::in_car;
  if (s == "soccer") return Domain::soccer;
  throw ParseError("unknown domain '" + std::string(s) + "'");
}

struct Turn {
  Speaker speaker = Speaker::user;
  Tokens tokens;
  std::optional<EntityId> gold_entity;
  std::vector<RelationId> gold_relations;  // ascending
};

struct Dialogue {
  std::string id;
  Domain domain = Domain::in_car;
  std::vector<Turn> turns;
};

inline constexpr const char* kPad = "<PAD>";
inline constexpr const char* kUnk = "<UNK>";
inline constexpr const char* kSos = "<SOS>";
inline constexpr const char* kEos = "<EOS>";
inline constexpr const char* kEou = "<EOU>";
inline constexpr const char* kRelationPrefix = "r:";

inline std::string relation_token(const KnowledgeGraph& kg, RelationId r) {
  return kRelationPrefix + kg.label(r);
}

inline bool is_relation_token(std::string_view tok) {
  return tok.size() > 2 && text::starts_with(tok, kRelationPrefix);
}

// ---------------------------------------------------------------------------
// Corpus loading

namespace detail {

inline Dialogue parse_dialogue(const nlohmann::json& doc, const KnowledgeGraph& kg) {
  const std::string id = doc.contains("id") && doc["id"].is_string() ? doc["id"].get<std::string>()
                                                                     : std::string("<missing id>");
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("dialogue '" + id + "': " + why);
  };
  if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string())
    throw fail("missing string field 'id'");
  if (!doc.contains("turns") || !doc["turns"].is_array() || doc["turns"].empty())
    throw fail("'turns' must be a nonempty array");

  Dialogue d;
  d.id = id;
  if (doc.contains("domain")) {
    if (!doc["domain"].is_string()) throw fail("'domain' must be a string");
    try {
      d.domain = parse_domain(doc["domain"].get<std::string>());
    } catch (const ParseError& e) {
      throw fail(e.what());
    }
  }
  for (const auto& jt : doc["turns"]) {
    if (!jt.is_object() || !jt.contains("speaker") || !jt["speaker"].is_string() ||
        !jt.contains("text") || !jt["text"].is_string())
      throw fail("each turn needs string fields 'speaker' and 'text'");
    Turn t;
    const auto speaker = jt["speaker"].get<std::string>();
    if (speaker == "user" || speaker == "driver")
      t.speaker = Speaker::user;
    else if (speaker == "system" || speaker == "assistant")
      t.speaker = Speaker::system;
    else
      throw fail("unknown speaker '" + speaker + "'");
    t.tokens = text::tokenize(jt["text"].get<std::string>());
    if (jt.contains("entity") && !jt["entity"].is_null()) {
      if (!jt["entity"].is_string()) throw fail("'entity' must be a string or null");
      auto e = kg.find_entity(jt["entity"].get<std::string>());
      if (!e) throw fail("entity '" + jt["entity"].get<std::string>() + "' is not in the KG");
      t.gold_entity = *e;
    }
    if (jt.contains("relations") && !jt["relations"].is_null()) {
      if (!jt["relations"].is_array()) throw fail("'relations' must be an array");
      std::set<RelationId> rels;
      for (const auto& jr : jt["relations"]) {
        if (!jr.is_string()) throw fail("relation labels must be strings");
        auto r = kg.find_relation(jr.get<std::string>());
        if (!r) throw fail("relation '" + jr.get<std::string>() + "' is not in the KG");
        rels.insert(*r);
      }
      t.gold_relations.assign(rels.begin(), rels.end());
    }
    d.turns.push_back(std::move(t));
  }
  for (std::size_t i = 1; i < d.turns.size(); ++i)
    if (d.turns[i].speaker == d.turns[i - 1].speaker) throw fail("speakers must alternate");
  return d;
}

inline bool has_grounded_system_turn(const Dialogue& d) {
  return std::any_of(d.turns.begin(), d.turns.end(), [](const Turn& t) {
    return t.speaker == Speaker::system && !t.gold_relations.empty();
  });
}

}  // namespace detail

/// Parse a corpus stream: either one JSON dialogue per line or a single JSON
/// array of dialogues. In-car dialogues with no KG-grounded system turn are
/// dropped (scheduling-only conversations carry no KG facts).
inline std::vector<Dialogue> parse_corpus(std::istream& in, Domain domain, const KnowledgeGraph& kg) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  const auto first = content.find_first_not_of(" \t\r\n");

  std::vector<nlohmann::json> docs;
  try {
    if (first != std::string::npos && content[first] == '[') {
      for (auto& d : nlohmann::json::parse(content)) docs.push_back(std::move(d));
    } else {
      std::istringstream lines(content);
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(lines, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
          docs.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
          throw ParseError("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
      }
    }
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("corpus: ") + e.what());
  }

  std::vector<Dialogue> out;
  for (const auto& doc : docs) {
    Dialogue d = detail::parse_dialogue(doc, kg);
    if (doc.contains("domain") && d.domain != domain)
      throw ParseError("dialogue '" + d.id + "': domain is " + to_string(d.domain) + ", expected " +
                       to_string(domain));
    d.domain = domain;
    if (domain == Domain::in_car && !detail::has_grounded_system_turn(d)) continue;
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<Dialogue> load_corpus(const std::string& path, Domain domain,
                                         const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus '" + path + "'");
  return parse_corpus(in, domain, kg);
}

/// Dialogue, utterance and KG-grounded question counts.
/// An utterance is one (user query, system response) exchange.
struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  std::size_t kg_grounded = 0;
  double kg_grounded_percent() const {
    return utterances ? 100.0 * static_cast<double>(kg_grounded) / static_cast<double>(utterances) : 0.0;
  }
};

inline CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues) {
  CorpusStats s;
  s.dialogues = dialogues.size();
  for (const auto& d : dialogues)
    for (std::size_t i = 1; i < d.turns.size(); ++i)
      if (d.turns[i].speaker == Speaker::system && d.turns[i - 1].speaker == Speaker::user) {
        ++s.utterances;
        if (!d.turns[i].gold_relations.empty()) ++s.kg_grounded;
      }
  return s;
}

// ---------------------------------------------------------------------------
// Delexicalization

/// Replace every maximal span that spells an object of a fact (e, r, o) by the
/// single token "r:<label(r)>". Both the spaced surface form ("james cameron")
/// and the raw underscore label ("james_cameron") match. When two relations
/// share an object label, a relation in `gold_relations` wins, then the lowest id.
inline Tokens delexicalize(const Tokens& response, EntityId e, const KnowledgeGraph& kg,
                           const std::vector<RelationId>& gold_relations = {}) {
  std::map<Tokens, std::vector<RelationId>> forms;
  std::size_t longest = 0;
  for (RelationId r : kg.outgoing_relations(e)) {
    for (EntityId o : kg.objects(e, r)) {
      const auto& label = kg.label(o);
      for (Tokens form : {text::label_tokens(label), Tokens{label}}) {
        if (form.empty()) continue;
        longest = std::max(longest, form.size());
        auto& rels = forms[form];
        if (std::find(rels.begin(), rels.end(), r) == rels.end()) rels.push_back(r);
      }
    }
  }

  Tokens out;
  for (std::size_t i = 0; i < response.size();) {
    const std::vector<RelationId>* match = nullptr;
    std::size_t match_len = 0;
    for (std::size_t len = std::min(longest, response.size() - i); len >= 1; --len) {
      Tokens span(response.begin() + static_cast<std::ptrdiff_t>(i),
                  response.begin() + static_cast<std::ptrdiff_t>(i + len));
      if (auto it = forms.find(span); it != forms.end()) {
        match = &it->second;
        match_len = len;
        break;
      }
    }
    if (!match) {
      out.push_back(response[i++]);
      continue;
    }
    std::vector<RelationId> rels = *match;
    std::sort(rels.begin(), rels.end());
    RelationId chosen = rels.front();
    if (rels.size() > 1) {
      for (RelationId r : rels)
        if (std::binary_search(gold_relations.begin(), gold_relations.end(), r)) {
          chosen = r;
          break;
        }
      spdlog::debug("delexicalize: ambiguous span at {} resolved to {}", i, kg.label(chosen));
    }
    out.push_back(relation_token(kg, chosen));
    i += match_len;
  }
  return out;
}

struct Relexicalized {
  Tokens tokens;
  std::vector<std::string> unresolved;  // relation tokens with no KG object
  std::vector<std::string> objects;     // surface labels that were substituted
};

/// Replace each relation token by the objects of (e, r, *). Several objects
/// are emitted alphabetically with "," between them. Tokens whose lookup is
/// empty stay verbatim and are reported in `unresolved`.
inline Relexicalized relexicalize(const Tokens& response, EntityId e, const KnowledgeGraph& kg) {
  Relexicalized out;
  for (const auto& tok : response) {
    if (!is_relation_token(tok)) {
      out.tokens.push_back(tok);
      continue;
    }
    std::vector<std::string> objects;
    if (auto r = kg.find_relation(tok.substr(2))) objects = lookup(kg, e, *r);
    if (objects.empty()) {
      out.tokens.push_back(tok);
      out.unresolved.push_back(tok);
      continue;
    }
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (i) out.tokens.emplace_back(",");
      for (auto& t : text::tokenize(objects[i])) out.tokens.push_back(std::move(t));
      out.objects.push_back(objects[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

/// Output inventory: word segment (specials first) followed by one relation
/// token per KG relation, in relation-id order.
class Vocabulary {
 public:
  static const std::vector<std::string>& specials() {
    static const std::vector<std::string> s{kPad, kUnk, kSos, kEos, kEou};
    return s;
  }
  static constexpr int pad_id = 0;
  static constexpr int unk_id = 1;
  static constexpr int sos_id = 2;
  static constexpr int eos_id = 3;
  static constexpr int eou_id = 4;

  Vocabulary() : Vocabulary(std::vector<std::string>{}, std::vector<std::string>{}) {}

  /// `words` excludes specials; `relation_tokens` are full "r:..." strings.
  Vocabulary(const std::vector<std::string>& words, const std::vector<std::string>& relation_tokens) {
    for (const auto& s : specials()) add(s);
    for (const auto& w : words) {
      require(!is_relation_token(w), "word segment cannot contain relation token " + w);
      add(w);
    }
    word_count_ = tokens_.size();
    for (const auto& r : relation_tokens) {
      require(is_relation_token(r), "relation segment token must start with r: (" + r + ")");
      add(r);
    }
  }

  std::size_t size() const { return tokens_.size(); }                      // v_od
  std::size_t word_count() const { return word_count_; }                   // v_o
  std::size_t relation_count() const { return tokens_.size() - word_count_; }  // v_kg
  std::size_t relation_offset() const { return word_count_; }

  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_id : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  bool is_relation(int id) const { return static_cast<std::size_t>(id) >= word_count_; }

  /// Relation token id for relation r (relation segment is in id order).
  int relation_token_id(RelationId r) const {
    return static_cast<int>(word_count_) + r.value;
  }
  RelationId relation_of(int id) const {
    require(is_relation(id), "token id is not a relation token");
    return RelationId{id - static_cast<int>(word_count_)};
  }

  std::vector<int> encode(const Tokens& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }
  Tokens decode(const std::vector<int>& ids) const {
    Tokens out;
    for (int i : ids) out.push_back(token(i));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["words"] = std::vector<std::string>(tokens_.begin() + static_cast<std::ptrdiff_t>(specials().size()),
                                          tokens_.begin() + static_cast<std::ptrdiff_t>(word_count_));
    j["relations"] = std::vector<std::string>(tokens_.begin() + static_cast<std::ptrdiff_t>(word_count_),
                                              tokens_.end());
    return j;
  }
  static Vocabulary from_json(const nlohmann::json& j) {
    return Vocabulary(j.at("words").get<std::vector<std::string>>(),
                      j.at("relations").get<std::vector<std::string>>());
  }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_ && word_count_ == other.word_count_; }

 private:
  void add(const std::string& tok) {
    require(index_.try_emplace(tok, static_cast<int>(tokens_.size())).second,
            "duplicate vocabulary token " + tok);
    tokens_.push_back(tok);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::size_t word_count_ = 0;
};

/// Word segment: tokens of all turns with frequency >= min_freq, most
/// frequent first (ties alphabetical). Relation segment: every KG relation.
inline Vocabulary build_vocab(const std::vector<Tokens>& sentences, const KnowledgeGraph& kg,
                              std::size_t min_freq = 1) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : sentences)
    for (const auto& t : s)
      if (!is_relation_token(t)) ++freq[t];
  for (const auto& sp : Vocabulary::specials()) freq.erase(sp);

  std::vector<std::pair<std::string, std::size_t>> words(freq.begin(), freq.end());
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  for (auto& [w, n] : words)
    if (n >= min_freq) kept.push_back(w);

  std::vector<std::string> relations;
  for (std::size_t r = 0; r < kg.relation_count(); ++r)
    relations.push_back(relation_token(kg, RelationId{static_cast<std::int32_t>(r)}));
  return Vocabulary(kept, relations);
}

inline Vocabulary build_vocab(const std::vector<Dialogue>& dialogues, const KnowledgeGraph& kg,
                              std::size_t min_freq = 1) {
  std::vector<Tokens> sentences;
  for (const auto& d : dialogues)
    for (const auto& t : d.turns) sentences.push_back(t.tokens);
  return build_vocab(sentences, kg, min_freq);
}

/// Previous utterances joined by <EOU>, query last; keeps only the most
/// recent `max_len` tokens.
inline Tokens build_context(const std::vector<Tokens>& history, const Tokens& query,
                            std::size_t max_len = 100) {
  Tokens out;
  for (const auto& utt : history) {
    out.insert(out.end(), utt.begin(), utt.end());
    out.emplace_back(kEou);
  }
  out.insert(out.end(), query.begin(), query.end());
  if (out.size() > max_len) out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(max_len));
  return out;
}

// ---------------------------------------------------------------------------
// Training examples

/// One (context, query) -> response exchange.
struct Example {
  std::string dialogue_id;
  std::vector<Tokens> history;
  Tokens query;
  Tokens context;  // build_context(history, query)
  std::optional<EntityId> entity;
  std::vector<RelationId> relations;
  Tokens reference;  // surface system response
  Tokens target;     // decoder target (intermediate form when delexicalized)
};

inline std::vector<Example> make_examples(const std::vector<Dialogue>& dialogues, const KnowledgeGraph& kg,
                                          bool intermediate = true, std::size_t max_context = 100) {
  std::vector<Example> out;
  for (const auto& d : dialogues) {
    for (std::size_t i = 1; i < d.turns.size(); ++i) {
      const Turn& sys = d.turns[i];
      const Turn& usr = d.turns[i - 1];
      if (sys.speaker != Speaker::system || usr.speaker != Speaker::user) continue;
      Example ex;
      ex.dialogue_id = d.id;
      for (std::size_t h = 0; h + 1 < i; ++h) ex.history.push_back(d.turns[h].tokens);
      ex.query = usr.tokens;
      ex.context = build_context(ex.history, ex.query, max_context);
      ex.entity = sys.gold_entity ? sys.gold_entity : usr.gold_entity;
      ex.relations = sys.gold_relations;
      ex.reference = sys.tokens;
      ex.target = intermediate && ex.entity ? delexicalize(sys.tokens, *ex.entity, kg, sys.gold_relations)
                                            : sys.tokens;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace kgirnet
