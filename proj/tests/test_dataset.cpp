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

#include <random>
#include <set>
#include <sstream>

#include "kgirnet/dataset.hpp"
#include "test_support.hpp"

namespace kgirnet {
namespace {

using testing::fixture_kg;

std::vector<Dialogue> parse(const std::string& s, Domain d = Domain::in_car) {
  std::istringstream in(s);
  return parse_corpus(in, d, *fixture_kg());
}

TEST(Corpus, StatsFixtureCounts) {
  const auto dialogues = load_corpus(testing::data_path("stats.jsonl"), Domain::in_car, *fixture_kg());
  const auto s = corpus_stats(dialogues);
  EXPECT_EQ(s.dialogues, 3u);
  EXPECT_EQ(s.utterances, 6u);
  EXPECT_EQ(s.kg_grounded, 4u);
}

TEST(Corpus, TwoTurnDialogue) {
  const auto ds = parse(R"({"id":"x","turns":[{"speaker":"user","text":"who directed avatar ?"},)"
                        R"({"speaker":"system","text":"james cameron","entity":"avatar","relations":["directed_by"]}]})");
  ASSERT_EQ(ds.size(), 1u);
  ASSERT_EQ(ds[0].turns.size(), 2u);
  EXPECT_EQ(ds[0].turns[1].gold_entity, fixture_kg()->entity("avatar"));
  EXPECT_EQ(ds[0].turns[0].tokens, (Tokens{"who", "directed", "avatar", "?"}));
}

TEST(Corpus, ArrayLayoutAccepted) {
  const auto ds = parse(R"([{"id":"x","turns":[{"speaker":"user","text":"hi"},)"
                        R"({"speaker":"system","text":"7.8","entity":"avatar","relations":["rating"]}]}])");
  EXPECT_EQ(ds.size(), 1u);
}

TEST(Corpus, UngroundedInCarDialoguesDropped) {
  const std::string doc = R"({"id":"x","turns":[{"speaker":"user","text":"hi"},{"speaker":"system","text":"hello"}]})";
  EXPECT_TRUE(parse(doc).empty());
  EXPECT_EQ(parse(R"({"id":"x","domain":"soccer","turns":[{"speaker":"user","text":"hi"},{"speaker":"system","text":"hello"}]})",
                  Domain::soccer)
                .size(),
            1u);
}

TEST(Corpus, MalformedInputsReportTheDialogue) {
  EXPECT_THROW(parse("{not json"), ParseError);
  EXPECT_THROW(parse(R"({"turns":[]})"), ParseError);
  try {
    parse(R"({"id":"bad1","turns":[{"speaker":"user","text":"a"},{"speaker":"system","text":"b","entity":"nowhere"}]})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad1"), std::string::npos);
  }
  EXPECT_THROW(parse(R"({"id":"y","turns":[{"speaker":"user","text":"a"},{"speaker":"user","text":"b"}]})"), ParseError);
  EXPECT_THROW(parse(R"({"id":"z","domain":"soccer","turns":[{"speaker":"user","text":"a"}]})"), ParseError);
  EXPECT_THROW(load_corpus("/nonexistent.jsonl", Domain::in_car, *fixture_kg()), ParseError);
}

TEST(Corpus, LoadingIsDeterministic) {
  const auto a = load_corpus(testing::data_path("corpus.jsonl"), Domain::in_car, *fixture_kg());
  const auto b = load_corpus(testing::data_path("corpus.jsonl"), Domain::in_car, *fixture_kg());
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].turns.size(), b[i].turns.size());
    for (std::size_t t = 0; t < a[i].turns.size(); ++t) {
      EXPECT_EQ(a[i].turns[t].tokens, b[i].turns[t].tokens);
      EXPECT_EQ(a[i].turns[t].gold_entity, b[i].turns[t].gold_entity);
      EXPECT_EQ(a[i].turns[t].gold_relations, b[i].turns[t].gold_relations);
    }
  }
}

// ---------------------------------------------------------------------------

TEST(Delexicalize, ReplacesObjectSpans) {
  const auto& kg = *fixture_kg();
  EXPECT_EQ(delexicalize(text::tokenize("james cameron is the director"), kg.entity("titanic"), kg),
            (Tokens{"r:directed_by", "is", "the", "director"}));
  EXPECT_EQ(delexicalize(text::tokenize("hello there"), kg.entity("titanic"), kg), (Tokens{"hello", "there"}));
  EXPECT_EQ(delexicalize(text::tokenize("you have meeting on friday at 10am with boss"), kg.entity("meeting"), kg),
            text::tokenize("you have meeting on r:date at r:time with r:party"));
  // Underscore form matches too.
  EXPECT_EQ(delexicalize({"james_cameron"}, kg.entity("avatar"), kg), (Tokens{"r:directed_by"}));
}

TEST(Delexicalize, LeavesNonObjectTokensAlone) {
  const auto& kg = *fixture_kg();
  const Tokens in = text::tokenize("the rating of titanic is 7.9 not 7.8");
  const Tokens out = delexicalize(in, kg.entity("titanic"), kg);
  EXPECT_EQ(out, text::tokenize("the rating of titanic is r:rating not 7.8"));
}

TEST(Relexicalize, RestoresObjects) {
  const auto& kg = *fixture_kg();
  const auto r = relexicalize({"r:directed_by", "is", "the", "director"}, kg.entity("titanic"), kg);
  EXPECT_EQ(r.tokens, text::tokenize("james cameron is the director"));
  EXPECT_TRUE(r.unresolved.empty());
  EXPECT_EQ(r.objects, std::vector<std::string>{"james cameron"});
}

TEST(Relexicalize, MissingFactStaysAndIsFlagged) {
  const auto& kg = *fixture_kg();
  const Tokens in = text::tokenize("tom s house is located at r:address");
  const auto r = relexicalize(in, kg.entity("meeting"), kg);
  EXPECT_EQ(r.tokens, in);
  EXPECT_EQ(r.unresolved, std::vector<std::string>{"r:address"});
  EXPECT_EQ(relexicalize({"hello"}, kg.entity("meeting"), kg).tokens, Tokens{"hello"});
}

TEST(Relexicalize, SeveralObjectsJoinedAlphabetically) {
  KnowledgeGraph kg;
  kg.add_triple("film", "genre", "drama");
  kg.add_triple("film", "genre", "comedy");
  const auto r = relexicalize({"r:genre"}, kg.entity("film"), kg);
  EXPECT_EQ(r.tokens, (Tokens{"comedy", ",", "drama"}));
}

TEST(Delexicalize, RoundtripOnSynthesizedResponses) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const auto c = testing::synthesize_roundtrip_case(rng);
    const Tokens delex = delexicalize(c.response, c.entity, c.kg);
    EXPECT_TRUE(std::any_of(delex.begin(), delex.end(), [](const auto& t) { return is_relation_token(t); }));
    EXPECT_EQ(relexicalize(delex, c.entity, c.kg).tokens, c.response) << text::join(c.response);
  }
}

// ---------------------------------------------------------------------------

TEST(Vocabulary, EmptyCorpusHasSpecialsAndRelations) {
  KnowledgeGraph kg;
  kg.add_triple("a", "r1", "b");
  kg.add_triple("a", "r2", "b");
  kg.add_triple("a", "r3", "b");
  const auto v = build_vocab(std::vector<Tokens>{}, kg);
  EXPECT_EQ(v.word_count(), Vocabulary::specials().size());
  EXPECT_EQ(v.relation_count(), 3u);
  EXPECT_EQ(v.token(Vocabulary::eos_id), kEos);
}

TEST(Vocabulary, SegmentsAreDisjoint) {
  const auto& kg = *fixture_kg();
  const auto dialogues = load_corpus(testing::data_path("corpus.jsonl"), Domain::in_car, kg);
  const auto v = build_vocab(dialogues, kg);
  EXPECT_EQ(v.relation_count(), kg.relation_count());
  std::set<std::string> words, rels;
  for (std::size_t i = 0; i < v.word_count(); ++i) words.insert(v.token(static_cast<int>(i)));
  for (std::size_t i = v.word_count(); i < v.size(); ++i) rels.insert(v.token(static_cast<int>(i)));
  std::vector<std::string> both;
  std::set_intersection(words.begin(), words.end(), rels.begin(), rels.end(), std::back_inserter(both));
  EXPECT_TRUE(both.empty());
  EXPECT_EQ(words.size() + rels.size(), v.size());
  for (std::size_t r = 0; r < kg.relation_count(); ++r) {
    const RelationId rel{static_cast<std::int32_t>(r)};
    EXPECT_EQ(v.token(v.relation_token_id(rel)), relation_token(kg, rel));
    EXPECT_EQ(v.relation_of(v.relation_token_id(rel)), rel);
  }
  EXPECT_EQ(v.id("zzz-unknown"), Vocabulary::unk_id);
  EXPECT_EQ(Vocabulary::from_json(v.to_json()), v);
}

TEST(Context, JoinsHistoryWithEou) {
  EXPECT_EQ(build_context({}, text::tokenize("who directed titanic")), text::tokenize("who directed titanic"));
  EXPECT_EQ(build_context({text::tokenize("who directed titanic"), text::tokenize("james cameron is the director")},
                          text::tokenize("does he have oscars ?")),
            (Tokens{"who", "directed", "titanic", kEou, "james", "cameron", "is", "the", "director", kEou, "does", "he",
                    "have", "oscars", "?"}));
}

TEST(Context, LeftTruncatesLongHistories) {
  std::vector<Tokens> history;
  Tokens full;
  for (int t = 0; t < 50; ++t) {
    Tokens utt;
    for (int w = 0; w <= t % 7; ++w) utt.push_back("t" + std::to_string(t) + "w" + std::to_string(w));
    history.push_back(utt);
    full.insert(full.end(), utt.begin(), utt.end());
    full.emplace_back(kEou);
  }
  const Tokens query{"last", "query"};
  full.insert(full.end(), query.begin(), query.end());
  for (std::size_t max_len : {5u, 40u, 100u}) {
    const Tokens ctx = build_context(history, query, max_len);
    ASSERT_EQ(ctx.size(), max_len);
    EXPECT_TRUE(std::equal(ctx.begin(), ctx.end(), full.end() - static_cast<std::ptrdiff_t>(max_len)));
  }
}

TEST(Examples, FixtureExchanges) {
  const auto examples = testing::fixture_examples();
  EXPECT_EQ(examples.size(), 24u);
  const auto& kg = *fixture_kg();
  const auto it = std::find_if(examples.begin(), examples.end(), [](const Example& e) {
    return text::join(e.query) == "what time is my doctorappointment ?";
  });
  ASSERT_NE(it, examples.end());
  EXPECT_EQ(it->entity, kg.entity("doctorappointment"));
  EXPECT_EQ(text::join(it->target), "your doctorappointment is on r:date at r:time");
  const auto plain = testing::fixture_examples(false);
  for (const auto& e : plain) EXPECT_EQ(e.target, e.reference);
}

}  // namespace
}  // namespace kgirnet
