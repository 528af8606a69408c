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

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgirnet/convert.hpp"
#include "kgirnet/evaluation.hpp"
#include "kgirnet/graph_laplacian.hpp"
#include "kgirnet/service.hpp"
#include "kgirnet/training.hpp"

namespace fs = std::filesystem;
using namespace kgirnet;

namespace {

struct Globals {
  std::uint64_t seed = 13;
  bool seed_given = false;
  std::string workdir = ".";
  std::string log_level = "info";
};

std::string resolve(const Globals& g, const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(g.workdir) / p).string();
}

// ---------------------------------------------------------------------------

struct ConvertArgs {
  std::string layout = "kvret";
  std::string input;
  std::string output;
  std::string domain = "in-car";
  std::string kg;
  bool annotate = false;
};

int run_convert(const Globals& g, const ConvertArgs& a) {
  std::ifstream in(resolve(g, a.input));
  if (!in) throw ParseError("cannot open input '" + resolve(g, a.input) + "'");
  std::vector<convert::RawDialogue> dialogues =
      a.layout == "kvret" ? convert::read_kvret(in) : convert::read_turns_tsv(in);
  if (a.annotate) {
    if (a.kg.empty()) throw ContractError("--annotate needs --kg");
    const KnowledgeGraph kg = load_kg(resolve(g, a.kg));
    for (auto& d : dialogues) convert::annotate(d, kg);
  }
  std::ofstream out(resolve(g, a.output));
  if (!out) throw ParseError("cannot write '" + resolve(g, a.output) + "'");
  convert::write_jsonl(out, dialogues, parse_domain(a.domain));
  spdlog::info("wrote {} dialogues to {}", dialogues.size(), resolve(g, a.output));
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string output;
  long max_steps = -1;
};

int run_train(const Globals& g, const TrainArgs& a) {
  const std::string config_path = resolve(g, a.config);
  if (!fs::exists(config_path)) throw ParseError("config file not found: " + config_path);
  TrainConfig cfg = load_train_config(config_path);
  if (g.seed_given) cfg.seed = g.seed;
  if (!a.output.empty()) cfg.output = a.output;
  if (a.max_steps >= 0) cfg.max_steps = a.max_steps;
  for (std::string* p : {&cfg.kg_path, &cfg.embeddings_path, &cfg.train_path, &cfg.valid_path, &cfg.test_path})
    *p = resolve(g, *p);
  if (cfg.kg_path.empty() || cfg.embeddings_path.empty() || cfg.train_path.empty())
    throw ContractError("config needs data.kg, data.embeddings and data.train");

  auto kg = std::make_shared<const KnowledgeGraph>(load_kg(cfg.kg_path));
  auto emb = std::make_shared<const StaticEmbeddings>(load_embeddings(cfg.embeddings_path));
  const auto ctx = static_cast<std::size_t>(cfg.model.max_context);
  const auto train_examples =
      make_examples(load_corpus(cfg.train_path, cfg.domain, *kg), *kg, cfg.model.intermediate, ctx);
  std::vector<Example> valid_examples;
  if (!cfg.valid_path.empty())
    valid_examples = make_examples(load_corpus(cfg.valid_path, cfg.domain, *kg), *kg, cfg.model.intermediate, ctx);
  spdlog::info("preset {}: {} train / {} valid examples", cfg.preset, train_examples.size(), valid_examples.size());

  auto model = build_model(cfg, kg, emb, train_examples);
  spdlog::info("vocabulary {} ({} words, {} relations), {} parameters", model->vocab().size(),
               model->vocab().word_count(), model->vocab().relation_count(), model->params().scalar_count());
  const fs::path out_dir = resolve(g, cfg.output);
  const TrainResult r = train(*model, cfg, train_examples, valid_examples, out_dir);
  std::cout << nlohmann::json{{"checkpoint", out_dir.string()},
                              {"best_epoch", r.best_epoch},
                              {"best_valid_entity_f1", r.best_entity_f1},
                              {"steps", r.steps},
                              {"stopped_early", r.stopped_early}}
                   .dump(2)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string split = "test";
  std::string corpus;  // overrides the split path recorded in the checkpoint
  std::string report;
};

int run_eval(const Globals& g, const EvalArgs& a) {
  auto loaded = load_checkpoint(resolve(g, a.checkpoint));
  const KgirNet& model = *loaded.model;
  std::string path = a.corpus.empty() ? loaded.info.data.value(a.split, std::string{}) : resolve(g, a.corpus);
  if (path.empty()) throw ContractError("no corpus recorded for split '" + a.split + "'; pass --corpus");
  const Domain domain = parse_domain(loaded.info.data.value("domain", std::string("in-car")));
  const auto examples = make_examples(load_corpus(path, domain, model.kg()), model.kg(), model.config().intermediate,
                                      static_cast<std::size_t>(model.config().max_context));
  const EvalReport report = evaluate(model, examples);
  nlohmann::json summary{{"split", a.split},
                         {"corpus", path},
                         {"bleu", report.bleu},
                         {"meteor", report.meteor},
                         {"entity_f1", report.entity_f1},
                         {"entity_accuracy", report.entity_accuracy},
                         {"examples", report.examples},
                         {"kg_grounded", report.kg_grounded}};
  std::cout << summary.dump(2) << "\n";
  if (!a.report.empty()) {
    std::ofstream out(resolve(g, a.report));
    if (!out) throw ParseError("cannot write report '" + resolve(g, a.report) + "'");
    nlohmann::json full = report.to_json();
    full["split"] = a.split;
    full["corpus"] = path;
    out << full.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct LinkArgs {
  std::string kg;
  std::string embeddings;
  std::string entity;
  std::string query;
  std::string eval_tsv;
  int k = 2;
  int top = 0;
  bool baseline = false;
};

int run_relation_link(const Globals& g, const LinkArgs& a) {
  const KnowledgeGraph kg = load_kg(resolve(g, a.kg));
  const StaticEmbeddings emb = load_embeddings(resolve(g, a.embeddings));
  if (!a.eval_tsv.empty()) {
    const auto rows = load_relation_link_tsv(resolve(g, a.eval_tsv));
    auto laplacian = [&](const Tokens& q, EntityId e) { return relation_link(q, kg, e, a.k, emb); };
    auto baseline = [&](const Tokens& q, EntityId e) { return similarity_link(q, kg, e, a.k, emb); };
    const LinkAccuracy lap = relation_link_accuracy(laplacian, kg, rows);
    const LinkAccuracy base = relation_link_accuracy(baseline, kg, rows);
    std::cout << nlohmann::json{{"rows", lap.total},
                                {"missing_entity", lap.missing_entity},
                                {"laplacian_accuracy", lap.accuracy},
                                {"similarity_accuracy", base.accuracy}}
                     .dump(2)
              << "\n";
    return 0;
  }
  if (a.entity.empty() || a.query.empty()) throw ContractError("relation-link needs --entity and --query (or --eval)");
  const EntityId e = kg.entity(a.entity);
  const Tokens q = text::tokenize(a.query);
  const auto ranked = a.baseline ? similarity_link(q, kg, e, a.k, emb) : relation_link(q, kg, e, a.k, emb);
  std::size_t shown = 0;
  for (const auto& r : ranked) {
    if (a.top > 0 && shown++ >= static_cast<std::size_t>(a.top)) break;
    std::cout << fmt::format("{}\t{:.6f}\n", kg.label(r.relation), r.score);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  int beam_width = 0;
  int k = 0;
  int ttl = 3600;
};

std::shared_ptr<KgirNet> load_for_inference(const Globals& g, const std::string& dir, int beam_width, int k) {
  auto loaded = load_checkpoint(resolve(g, dir));
  if (beam_width > 0) loaded.model->mutable_config().beam_width = beam_width;
  if (k > 0) loaded.model->mutable_config().k = k;
  return std::shared_ptr<KgirNet>(std::move(loaded.model));
}

int run_chat(const Globals& g, const ServeArgs& a) {
  auto model = load_for_inference(g, a.checkpoint, a.beam_width, a.k);
  std::vector<Tokens> history;
  std::cout << "type a message; /reset clears the context, /quit exits\n";
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    if (line == "/quit") break;
    if (line == "/reset") {
      history.clear();
      continue;
    }
    const Tokens q = text::tokenize(line);
    if (q.empty()) continue;
    const Response r = model->generate(history, q);
    std::cout << text::join(r.surface) << "\n";
    std::string rels;
    for (RelationId rel : r.relations) rels += (rels.empty() ? "" : ",") + model->kg().label(rel);
    std::cout << fmt::format("  [entity {} p={:.2f}{} | relations {} | intermediate: {}]\n",
                             model->kg().label(r.entity), r.entity_probability,
                             r.low_confidence ? " low-confidence" : "", rels.empty() ? "-" : rels,
                             text::join(r.intermediate));
    history.push_back(q);
    history.push_back(r.surface);
  }
  return 0;
}

int run_serve(const Globals& g, const ServeArgs& a) {
  auto model = load_for_inference(g, a.checkpoint, a.beam_width, a.k);
  ServiceConfig cfg;
  cfg.host = a.host;
  cfg.port = a.port;
  cfg.ttl = std::chrono::seconds(a.ttl);
  cfg.seed = g.seed;
  ChatService service(model, cfg);
  httplib::Server server;
  service.mount(server);
  spdlog::info("serving on http://{}:{}", cfg.host, cfg.port);
  if (!server.listen(cfg.host, cfg.port)) throw std::runtime_error("cannot listen on port " + std::to_string(cfg.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgirnet: knowledge-graph grounded dialogue toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for all randomness")->each([&g](const std::string&) { g.seed_given = true; });
  app.add_option("--workdir", g.workdir, "Base directory for relative paths");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  ConvertArgs conv;
  auto* c = app.add_subcommand("convert-corpus", "Convert a source corpus layout to interchange JSONL");
  c->add_option("--layout", conv.layout, "kvret|turns-tsv")->check(CLI::IsMember({"kvret", "turns-tsv"}));
  c->add_option("--input", conv.input, "Source file")->required();
  c->add_option("--output", conv.output, "Output JSONL")->required();
  c->add_option("--domain", conv.domain, "in-car|soccer");
  c->add_option("--kg", conv.kg, "Triple file, needed by --annotate");
  c->add_flag("--annotate", conv.annotate, "Infer entity/relations for unannotated system turns");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model from a JSON config");
  t->add_option("--config", tr.config, "Training config JSON")->required();
  t->add_option("--output", tr.output, "Checkpoint directory (overrides config)");
  t->add_option("--max-steps", tr.max_steps, "Optimizer step budget (overrides config)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--split", ev.split, "train|valid|test")->check(CLI::IsMember({"train", "valid", "test"}));
  e->add_option("--corpus", ev.corpus, "Corpus file (overrides the recorded split path)");
  e->add_option("--report", ev.report, "Write the full JSON report here");

  LinkArgs ln;
  auto* l = app.add_subcommand("relation-link", "Rank sub-graph relations for a query");
  l->add_option("--kg", ln.kg, "Triple file")->required();
  l->add_option("--embeddings", ln.embeddings, "Static embeddings file")->required();
  l->add_option("--entity", ln.entity, "Query entity label");
  l->add_option("--query", ln.query, "Query text");
  l->add_option("-k", ln.k, "Sub-graph radius")->check(CLI::NonNegativeNumber);
  l->add_option("--top", ln.top, "Print at most this many relations");
  l->add_flag("--baseline", ln.baseline, "Use plain embedding similarity (no propagation)");
  l->add_option("--eval", ln.eval_tsv, "TSV of query, entity, gold relation; prints accuracy");

  ServeArgs ch;
  auto* h = app.add_subcommand("chat", "Terminal chat over a checkpoint");
  h->add_option("--checkpoint", ch.checkpoint, "Checkpoint directory")->required();
  h->add_option("--beam-width", ch.beam_width, "Override beam width");
  h->add_option("-k", ch.k, "Override sub-graph radius");

  ServeArgs sv;
  auto* s = app.add_subcommand("serve", "HTTP chat service");
  s->add_option("--checkpoint", sv.checkpoint, "Checkpoint directory")->required();
  s->add_option("--host", sv.host, "Bind address");
  s->add_option("--port", sv.port, "Port");
  s->add_option("--beam-width", sv.beam_width, "Override beam width");
  s->add_option("-k", sv.k, "Override sub-graph radius");
  s->add_option("--ttl", sv.ttl, "Idle session lifetime in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::Success& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const CLI::App* candidate : app.get_subcommands()) sub = candidate;
    std::cerr << (sub ? sub->help() : app.help());
    return 2;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_default_logger(spdlog::stderr_color_mt("kgirnet"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  try {
    if (*c) return run_convert(g, conv);
    if (*t) return run_train(g, tr);
    if (*e) return run_eval(g, ev);
    if (*l) return run_relation_link(g, ln);
    if (*h) return run_chat(g, ch);
    if (*s) return run_serve(g, sv);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
