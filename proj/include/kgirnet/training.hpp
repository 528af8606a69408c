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

// Joint training of the entity head and the decoder.
//
// Checkpoint directory layout:
//
//   config.json     model config, seed, encoder input vocabularies, corpus
//                   paths, validation Entity F1 at save time
//   vocab.json      output vocabulary {"words": [...], "relations": [...]}
//   weights.bin     parameter blob (see write_weights)
//   metrics.csv     per-epoch training metrics (written by train)
//   kg.tsv          the knowledge graph the model was trained against
//   embeddings.txt  static embedding table used by the relation gate

#pragma once

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgirnet/autodiff.hpp"
#include "kgirnet/dataset.hpp"
#include "kgirnet/embeddings.hpp"
#include "kgirnet/error.hpp"
#include "kgirnet/evaluation.hpp"
#include "kgirnet/kg_store.hpp"
#include "kgirnet/model.hpp"

namespace kgirnet {

namespace fs = std::filesystem;

struct TrainConfig {
  std::string preset = "kgirnet";
  ModelConfig model;
  int batch_size = 20;
  double lr_encoder = 1e-4;
  double lr_decoder = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  int epochs = 50;
  int patience = 10;         // epochs without validation Entity F1 gain
  long max_steps = 0;        // 0 = no step budget
  int eval_every = 1;        // epochs between validation passes
  std::size_t min_freq = 1;  // output vocabulary cutoff
  bool shuffle = true;
  std::uint64_t seed = 13;

  // Data, resolved by the caller.
  std::string kg_path;
  std::string embeddings_path;
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  Domain domain = Domain::in_car;
  std::string output = "checkpoint";
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"kgirnet", "kgirnet_nb", "kgirnet_ns", "s2s", "s2s_bert"};
  return names;
}

/// Ablation switches over the full model:
///   kgirnet_nb  static embeddings instead of the transformer encoder
///   kgirnet_ns  no sub-graph gate
///   s2s         static encoder, surface targets, no gate
///   s2s_bert    transformer encoder, surface targets, no gate
inline void apply_preset(ModelConfig& m, const std::string& name) {
  m.encoder.kind = EncoderKind::transformer;
  m.subgraph_gate = true;
  m.intermediate = true;
  if (name == "kgirnet") return;
  if (name == "kgirnet_nb") {
    m.encoder.kind = EncoderKind::static_embeddings;
  } else if (name == "kgirnet_ns") {
    m.subgraph_gate = false;
  } else if (name == "s2s") {
    m.encoder.kind = EncoderKind::static_embeddings;
    m.intermediate = false;
    m.subgraph_gate = false;
  } else if (name == "s2s_bert") {
    m.intermediate = false;
    m.subgraph_gate = false;
  } else {
    throw ContractError("unknown preset '" + name + "'");
  }
}

/// Preset first, then explicit keys. Paths are returned as written.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("preset", c.preset);
  apply_preset(c.model, c.preset);
  if (j.contains("model")) merge_json(c.model, j.at("model"));
  get("batch_size", c.batch_size);
  get("lr_encoder", c.lr_encoder);
  get("lr_decoder", c.lr_decoder);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("adam_eps", c.adam_eps);
  get("clip_norm", c.clip_norm);
  get("epochs", c.epochs);
  get("patience", c.patience);
  get("max_steps", c.max_steps);
  get("eval_every", c.eval_every);
  get("min_freq", c.min_freq);
  get("shuffle", c.shuffle);
  get("seed", c.seed);
  get("output", c.output);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    auto path = [&d](const char* key, std::string& field) {
      if (d.contains(key)) field = d.at(key).get<std::string>();
    };
    path("kg", c.kg_path);
    path("embeddings", c.embeddings_path);
    path("train", c.train_path);
    path("valid", c.valid_path);
    path("test", c.test_path);
    if (d.contains("domain")) c.domain = parse_domain(d.at("domain").get<std::string>());
  }
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.epochs >= 1, "epochs must be >= 1");
  require(c.eval_every >= 1, "eval_every must be >= 1");
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return train_config_from_json(j);
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"preset", c.preset},
          {"model", to_json(c.model)},
          {"batch_size", c.batch_size},
          {"lr_encoder", c.lr_encoder},
          {"lr_decoder", c.lr_decoder},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"clip_norm", c.clip_norm},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"max_steps", c.max_steps},
          {"eval_every", c.eval_every},
          {"min_freq", c.min_freq},
          {"shuffle", c.shuffle},
          {"seed", c.seed},
          {"output", c.output},
          {"data",
           {{"kg", c.kg_path},
            {"embeddings", c.embeddings_path},
            {"train", c.train_path},
            {"valid", c.valid_path},
            {"test", c.test_path},
            {"domain", to_string(c.domain)}}}};
}

// ---------------------------------------------------------------------------
// Optimizer

/// Adam with one learning rate per parameter group.
class Adam {
 public:
  Adam(std::vector<double> group_lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(std::move(group_lr)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ad::ParameterSet& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      ad::Parameter& p = params[i];
      if (!p.trainable || p.grad.size() == 0) continue;
      require(p.group >= 0 && static_cast<std::size_t>(p.group) < lr_.size(), "parameter group without lr");
      if (p.adam_m.size() == 0) {
        p.adam_m = ad::Matrix::Zero(p.value.rows(), p.value.cols());
        p.adam_v = ad::Matrix::Zero(p.value.rows(), p.value.cols());
      }
      p.adam_m = beta1_ * p.adam_m + (1.0 - beta1_) * p.grad;
      p.adam_v = beta2_ * p.adam_v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
      const double lr = lr_[static_cast<std::size_t>(p.group)];
      p.value.array() -= lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + eps_);
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<double> lr_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Scales trainable gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_gradients(ad::ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].trainable && params[i].grad.size()) sq += params[i].grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].trainable && params[i].grad.size()) params[i].grad *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Loss

/// Mean example loss over `batch`. With `accumulate_grad`, gradients of the
/// mean are added into Parameter::grad.
inline double batch_loss(const KgirNet& model, const std::vector<const Example*>& batch, std::mt19937_64& rng,
                         bool training, bool accumulate_grad) {
  require(!batch.empty(), "batch_loss: empty batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Example* ex : batch) {
    ad::Tape tape(training, &rng);
    auto loss = model.example_loss(tape, ex->context, ex->target, ex->entity);
    const double v = loss.value()(0, 0);
    if (!std::isfinite(v))
      throw TrainingError("non-finite loss " + std::to_string(v) + " on dialogue '" + ex->dialogue_id +
                          "' (query: " + text::join(ex->query) + ")");
    total += v;
    if (accumulate_grad) tape.backward(ad::scale(loss, w));
  }
  return total * w;
}

inline double batch_loss(const KgirNet& model, const std::vector<Example>& batch) {
  std::mt19937_64 rng(0);
  std::vector<const Example*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  return batch_loss(model, ptrs, rng, false, false);
}

// ---------------------------------------------------------------------------
// Weights blob: "KGIRW1\n", u64 count, then per tensor
// u32 name length, name bytes, i64 rows, i64 cols, rows*cols f64 (column-major).

inline void write_weights(std::ostream& out, const ad::ParameterSet& params) {
  out.write("KGIRW1\n", 7);
  const std::uint64_t n = params.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const auto len = static_cast<std::uint32_t>(p.name.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(p.name.data(), len);
    const std::int64_t rows = p.value.rows(), cols = p.value.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
  }
}

inline void read_weights(std::istream& in, ad::ParameterSet& params, const std::string& source) {
  char magic[7];
  in.read(magic, 7);
  if (!in || std::string(magic, 7) != "KGIRW1\n") throw ParseError(source + ": not a weights blob");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n != params.size())
    throw ParseError(source + ": expected " + std::to_string(params.size()) + " tensors, found " + std::to_string(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string name(len, '\0');
    in.read(name.data(), len);
    std::int64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    if (!in) throw ParseError(source + ": truncated");
    if (!params.contains(name)) throw ParseError(source + ": unknown tensor " + name);
    auto& p = params.at(name);
    if (p.value.rows() != rows || p.value.cols() != cols)
      throw ParseError(source + ": shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
    if (!in) throw ParseError(source + ": truncated");
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

struct CheckpointInfo {
  std::uint64_t seed = 0;
  double valid_entity_f1 = 0.0;
  int epoch = 0;
  std::string preset;
  nlohmann::json data = nlohmann::json::object();  // corpus paths used for training
};

inline void save_checkpoint(const KgirNet& model, const fs::path& dir, const CheckpointInfo& info) {
  fs::create_directories(dir);
  nlohmann::json cfg;
  cfg["model"] = to_json(model.config());
  cfg["seed"] = info.seed;
  cfg["valid_entity_f1"] = info.valid_entity_f1;
  cfg["epoch"] = info.epoch;
  cfg["preset"] = info.preset;
  cfg["data"] = info.data;
  cfg["encoder_inputs"] = {{"words", model.inputs().words}, {"pieces", model.inputs().pieces.pieces()}};
  cfg["kg"] = "kg.tsv";
  cfg["embeddings"] = "embeddings.txt";
  std::ofstream(dir / "config.json") << cfg.dump(2) << "\n";
  std::ofstream(dir / "vocab.json") << model.vocab().to_json().dump() << "\n";
  {
    std::ofstream w(dir / "weights.bin", std::ios::binary);
    write_weights(w, model.params());
    if (!w) throw TrainingError("failed writing " + (dir / "weights.bin").string());
  }
  {
    std::ofstream k(dir / "kg.tsv");
    write_kg(k, model.kg());
  }
  {
    std::ofstream e(dir / "embeddings.txt");
    model.embeddings().save(e);
  }
}

struct LoadedCheckpoint {
  std::unique_ptr<KgirNet> model;
  CheckpointInfo info;
};

inline LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  const fs::path cfg_path = dir / "config.json";
  std::ifstream in(cfg_path);
  if (!in) throw ParseError("cannot open checkpoint config '" + cfg_path.string() + "'");
  nlohmann::json cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(cfg_path.string() + ": " + e.what());
  }
  ModelConfig mc;
  merge_json(mc, cfg.at("model"));
  CheckpointInfo info;
  info.seed = cfg.value("seed", std::uint64_t{0});
  info.valid_entity_f1 = cfg.value("valid_entity_f1", 0.0);
  info.epoch = cfg.value("epoch", 0);
  info.preset = cfg.value("preset", std::string{});
  if (cfg.contains("data")) info.data = cfg.at("data");

  auto kg = std::make_shared<const KnowledgeGraph>(load_kg((dir / cfg.value("kg", "kg.tsv")).string()));
  auto emb = std::make_shared<const StaticEmbeddings>(
      load_embeddings((dir / cfg.value("embeddings", "embeddings.txt")).string()));
  std::ifstream vin(dir / "vocab.json");
  if (!vin) throw ParseError("cannot open " + (dir / "vocab.json").string());
  nlohmann::json vj;
  vin >> vj;
  EncoderInputs inputs;
  inputs.words = cfg.at("encoder_inputs").at("words").get<std::vector<std::string>>();
  inputs.pieces = WordPiece(cfg.at("encoder_inputs").at("pieces").get<std::vector<std::string>>());

  auto model = std::make_unique<KgirNet>(mc, kg, Vocabulary::from_json(vj), emb, inputs, info.seed);
  std::ifstream win(dir / "weights.bin", std::ios::binary);
  if (!win) throw ParseError("cannot open " + (dir / "weights.bin").string());
  read_weights(win, model->params(), (dir / "weights.bin").string());
  return {std::move(model), info};
}

// ---------------------------------------------------------------------------
// Training loop

/// Output vocabulary from training contexts and decoder targets.
inline Vocabulary vocab_from_examples(const std::vector<Example>& examples, const KnowledgeGraph& kg,
                                      std::size_t min_freq) {
  std::vector<Tokens> sentences;
  for (const auto& ex : examples) {
    sentences.push_back(ex.context);
    sentences.push_back(ex.target);
  }
  return build_vocab(sentences, kg, min_freq);
}

inline std::unique_ptr<KgirNet> build_model(const TrainConfig& cfg, std::shared_ptr<const KnowledgeGraph> kg,
                                            std::shared_ptr<const StaticEmbeddings> embeddings,
                                            const std::vector<Example>& train_examples) {
  Vocabulary vocab = vocab_from_examples(train_examples, *kg, cfg.min_freq);
  EncoderInputs inputs = encoder_inputs(train_examples, cfg.model);
  return std::make_unique<KgirNet>(cfg.model, std::move(kg), std::move(vocab), std::move(embeddings), inputs,
                                   cfg.seed);
}

struct EpochMetrics {
  int epoch = 0;
  long steps = 0;
  double train_loss = 0.0;  // mean batch loss over the epoch
  bool evaluated = false;
  double valid_bleu = 0.0;
  double valid_meteor = 0.0;
  double valid_entity_f1 = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
  double best_entity_f1 = -1.0;
  long steps = 0;
  bool stopped_early = false;
  double initial_loss = 0.0;  // first batch, before any update
};

inline void write_metrics_csv(const fs::path& path, const std::vector<EpochMetrics>& history) {
  std::ofstream out(path);
  out << "epoch,steps,train_loss,evaluated,valid_bleu,valid_meteor,valid_entity_f1,seconds\n";
  for (const auto& m : history)
    out << m.epoch << ',' << m.steps << ',' << m.train_loss << ',' << (m.evaluated ? 1 : 0) << ','
        << m.valid_bleu << ',' << m.valid_meteor << ',' << m.valid_entity_f1 << ',' << m.seconds << '\n';
}

/// Trains `model` in place. Model selection keeps the weights with the best
/// validation Entity F1 (the training set stands in when `valid` is empty);
/// they are restored into `model` at the end and, when `out_dir` is given,
/// written there as a checkpoint alongside metrics.csv.
inline TrainResult train(KgirNet& model, const TrainConfig& cfg, const std::vector<Example>& train_set,
                         const std::vector<Example>& valid, const std::optional<fs::path>& out_dir = std::nullopt) {
  require(!train_set.empty(), "train: empty training set");
  const std::vector<Example>& selection = valid.empty() ? train_set : valid;
  std::mt19937_64 rng(cfg.seed);
  Adam adam({cfg.lr_encoder, cfg.lr_decoder}, cfg.beta1, cfg.beta2, cfg.adam_eps);
  auto& params = model.params();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<ad::Matrix> best_weights;
  int since_best = 0;
  bool first_batch = true;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long batches = 0;
    bool budget_hit = false;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const Example*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i)
        batch.push_back(&train_set[order[i]]);
      params.zero_grad();
      const double loss = batch_loss(model, batch, rng, true, true);
      if (first_batch) {
        result.initial_loss = loss;
        first_batch = false;
      }
      clip_gradients(params, cfg.clip_norm);
      adam.step(params);
      loss_sum += loss;
      ++batches;
      ++result.steps;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        budget_hit = true;
        break;
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.steps = result.steps;
    m.train_loss = loss_sum / static_cast<double>(std::max(1L, batches));
    const bool last = budget_hit || epoch == cfg.epochs;
    if (epoch % cfg.eval_every == 0 || last) {
      const EvalReport report = evaluate(model, selection);
      m.evaluated = true;
      m.valid_bleu = report.bleu;
      m.valid_meteor = report.meteor;
      m.valid_entity_f1 = report.entity_f1;
      if (m.valid_entity_f1 > result.best_entity_f1) {
        result.best_entity_f1 = m.valid_entity_f1;
        result.best_epoch = epoch;
        since_best = 0;
        best_weights.clear();
        for (std::size_t i = 0; i < params.size(); ++i) best_weights.push_back(params[i].value);
        if (out_dir) save_checkpoint(model, *out_dir, {cfg.seed, m.valid_entity_f1, epoch, cfg.preset, to_json(cfg)["data"]});
      } else {
        since_best += cfg.eval_every;
      }
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(m);
    if (m.evaluated)
      spdlog::info("epoch {} step {} loss {:.4f} valid bleu {:.2f} meteor {:.2f} entity_f1 {:.2f} ({:.1f}s)", epoch,
                   m.steps, m.train_loss, m.valid_bleu, m.valid_meteor, m.valid_entity_f1, m.seconds);
    else
      spdlog::info("epoch {} step {} loss {:.4f} ({:.1f}s)", epoch, m.steps, m.train_loss, m.seconds);
    if (out_dir) write_metrics_csv(*out_dir / "metrics.csv", result.history);
    if (budget_hit) break;
    if (cfg.patience > 0 && since_best >= cfg.patience) {
      result.stopped_early = true;
      spdlog::info("early stop: no validation Entity F1 gain for {} epochs", since_best);
      break;
    }
  }
  for (std::size_t i = 0; i < best_weights.size(); ++i) params[i].value = best_weights[i];
  return result;
}

}  // namespace kgirnet
