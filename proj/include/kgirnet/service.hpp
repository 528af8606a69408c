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

// HTTP chat sessions over a loaded model.
//
//   POST   /sessions               -> 201 {"session_id"}
//   POST   /sessions/{id}/message  {"text"} -> 200 {"response", "intermediate",
//            "entity", "entity_probability", "relations", "objects",
//            "unresolved", "low_confidence", "subgraph_relations"}
//   GET    /sessions/{id}          -> 200 {"session_id", "turns"}
//   DELETE /sessions/{id}          -> 204
//   GET    /health                 -> 200 {"status": "ok"}
//
// Errors are {"error": message} with 400 (bad body, empty text) or 404
// (unknown or expired session).

#pragma once

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

// Eigen before httplib: <resolv.h> defines a `_res` macro that collides with
// Eigen parameter names.
#include "kgirnet/model.hpp"
#include "httplib.h"
#include "json.hpp"

namespace kgirnet {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::chrono::seconds ttl{3600};
  std::uint64_t seed = 13;  // session id generator
};

struct SessionTurn {
  Speaker speaker;
  Tokens tokens;
  Tokens intermediate;  // system turns only
};

struct Session {
  std::string id;
  std::vector<SessionTurn> turns;
  std::chrono::steady_clock::time_point created_at;
  std::chrono::steady_clock::time_point last_used;
  std::mutex mutex;  // one in-flight message per session
};

/// In-memory sessions with idle-TTL eviction.
class SessionStore {
 public:
  using Clock = std::chrono::steady_clock;

  explicit SessionStore(std::chrono::seconds ttl = std::chrono::seconds(3600), std::uint64_t seed = 13)
      : ttl_(ttl), rng_(seed) {}

  std::string create(Clock::time_point now = Clock::now()) {
    std::lock_guard lock(mutex_);
    evict_locked(now);
    std::string id;
    do {
      id = fmt::format("{:016x}{:016x}", rng_(), rng_());
    } while (sessions_.count(id));
    auto s = std::make_shared<Session>();
    s->id = id;
    s->created_at = s->last_used = now;
    sessions_.emplace(id, std::move(s));
    return id;
  }

  /// The session, or null if unknown or expired. Touches its idle clock.
  std::shared_ptr<Session> find(const std::string& id, Clock::time_point now = Clock::now()) {
    std::lock_guard lock(mutex_);
    evict_locked(now);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return nullptr;
    it->second->last_used = now;
    return it->second;
  }

  bool erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    return sessions_.erase(id) > 0;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

  std::chrono::seconds ttl() const { return ttl_; }

 private:
  void evict_locked(Clock::time_point now) {
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second->last_used > ttl_)
        it = sessions_.erase(it);
      else
        ++it;
    }
  }

  std::chrono::seconds ttl_;
  std::mt19937_64 rng_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

struct HttpResult {
  int status = 200;
  nlohmann::json body;
};

/// Request handlers, independent of the transport so tests can call them
/// directly. The model is shared read-only across requests.
class ChatService {
 public:
  ChatService(std::shared_ptr<const KgirNet> model, ServiceConfig cfg = {})
      : model_(std::move(model)), cfg_(std::move(cfg)), store_(cfg_.ttl, cfg_.seed) {
    require(model_ != nullptr, "service needs a model");
  }

  SessionStore& sessions() { return store_; }
  const KgirNet& model() const { return *model_; }

  HttpResult create_session() { return {201, {{"session_id", store_.create()}}}; }

  HttpResult get_session(const std::string& id) {
    auto s = store_.find(id);
    if (!s) return not_found(id);
    std::lock_guard lock(s->mutex);
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : s->turns) {
      nlohmann::json j{{"speaker", to_string(t.speaker)}, {"text", text::join(t.tokens)}};
      if (t.speaker == Speaker::system) j["intermediate"] = text::join(t.intermediate);
      turns.push_back(std::move(j));
    }
    return {200, {{"session_id", id}, {"turns", std::move(turns)}}};
  }

  HttpResult delete_session(const std::string& id) {
    if (!store_.erase(id)) return not_found(id);
    return {204, nullptr};
  }

  HttpResult message(const std::string& id, const std::string& raw_body) {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(raw_body);
    } catch (const nlohmann::json::exception&) {
      return {400, {{"error", "request body is not valid JSON"}}};
    }
    if (!req.is_object() || !req.contains("text") || !req.at("text").is_string())
      return {400, {{"error", "request body needs a string field 'text'"}}};
    const Tokens query = text::tokenize(req.at("text").get<std::string>());
    if (query.empty()) return {400, {{"error", "text is empty"}}};

    auto s = store_.find(id);
    if (!s) return not_found(id);
    std::lock_guard lock(s->mutex);
    std::vector<Tokens> history;
    for (const auto& t : s->turns) history.push_back(t.tokens);
    const Response r = model_->generate(history, query);
    s->turns.push_back({Speaker::user, query, {}});
    s->turns.push_back({Speaker::system, r.surface, r.intermediate});
    return {200, payload(r, query)};
  }

  /// Routes on an httplib server, with permissive CORS for the browser client.
  void mount(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    server.Post("/sessions", [this](const httplib::Request&, httplib::Response& res) { send(res, create_session()); });
    server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_session(req.matches[1]));
    });
    server.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, delete_session(req.matches[1]));
    });
    server.Post(R"(/sessions/([^/]+)/message)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, message(req.matches[1], req.body));
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      spdlog::error("request failed: {}", what);
      res.status = 500;
      res.set_content(nlohmann::json{{"error", what}}.dump(), "application/json");
    });
  }

 private:
  static void send(httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    if (!r.body.is_null()) res.set_content(r.body.dump(), "application/json");
  }

  static HttpResult not_found(const std::string& id) { return {404, {{"error", "unknown session '" + id + "'"}}}; }

  nlohmann::json payload(const Response& r, const Tokens& query) const {
    const KnowledgeGraph& kg = model_->kg();
    nlohmann::json relations = nlohmann::json::array();
    for (RelationId rel : r.relations) relations.push_back(kg.label(rel));

    // Sub-graph relations with their gate values, for the provenance pane.
    nlohmann::json sub_rel = nlohmann::json::array();
    const VocabGate gate = model_->gate_for(query, r.entity);
    const SubGraph sub = k_hop_subgraph(kg, r.entity, model_->config().k);
    for (RelationId rel : subgraph_relations(kg, sub)) {
      const double g = gate(model_->vocab().relation_token_id(rel));
      sub_rel.push_back({{"relation", kg.label(rel)}, {"gate", g}, {"gated_in", g > 0.0}});
    }
    return {{"response", text::join(r.surface)},
            {"intermediate", text::join(r.intermediate)},
            {"entity", kg.label(r.entity)},
            {"entity_probability", r.entity_probability},
            {"relations", std::move(relations)},
            {"objects", r.objects},
            {"unresolved", r.unresolved},
            {"low_confidence", r.low_confidence},
            {"subgraph_gate", model_->config().subgraph_gate},
            {"subgraph_relations", std::move(sub_rel)}};
  }

  std::shared_ptr<const KgirNet> model_;
  ServiceConfig cfg_;
  SessionStore store_;
};

}  // namespace kgirnet
