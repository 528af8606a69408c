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

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgirnet/error.hpp"
#include "kgirnet/text.hpp"

namespace kgirnet {

/// Static word-embedding table (word2vec / fastText text layout).
class StaticEmbeddings {
 public:
  StaticEmbeddings() = default;
  explicit StaticEmbeddings(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  void add(const std::string& word, const Eigen::VectorXd& v) {
    require(v.size() == dim_, "embedding dimension mismatch for '" + word + "'");
    auto [it, inserted] = index_.try_emplace(word, words_.size());
    if (inserted) {
      words_.push_back(word);
      vectors_.push_back(v);
    } else {
      vectors_[it->second] = v;
    }
  }

  const Eigen::VectorXd* find(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? nullptr : &vectors_[it->second];
  }
  const Eigen::VectorXd& vector(std::size_t i) const { return vectors_.at(i); }

  /// Mean of in-vocabulary token vectors; nullopt when none is known.
  std::optional<Eigen::VectorXd> mean(const text::Tokens& tokens) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
    int n = 0;
    for (const auto& t : tokens)
      if (const auto* v = find(t)) {
        acc += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return acc / static_cast<double>(n);
  }

  void save(std::ostream& out) const {
    out.precision(17);
    for (std::size_t i = 0; i < words_.size(); ++i) {
      out << words_[i];
      for (Eigen::Index j = 0; j < dim_; ++j) out << ' ' << vectors_[i](j);
      out << '\n';
    }
  }

 private:
  int dim_ = 0;
  std::vector<std::string> words_;
  std::vector<Eigen::VectorXd> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One token per line: word followed by whitespace-separated floats. The
/// dimension comes from the first line; a leading "<count> <dim>" header is
/// skipped.
inline StaticEmbeddings parse_embeddings(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  std::optional<StaticEmbeddings> table;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(source + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (!table) {
      const bool header = values.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos;
      if (header) continue;
      if (values.empty()) throw ParseError(source + ":" + std::to_string(lineno) + ": no vector values");
      table.emplace(static_cast<int>(values.size()));
    }
    if (static_cast<int>(values.size()) != table->dim())
      throw ParseError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(table->dim()) +
                       " values, got " + std::to_string(values.size()));
    table->add(word, Eigen::Map<const Eigen::VectorXd>(values.data(), table->dim()));
  }
  return table ? std::move(*table) : StaticEmbeddings{};
}

inline StaticEmbeddings load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open embeddings '" + path + "'");
  return parse_embeddings(in, path);
}

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace kgirnet
