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

/**
 * @brief Minimal reverse-mode differentiation over dense Eigen matrices.
 *
 * Every op exists twice: once on plain `Matrix` values (inference, no
 * bookkeeping) and once on `Var` handles recorded on a `Tape` (training).
 * Model code is written once against a context type `Ctx` exposing
 * `Ctx::Value`, `param()`, `constant()` and `dropout()`, and instantiated
 * with either `Eval` or `Tape`.
 *
 * Row-vector convention: a sequence of n d-dimensional states is an n x d
 * matrix; a single state is 1 x d.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgirnet/error.hpp"

namespace kgirnet::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Trainable tensor with its gradient accumulator and optimizer slots.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  int group = 0;  // optimizer parameter group
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Owns parameters with stable addresses, in registration order.
class ParameterSet {
 public:
  Parameter& add(std::string name, Index rows, Index cols, int group = 0) {
    require(!index_.count(name), "duplicate parameter " + name);
    auto p = std::make_unique<Parameter>();
    p->name = std::move(name);
    p->value = Matrix::Zero(rows, cols);
    p->grad = Matrix::Zero(rows, cols);
    p->group = group;
    index_[p->name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw NotFoundError("no parameter " + name);
    return *params_[it->second];
  }
  const Parameter& at(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->at(name);
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline void uniform_init(Parameter& p, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
}

/// Glorot-uniform for a fan_in x fan_out weight.
inline void xavier_init(Parameter& p, std::mt19937_64& rng) {
  const double scale = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  uniform_init(p, rng, scale);
}

// ---------------------------------------------------------------------------
// Plain-value kernels shared by both backends.

namespace kernel {

inline Matrix add_row(const Matrix& a, const Matrix& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  return a.rowwise() + row.row(0);
}

inline Matrix softmax_rows(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    out.row(i) = (a.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

inline Matrix log_softmax_rows(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    const double lse = m + std::log((a.row(i).array() - m).exp().sum());
    out.row(i) = (a.row(i).array() - lse).matrix();
  }
  return out;
}

inline Matrix sigmoid(const Matrix& a) {
  return a.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

inline Matrix relu(const Matrix& a) { return a.cwiseMax(0.0); }

inline Matrix concat_cols(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

/// Sliding windows of `k` consecutive rows flattened into one row each.
/// Inputs shorter than `k` are zero-padded at the end to exactly `k` rows.
inline Matrix unfold_rows(const Matrix& a, Index k) {
  const Index n = std::max(a.rows(), k);
  const Index d = a.cols();
  Matrix out = Matrix::Zero(n - k + 1, k * d);
  for (Index w = 0; w + k <= n; ++w)
    for (Index j = 0; j < k; ++j)
      if (w + j < a.rows()) out.block(w, j * d, 1, d) = a.row(w + j);
  return out;
}

inline Matrix max_rows(const Matrix& a) { return a.colwise().maxCoeff(); }

inline Matrix layer_norm_rows(const Matrix& a, const Matrix& gamma, const Matrix& beta, double eps) {
  Matrix out(a.rows(), a.cols());
  const double d = static_cast<double>(a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double mean = a.row(i).mean();
    const double var = (a.row(i).array() - mean).square().sum() / d;
    out.row(i) = ((a.row(i).array() - mean) / std::sqrt(var + eps)).matrix();
  }
  return (out.array().rowwise() * gamma.row(0).array()).matrix().rowwise() + beta.row(0);
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Eager backend: plain matrices, no gradient.

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return a * b;
}
inline Matrix add(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return a + b;
}
inline Matrix add_row(const Matrix& a, const Matrix& row) { return kernel::add_row(a, row); }
inline Matrix mul(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b); }
inline Matrix scale(const Matrix& a, double s) { return a * s; }
inline Matrix one_minus(const Matrix& a) { return (1.0 - a.array()).matrix(); }
inline Matrix tanh(const Matrix& a) { return a.array().tanh().matrix(); }
inline Matrix sigmoid(const Matrix& a) { return kernel::sigmoid(a); }
inline Matrix relu(const Matrix& a) { return kernel::relu(a); }
inline Matrix softmax_rows(const Matrix& a) { return kernel::softmax_rows(a); }
inline Matrix log_softmax_rows(const Matrix& a) { return kernel::log_softmax_rows(a); }
inline Matrix concat_cols(const Matrix& a, const Matrix& b) { return kernel::concat_cols(a, b); }
inline Matrix concat_cols(const std::vector<Matrix>& parts) {
  Matrix out = parts.at(0);
  for (std::size_t i = 1; i < parts.size(); ++i) out = kernel::concat_cols(out, parts[i]);
  return out;
}
inline Matrix concat_rows(const std::vector<Matrix>& parts) {
  Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix out(rows, parts.at(0).cols());
  Index r = 0;
  for (const auto& p : parts) {
    require(p.cols() == out.cols(), "concat_rows: column mismatch");
    out.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}
inline Matrix slice_cols(const Matrix& a, Index start, Index n) { return a.middleCols(start, n); }
inline Matrix slice_rows(const Matrix& a, Index start, Index n) { return a.middleRows(start, n); }
inline Matrix row(const Matrix& a, Index i) { return a.row(i); }
inline Matrix gather_rows(const Matrix& table, const std::vector<int>& ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = table.row(ids[i]);
  return out;
}
inline Matrix transpose(const Matrix& a) { return a.transpose(); }
inline Matrix mean_rows(const Matrix& a) { return a.colwise().mean(); }
inline Matrix max_rows(const Matrix& a) { return kernel::max_rows(a); }
inline Matrix unfold_rows(const Matrix& a, Index k) { return kernel::unfold_rows(a, k); }
inline Matrix sum(const Matrix& a) { return Matrix::Constant(1, 1, a.sum()); }
inline Matrix pick(const Matrix& a, Index r, Index c) { return Matrix::Constant(1, 1, a(r, c)); }
inline Matrix layer_norm_rows(const Matrix& a, const Matrix& gamma, const Matrix& beta, double eps = 1e-5) {
  return kernel::layer_norm_rows(a, gamma, beta, eps);
}

/// Inference context: parameters are read in place.
class Eval {
 public:
  using Value = Matrix;
  const Matrix& param(const Parameter& p) const { return p.value; }
  Matrix constant(Matrix m) const { return m; }
  Matrix dropout(const Matrix& a, double) const { return a; }
  bool training() const { return false; }
};

// ---------------------------------------------------------------------------
// Taped backend.

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Value = Var;
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool training = true, std::mt19937_64* rng = nullptr) : training_(training), rng_(rng) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool training() const { return training_; }

  Var constant(Matrix m) { return push(std::move(m), nullptr); }

  /// Leaf bound to a parameter; repeated calls reuse the same node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Var v = push(p.value, nullptr);
    nodes_[static_cast<std::size_t>(v.id())].param = &p;
    param_nodes_[&p] = v.id();
    return v;
  }
  Var param(const Parameter& p) { return param(const_cast<Parameter&>(p)); }

  /// Inverted dropout; identity when not training or rate == 0.
  Var dropout(Var a, double rate);

  Var push(Matrix value, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), nullptr});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  /// Gradient slot of node `id`, zero-initialized on first access.
  Matrix& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }

  /// Back-propagate from scalar `loss` and add leaf gradients into
  /// Parameter::grad.
  void backward(Var loss) {
    require(loss.rows() == 1 && loss.cols() == 1, "backward: loss must be a scalar");
    grad(loss.id()).setConstant(1.0);
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param) {
        if (n.param->grad.size() == 0) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }
  std::mt19937_64* rng() { return rng_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool training_;
  std::mt19937_64* rng_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

namespace detail {
inline Tape& tape_of(Var a) {
  require(a.tape() != nullptr, "operation on an unbound Var");
  return *a.tape();
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.push(matmul(a.value(), b.value()), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.grad(ia).noalias() += g * t.value(ib).transpose();
    t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.push(add(a.value(), b.value()), [ia, ib](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g;
    t.grad(ib) += g;
  });
}

inline Var add_row(Var a, Var row) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ir = row.id();
  return t.push(kernel::add_row(a.value(), row.value()), [ia, ir](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g;
    t.grad(ir) += g.colwise().sum();
  });
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), [ia, ib](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g.cwiseProduct(t.value(ib));
    t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

inline Var scale(Var a, double s) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value() * s, [ia, s](Tape& t, int self) { t.grad(ia) += t.grad(self) * s; });
}

inline Var one_minus(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(one_minus(a.value()), [ia](Tape& t, int self) { t.grad(ia) -= t.grad(self); });
}

inline Var tanh(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(tanh(a.value()), [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.grad(ia) += (t.grad(self).array() * (1.0 - y.array().square())).matrix();
  });
}

inline Var sigmoid(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(kernel::sigmoid(a.value()), [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.grad(ia) += (t.grad(self).array() * y.array() * (1.0 - y.array())).matrix();
  });
}

inline Var relu(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(kernel::relu(a.value()), [ia](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    t.grad(ia) += (t.grad(self).array() * (x.array() > 0.0).cast<double>()).matrix();
  });
}

inline Var softmax_rows(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(kernel::softmax_rows(a.value()), [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix gi(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      gi.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.grad(ia) += gi;
  });
}

inline Var log_softmax_rows(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(kernel::log_softmax_rows(a.value()), [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix gi(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r)
      gi.row(r) = g.row(r) - y.row(r).array().exp().matrix() * g.row(r).sum();
    t.grad(ia) += gi;
  });
}

inline Var concat_cols(Var a, Var b) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  const Index ca = a.cols(), cb = b.cols();
  return t.push(kernel::concat_cols(a.value(), b.value()), [ia, ib, ca, cb](Tape& t, int self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g.leftCols(ca);
    t.grad(ib) += g.rightCols(cb);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  Var out = parts.at(0);
  for (std::size_t i = 1; i < parts.size(); ++i) out = concat_cols(out, parts[i]);
  return out;
}

inline Var concat_rows(const std::vector<Var>& parts) {
  Tape& t = detail::tape_of(parts.at(0));
  std::vector<Matrix> values;
  std::vector<int> ids;
  for (const auto& p : parts) {
    values.push_back(p.value());
    ids.push_back(p.id());
  }
  return t.push(concat_rows(values), [ids](Tape& t, int self) {
    const Matrix g = t.grad(self);
    Index r = 0;
    for (int id : ids) {
      const Index n = t.value(id).rows();
      t.grad(id) += g.middleRows(r, n);
      r += n;
    }
  });
}

inline Var slice_cols(Var a, Index start, Index n) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value().middleCols(start, n),
                [ia, start, n](Tape& t, int self) { t.grad(ia).middleCols(start, n) += t.grad(self); });
}

inline Var slice_rows(Var a, Index start, Index n) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value().middleRows(start, n),
                [ia, start, n](Tape& t, int self) { t.grad(ia).middleRows(start, n) += t.grad(self); });
}

inline Var row(Var a, Index i) { return slice_rows(a, i, 1); }

inline Var gather_rows(Var table, const std::vector<int>& ids) {
  Tape& t = detail::tape_of(table);
  const int it = table.id();
  return t.push(gather_rows(table.value(), ids), [it, ids](Tape& t, int self) {
    const Matrix g = t.grad(self);
    Matrix& gt = t.grad(it);
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += g.row(static_cast<Index>(i));
  });
}

inline Var transpose(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value().transpose(),
                [ia](Tape& t, int self) { t.grad(ia) += t.grad(self).transpose(); });
}

inline Var mean_rows(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  const Index n = a.rows();
  return t.push(mean_rows(a.value()), [ia, n](Tape& t, int self) {
    const Matrix g = t.grad(self) / static_cast<double>(n);
    t.grad(ia).rowwise() += g.row(0);
  });
}

inline Var max_rows(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(kernel::max_rows(a.value()), [ia](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    const Matrix g = t.grad(self);
    Matrix& gx = t.grad(ia);
    for (Index c = 0; c < x.cols(); ++c) {
      Index r = 0;
      x.col(c).maxCoeff(&r);
      gx(r, c) += g(0, c);
    }
  });
}

inline Var unfold_rows(Var a, Index k) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(kernel::unfold_rows(a.value(), k), [ia, k](Tape& t, int self) {
    const Matrix g = t.grad(self);
    Matrix& ga = t.grad(ia);
    const Index d = ga.cols();
    for (Index w = 0; w < g.rows(); ++w)
      for (Index j = 0; j < k; ++j)
        if (w + j < ga.rows()) ga.row(w + j) += g.block(w, j * d, 1, d);
  });
}

inline Var sum(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(sum(a.value()), [ia](Tape& t, int self) { t.grad(ia).array() += t.grad(self)(0, 0); });
}

inline Var pick(Var a, Index r, Index c) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(pick(a.value(), r, c), [ia, r, c](Tape& t, int self) { t.grad(ia)(r, c) += t.grad(self)(0, 0); });
}

inline Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ig = gamma.id(), ib = beta.id();
  const Matrix& x = a.value();
  const Index n = x.rows(), d = x.cols();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / static_cast<double>(d);
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = ((x.row(i).array() - mean) * inv_std(i)).matrix();
  }
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix().rowwise() + beta.value().row(0);
  return t.push(std::move(y), [ia, ig, ib, xhat, inv_std](Tape& t, int self) {
    const Matrix g = t.grad(self);
    const Matrix& gam = t.value(ig);
    t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
    t.grad(ib) += g.colwise().sum();
    const Matrix gx = (g.array().rowwise() * gam.row(0).array()).matrix();
    const double d = static_cast<double>(g.cols());
    Matrix& ga = t.grad(ia);
    for (Index i = 0; i < g.rows(); ++i) {
      const double mean_g = gx.row(i).mean();
      const double mean_gx = gx.row(i).dot(xhat.row(i)) / d;
      ga.row(i) += (inv_std(i) * (gx.row(i).array() - mean_g - xhat.row(i).array() * mean_gx)).matrix();
    }
  });
}

/// Elementwise product with a constant mask (no gradient to the mask).
inline Var mask_mul(Var a, const Matrix& mask) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value().cwiseProduct(mask),
                [ia, mask](Tape& t, int self) { t.grad(ia) += t.grad(self).cwiseProduct(mask); });
}

inline Var Tape::dropout(Var a, double rate) {
  if (!training_ || rate <= 0.0) return a;
  require(rng_ != nullptr, "dropout in training mode needs an RNG");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng_) ? 1.0 / (1.0 - rate) : 0.0;
  return mask_mul(a, mask);
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator*(Var a, Var b) { return matmul(a, b); }

// ---------------------------------------------------------------------------
// Value helpers usable on both backends.

inline const Matrix& value_of(const Matrix& m) { return m; }
inline const Matrix& value_of(const Var& v) { return v.value(); }

}  // namespace kgirnet::ad
