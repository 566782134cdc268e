/*
 * Copyright 2026 the hinrep authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Minimal reverse-mode autodiff over dense double matrices. Ops are free
// functions taking the tape first; a tensor is a shared handle onto
// (value, grad, requires_grad). Tapes are single-use: backward after
// backward raises rather than silently double-counting gradients.
// Every op output is checked finite; NaN/Inf raises NumericError.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hinrep/errors.hpp"
#include "hinrep/rng.hpp"

namespace hinrep::ad {

class DimensionError : public ConfigError {
 public:
  explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

namespace detail {

struct Node {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;  // lazily allocated; empty means all-zero
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() == 0) grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  }
};

using NodePtr = std::shared_ptr<Node>;

inline std::string shape_str(const Eigen::MatrixXd& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

}  // namespace detail

inline void check_finite(const Eigen::MatrixXd& v, const char* op) {
  if (!v.allFinite()) throw NumericError(std::string(op) + ": non-finite value produced");
}

class Tensor {
 public:
  Tensor() = default;

  const Eigen::MatrixXd& value() const { return node_->value; }
  // Optimizer entry point; in-place update, handle identity preserved.
  Eigen::MatrixXd& mutable_value() { return node_->value; }

  const Eigen::MatrixXd& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() const {
    if (node_->grad.size() > 0) node_->grad.setZero();
  }

  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  bool is_scalar() const { return rows() == 1 && cols() == 1; }
  double scalar_value() const {
    if (!is_scalar())
      throw DimensionError("tensor is not scalar, shape " + detail::shape_str(node_->value));
    return node_->value(0, 0);
  }
  bool defined() const { return node_ != nullptr; }

  // Internal plumbing for op implementations.
  const detail::NodePtr& node() const { return node_; }

  static Tensor wrap(detail::NodePtr n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  detail::NodePtr node_;
};

inline Tensor make_tensor(Eigen::MatrixXd v, bool requires_grad) {
  check_finite(v, "tensor");
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return Tensor::wrap(std::move(n));
}

inline Tensor constant(Eigen::MatrixXd v) { return make_tensor(std::move(v), false); }
inline Tensor parameter(Eigen::MatrixXd v) { return make_tensor(std::move(v), true); }
inline Tensor scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

// Ordered record of backward closures; replayed exactly once in reverse.
class Tape {
 public:
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  std::size_t size() const { return ops_.size(); }
  bool consumed() const { return used_; }

  void backward(const Tensor& loss) {
    if (used_) throw ConfigError("backward: tape already consumed");
    if (!loss.is_scalar())
      throw ConfigError("backward: loss must be scalar, got shape " +
                        detail::shape_str(loss.value()));
    used_ = true;
    if (!loss.requires_grad()) return;  // constant loss: all grads stay zero
    loss.node()->ensure_grad();
    loss.node()->grad(0, 0) += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> ops_;
  bool used_ = false;
};

namespace detail {

// Wraps a fresh output node and records its backward closure when any input
// requires grad. The closure sees the output node and skips work if nothing
// flowed into its grad.
inline Tensor emit(Tape& tape, Eigen::MatrixXd value, bool requires_grad, const char* op,
                   std::function<void(const NodePtr&)> backward_fn) {
  check_finite(value, op);
  Tensor out = make_tensor(std::move(value), requires_grad);
  if (requires_grad) {
    tape.record([on = out.node(), fn = std::move(backward_fn)]() {
      if (on->grad.size() == 0) return;
      fn(on);
    });
  }
  return out;
}

}  // namespace detail

// ---- binary / structural primitives ----

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ, " + detail::shape_str(a.value()) +
                         " vs " + detail::shape_str(b.value()));
  bool rg = a.requires_grad() || b.requires_grad();
  return detail::emit(tape, a.value() * b.value(), rg, "matmul",
                      [an = a.node(), bn = b.node()](const detail::NodePtr& on) {
                        if (an->requires_grad) {
                          an->ensure_grad();
                          an->grad.noalias() += on->grad * bn->value.transpose();
                        }
                        if (bn->requires_grad) {
                          bn->ensure_grad();
                          bn->grad.noalias() += an->value.transpose() * on->grad;
                        }
                      });
}

inline Tensor transpose(Tape& tape, const Tensor& a) {
  return detail::emit(tape, a.value().transpose(), a.requires_grad(), "transpose",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.noalias() += on->grad.transpose();
                      });
}

// add: same-shape elementwise, or row-broadcast when b is a 1-row bias.
inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  bool broadcast = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  if (!broadcast && (a.rows() != b.rows() || a.cols() != b.cols()))
    throw DimensionError("add: shape mismatch, " + detail::shape_str(a.value()) + " vs " +
                         detail::shape_str(b.value()));
  Eigen::MatrixXd v =
      broadcast ? (a.value().rowwise() + b.value().row(0)).eval() : (a.value() + b.value()).eval();
  bool rg = a.requires_grad() || b.requires_grad();
  return detail::emit(tape, std::move(v), rg, "add",
                      [an = a.node(), bn = b.node(), broadcast](const detail::NodePtr& on) {
                        if (an->requires_grad) {
                          an->ensure_grad();
                          an->grad.noalias() += on->grad;
                        }
                        if (bn->requires_grad) {
                          bn->ensure_grad();
                          if (broadcast)
                            bn->grad.row(0).noalias() += on->grad.colwise().sum();
                          else
                            bn->grad.noalias() += on->grad;
                        }
                      });
}

inline Tensor hadamard(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("hadamard: shape mismatch, " + detail::shape_str(a.value()) + " vs " +
                         detail::shape_str(b.value()));
  bool rg = a.requires_grad() || b.requires_grad();
  return detail::emit(tape, a.value().cwiseProduct(b.value()), rg, "hadamard",
                      [an = a.node(), bn = b.node()](const detail::NodePtr& on) {
                        if (an->requires_grad) {
                          an->ensure_grad();
                          an->grad.noalias() += on->grad.cwiseProduct(bn->value);
                        }
                        if (bn->requires_grad) {
                          bn->ensure_grad();
                          bn->grad.noalias() += on->grad.cwiseProduct(an->value);
                        }
                      });
}

// column-wise concatenation [a, b] (Eq-style [u, x] gate input)
inline Tensor concat(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows())
    throw DimensionError("concat: row counts differ, " + detail::shape_str(a.value()) + " vs " +
                         detail::shape_str(b.value()));
  Eigen::MatrixXd v(a.rows(), a.cols() + b.cols());
  v.leftCols(a.cols()) = a.value();
  v.rightCols(b.cols()) = b.value();
  bool rg = a.requires_grad() || b.requires_grad();
  return detail::emit(tape, std::move(v), rg, "concat",
                      [an = a.node(), bn = b.node()](const detail::NodePtr& on) {
                        Eigen::Index ac = an->value.cols();
                        Eigen::Index bc = bn->value.cols();
                        if (an->requires_grad) {
                          an->ensure_grad();
                          an->grad.noalias() += on->grad.leftCols(ac);
                        }
                        if (bn->requires_grad) {
                          bn->ensure_grad();
                          bn->grad.noalias() += on->grad.rightCols(bc);
                        }
                      });
}

inline Tensor scalar_mul(Tape& tape, const Tensor& a, double c) {
  return detail::emit(tape, a.value() * c, a.requires_grad(), "scalar_mul",
                      [an = a.node(), c](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.noalias() += on->grad * c;
                      });
}

inline Tensor scalar_add(Tape& tape, const Tensor& a, double c) {
  return detail::emit(tape, (a.value().array() + c).matrix(), a.requires_grad(), "scalar_add",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.noalias() += on->grad;
                      });
}

inline Tensor sum(Tape& tape, const Tensor& a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().sum();
  return detail::emit(tape, std::move(v), a.requires_grad(), "sum",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.array() += on->grad(0, 0);
                      });
}

inline Tensor mean(Tape& tape, const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().mean();
  double inv = 1.0 / static_cast<double>(a.size());
  return detail::emit(tape, std::move(v), a.requires_grad(), "mean",
                      [an = a.node(), inv](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.array() += on->grad(0, 0) * inv;
                      });
}

inline Tensor dot(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("dot: shape mismatch, " + detail::shape_str(a.value()) + " vs " +
                         detail::shape_str(b.value()));
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().cwiseProduct(b.value()).sum();
  bool rg = a.requires_grad() || b.requires_grad();
  return detail::emit(tape, std::move(v), rg, "dot",
                      [an = a.node(), bn = b.node()](const detail::NodePtr& on) {
                        double g = on->grad(0, 0);
                        if (an->requires_grad) {
                          an->ensure_grad();
                          an->grad.noalias() += g * bn->value;
                        }
                        if (bn->requires_grad) {
                          bn->ensure_grad();
                          bn->grad.noalias() += g * an->value;
                        }
                      });
}

// per-row sum, n x c -> n x 1 (pairwise inner products after hadamard)
inline Tensor row_sum(Tape& tape, const Tensor& a) {
  Eigen::MatrixXd v = a.value().rowwise().sum();
  return detail::emit(tape, std::move(v), a.requires_grad(), "row_sum",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.colwise() += on->grad.col(0);
                      });
}

// row selection with scatter-add backward; rows may repeat
inline Tensor gather_rows(Tape& tape, const Tensor& a, std::vector<int> rows) {
  for (int r : rows)
    if (r < 0 || r >= a.rows())
      throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range [0, " +
                           std::to_string(a.rows()) + ")");
  Eigen::MatrixXd v(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  return detail::emit(tape, std::move(v), a.requires_grad(), "gather_rows",
                      [an = a.node(), rows = std::move(rows)](const detail::NodePtr& on) {
                        an->ensure_grad();
                        for (std::size_t i = 0; i < rows.size(); ++i)
                          an->grad.row(rows[i]) += on->grad.row(static_cast<Eigen::Index>(i));
                      });
}

// ---- nonlinearities ----

inline Tensor leaky_relu(Tape& tape, const Tensor& a, double slope = 0.01) {
  Eigen::MatrixXd v = a.value().unaryExpr([slope](double x) { return x >= 0.0 ? x : slope * x; });
  return detail::emit(tape, std::move(v), a.requires_grad(), "leaky_relu",
                      [an = a.node(), slope](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.array() +=
                            on->grad.array() *
                            an->value.array().unaryExpr(
                                [slope](double x) { return x >= 0.0 ? 1.0 : slope; });
                      });
}

inline Tensor relu(Tape& tape, const Tensor& a) {
  Eigen::MatrixXd v = a.value().cwiseMax(0.0);
  return detail::emit(tape, std::move(v), a.requires_grad(), "relu",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.array() +=
                            on->grad.array() *
                            (an->value.array() > 0.0).select(1.0, Eigen::ArrayXXd::Zero(an->value.rows(), an->value.cols()));
                      });
}

inline Tensor sigmoid(Tape& tape, const Tensor& a) {
  Eigen::MatrixXd v = a.value().unaryExpr([](double x) {
    // split on sign to avoid overflow in exp
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return detail::emit(tape, std::move(v), a.requires_grad(), "sigmoid",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.array() +=
                            on->grad.array() * on->value.array() * (1.0 - on->value.array());
                      });
}

inline Tensor tanh(Tape& tape, const Tensor& a) {
  Eigen::MatrixXd v = a.value().array().tanh().matrix();
  return detail::emit(tape, std::move(v), a.requires_grad(), "tanh",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.array() += on->grad.array() * (1.0 - on->value.array().square());
                      });
}

inline constexpr double kLogClamp = 1e-12;

// log of values clamped to >= 1e-12; gradient is 1/clamped where not clamped
inline Tensor log(Tape& tape, const Tensor& a) {
  Eigen::MatrixXd clamped = a.value().cwiseMax(kLogClamp);
  Eigen::MatrixXd v = clamped.array().log().matrix();
  return detail::emit(tape, std::move(v), a.requires_grad(), "log",
                      [an = a.node(), clamped = std::move(clamped)](const detail::NodePtr& on) {
                        an->ensure_grad();
                        an->grad.array() +=
                            (an->value.array() >= kLogClamp)
                                .select(on->grad.array() / clamped.array(),
                                        Eigen::ArrayXXd::Zero(an->value.rows(), an->value.cols()));
                      });
}

// row-wise softmax with max subtraction
inline Tensor softmax(Tape& tape, const Tensor& a) {
  Eigen::MatrixXd v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::ArrayXd row = v.row(i).array();
    row -= row.maxCoeff();
    row = row.exp();
    v.row(i) = (row / row.sum()).matrix();
  }
  return detail::emit(tape, std::move(v), a.requires_grad(), "softmax",
                      [an = a.node()](const detail::NodePtr& on) {
                        an->ensure_grad();
                        for (Eigen::Index i = 0; i < on->value.rows(); ++i) {
                          Eigen::ArrayXd y = on->value.row(i).array();
                          Eigen::ArrayXd gy = on->grad.row(i).array();
                          double s = (gy * y).sum();
                          an->grad.row(i).array() += y * (gy - s);
                        }
                      });
}

// ---- finite-difference gradient verification ----

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int entries_checked = 0;
};

struct GradCheckReport {
  double eps = 0.0;
  double tol = 0.0;
  double max_rel_err = 0.0;
  bool pass = false;
  std::vector<GradCheckEntry> tensors;
};

// Central differences against the tape gradient. loss_fn must be
// deterministic (checked by evaluating twice and requiring bitwise-equal
// results). For tensors larger than sample_cap entries, a fixed-seed sample
// of sample_cap entries is checked. Relative error denominator is
// max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport grad_check(const std::function<Tensor(Tape&)>& loss_fn,
                                  std::vector<std::pair<std::string, Tensor>> params, double eps,
                                  double tol, int sample_cap = 100,
                                  std::uint64_t sample_seed = 0x9e3779b9ull) {
  if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");
  if (tol <= 0.0) throw ConfigError("grad_check: tol must be positive");

  auto eval = [&loss_fn]() {
    Tape t;
    Tensor l = loss_fn(t);
    if (!l.is_scalar()) throw ConfigError("grad_check: loss_fn must return a scalar");
    return l.scalar_value();
  };

  double f0 = eval();
  double f1 = eval();
  if (f0 != f1)
    throw ConfigError("grad_check: loss_fn is not deterministic (" + std::to_string(f0) +
                      " vs " + std::to_string(f1) + ")");

  for (auto& [name, p] : params) p.zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);
  }
  std::vector<Eigen::MatrixXd> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params) analytic.push_back(p.grad());

  GradCheckReport rep;
  rep.eps = eps;
  rep.tol = tol;
  Rng rng(sample_seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi].second;
    GradCheckEntry entry;
    entry.name = params[pi].first;
    int n = static_cast<int>(p.size());
    std::vector<int> picked;
    if (n <= sample_cap) {
      picked.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) picked[static_cast<std::size_t>(i)] = i;
    } else {
      picked = rng.sample_indices(n, sample_cap);
    }
    double* data = p.mutable_value().data();  // column-major linear indexing
    for (int e : picked) {
      double orig = data[e];
      data[e] = orig + eps;
      double fp = eval();
      data[e] = orig - eps;
      double fm = eval();
      data[e] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double ana = analytic[pi].data()[e];
      double denom = std::max({std::fabs(ana), std::fabs(numeric), 1e-8});
      double rel = std::fabs(ana - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.entries_checked;
    }
    rep.max_rel_err = std::max(rep.max_rel_err, entry.max_rel_err);
    rep.tensors.push_back(std::move(entry));
  }
  rep.pass = rep.max_rel_err < tol;
  for (auto& [name, p] : params) p.zero_grad();
  return rep;
}

}  // namespace hinrep::ad
