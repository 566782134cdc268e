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

// Training objectives: expert-knowledge cross-entropy, stance-consistency
// loss with gradient-stopped derived labels, echo-chamber structural loss
// with negative sampling, and their weighted combination.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hinrep/autodiff.hpp"
#include "hinrep/hin.hpp"
#include "hinrep/model.hpp"

namespace hinrep {

enum class Source { Liberal, Conservative };
enum class Split { Train, Val, Test };

inline std::string_view to_string(Source s) {
  return s == Source::Liberal ? "liberal" : "conservative";
}
inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    default: return "test";
  }
}

inline std::optional<Source> parse_source(std::string_view s) {
  if (s == "liberal") return Source::Liberal;
  if (s == "conservative") return Source::Conservative;
  return std::nullopt;
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

// Five ordinal bins over [0,1]; boundary points belong to the more extreme
// bin at the outer edges (0.9 -> strongly favor, 0.1 -> oppose).
inline int bin_score(double s, int n_labels = 5) {
  if (n_labels != 5) throw ConfigError("bin_score: exactly 5 label bins are defined");
  if (!(s >= 0.0 && s <= 1.0))
    throw ConfigError("bin_score: score " + std::to_string(s) + " outside [0,1]");
  if (s < 0.1) return 0;   // strongly oppose
  if (s < 0.25) return 1;  // oppose
  if (s < 0.75) return 2;  // neutral
  if (s < 0.9) return 3;   // favor
  return 4;                // strongly favor
}

struct LabelEntry {
  std::string id;
  Source source = Source::Liberal;
  double score = 0.0;
  int label = 0;  // == bin_score(score)
  Split split = Split::Train;
};

struct ExpertLabels {
  int n_labels = 5;  // D
  std::vector<LabelEntry> entries;

  std::vector<int> entry_indices(Source src, Split split) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].source == src && entries[i].split == split)
        out.push_back(static_cast<int>(i));
    return out;
  }

  int count(Source src, Split split) const {
    return static_cast<int>(entry_indices(src, split).size());
  }
};

// ---- differentiable losses ----

// Summed cross-entropy against one-hot targets; pred rows are distributions.
inline ad::Tensor cross_entropy_sum(ad::Tape& t, const ad::Tensor& pred,
                                    const std::vector<int>& targets) {
  if (pred.rows() != static_cast<Eigen::Index>(targets.size()))
    throw DataError("cross_entropy_sum: " + std::to_string(pred.rows()) +
                    " prediction rows for " + std::to_string(targets.size()) + " targets");
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    int c = targets[i];
    if (c < 0 || c >= pred.cols())
      throw DataError("cross_entropy_sum: target " + std::to_string(c) + " out of range");
    onehot(static_cast<Eigen::Index>(i), c) = 1.0;
  }
  ad::Tensor picked = ad::hadamard(t, ad::constant(std::move(onehot)), ad::log(t, pred));
  return ad::scalar_mul(t, ad::sum(t, picked), -1.0);
}

// L1: summed CE over both expert sources for one split. Prediction matrices
// are row-aligned with the target lists (coverage enforced by shape).
inline ad::Tensor expert_loss(ad::Tape& t, const ad::Tensor& pred_liberal,
                              const std::vector<int>& targets_liberal,
                              const ad::Tensor& pred_conservative,
                              const std::vector<int>& targets_conservative) {
  ad::Tensor a = cross_entropy_sum(t, pred_liberal, targets_liberal);
  ad::Tensor b = cross_entropy_sum(t, pred_conservative, targets_conservative);
  return ad::add(t, a, b);
}

// Argmax with ties broken toward the lowest index.
inline int argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(row, c) > m(row, best)) best = static_cast<int>(c);
  return best;
}

// Derived stance targets: each head is told to predict the index-reversed
// argmax of the other head. Computed from values only; gradients never flow
// through the argmax.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> consistency_labels(
    const Eigen::MatrixXd& pred_l, const Eigen::MatrixXd& pred_c) {
  int d = static_cast<int>(pred_l.cols());
  Eigen::MatrixXd tl = Eigen::MatrixXd::Zero(pred_l.rows(), d);
  Eigen::MatrixXd tc = Eigen::MatrixXd::Zero(pred_c.rows(), d);
  for (Eigen::Index i = 0; i < pred_l.rows(); ++i) {
    tl(i, (d - 1) - argmax_row(pred_c, i)) = 1.0;
    tc(i, (d - 1) - argmax_row(pred_l, i)) = 1.0;
  }
  return {std::move(tl), std::move(tc)};
}

// L2: summed CE of each head against its gradient-stopped derived target.
inline ad::Tensor consistency_loss(ad::Tape& t, const ad::Tensor& pred_l, const ad::Tensor& pred_c,
                                   const Eigen::MatrixXd& target_l,
                                   const Eigen::MatrixXd& target_c) {
  ad::Tensor a =
      ad::sum(t, ad::hadamard(t, ad::constant(target_l), ad::log(t, pred_l)));
  ad::Tensor b =
      ad::sum(t, ad::hadamard(t, ad::constant(target_c), ad::log(t, pred_c)));
  return ad::scalar_mul(t, ad::add(t, a, b), -1.0);
}

// L3: -sum over scope of log sigma(x_i . x_j) for j in P_i, minus
// q * sum over k_neg sampled non-neighbors of log sigma(-x_i . x_j).
// Negative draws consume rng per scope entity in ascending index order;
// oracles replay the same calls with a cloned generator.
inline ad::Tensor echo_chamber_loss(ad::Tape& t, const ad::Tensor& emb, const Hin& hin,
                                    const std::vector<int>& scope, int k_neg, double q, Rng& rng) {
  if (k_neg < 0) throw ConfigError("echo_chamber_loss: k_neg must be >= 0");
  if (q < 0.0) throw ConfigError("echo_chamber_loss: q must be >= 0");
  std::vector<int> pos_left, pos_right, neg_left, neg_right;
  for (int i : scope) {
    for (int j : hin.positive_ix(i)) {
      pos_left.push_back(i);
      pos_right.push_back(j);
    }
  }
  if (k_neg > 0) {
    for (int i : scope) {
      for (int j : hin.sample_negatives_ix(i, k_neg, rng)) {
        neg_left.push_back(i);
        neg_right.push_back(j);
      }
    }
  }

  auto pair_dots = [&](const std::vector<int>& left, const std::vector<int>& right) {
    ad::Tensor xl = ad::gather_rows(t, emb, left);
    ad::Tensor xr = ad::gather_rows(t, emb, right);
    return ad::row_sum(t, ad::hadamard(t, xl, xr));
  };

  ad::Tensor loss;
  if (!pos_left.empty()) {
    ad::Tensor pos_term =
        ad::sum(t, ad::log(t, ad::sigmoid(t, pair_dots(pos_left, pos_right))));
    loss = ad::scalar_mul(t, pos_term, -1.0);
  }
  if (!neg_left.empty() && q > 0.0) {
    ad::Tensor neg_term = ad::sum(
        t, ad::log(t, ad::sigmoid(t, ad::scalar_mul(t, pair_dots(neg_left, neg_right), -1.0))));
    ad::Tensor weighted = ad::scalar_mul(t, neg_term, -q);
    loss = loss.defined() ? ad::add(t, loss, weighted) : weighted;
  }
  return loss.defined() ? loss : ad::scalar(0.0);
}

// Sum of squared entries over every learnable tensor.
inline ad::Tensor weight_decay_term(ad::Tape& t, const ModelParams& p) {
  ad::Tensor acc;
  for (const auto& [name, w] : p.named_tensors()) {
    ad::Tensor sq = ad::dot(t, w, w);
    acc = acc.defined() ? ad::add(t, acc, sq) : sq;
  }
  return acc;
}

struct LossBreakdown {
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, l2reg = 0.0, total = 0.0;
  double lambda1 = 1.0, lambda2 = 0.2, lambda3 = 0.1, lambda4 = 1e-5;
  double q = 0.1;
  int k_neg = 2;
};

// Weighted combination; undefined component tensors count as zero (callers
// skip computing a component when its weight is zero).
inline std::pair<ad::Tensor, LossBreakdown> combine_losses(ad::Tape& t, const ad::Tensor& l1,
                                                           const ad::Tensor& l2,
                                                           const ad::Tensor& l3,
                                                           const ad::Tensor& l2reg,
                                                           const LossBreakdown& weights) {
  if (weights.lambda1 < 0 || weights.lambda2 < 0 || weights.lambda3 < 0 || weights.lambda4 < 0)
    throw ConfigError("combine_losses: loss weights must be nonnegative");
  LossBreakdown out = weights;
  ad::Tensor total;
  auto accumulate = [&](const ad::Tensor& comp, double lambda, double& slot) {
    if (!comp.defined()) return;
    slot = comp.scalar_value();
    ad::Tensor weighted = ad::scalar_mul(t, comp, lambda);
    total = total.defined() ? ad::add(t, total, weighted) : weighted;
  };
  accumulate(l1, weights.lambda1, out.l1);
  accumulate(l2, weights.lambda2, out.l2);
  accumulate(l3, weights.lambda3, out.l3);
  accumulate(l2reg, weights.lambda4, out.l2reg);
  if (!total.defined()) total = ad::scalar(0.0);
  out.total = total.scalar_value();
  return {total, out};
}

}  // namespace hinrep
