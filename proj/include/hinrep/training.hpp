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

// Adam training loop over the combined objective, split management,
// best-epoch model selection, evaluation metrics (accuracy, macro/micro F1,
// harmonic-mean reporting, consistency rate) and the Davies-Bouldin index.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hinrep/autodiff.hpp"
#include "hinrep/hin.hpp"
#include "hinrep/model.hpp"
#include "hinrep/objectives.hpp"
#include "hinrep/rng.hpp"

namespace hinrep {

struct TrainConfig {
  int d_hidden = 512;
  int n_layers = 2;  // L
  int n_labels = 5;  // D
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_epochs = 100;
  double lambda1 = 1.0;
  double lambda2 = 0.2;
  double lambda3 = 0.1;
  double lambda4 = 1e-5;
  double q = 0.1;
  int k_neg = 2;
  Activation phi = Activation::LeakyRelu;
  bool gated = true;
  std::array<double, 3> split_ratio = {0.7, 0.2, 0.1};
  std::uint64_t seed = 42;
  // 0 = full-batch. Positive values subsample the labeled-entity set used by
  // the expert loss each epoch (per source); graph propagation stays full.
  int batch_size = 0;
  // Stance-consistency scope: actor kinds by default, all nodes if set.
  bool consistency_all_nodes = false;
  // Echo-chamber scope: all nodes by default, actor kinds only if set.
  bool echo_actors_only = false;

  GateMode gate_mode() const { return gated ? GateMode::Gated : GateMode::Ungated; }

  void validate() const {
    if (d_hidden <= 0 || n_labels <= 0) throw ConfigError("config: dimensions must be positive");
    if (n_layers < 0) throw ConfigError("config: layer count must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("config: learning_rate must be positive");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
      throw ConfigError("config: adam betas must lie in [0,1)");
    if (adam_eps <= 0.0) throw ConfigError("config: adam_eps must be positive");
    if (max_epochs < 1) throw ConfigError("config: max_epochs must be >= 1");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 || lambda4 < 0.0)
      throw ConfigError("config: loss weights must be nonnegative");
    if (q < 0.0) throw ConfigError("config: q must be nonnegative");
    if (k_neg < 0) throw ConfigError("config: k_neg must be >= 0");
    if (batch_size < 0) throw ConfigError("config: batch_size must be >= 0");
    double sum = split_ratio[0] + split_ratio[1] + split_ratio[2];
    if (split_ratio[0] < 0.0 || split_ratio[1] < 0.0 || split_ratio[2] < 0.0 ||
        std::fabs(sum - 1.0) > 1e-9)
      throw ConfigError("config: split ratio must be nonnegative and sum to 1");
  }
};

// ---- splits ----

// Largest-remainder apportionment of n into three buckets: floor each share,
// hand leftover units to the largest fractional parts, ties broken in bucket
// order (train, val, test). Reproduces 10 -> 7/2/1 and 777 -> 544/155/78 at
// the default ratio.
inline std::array<int, 3> apportion_counts(int n, const std::array<double, 3>& ratio) {
  std::array<int, 3> counts{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double share = ratio[static_cast<std::size_t>(i)] * n;
    counts[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(share));
    frac[static_cast<std::size_t>(i)] = share - std::floor(share);
    assigned += counts[static_cast<std::size_t>(i)];
  }
  int remainder = n - assigned;
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)]; });
  for (int k = 0; k < remainder; ++k)
    counts[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] += 1;
  return counts;
}

// Per-source shuffled partition; deterministic per seed (liberal entries are
// shuffled first, then conservative).
inline ExpertLabels make_splits(ExpertLabels labels, const std::array<double, 3>& ratio,
                                std::uint64_t seed) {
  double sum = ratio[0] + ratio[1] + ratio[2];
  if (ratio[0] < 0.0 || ratio[1] < 0.0 || ratio[2] < 0.0 || std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("make_splits: ratio must be nonnegative and sum to 1");
  Rng rng(mix64(seed, fnv1a("make_splits")));
  for (Source src : {Source::Liberal, Source::Conservative}) {
    std::vector<int> ix;
    for (std::size_t i = 0; i < labels.entries.size(); ++i)
      if (labels.entries[i].source == src) ix.push_back(static_cast<int>(i));
    if (ix.size() < 3)
      throw DataError("make_splits: source " + std::string(to_string(src)) + " has " +
                      std::to_string(ix.size()) + " labeled entries, need at least 3");
    rng.shuffle(ix);
    std::array<int, 3> counts = apportion_counts(static_cast<int>(ix.size()), ratio);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (int k = 0; k < counts[static_cast<std::size_t>(s)]; ++k, ++pos)
        labels.entries[static_cast<std::size_t>(ix[pos])].split = static_cast<Split>(s);
    }
  }
  return labels;
}

// ---- metrics ----

struct ConfusionMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  int count = 0;
};

// Macro-F1 averages per-class F1 over classes present in gold or prediction;
// classes absent from both are excluded, classes absent from one side score 0.
// Micro-F1 aggregates counts globally (equals accuracy for single-label
// classification; computed from the global counts regardless).
inline ConfusionMetrics classification_metrics(const std::vector<int>& gold,
                                               const std::vector<int>& pred, int n_classes) {
  if (gold.size() != pred.size())
    throw ConfigError("classification_metrics: gold/pred size mismatch");
  if (gold.empty()) throw DataError("classification_metrics: empty evaluation set");
  ConfusionMetrics m;
  m.count = static_cast<int>(gold.size());
  std::vector<int> tp(static_cast<std::size_t>(n_classes), 0);
  std::vector<int> fp(static_cast<std::size_t>(n_classes), 0);
  std::vector<int> fn(static_cast<std::size_t>(n_classes), 0);
  int correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    int g = gold[i], p = pred[i];
    if (g < 0 || g >= n_classes || p < 0 || p >= n_classes)
      throw ConfigError("classification_metrics: class index out of range");
    if (g == p) {
      ++correct;
      ++tp[static_cast<std::size_t>(g)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(g)];
    }
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  double f1_sum = 0.0;
  int f1_classes = 0;
  int tp_all = 0, fp_all = 0, fn_all = 0;
  for (int c = 0; c < n_classes; ++c) {
    auto cz = static_cast<std::size_t>(c);
    int support = tp[cz] + fn[cz];
    int predicted = tp[cz] + fp[cz];
    tp_all += tp[cz];
    fp_all += fp[cz];
    fn_all += fn[cz];
    if (support == 0 && predicted == 0) continue;  // absent from both sides
    double precision = predicted > 0 ? static_cast<double>(tp[cz]) / predicted : 0.0;
    double recall = support > 0 ? static_cast<double>(tp[cz]) / support : 0.0;
    double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    f1_sum += f1;
    ++f1_classes;
  }
  m.macro_f1 = f1_classes > 0 ? f1_sum / f1_classes : 0.0;
  double micro_p = (tp_all + fp_all) > 0 ? static_cast<double>(tp_all) / (tp_all + fp_all) : 0.0;
  double micro_r = (tp_all + fn_all) > 0 ? static_cast<double>(tp_all) / (tp_all + fn_all) : 0.0;
  m.micro_f1 = (micro_p + micro_r) > 0.0 ? 2.0 * micro_p * micro_r / (micro_p + micro_r) : 0.0;
  return m;
}

inline double harmonic_mean(double a, double b) {
  if (a + b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

struct EvalReport {
  std::string split;
  ConfusionMetrics liberal, conservative;
  double h_accuracy = 0.0;
  double h_macro_f1 = 0.0;
  double h_micro_f1 = 0.0;
  double consistency_rate = 0.0;
  std::map<std::string, double> dbi;  // grouping name -> index

  void fill_harmonics() {
    h_accuracy = harmonic_mean(liberal.accuracy, conservative.accuracy);
    h_macro_f1 = harmonic_mean(liberal.macro_f1, conservative.macro_f1);
    h_micro_f1 = harmonic_mean(liberal.micro_f1, conservative.micro_f1);
  }
};

// Fraction of rows where the two heads are mutually index-reversed.
inline double consistency_rate(const Eigen::MatrixXd& pred_l, const Eigen::MatrixXd& pred_c) {
  if (pred_l.rows() == 0) return 0.0;
  int d = static_cast<int>(pred_l.cols());
  int ok = 0;
  for (Eigen::Index i = 0; i < pred_l.rows(); ++i)
    if (argmax_row(pred_l, i) == (d - 1) - argmax_row(pred_c, i)) ++ok;
  return static_cast<double>(ok) / static_cast<double>(pred_l.rows());
}

// ---- Davies-Bouldin index ----

// DBI = (1/k) sum_i max_{j != i} (s_i + s_j) / d(c_i, c_j) with Euclidean
// centroids and mean member-to-centroid distances. Coincident centroids of
// distinct groups return +infinity.
inline double dbi(const Eigen::MatrixXd& emb, const std::vector<std::vector<int>>& groups) {
  if (groups.size() < 2) throw ConfigError("dbi: need at least 2 groups");
  std::size_t k = groups.size();
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), emb.cols());
  std::vector<double> scatter(k, 0.0);
  for (std::size_t gi = 0; gi < k; ++gi) {
    if (groups[gi].empty()) throw ConfigError("dbi: group " + std::to_string(gi) + " is empty");
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(emb.cols());
    for (int m : groups[gi]) c += emb.row(m);
    c /= static_cast<double>(groups[gi].size());
    centroids.row(static_cast<Eigen::Index>(gi)) = c;
    double s = 0.0;
    for (int m : groups[gi]) s += (emb.row(m) - c).norm();
    scatter[gi] = s / static_cast<double>(groups[gi].size());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      double dist = (centroids.row(static_cast<Eigen::Index>(i)) -
                     centroids.row(static_cast<Eigen::Index>(j)))
                        .norm();
      if (dist == 0.0) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, (scatter[i] + scatter[j]) / dist);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

inline double dbi(const Eigen::MatrixXd& emb, const Hin& hin,
                  const std::map<std::string, std::string>& grouping) {
  std::map<std::string, std::vector<int>> by_group;
  for (const auto& [id, group] : grouping) by_group[group].push_back(hin.index_of(id));
  std::vector<std::vector<int>> groups;
  for (auto& [name, members] : by_group) groups.push_back(std::move(members));
  return dbi(emb, groups);
}

// Group node indices by kind; kinds with no members are omitted.
inline std::vector<std::vector<int>> group_by_kind(const Hin& hin) {
  std::vector<std::vector<int>> groups;
  for (int k = 0; k < kNodeKindCount; ++k) {
    std::vector<int> g = hin.indices_of_kind(static_cast<NodeKind>(k));
    if (!g.empty()) groups.push_back(std::move(g));
  }
  return groups;
}

// Group actors by party affiliation (first R1 neighbor, ascending id);
// actors without a party edge are omitted.
inline std::vector<std::vector<int>> group_by_party(const Hin& hin) {
  std::map<int, std::vector<int>> by_party;
  for (int i : hin.actor_indices()) {
    auto parties = hin.neighbors_ix(i, RelationKind::R1_PartyAffiliation);
    if (parties.empty()) continue;
    by_party[parties[0]].push_back(i);
  }
  std::vector<std::vector<int>> groups;
  for (auto& [party, members] : by_party) groups.push_back(std::move(members));
  return groups;
}

// Same group sizes, membership shuffled across the union of members.
inline std::vector<std::vector<int>> randomize_grouping(std::vector<std::vector<int>> groups,
                                                        Rng& rng) {
  std::vector<int> pool;
  for (const auto& g : groups) pool.insert(pool.end(), g.begin(), g.end());
  rng.shuffle(pool);
  std::size_t pos = 0;
  for (auto& g : groups) {
    for (auto& m : g) m = pool[pos++];
  }
  return groups;
}

// ---- Adam ----

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long t = 0;

  static AdamState init(const ModelParams& p) {
    AdamState s;
    for (const auto& [name, w] : p.named_tensors()) {
      s.m.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
      s.v.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    return s;
  }
};

// Standard bias-corrected Adam, in place; gradients are zeroed afterwards.
inline void adam_step(ModelParams& params, AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  auto named = params.named_tensors();
  if (named.size() != state.m.size()) throw ConfigError("adam_step: state/param count mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, w] = named[i];
    const Eigen::MatrixXd& g = w.grad();
    if (!g.allFinite()) throw NumericError("adam_step: non-finite gradient in " + name);
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    Eigen::MatrixXd m_hat = state.m[i] / bc1;
    Eigen::MatrixXd v_hat = state.v[i] / bc2;
    ad::Tensor wt = w;  // shared handle; mutate in place
    wt.mutable_value().array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps);
    ad::check_finite(wt.value(), "adam_step");
    wt.zero_grad();
  }
}

// ---- evaluation ----

namespace detail_train {

struct SourceEvalSet {
  std::vector<int> node_rows;  // graph indices of labeled entities
  std::vector<int> gold;
};

inline SourceEvalSet eval_set(const Hin& hin, const ExpertLabels& labels, Source src,
                              Split split) {
  SourceEvalSet s;
  for (const LabelEntry& e : labels.entries) {
    if (e.source != src || e.split != split) continue;
    s.node_rows.push_back(hin.index_of(e.id));
    s.gold.push_back(e.label);
  }
  return s;
}

inline std::vector<int> argmax_rows(const Eigen::MatrixXd& dist) {
  std::vector<int> out(static_cast<std::size_t>(dist.rows()));
  for (Eigen::Index i = 0; i < dist.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_row(dist, i);
  return out;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

inline ConfusionMetrics source_metrics(const Eigen::MatrixXd& emb, const HeadParams& head,
                                       const SourceEvalSet& s, int n_labels) {
  Eigen::MatrixXd dist = head_distributions(head, take_rows(emb, s.node_rows));
  return classification_metrics(s.gold, argmax_rows(dist), n_labels);
}

}  // namespace detail_train

// Metrics for one split given frozen embeddings (avoids re-running forward
// when the caller already has them).
inline EvalReport evaluate_embeddings(const Eigen::MatrixXd& emb, const ModelParams& params,
                                      const Hin& hin, const ExpertLabels& labels, Split split,
                                      bool consistency_all_nodes = false) {
  EvalReport rep;
  rep.split = std::string(to_string(split));
  auto lib = detail_train::eval_set(hin, labels, Source::Liberal, split);
  auto con = detail_train::eval_set(hin, labels, Source::Conservative, split);
  if (lib.gold.empty() || con.gold.empty())
    throw DataError("evaluate: empty " + rep.split + " split for source " +
                    (lib.gold.empty() ? "liberal" : "conservative"));
  rep.liberal = detail_train::source_metrics(emb, params.head_liberal, lib, labels.n_labels);
  rep.conservative =
      detail_train::source_metrics(emb, params.head_conservative, con, labels.n_labels);
  rep.fill_harmonics();

  std::vector<int> scope = consistency_all_nodes ? hin.all_indices() : hin.actor_indices();
  if (!scope.empty()) {
    Eigen::MatrixXd rows = detail_train::take_rows(emb, scope);
    rep.consistency_rate = consistency_rate(head_distributions(params.head_liberal, rows),
                                            head_distributions(params.head_conservative, rows));
  }

  auto kind_groups = group_by_kind(hin);
  if (kind_groups.size() >= 2) rep.dbi["kind"] = dbi(emb, kind_groups);
  auto party_groups = group_by_party(hin);
  if (party_groups.size() >= 2) rep.dbi["party"] = dbi(emb, party_groups);
  return rep;
}

inline EvalReport evaluate(const ModelParams& params, const Hin& hin, const ExpertLabels& labels,
                           Split split, const TrainConfig& cfg) {
  Eigen::MatrixXd emb = forward(params, hin, cfg.gate_mode(), cfg.phi);
  return evaluate_embeddings(emb, params, hin, labels, split, cfg.consistency_all_nodes);
}

// Predict the train-split majority class everywhere; harmonic-mean accuracy
// across sources on eval_split. Reference floor for planted-recovery checks.
inline double majority_baseline_h_accuracy(const ExpertLabels& labels, Split eval_split) {
  auto src_acc = [&](Source src) {
    std::vector<int> train_count(static_cast<std::size_t>(labels.n_labels), 0);
    for (const LabelEntry& e : labels.entries)
      if (e.source == src && e.split == Split::Train)
        ++train_count[static_cast<std::size_t>(e.label)];
    int majority = 0;
    for (int c = 1; c < labels.n_labels; ++c)
      if (train_count[static_cast<std::size_t>(c)] > train_count[static_cast<std::size_t>(majority)])
        majority = c;
    int n = 0, hit = 0;
    for (const LabelEntry& e : labels.entries)
      if (e.source == src && e.split == eval_split) {
        ++n;
        if (e.label == majority) ++hit;
      }
    return n > 0 ? static_cast<double>(hit) / n : 0.0;
  };
  return harmonic_mean(src_acc(Source::Liberal), src_acc(Source::Conservative));
}

// ---- training loop ----

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossBreakdown loss;
  ConfusionMetrics val_liberal, val_conservative;
  double val_h_accuracy = 0.0;
  double val_h_macro_f1 = 0.0;
  double val_h_micro_f1 = 0.0;
  double val_consistency_rate = 0.0;
};

struct TrainResult {
  ModelParams best_params;
  int best_epoch = 0;  // 1-based epoch whose entering params were best
  std::vector<EpochRecord> log;
  EvalReport best_val_report;
  ExpertLabels labels;  // with split assignments used for the run
};

// Full-graph training. Per epoch: one forward pass, losses on the train
// split, validation metrics from the same embeddings (parameters entering
// the epoch), backward, Adam step. Components with zero weight are skipped
// and logged as 0. Best epoch = highest validation harmonic-mean accuracy,
// earliest on ties; the returned params are the snapshot entering that epoch.
inline TrainResult train(const Hin& hin, ExpertLabels labels, const TrainConfig& cfg) {
  cfg.validate();
  if (labels.n_labels != cfg.n_labels)
    throw ConfigError("train: label bins (" + std::to_string(labels.n_labels) +
                      ") != config n_labels (" + std::to_string(cfg.n_labels) + ")");
  labels = make_splits(std::move(labels), cfg.split_ratio, cfg.seed);

  ModelParams params =
      init_params(hin.feature_dim(), cfg.d_hidden, cfg.n_layers, cfg.n_labels, cfg.seed);
  GraphTensors graph = GraphTensors::build(hin);
  AdamState adam = AdamState::init(params);
  Rng run_rng(cfg.seed);

  auto lib_train = detail_train::eval_set(hin, labels, Source::Liberal, Split::Train);
  auto con_train = detail_train::eval_set(hin, labels, Source::Conservative, Split::Train);
  auto lib_val = detail_train::eval_set(hin, labels, Source::Liberal, Split::Val);
  auto con_val = detail_train::eval_set(hin, labels, Source::Conservative, Split::Val);
  if (lib_val.gold.empty() || con_val.gold.empty())
    throw DataError("train: empty validation split; increase labels or adjust ratio");

  std::vector<int> stance_scope = cfg.consistency_all_nodes ? hin.all_indices() : hin.actor_indices();
  std::vector<int> echo_scope = cfg.echo_actors_only ? hin.actor_indices() : hin.all_indices();

  LossBreakdown weights;
  weights.lambda1 = cfg.lambda1;
  weights.lambda2 = cfg.lambda2;
  weights.lambda3 = cfg.lambda3;
  weights.lambda4 = cfg.lambda4;
  weights.q = cfg.q;
  weights.k_neg = cfg.k_neg;

  TrainResult result;
  double best_h_acc = -1.0;

  auto head_softmax = [&](ad::Tape& t, const ad::Tensor& emb, const HeadParams& head,
                          const std::vector<int>& rows) {
    return ad::softmax(t, affine(t, ad::gather_rows(t, emb, rows), head.w, head.b));
  };

  auto subsample = [&](const detail_train::SourceEvalSet& s, int epoch,
                       const char* tag) -> detail_train::SourceEvalSet {
    if (cfg.batch_size <= 0 || static_cast<int>(s.node_rows.size()) <= cfg.batch_size) return s;
    Rng r = run_rng.substream(tag, static_cast<std::uint64_t>(epoch));
    std::vector<int> pick =
        r.sample_indices(static_cast<int>(s.node_rows.size()), cfg.batch_size);
    detail_train::SourceEvalSet out;
    for (int ix : pick) {
      out.node_rows.push_back(s.node_rows[static_cast<std::size_t>(ix)]);
      out.gold.push_back(s.gold[static_cast<std::size_t>(ix)]);
    }
    return out;
  };

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    try {
      ad::Tape tape;
      ad::Tensor emb = embed_t(tape, params, graph, cfg.gate_mode(), cfg.phi);

      ad::Tensor l1, l2, l3, reg;
      if (cfg.lambda1 > 0.0) {
        auto lib = subsample(lib_train, epoch, "batch_liberal");
        auto con = subsample(con_train, epoch, "batch_conservative");
        ad::Tensor pl = head_softmax(tape, emb, params.head_liberal, lib.node_rows);
        ad::Tensor pc = head_softmax(tape, emb, params.head_conservative, con.node_rows);
        l1 = expert_loss(tape, pl, lib.gold, pc, con.gold);
      }
      if (cfg.lambda2 > 0.0 && !stance_scope.empty()) {
        ad::Tensor pl = head_softmax(tape, emb, params.head_liberal, stance_scope);
        ad::Tensor pc = head_softmax(tape, emb, params.head_conservative, stance_scope);
        auto [tl, tc] = consistency_labels(pl.value(), pc.value());
        l2 = consistency_loss(tape, pl, pc, tl, tc);
      }
      if (cfg.lambda3 > 0.0) {
        Rng echo_rng = run_rng.substream("echo_negatives", static_cast<std::uint64_t>(epoch));
        l3 = echo_chamber_loss(tape, emb, hin, echo_scope, cfg.k_neg, cfg.q, echo_rng);
      }
      if (cfg.lambda4 > 0.0) reg = weight_decay_term(tape, params);

      auto [total, breakdown] = combine_losses(tape, l1, l2, l3, reg, weights);
      if (!std::isfinite(breakdown.total))
        throw NumericError("non-finite training loss " + std::to_string(breakdown.total));

      EpochRecord rec;
      rec.epoch = epoch;
      rec.loss = breakdown;
      const Eigen::MatrixXd& emb_v = emb.value();
      rec.val_liberal =
          detail_train::source_metrics(emb_v, params.head_liberal, lib_val, cfg.n_labels);
      rec.val_conservative =
          detail_train::source_metrics(emb_v, params.head_conservative, con_val, cfg.n_labels);
      rec.val_h_accuracy = harmonic_mean(rec.val_liberal.accuracy, rec.val_conservative.accuracy);
      rec.val_h_macro_f1 = harmonic_mean(rec.val_liberal.macro_f1, rec.val_conservative.macro_f1);
      rec.val_h_micro_f1 = harmonic_mean(rec.val_liberal.micro_f1, rec.val_conservative.micro_f1);
      if (!stance_scope.empty()) {
        Eigen::MatrixXd rows = detail_train::take_rows(emb_v, stance_scope);
        rec.val_consistency_rate =
            consistency_rate(head_distributions(params.head_liberal, rows),
                             head_distributions(params.head_conservative, rows));
      }

      if (rec.val_h_accuracy > best_h_acc) {
        best_h_acc = rec.val_h_accuracy;
        result.best_params = params.clone();  // pre-step params produced these metrics
        result.best_epoch = epoch;
      }

      tape.backward(total);
      adam_step(params, adam, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      result.log.push_back(std::move(rec));
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }

  result.labels = std::move(labels);
  result.best_val_report = evaluate(result.best_params, hin, result.labels, Split::Val, cfg);
  return result;
}

}  // namespace hinrep
