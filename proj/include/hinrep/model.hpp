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

// Gated relational GCN over the typed political-actor graph: input feature
// transform, L stacked message-passing layers with gated residual updates,
// and two softmax stance heads (liberal / conservative).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hinrep/autodiff.hpp"
#include "hinrep/hin.hpp"
#include "hinrep/rng.hpp"

namespace hinrep {

enum class Activation { LeakyRelu, Relu };
enum class GateMode { Gated, Ungated };

inline constexpr double kLeakySlope = 0.01;

inline std::string_view to_string(Activation a) {
  return a == Activation::LeakyRelu ? "leaky_relu" : "relu";
}

inline std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "leaky_relu") return Activation::LeakyRelu;
  if (s == "relu") return Activation::Relu;
  return std::nullopt;
}

// One message-passing block. Weights are stored (out x in) to match the
// W·x convention; biases are 1-row vectors.
struct LayerParams {
  std::array<ad::Tensor, kRelationCount> rel_w;
  std::array<ad::Tensor, kRelationCount> rel_b;
  ad::Tensor self_w, self_b;
  ad::Tensor gate_w, gate_b;  // d_hidden x 2*d_hidden; gate input is [u, x_prev]
};

struct HeadParams {
  ad::Tensor w, b;  // D x d_hidden, 1 x D
};

struct ModelParams {
  int d_in = 0;
  int d_hidden = 0;
  int n_labels = 0;  // D
  ad::Tensor in_w, in_b;
  std::vector<LayerParams> layers;
  HeadParams head_liberal, head_conservative;

  int layer_count() const { return static_cast<int>(layers.size()); }

  // Stable names double as checkpoint keys.
  std::vector<std::pair<std::string, ad::Tensor>> named_tensors() const {
    std::vector<std::pair<std::string, ad::Tensor>> out;
    out.emplace_back("input.weight", in_w);
    out.emplace_back("input.bias", in_b);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::string p = "layer" + std::to_string(l) + ".";
      for (int r = 0; r < kRelationCount; ++r) {
        std::string rp = p + "rel." + std::string(to_string(static_cast<RelationKind>(r)));
        out.emplace_back(rp + ".weight", layers[l].rel_w[static_cast<std::size_t>(r)]);
        out.emplace_back(rp + ".bias", layers[l].rel_b[static_cast<std::size_t>(r)]);
      }
      out.emplace_back(p + "self.weight", layers[l].self_w);
      out.emplace_back(p + "self.bias", layers[l].self_b);
      out.emplace_back(p + "gate.weight", layers[l].gate_w);
      out.emplace_back(p + "gate.bias", layers[l].gate_b);
    }
    out.emplace_back("head.liberal.weight", head_liberal.w);
    out.emplace_back("head.liberal.bias", head_liberal.b);
    out.emplace_back("head.conservative.weight", head_conservative.w);
    out.emplace_back("head.conservative.bias", head_conservative.b);
    return out;
  }

  long parameter_count() const {
    long n = 0;
    for (const auto& [name, t] : named_tensors()) n += static_cast<long>(t.size());
    return n;
  }

  // Deep copy; snapshots must not alias live optimizer state.
  ModelParams clone() const {
    ModelParams c;
    c.d_in = d_in;
    c.d_hidden = d_hidden;
    c.n_labels = n_labels;
    c.in_w = ad::parameter(in_w.value());
    c.in_b = ad::parameter(in_b.value());
    for (const LayerParams& l : layers) {
      LayerParams cl;
      for (int r = 0; r < kRelationCount; ++r) {
        cl.rel_w[static_cast<std::size_t>(r)] =
            ad::parameter(l.rel_w[static_cast<std::size_t>(r)].value());
        cl.rel_b[static_cast<std::size_t>(r)] =
            ad::parameter(l.rel_b[static_cast<std::size_t>(r)].value());
      }
      cl.self_w = ad::parameter(l.self_w.value());
      cl.self_b = ad::parameter(l.self_b.value());
      cl.gate_w = ad::parameter(l.gate_w.value());
      cl.gate_b = ad::parameter(l.gate_b.value());
      c.layers.push_back(std::move(cl));
    }
    c.head_liberal = HeadParams{ad::parameter(head_liberal.w.value()),
                                ad::parameter(head_liberal.b.value())};
    c.head_conservative = HeadParams{ad::parameter(head_conservative.w.value()),
                                     ad::parameter(head_conservative.b.value())};
    return c;
  }
};

namespace detail_model {

// uniform ±sqrt(6/(fan_in+fan_out)); rows = fan_out, cols = fan_in.
// Entries are drawn row-major so the stream order is pinned.
inline Eigen::MatrixXd xavier(Rng& rng, int rows, int cols) {
  double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-a, a);
  return m;
}

inline Eigen::MatrixXd zeros(int rows, int cols) { return Eigen::MatrixXd::Zero(rows, cols); }

}  // namespace detail_model

inline ModelParams init_params(int d_in, int d_hidden, int n_layers, int n_labels,
                               std::uint64_t seed) {
  if (d_in <= 0 || d_hidden <= 0 || n_labels <= 0)
    throw ConfigError("init_params: dimensions must be positive");
  if (n_layers < 0) throw ConfigError("init_params: layer count must be >= 0");
  Rng rng(mix64(seed, fnv1a("init_params")));
  ModelParams p;
  p.d_in = d_in;
  p.d_hidden = d_hidden;
  p.n_labels = n_labels;
  p.in_w = ad::parameter(detail_model::xavier(rng, d_hidden, d_in));
  p.in_b = ad::parameter(detail_model::zeros(1, d_hidden));
  for (int l = 0; l < n_layers; ++l) {
    LayerParams lp;
    for (int r = 0; r < kRelationCount; ++r) {
      lp.rel_w[static_cast<std::size_t>(r)] =
          ad::parameter(detail_model::xavier(rng, d_hidden, d_hidden));
      lp.rel_b[static_cast<std::size_t>(r)] = ad::parameter(detail_model::zeros(1, d_hidden));
    }
    lp.self_w = ad::parameter(detail_model::xavier(rng, d_hidden, d_hidden));
    lp.self_b = ad::parameter(detail_model::zeros(1, d_hidden));
    lp.gate_w = ad::parameter(detail_model::xavier(rng, d_hidden, 2 * d_hidden));
    lp.gate_b = ad::parameter(detail_model::zeros(1, d_hidden));
    p.layers.push_back(std::move(lp));
  }
  p.head_liberal = HeadParams{ad::parameter(detail_model::xavier(rng, n_labels, d_hidden)),
                              ad::parameter(detail_model::zeros(1, n_labels))};
  p.head_conservative = HeadParams{ad::parameter(detail_model::xavier(rng, n_labels, d_hidden)),
                                   ad::parameter(detail_model::zeros(1, n_labels))};
  return p;
}

// Constant graph-side tensors shared across epochs: node features plus one
// dense mean-aggregation operator per relation. Row i of agg[r] holds
// 1/|N_r(i)| at i's neighbors and zeros elsewhere, so empty neighborhoods
// contribute nothing (bias included, since the zero row annihilates it).
struct GraphTensors {
  ad::Tensor features;  // n x d_in
  std::array<ad::Tensor, kRelationCount> agg;
  std::array<bool, kRelationCount> relation_present{};

  static GraphTensors build(const Hin& hin) {
    GraphTensors g;
    g.features = ad::constant(hin.features());
    int n = hin.node_count();
    for (int r = 0; r < kRelationCount; ++r) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
      bool any = false;
      for (int i = 0; i < n; ++i) {
        auto nb = hin.neighbors_ix(i, static_cast<RelationKind>(r));
        if (nb.empty()) continue;
        any = true;
        double w = 1.0 / static_cast<double>(nb.size());
        for (int j : nb) a(i, j) = w;
      }
      g.relation_present[static_cast<std::size_t>(r)] = any;
      g.agg[static_cast<std::size_t>(r)] = ad::constant(std::move(a));
    }
    return g;
  }
};

// x * W^T + b (rows are entities)
inline ad::Tensor affine(ad::Tape& t, const ad::Tensor& x, const ad::Tensor& w,
                         const ad::Tensor& b) {
  return ad::add(t, ad::matmul(t, x, ad::transpose(t, w)), b);
}

inline ad::Tensor apply_phi(ad::Tape& t, const ad::Tensor& x, Activation phi) {
  return phi == Activation::LeakyRelu ? ad::leaky_relu(t, x, kLeakySlope) : ad::relu(t, x);
}

inline ad::Tensor input_transform_t(ad::Tape& t, const ModelParams& p, const ad::Tensor& features,
                                    Activation phi) {
  if (features.cols() != p.d_in)
    throw ad::DimensionError("input_transform: feature dim " + std::to_string(features.cols()) +
                             " != d_in " + std::to_string(p.d_in));
  return apply_phi(t, affine(t, features, p.in_w, p.in_b), phi);
}

inline ad::Tensor rgcn_layer_t(ad::Tape& t, const LayerParams& lp, const GraphTensors& g,
                               const ad::Tensor& x_prev, GateMode mode, Activation phi) {
  ad::Tensor u;
  for (int r = 0; r < kRelationCount; ++r) {
    if (!g.relation_present[static_cast<std::size_t>(r)]) continue;
    ad::Tensor transformed = affine(t, x_prev, lp.rel_w[static_cast<std::size_t>(r)],
                                    lp.rel_b[static_cast<std::size_t>(r)]);
    ad::Tensor term = ad::matmul(t, g.agg[static_cast<std::size_t>(r)], transformed);
    u = u.defined() ? ad::add(t, u, term) : term;
  }
  ad::Tensor self_term = affine(t, x_prev, lp.self_w, lp.self_b);
  u = u.defined() ? ad::add(t, u, self_term) : self_term;

  if (mode == GateMode::Ungated) return apply_phi(t, u, phi);

  ad::Tensor gate = ad::sigmoid(t, affine(t, ad::concat(t, u, x_prev), lp.gate_w, lp.gate_b));
  ad::Tensor keep = ad::scalar_add(t, ad::scalar_mul(t, gate, -1.0), 1.0);
  return ad::add(t, ad::hadamard(t, ad::tanh(t, u), gate), ad::hadamard(t, x_prev, keep));
}

inline ad::Tensor embed_t(ad::Tape& t, const ModelParams& p, const GraphTensors& g, GateMode mode,
                          Activation phi) {
  ad::Tensor x = input_transform_t(t, p, g.features, phi);
  for (const LayerParams& lp : p.layers) x = rgcn_layer_t(t, lp, g, x, mode, phi);
  return x;
}

// row-aligned with the graph's internal node indices
using EmbeddingTable = Eigen::MatrixXd;

inline EmbeddingTable forward(const ModelParams& p, const Hin& hin,
                              GateMode mode = GateMode::Gated,
                              Activation phi = Activation::LeakyRelu) {
  GraphTensors g = GraphTensors::build(hin);
  ad::Tape tape;  // discarded; value-only pass
  return embed_t(tape, p, g, mode, phi).value();
}

inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Eigen::ArrayXd row = out.row(i).array();
    row -= row.maxCoeff();
    row = row.exp();
    out.row(i) = (row / row.sum()).matrix();
  }
  return out;
}

inline Eigen::MatrixXd head_distributions(const HeadParams& head, const Eigen::MatrixXd& emb_rows) {
  return softmax_rows((emb_rows * head.w.value().transpose()).rowwise() +
                      head.b.value().row(0));
}

// (liberal, conservative) distribution matrices for the named entities.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> predict_stances(
    const ModelParams& p, const EmbeddingTable& emb, const Hin& hin,
    const std::vector<std::string>& entities) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(entities.size()), p.d_hidden);
  for (std::size_t i = 0; i < entities.size(); ++i)
    rows.row(static_cast<Eigen::Index>(i)) = emb.row(hin.index_of(entities[i]));
  return {head_distributions(p.head_liberal, rows),
          head_distributions(p.head_conservative, rows)};
}

}  // namespace hinrep
