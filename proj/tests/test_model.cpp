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

#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "hinrep/model.hpp"
#include "oracles.hpp"

using namespace hinrep;
using Catch::Matchers::WithinAbs;
using Eigen::MatrixXd;

namespace {

// Random legal HIN: kinds assigned round-robin so every kind is present,
// edges drawn by rejection against the relation domain table.
Hin random_hin(int n_nodes, int target_edges, std::uint64_t seed, int dim = 5) {
  Rng rng(seed);
  HinBuilder b;
  b.set_feature_dim(dim);
  std::vector<NodeKind> kinds(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    kinds[static_cast<std::size_t>(i)] = static_cast<NodeKind>(i % kNodeKindCount);
    std::string id = "n" + std::to_string(100 + i);
    b.add_node(id, kinds[static_cast<std::size_t>(i)], "node " + std::to_string(i));
    std::vector<double> f(static_cast<std::size_t>(dim));
    for (double& x : f) x = rng.normal();
    b.set_feature(id, f);
  }
  std::set<std::string> used;
  int added = 0;
  for (int tries = 0; tries < target_edges * 50 && added < target_edges; ++tries) {
    int s = rng.uniform_int(n_nodes);
    int d = rng.uniform_int(n_nodes);
    int r = rng.uniform_int(kRelationCount);
    if (s == d) continue;
    if (!validate_edge(kinds[static_cast<std::size_t>(s)], kinds[static_cast<std::size_t>(d)],
                       static_cast<RelationKind>(r)))
      continue;
    std::string key = std::to_string(s) + ":" + std::to_string(d) + ":" + std::to_string(r);
    if (!used.insert(key).second) continue;
    b.add_edge("n" + std::to_string(100 + s), "n" + std::to_string(100 + d),
               static_cast<RelationKind>(r));
    ++added;
  }
  return b.build();
}

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("init_params: shapes, Xavier bounds, zero biases, determinism") {
  const int d_in = 7, d = 10, L = 3, D = 5;
  ModelParams p = init_params(d_in, d, L, D, 42);
  CHECK(p.in_w.rows() == d);
  CHECK(p.in_w.cols() == d_in);
  CHECK(p.in_b.rows() == 1);
  CHECK(p.in_b.cols() == d);
  REQUIRE(p.layer_count() == L);
  for (const LayerParams& lp : p.layers) {
    for (int r = 0; r < kRelationCount; ++r) {
      CHECK(lp.rel_w[static_cast<std::size_t>(r)].rows() == d);
      CHECK(lp.rel_w[static_cast<std::size_t>(r)].cols() == d);
      CHECK(lp.rel_b[static_cast<std::size_t>(r)].value().isZero());
    }
    CHECK(lp.gate_w.rows() == d);
    CHECK(lp.gate_w.cols() == 2 * d);
    CHECK(lp.gate_b.value().isZero());
    CHECK(lp.self_b.value().isZero());
  }
  CHECK(p.head_liberal.w.rows() == D);
  CHECK(p.head_liberal.w.cols() == d);
  CHECK(p.head_liberal.b.value().isZero());
  CHECK(p.head_conservative.b.value().isZero());

  auto xavier_bound = [](const ad::Tensor& w) {
    return std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  };
  for (const auto& [name, t] : p.named_tensors()) {
    if (name.find("bias") != std::string::npos) continue;
    double bound = xavier_bound(t);
    CHECK(t.value().cwiseAbs().maxCoeff() <= bound);
    CHECK(t.value().cwiseAbs().maxCoeff() > 0.0);
  }

  SECTION("seed determinism") {
    ModelParams q = init_params(d_in, d, L, D, 42);
    ModelParams r = init_params(d_in, d, L, D, 43);
    bool same = true, diff = false;
    auto pn = p.named_tensors(), qn = q.named_tensors(), rn = r.named_tensors();
    for (std::size_t i = 0; i < pn.size(); ++i) {
      same = same && pn[i].second.value() == qn[i].second.value();
      diff = diff || pn[i].second.value() != rn[i].second.value();
    }
    CHECK(same);
    CHECK(diff);
  }
  SECTION("named tensors are unique and complete") {
    auto named = p.named_tensors();
    CHECK(named.size() == 2u + static_cast<std::size_t>(L) * 14u + 4u);
    std::set<std::string> names;
    long entries = 0;
    for (const auto& [name, t] : named) {
      CHECK(names.insert(name).second);
      entries += static_cast<long>(t.size());
    }
    CHECK(entries == p.parameter_count());
  }
  SECTION("clone detaches storage") {
    ModelParams c = p.clone();
    c.in_w.mutable_value()(0, 0) += 5.0;
    CHECK(p.in_w.value()(0, 0) != c.in_w.value()(0, 0));
  }
  SECTION("invalid dimensions rejected") {
    CHECK_THROWS_AS(init_params(0, d, L, D, 1), ConfigError);
    CHECK_THROWS_AS(init_params(d_in, -1, L, D, 1), ConfigError);
  }
}

TEST_CASE("layer rule matches the straight-line oracle on random graphs") {
  // gated and ungated, ten random 20-node graphs, single layer then the
  // full two-layer forward
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Hin hin = random_hin(20, 30, seed);
    ModelParams p = init_params(hin.feature_dim(), 8, 2, 5, seed * 977);
    for (GateMode mode : {GateMode::Gated, GateMode::Ungated}) {
      for (Activation phi : {Activation::LeakyRelu, Activation::Relu}) {
        MatrixXd got = forward(p, hin, mode, phi);
        MatrixXd want = oracles::forward(p, hin, mode, phi);
        INFO("seed=" << seed << " gated=" << (mode == GateMode::Gated)
                     << " leaky=" << (phi == Activation::LeakyRelu));
        CHECK(max_abs_diff(got, want) < 1e-10);
      }
    }
  }
}

TEST_CASE("nodes and relations without neighbors contribute nothing") {
  // only one R1 edge: every other node has empty neighborhoods in every
  // relation; R5 absent from the graph entirely
  HinBuilder b;
  b.set_feature_dim(3);
  b.add_node("leg", NodeKind::N2_Legislator, "");
  b.add_node("party", NodeKind::N8_Party, "");
  b.add_node("lonely", NodeKind::N5_State, "");
  b.set_feature("leg", {1.0, 0.0, 0.0});
  b.set_feature("party", {0.0, 1.0, 0.0});
  b.set_feature("lonely", {0.0, 0.0, 1.0});
  b.add_edge("leg", "party", RelationKind::R1_PartyAffiliation);
  Hin hin = b.build();

  ModelParams p = init_params(3, 4, 1, 5, 99);
  MatrixXd got = forward(p, hin, GateMode::Gated, Activation::LeakyRelu);
  MatrixXd want = oracles::forward(p, hin, GateMode::Gated, Activation::LeakyRelu);
  CHECK(max_abs_diff(got, want) < 1e-12);

  GraphTensors g = GraphTensors::build(hin);
  CHECK(g.relation_present[0]);
  for (int r = 1; r < kRelationCount; ++r) CHECK_FALSE(g.relation_present[static_cast<std::size_t>(r)]);
  // aggregation rows: 1-sum for nodes with neighbors, 0 otherwise
  const MatrixXd& a1 = g.agg[0].value();
  CHECK_THAT(a1.row(hin.index_of("leg")).sum(), WithinAbs(1.0, 1e-15));
  CHECK_THAT(a1.row(hin.index_of("lonely")).sum(), WithinAbs(0.0, 1e-15));
}

TEST_CASE("gate algebra invariants") {
  Hin hin = random_hin(12, 18, 4);
  ModelParams p = init_params(hin.feature_dim(), 6, 1, 5, 7);

  GraphTensors g = GraphTensors::build(hin);
  ad::Tape t;
  ad::Tensor x0 = input_transform_t(t, p, g.features, Activation::LeakyRelu);

  SECTION("zero gate parameters blend half and half") {
    p.layers[0].gate_w.mutable_value().setZero();
    p.layers[0].gate_b.mutable_value().setZero();
    ad::Tensor gated = rgcn_layer_t(t, p.layers[0], g, x0, GateMode::Gated,
                                    Activation::LeakyRelu);
    // with the gate pinned at 0.5 the output is 0.5*tanh(u) + 0.5*x
    MatrixXd x0v = oracles::input_transform(p, hin.features(), Activation::LeakyRelu);
    MatrixXd expect = oracles::rgcn_layer(hin, p.layers[0], x0v, GateMode::Gated,
                                          Activation::LeakyRelu);
    CHECK(max_abs_diff(gated.value(), expect) < 1e-12);
    MatrixXd mid = gated.value() - 0.5 * x0v;  // remaining half is bounded by tanh
    CHECK(mid.cwiseAbs().maxCoeff() <= 0.5 + 1e-12);
  }
  SECTION("strongly negative gate bias passes the previous state through") {
    p.layers[0].gate_w.mutable_value().setZero();
    p.layers[0].gate_b.mutable_value().setConstant(-40.0);
    ad::Tensor out = rgcn_layer_t(t, p.layers[0], g, x0, GateMode::Gated,
                                  Activation::LeakyRelu);
    CHECK(max_abs_diff(out.value(), x0.value()) < 1e-12);
  }
  SECTION("strongly positive gate bias keeps only the squashed aggregate") {
    p.layers[0].gate_w.mutable_value().setZero();
    p.layers[0].gate_b.mutable_value().setConstant(40.0);
    ad::Tensor out = rgcn_layer_t(t, p.layers[0], g, x0, GateMode::Gated,
                                  Activation::LeakyRelu);
    CHECK(out.value().cwiseAbs().maxCoeff() <= 1.0);  // tanh range
  }
}

TEST_CASE("zero layers reduce to the input transform") {
  Hin hin = random_hin(10, 12, 5);
  ModelParams p = init_params(hin.feature_dim(), 6, 0, 5, 11);
  MatrixXd emb = forward(p, hin);
  MatrixXd want = oracles::input_transform(p, hin.features(), Activation::LeakyRelu);
  CHECK(max_abs_diff(emb, want) < 1e-12);
}

TEST_CASE("embeddings are equivariant under node relabeling") {
  // same topology and features, ids chosen to reverse the sorted order
  const int n = 14;
  Rng rng(31);
  std::vector<std::vector<double>> feats(n);
  for (auto& f : feats) {
    f.resize(4);
    for (double& x : f) x = rng.normal();
  }
  auto id_a = [](int i) { return "a" + std::to_string(100 + i); };
  auto id_b = [&](int i) { return "b" + std::to_string(100 + (n - 1 - i)); };

  auto build = [&](auto id_fn) {
    HinBuilder b;
    b.set_feature_dim(4);
    for (int i = 0; i < n; ++i) {
      b.add_node(id_fn(i), static_cast<NodeKind>(i % kNodeKindCount), "");
      b.set_feature(id_fn(i), feats[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int r = 0; r < kRelationCount; ++r)
          if (i != j && (i * 31 + j * 17 + r * 7) % 11 == 0 &&
              validate_edge(static_cast<NodeKind>(i % kNodeKindCount),
                            static_cast<NodeKind>(j % kNodeKindCount),
                            static_cast<RelationKind>(r)))
            b.add_edge(id_fn(i), id_fn(j), static_cast<RelationKind>(r));
    return b.build();
  };
  Hin ha = build(id_a);
  Hin hb = build(id_b);
  REQUIRE(ha.edge_count() == hb.edge_count());
  REQUIRE(ha.edge_count() > 0);

  ModelParams p = init_params(4, 6, 2, 5, 13);
  MatrixXd ea = forward(p, ha);
  MatrixXd eb = forward(p, hb);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd ra = ea.row(ha.index_of(id_a(i)));
    Eigen::RowVectorXd rb = eb.row(hb.index_of(id_b(i)));
    worst = std::max(worst, (ra - rb).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("head distributions are row-stochastic and line up with predict_stances") {
  Hin hin = random_hin(10, 14, 6);
  ModelParams p = init_params(hin.feature_dim(), 6, 1, 5, 3);
  MatrixXd emb = forward(p, hin);
  MatrixXd dist = head_distributions(p.head_liberal, emb);
  REQUIRE(dist.rows() == hin.node_count());
  REQUIRE(dist.cols() == 5);
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    CHECK_THAT(dist.row(i).sum(), WithinAbs(1.0, 1e-12));
    CHECK(dist.row(i).minCoeff() >= 0.0);
  }

  std::vector<std::string> who = {hin.node(3).id, hin.node(0).id};
  auto [pl, pc] = predict_stances(p, emb, hin, who);
  CHECK(max_abs_diff(pl.row(0), dist.row(3)) == 0.0);
  CHECK(max_abs_diff(pl.row(1), dist.row(0)) == 0.0);
  MatrixXd dist_c = head_distributions(p.head_conservative, emb);
  CHECK(max_abs_diff(pc.row(0), dist_c.row(3)) == 0.0);

  SECTION("feature dimension mismatch is a dimension error") {
    ad::Tape t;
    GraphTensors g = GraphTensors::build(hin);
    ModelParams wrong = init_params(hin.feature_dim() + 1, 6, 1, 5, 3);
    CHECK_THROWS_AS(input_transform_t(t, wrong, g.features, Activation::LeakyRelu),
                    ad::DimensionError);
  }
}
