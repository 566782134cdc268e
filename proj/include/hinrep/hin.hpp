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

// Typed heterogeneous graph for political actors: eight node kinds, five
// relation kinds with endpoint constraints, symmetric neighborhood queries,
// negative sampling and ablation-style edge filtering.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "hinrep/errors.hpp"
#include "hinrep/rng.hpp"

namespace hinrep {

enum class NodeKind : int {
  N1_OfficeTerm = 0,
  N2_Legislator = 1,
  N3_President = 2,
  N4_Governor = 3,
  N5_State = 4,
  N6_Institution = 5,
  N7_Justice = 6,
  N8_Party = 7,
};

enum class RelationKind : int {
  R1_PartyAffiliation = 0,
  R2_HomeState = 1,
  R3_HoldOffice = 2,
  R4_TimeInOffice = 3,
  R5_Appoint = 4,
};

inline constexpr int kNodeKindCount = 8;
inline constexpr int kRelationCount = 5;

inline constexpr std::array<std::string_view, kNodeKindCount> kNodeKindNames = {
    "N1", "N2", "N3", "N4", "N5", "N6", "N7", "N8"};
inline constexpr std::array<std::string_view, kRelationCount> kRelationNames = {"R1", "R2", "R3",
                                                                                "R4", "R5"};

inline std::string_view to_string(NodeKind k) { return kNodeKindNames[static_cast<int>(k)]; }
inline std::string_view to_string(RelationKind r) { return kRelationNames[static_cast<int>(r)]; }

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
  for (int i = 0; i < kNodeKindCount; ++i)
    if (s == kNodeKindNames[static_cast<std::size_t>(i)]) return static_cast<NodeKind>(i);
  return std::nullopt;
}

inline std::optional<RelationKind> parse_relation_kind(std::string_view s) {
  for (int i = 0; i < kRelationCount; ++i)
    if (s == kRelationNames[static_cast<std::size_t>(i)]) return static_cast<RelationKind>(i);
  return std::nullopt;
}

// Actor kinds hold softmax stance heads and consistency constraints.
inline bool is_actor_kind(NodeKind k) {
  return k == NodeKind::N2_Legislator || k == NodeKind::N3_President ||
         k == NodeKind::N4_Governor || k == NodeKind::N7_Justice;
}

// Endpoint-kind table, stored direction only.
//   R1: {N2,N3,N4} -> N8      party affiliation
//   R2: {N2,N3,N4,N7} -> N5   home state
//   R3: {N2,N3,N4,N7} -> N6   holds office in institution
//   R4: {N2,N3,N4,N7} -> N1   time in office (term node)
//   R5: N3 -> N7 or N4 -> N2  appointment
inline bool validate_edge(NodeKind src, NodeKind dst, RelationKind rel) {
  using K = NodeKind;
  auto actor3 = [](K k) {
    return k == K::N2_Legislator || k == K::N3_President || k == K::N4_Governor;
  };
  auto actor4 = [&](K k) { return actor3(k) || k == K::N7_Justice; };
  switch (rel) {
    case RelationKind::R1_PartyAffiliation:
      return actor3(src) && dst == K::N8_Party;
    case RelationKind::R2_HomeState:
      return actor4(src) && dst == K::N5_State;
    case RelationKind::R3_HoldOffice:
      return actor4(src) && dst == K::N6_Institution;
    case RelationKind::R4_TimeInOffice:
      return actor4(src) && dst == K::N1_OfficeTerm;
    case RelationKind::R5_Appoint:
      return (src == K::N3_President && dst == K::N7_Justice) ||
             (src == K::N4_Governor && dst == K::N2_Legislator);
  }
  return false;
}

struct Node {
  std::string id;
  NodeKind kind;
  std::string name;
};

// Endpoints are internal indices into Hin::nodes(); stored direction.
struct Edge {
  int src;
  int dst;
  RelationKind rel;
};

struct Neighborhood {
  std::string entity;
  std::array<std::vector<std::string>, kRelationCount> by_relation;
  std::set<std::string> positive;
  std::array<int, kRelationCount> degree{};
};

class HinBuilder;

// Immutable after construction; queries are pure and thread-safe.
// Internal indices are assigned in id-sorted order, so index order and
// ascending-id order coincide everywhere below.
class Hin {
 public:
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Eigen::MatrixXd& features() const { return features_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }

  bool has_node(std::string_view id) const { return index_.find(std::string(id)) != index_.end(); }

  int index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw DataError("unknown node id \"" + id + "\"");
    return it->second;
  }

  const Node& node(int ix) const { return nodes_[static_cast<std::size_t>(ix)]; }

  // Symmetric adjacency under one relation, ascending index (== ascending id).
  std::span<const int> neighbors_ix(int ix, RelationKind rel) const {
    const auto& a = adj_[static_cast<std::size_t>(static_cast<int>(rel))];
    return {a.flat.data() + a.offset[static_cast<std::size_t>(ix)],
            a.flat.data() + a.offset[static_cast<std::size_t>(ix) + 1]};
  }

  std::vector<std::string> neighbors(const std::string& id, RelationKind rel) const {
    std::vector<std::string> out;
    for (int j : neighbors_ix(index_of(id), rel)) out.push_back(node(j).id);
    return out;
  }

  // Union of neighbors over all relations, excluding the entity; ascending.
  std::span<const int> positive_ix(int ix) const {
    return {pos_.flat.data() + pos_.offset[static_cast<std::size_t>(ix)],
            pos_.flat.data() + pos_.offset[static_cast<std::size_t>(ix) + 1]};
  }

  std::set<std::string> positive_set(const std::string& id) const {
    std::set<std::string> out;
    for (int j : positive_ix(index_of(id))) out.insert(node(j).id);
    return out;
  }

  Neighborhood neighborhood(const std::string& id) const {
    int ix = index_of(id);
    Neighborhood nb;
    nb.entity = id;
    for (int r = 0; r < kRelationCount; ++r) {
      auto span = neighbors_ix(ix, static_cast<RelationKind>(r));
      nb.degree[static_cast<std::size_t>(r)] = static_cast<int>(span.size());
      for (int j : span) nb.by_relation[static_cast<std::size_t>(r)].push_back(node(j).id);
    }
    nb.positive = positive_set(id);
    return nb;
  }

  // Uniform draw without replacement from E \ ({entity} ∪ P_e). Returns all
  // candidates when fewer than k exist. Selection order of a partial
  // Fisher-Yates pass; deterministic per rng state.
  std::vector<int> sample_negatives_ix(int ix, int k, Rng& rng) const {
    if (k < 0) throw ConfigError("sample_negatives: k must be >= 0");
    std::vector<int> candidates;
    auto pos = positive_ix(ix);
    std::size_t p = 0;
    for (int j = 0; j < node_count(); ++j) {
      if (j == ix) continue;
      if (p < pos.size() && pos[p] == j) {
        ++p;
        continue;
      }
      candidates.push_back(j);
    }
    if (k == 0) return {};
    if (static_cast<int>(candidates.size()) <= k) return candidates;
    return rng.sample_indices(0, k, std::move(candidates));
  }

  std::vector<std::string> sample_negatives(const std::string& id, int k, Rng& rng) const {
    std::vector<std::string> out;
    for (int j : sample_negatives_ix(index_of(id), k, rng)) out.push_back(node(j).id);
    return out;
  }

  std::vector<int> indices_of_kind(NodeKind k) const {
    std::vector<int> out;
    for (int i = 0; i < node_count(); ++i)
      if (nodes_[static_cast<std::size_t>(i)].kind == k) out.push_back(i);
    return out;
  }

  std::vector<int> actor_indices() const {
    std::vector<int> out;
    for (int i = 0; i < node_count(); ++i)
      if (is_actor_kind(nodes_[static_cast<std::size_t>(i)].kind)) out.push_back(i);
    return out;
  }

  std::vector<int> all_indices() const {
    std::vector<int> out(static_cast<std::size_t>(node_count()));
    for (int i = 0; i < node_count(); ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
  }

  // New graph with every edge of the named relations removed.
  Hin drop_relation(const std::set<RelationKind>& rels) const {
    std::vector<Edge> kept;
    for (const Edge& e : edges_)
      if (rels.find(e.rel) == rels.end()) kept.push_back(e);
    return with_edges(std::move(kept));
  }

  // Removes floor(fraction * |edges|) uniformly chosen edges; survivors keep
  // their stored order.
  Hin drop_edge_fraction(double fraction, Rng& rng) const {
    if (!(fraction >= 0.0 && fraction <= 1.0))
      throw ConfigError("drop_edge_fraction: fraction must lie in [0,1]");
    int m = edge_count();
    // epsilon guards floor against cases like 0.3 * 10 = 2.999...96
    int n_drop = static_cast<int>(std::floor(fraction * m + 1e-9));
    std::vector<int> dropped = rng.sample_indices(m, n_drop);
    std::vector<char> is_dropped(static_cast<std::size_t>(m), 0);
    for (int d : dropped) is_dropped[static_cast<std::size_t>(d)] = 1;
    std::vector<Edge> kept;
    for (int i = 0; i < m; ++i)
      if (!is_dropped[static_cast<std::size_t>(i)]) kept.push_back(edges_[static_cast<std::size_t>(i)]);
    return with_edges(std::move(kept));
  }

 private:
  friend class HinBuilder;
  Hin() = default;

  Hin with_edges(std::vector<Edge> kept) const {
    Hin h;
    h.nodes_ = nodes_;
    h.index_ = index_;
    h.features_ = features_;
    h.edges_ = std::move(kept);
    h.build_adjacency();
    return h;
  }

  // CSR-style per-relation adjacency over both edge directions.
  struct Adjacency {
    std::vector<std::size_t> offset;
    std::vector<int> flat;
  };

  void build_adjacency() {
    std::size_t n = nodes_.size();
    std::array<std::vector<std::vector<int>>, kRelationCount> tmp;
    for (auto& t : tmp) t.assign(n, {});
    std::vector<std::vector<int>> pos_tmp(n);
    for (const Edge& e : edges_) {
      auto& t = tmp[static_cast<std::size_t>(static_cast<int>(e.rel))];
      t[static_cast<std::size_t>(e.src)].push_back(e.dst);
      t[static_cast<std::size_t>(e.dst)].push_back(e.src);
      pos_tmp[static_cast<std::size_t>(e.src)].push_back(e.dst);
      pos_tmp[static_cast<std::size_t>(e.dst)].push_back(e.src);
    }
    auto pack = [n](std::vector<std::vector<int>>& rows, Adjacency& out) {
      out.offset.assign(n + 1, 0);
      out.flat.clear();
      for (std::size_t i = 0; i < n; ++i) {
        auto& row = rows[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        out.offset[i + 1] = out.offset[i] + row.size();
        out.flat.insert(out.flat.end(), row.begin(), row.end());
      }
    };
    for (int r = 0; r < kRelationCount; ++r)
      pack(tmp[static_cast<std::size_t>(r)], adj_[static_cast<std::size_t>(r)]);
    pack(pos_tmp, pos_);
  }

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  Eigen::MatrixXd features_;
  std::unordered_map<std::string, int> index_;
  std::array<Adjacency, kRelationCount> adj_;
  Adjacency pos_;
};

// Accumulates nodes/edges/features by id and validates everything in build();
// a throwing build leaves no partially constructed graph behind.
class HinBuilder {
 public:
  HinBuilder& add_node(std::string id, NodeKind kind, std::string name) {
    pending_nodes_.push_back(Node{std::move(id), kind, std::move(name)});
    return *this;
  }

  HinBuilder& add_edge(std::string src, std::string dst, RelationKind rel) {
    pending_edges_.push_back(PendingEdge{std::move(src), std::move(dst), rel});
    return *this;
  }

  HinBuilder& set_feature_dim(int d) {
    feature_dim_ = d;
    return *this;
  }

  HinBuilder& set_feature(const std::string& id, std::vector<double> v) {
    pending_features_[id] = std::move(v);
    return *this;
  }

  bool has_feature(const std::string& id) const {
    return pending_features_.find(id) != pending_features_.end();
  }

  Hin build() const {
    if (pending_nodes_.empty()) throw DataError("graph has no nodes");
    if (feature_dim_ <= 0) throw DataError("feature dim must be positive");

    Hin h;
    h.nodes_ = pending_nodes_;
    std::sort(h.nodes_.begin(), h.nodes_.end(),
              [](const Node& a, const Node& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < h.nodes_.size(); ++i) {
      if (i > 0 && h.nodes_[i].id == h.nodes_[i - 1].id)
        throw DataError("duplicate node id \"" + h.nodes_[i].id + "\"");
      h.index_[h.nodes_[i].id] = static_cast<int>(i);
    }

    std::set<std::tuple<int, int, int>> seen;
    for (std::size_t k = 0; k < pending_edges_.size(); ++k) {
      const PendingEdge& pe = pending_edges_[k];
      auto si = h.index_.find(pe.src);
      auto di = h.index_.find(pe.dst);
      std::string where = "edges[" + std::to_string(k) + "]";
      if (si == h.index_.end())
        throw DataError(where + ": unknown src node \"" + pe.src + "\"");
      if (di == h.index_.end())
        throw DataError(where + ": unknown dst node \"" + pe.dst + "\"");
      NodeKind sk = h.nodes_[static_cast<std::size_t>(si->second)].kind;
      NodeKind dk = h.nodes_[static_cast<std::size_t>(di->second)].kind;
      if (!validate_edge(sk, dk, pe.rel))
        throw DataError(where + ": relation " + std::string(to_string(pe.rel)) +
                        " does not permit " + std::string(to_string(sk)) + " -> " +
                        std::string(to_string(dk)) + " (edge \"" + pe.src + "\" -> \"" + pe.dst +
                        "\")");
      auto key = std::make_tuple(si->second, di->second, static_cast<int>(pe.rel));
      if (!seen.insert(key).second)
        throw DataError(where + ": duplicate edge (\"" + pe.src + "\" -> \"" + pe.dst + "\", " +
                        std::string(to_string(pe.rel)) + ")");
      h.edges_.push_back(Edge{si->second, di->second, pe.rel});
    }

    h.features_.resize(static_cast<Eigen::Index>(h.nodes_.size()), feature_dim_);
    for (std::size_t i = 0; i < h.nodes_.size(); ++i) {
      auto it = pending_features_.find(h.nodes_[i].id);
      if (it == pending_features_.end())
        throw DataError("missing feature vector for node \"" + h.nodes_[i].id + "\"");
      if (static_cast<int>(it->second.size()) != feature_dim_)
        throw DataError("features.vectors[\"" + h.nodes_[i].id + "\"]: dimension " +
                        std::to_string(it->second.size()) + " != " + std::to_string(feature_dim_));
      for (int c = 0; c < feature_dim_; ++c)
        h.features_(static_cast<Eigen::Index>(i), c) = it->second[static_cast<std::size_t>(c)];
    }

    h.build_adjacency();
    return h;
  }

 private:
  struct PendingEdge {
    std::string src, dst;
    RelationKind rel;
  };
  std::vector<Node> pending_nodes_;
  std::vector<PendingEdge> pending_edges_;
  std::map<std::string, std::vector<double>> pending_features_;
  int feature_dim_ = 0;
};

}  // namespace hinrep
