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

// Dataset JSON load/save with strict validation, deterministic fallback
// features, a synthetic political-HIN generator with planted ideology,
// embedding CSV export, checkpoints and config/report serialization.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hinrep/autodiff.hpp"
#include "hinrep/hin.hpp"
#include "hinrep/model.hpp"
#include "hinrep/objectives.hpp"
#include "hinrep/training.hpp"

namespace hinrep {

using json = nlohmann::ordered_json;

// Seed for features of nodes whose dataset omits a vector; fixed so loading
// the same file always yields the same graph.
inline constexpr std::uint64_t kFallbackFeatureSeed = 0;

// Unit-norm vector hashed from (id, seed). The display name is deliberately
// not an input: renaming a node must not move its fallback features.
inline std::vector<double> default_features(const std::string& id,
                                            const std::string& /*name*/, int dim,
                                            std::uint64_t seed) {
  if (dim <= 0) throw ConfigError("default_features: dim must be positive");
  Rng rng(mix64(seed, fnv1a(id)));
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm_sq = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm_sq += x * x;
  }
  if (norm_sq < 1e-24) {
    v[0] = 1.0;
    norm_sq = 1.0;
  }
  double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
  return v;
}

// ---- dataset load / save ----

namespace detail_io {

inline json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string(what) + ": cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string(what) + ": " + path.string() + ": " + e.what());
  }
  return doc;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text,
                            const char* what) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(std::string(what) + ": cannot write " + path.string());
  out << text;
  if (!out) throw DataError(std::string(what) + ": short write to " + path.string());
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing required field \"" + key + "\"");
  return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw DataError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline double require_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw DataError(where + "." + key + ": expected a number");
  return v.get<double>();
}

}  // namespace detail_io

inline std::pair<Hin, ExpertLabels> load_dataset(const std::filesystem::path& path) {
  json doc = detail_io::read_json_file(path, "dataset");
  if (!doc.is_object()) throw DataError("dataset: root must be a JSON object");

  const json& nodes = detail_io::require(doc, "nodes", "dataset");
  if (!nodes.is_array() || nodes.empty())
    throw DataError("dataset.nodes: expected a nonempty array");
  const json& edges = detail_io::require(doc, "edges", "dataset");
  if (!edges.is_array()) throw DataError("dataset.edges: expected an array");
  const json& features = detail_io::require(doc, "features", "dataset");
  if (!features.is_object()) throw DataError("dataset.features: expected an object");

  const json& dim_v = detail_io::require(features, "dim", "dataset.features");
  if (!dim_v.is_number_integer() || dim_v.get<long>() <= 0)
    throw DataError("dataset.features.dim: expected a positive integer");
  int dim = dim_v.get<int>();

  HinBuilder builder;
  builder.set_feature_dim(dim);
  std::map<std::string, std::string> node_names;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::string where = "nodes[" + std::to_string(i) + "]";
    const json& n = nodes[i];
    if (!n.is_object()) throw DataError(where + ": expected an object");
    std::string id = detail_io::require_string(n, "id", where);
    if (id.empty()) throw DataError(where + ".id: must be nonempty");
    if (!ids.insert(id).second) throw DataError(where + ": duplicate node id \"" + id + "\"");
    std::string kind_s = detail_io::require_string(n, "kind", where);
    auto kind = parse_node_kind(kind_s);
    if (!kind) throw DataError(where + ".kind: unknown node kind \"" + kind_s + "\"");
    std::string name = n.contains("name") ? detail_io::require_string(n, "name", where) : "";
    node_names[id] = name;
    builder.add_node(id, *kind, name);
  }

  for (std::size_t i = 0; i < edges.size(); ++i) {
    std::string where = "edges[" + std::to_string(i) + "]";
    const json& e = edges[i];
    if (!e.is_object()) throw DataError(where + ": expected an object");
    std::string src = detail_io::require_string(e, "src", where);
    std::string dst = detail_io::require_string(e, "dst", where);
    std::string rel_s = detail_io::require_string(e, "rel", where);
    auto rel = parse_relation_kind(rel_s);
    if (!rel) throw DataError(where + ".rel: unknown relation \"" + rel_s + "\"");
    builder.add_edge(src, dst, *rel);
  }

  if (features.contains("vectors")) {
    const json& vectors = features["vectors"];
    if (!vectors.is_object()) throw DataError("dataset.features.vectors: expected an object");
    for (auto it = vectors.begin(); it != vectors.end(); ++it) {
      std::string where = "features.vectors[\"" + it.key() + "\"]";
      if (ids.find(it.key()) == ids.end()) throw DataError(where + ": unknown node id");
      if (!it.value().is_array()) throw DataError(where + ": expected an array");
      std::vector<double> v;
      v.reserve(it.value().size());
      for (const json& x : it.value()) {
        if (!x.is_number()) throw DataError(where + ": expected numeric entries");
        v.push_back(x.get<double>());
      }
      if (static_cast<int>(v.size()) != dim)
        throw DataError(where + ": dimension " + std::to_string(v.size()) + " != " +
                        std::to_string(dim));
      builder.set_feature(it.key(), std::move(v));
    }
  }
  for (const auto& [id, name] : node_names)
    if (!builder.has_feature(id))
      builder.set_feature(id, default_features(id, name, dim, kFallbackFeatureSeed));

  ExpertLabels labels;
  if (doc.contains("labels")) {
    const json& larr = doc["labels"];
    if (!larr.is_array()) throw DataError("dataset.labels: expected an array");
    std::set<std::pair<std::string, int>> seen;
    for (std::size_t i = 0; i < larr.size(); ++i) {
      std::string where = "labels[" + std::to_string(i) + "]";
      const json& l = larr[i];
      if (!l.is_object()) throw DataError(where + ": expected an object");
      LabelEntry entry;
      entry.id = detail_io::require_string(l, "id", where);
      if (ids.find(entry.id) == ids.end())
        throw DataError(where + ".id: unknown node \"" + entry.id + "\"");
      std::string src_s = detail_io::require_string(l, "source", where);
      auto src = parse_source(src_s);
      if (!src) throw DataError(where + ".source: unknown source \"" + src_s + "\"");
      entry.source = *src;
      entry.score = detail_io::require_number(l, "score", where);
      if (!(entry.score >= 0.0 && entry.score <= 1.0))
        throw DataError(where + ".score: " + std::to_string(entry.score) + " outside [0,1]");
      entry.label = bin_score(entry.score, labels.n_labels);
      if (!seen.insert({entry.id, static_cast<int>(entry.source)}).second)
        throw DataError(where + ": duplicate label for (\"" + entry.id + "\", " + src_s + ")");
      labels.entries.push_back(std::move(entry));
    }
  }

  return {builder.build(), std::move(labels)};
}

// Canonical writer: nodes in id order, edges in stored order, vectors for
// every node, labels in entry order. load(write(load(p))) is the identity.
inline void write_dataset(const Hin& hin, const ExpertLabels& labels,
                          const std::filesystem::path& path) {
  json doc;
  doc["nodes"] = json::array();
  for (const Node& n : hin.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = std::string(to_string(n.kind));
    jn["name"] = n.name;
    doc["nodes"].push_back(std::move(jn));
  }
  doc["edges"] = json::array();
  for (const Edge& e : hin.edges()) {
    json je;
    je["src"] = hin.node(e.src).id;
    je["dst"] = hin.node(e.dst).id;
    je["rel"] = std::string(to_string(e.rel));
    doc["edges"].push_back(std::move(je));
  }
  doc["features"]["dim"] = hin.feature_dim();
  json vectors;
  for (int i = 0; i < hin.node_count(); ++i) {
    json arr = json::array();
    for (int c = 0; c < hin.feature_dim(); ++c) arr.push_back(hin.features()(i, c));
    vectors[hin.node(i).id] = std::move(arr);
  }
  doc["features"]["vectors"] = std::move(vectors);
  doc["labels"] = json::array();
  for (const LabelEntry& e : labels.entries) {
    json jl;
    jl["id"] = e.id;
    jl["source"] = std::string(to_string(e.source));
    jl["score"] = e.score;
    doc["labels"].push_back(std::move(jl));
  }
  detail_io::write_text_file(path, doc.dump(2) + "\n", "dataset");
}

inline std::string describe(const Hin& hin, const ExpertLabels& labels) {
  std::array<int, kRelationCount> per_rel{};
  for (const Edge& e : hin.edges()) per_rel[static_cast<std::size_t>(static_cast<int>(e.rel))]++;
  int lib = 0, con = 0;
  for (const LabelEntry& e : labels.entries) (e.source == Source::Liberal ? lib : con)++;
  std::ostringstream os;
  os << "nodes=" << hin.node_count() << " edges=" << hin.edge_count() << " [";
  for (int r = 0; r < kRelationCount; ++r) {
    if (r) os << " ";
    os << to_string(static_cast<RelationKind>(r)) << "=" << per_rel[static_cast<std::size_t>(r)];
  }
  os << "] labels: liberal=" << lib << " conservative=" << con;
  return os.str();
}

// ---- synthetic generator ----

struct SynthConfig {
  int n_legislators = 200;
  int n_states = 50;
  int n_terms = 4;
  int n_governors = 20;
  int n_presidents = 3;
  int n_justices = 9;
  int feature_dim = 64;
  double beta = 0.5;          // party-signal strength mixed into features
  double sigma_noise = 0.05;  // uniform half-width around the party mean
  double label_coverage = 0.8;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_legislators < 1 || n_states < 1 || n_terms < 1)
      throw ConfigError("gen: legislators/states/terms must be >= 1");
    if (n_governors < 0 || n_presidents < 0 || n_justices < 0)
      throw ConfigError("gen: actor counts must be >= 0");
    if (feature_dim < 1) throw ConfigError("gen: feature dim must be >= 1");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("gen: beta must lie in [0,1]");
    if (!(sigma_noise >= 0.0 && sigma_noise <= 1.0))
      throw ConfigError("gen: noise must lie in [0,1]");
    if (!(label_coverage > 0.0 && label_coverage <= 1.0))
      throw ConfigError("gen: label coverage must lie in (0,1]");
  }
};

// Planted-ideology graph. Two parties; actors alternate party by creation
// index. Latent ideology = party mean (0.15 / 0.85) + U(-sigma, sigma),
// clamped to [0,1]; liberal score = ideology, conservative = 1 - ideology.
// A random label_coverage share of actors per source receives labels.
// Features = unit hash vector + beta * (party node's hash vector); beta
// touches features only, never topology or labels (separate rng streams).
inline std::pair<Hin, ExpertLabels> gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng base(cfg.seed);
  Rng label_rng = base.substream("labels", 0);
  Rng coverage_rng = base.substream("coverage", 0);

  auto pad4 = [](int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", i);
    return std::string(buf);
  };

  HinBuilder b;
  b.set_feature_dim(cfg.feature_dim);

  std::vector<std::string> parties = {"party_0000", "party_0001"};
  b.add_node(parties[0], NodeKind::N8_Party, "Left Party");
  b.add_node(parties[1], NodeKind::N8_Party, "Right Party");
  // party 0 sits at the anti-liberal end (mean 0.15), party 1 at 0.85
  std::array<double, 2> party_mean = {0.15, 0.85};

  std::vector<std::string> states;
  for (int i = 0; i < cfg.n_states; ++i) {
    states.push_back("state_" + pad4(i));
    b.add_node(states.back(), NodeKind::N5_State, "State " + std::to_string(i));
  }
  std::array<std::string, 4> institutions = {"inst_congress", "inst_executive",
                                             "inst_governorship", "inst_court"};
  std::array<std::string, 4> inst_names = {"Congress", "Executive Office", "Governorship",
                                           "Supreme Court"};
  for (std::size_t i = 0; i < institutions.size(); ++i)
    b.add_node(institutions[i], NodeKind::N6_Institution, inst_names[i]);
  std::vector<std::string> terms;
  for (int i = 0; i < cfg.n_terms; ++i) {
    terms.push_back("term_" + pad4(i));
    b.add_node(terms.back(), NodeKind::N1_OfficeTerm, "Term " + std::to_string(i));
  }

  struct Actor {
    std::string id;
    NodeKind kind;
    int party;
  };
  std::vector<Actor> actors;
  std::vector<std::string> legislators, governors, presidents;
  int actor_ix = 0;
  auto add_actor = [&](const std::string& id, NodeKind kind, const std::string& name) {
    int party = actor_ix % 2;  // round-robin keeps parties balanced
    ++actor_ix;
    b.add_node(id, kind, name);
    actors.push_back(Actor{id, kind, party});
    return party;
  };

  for (int i = 0; i < cfg.n_legislators; ++i) {
    std::string id = "leg_" + pad4(i);
    add_actor(id, NodeKind::N2_Legislator, "Legislator " + std::to_string(i));
    legislators.push_back(id);
  }
  for (int i = 0; i < cfg.n_presidents; ++i) {
    std::string id = "pres_" + pad4(i);
    add_actor(id, NodeKind::N3_President, "President " + std::to_string(i));
    presidents.push_back(id);
  }
  for (int i = 0; i < cfg.n_governors; ++i) {
    std::string id = "gov_" + pad4(i);
    add_actor(id, NodeKind::N4_Governor, "Governor " + std::to_string(i));
    governors.push_back(id);
  }
  for (int i = 0; i < cfg.n_justices; ++i)
    add_actor("jus_" + pad4(i), NodeKind::N7_Justice, "Justice " + std::to_string(i));

  auto party_of = [&](const std::string& id) {
    for (const Actor& a : actors)
      if (a.id == id) return a.party;
    throw DataError("gen: unknown actor " + id);
  };

  // R1/R2/R3/R4 for every actor
  int seq = 0;
  for (const Actor& a : actors) {
    // justices carry no party edge; their party only shapes labels, features
    // and the appointing president
    if (a.kind != NodeKind::N7_Justice)
      b.add_edge(a.id, parties[static_cast<std::size_t>(a.party)],
                 RelationKind::R1_PartyAffiliation);
    b.add_edge(a.id, states[static_cast<std::size_t>(seq % cfg.n_states)],
               RelationKind::R2_HomeState);
    std::size_t inst_ix = a.kind == NodeKind::N2_Legislator  ? 0
                          : a.kind == NodeKind::N3_President ? 1
                          : a.kind == NodeKind::N4_Governor  ? 2
                                                             : 3;
    b.add_edge(a.id, institutions[inst_ix], RelationKind::R3_HoldOffice);
    b.add_edge(a.id, terms[static_cast<std::size_t>(seq % cfg.n_terms)],
               RelationKind::R4_TimeInOffice);
    ++seq;
  }

  // R5: justices appointed by a same-party president; governors appoint one
  // same-party legislator each (cycling through candidates).
  auto same_party_cycle = [&](const std::vector<std::string>& pool, int party, int k) {
    std::vector<const std::string*> match;
    for (const std::string& id : pool)
      if (party_of(id) == party) match.push_back(&id);
    if (match.empty()) return static_cast<const std::string*>(nullptr);
    return match[static_cast<std::size_t>(k) % match.size()];
  };
  int justice_seq = 0;
  for (const Actor& a : actors) {
    if (a.kind != NodeKind::N7_Justice) continue;
    if (const std::string* p = same_party_cycle(presidents, a.party, justice_seq++))
      b.add_edge(*p, a.id, RelationKind::R5_Appoint);
  }
  for (std::size_t gi = 0; gi < governors.size(); ++gi) {
    if (const std::string* l =
            same_party_cycle(legislators, party_of(governors[gi]), static_cast<int>(gi)))
      b.add_edge(governors[gi], *l, RelationKind::R5_Appoint);
  }

  // features: id hash vector (+ beta * party direction for actors)
  std::array<std::vector<double>, 2> party_dir = {
      default_features(parties[0], "", cfg.feature_dim, cfg.seed),
      default_features(parties[1], "", cfg.feature_dim, cfg.seed)};
  auto actor_party = [&](const std::string& id) -> int {
    for (const Actor& a : actors)
      if (a.id == id) return a.party;
    return -1;
  };
  std::vector<std::string> all_ids;
  all_ids.insert(all_ids.end(), parties.begin(), parties.end());
  all_ids.insert(all_ids.end(), states.begin(), states.end());
  all_ids.insert(all_ids.end(), institutions.begin(), institutions.end());
  all_ids.insert(all_ids.end(), terms.begin(), terms.end());
  for (const Actor& a : actors) all_ids.push_back(a.id);
  for (const std::string& id : all_ids) {
    std::vector<double> v = default_features(id, "", cfg.feature_dim, cfg.seed);
    int party = actor_party(id);
    if (party >= 0) {
      const auto& dir = party_dir[static_cast<std::size_t>(party)];
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += cfg.beta * dir[k];
    }
    b.set_feature(id, std::move(v));
  }

  // planted ideology and expert labels
  std::vector<double> ideology;
  ideology.reserve(actors.size());
  for (const Actor& a : actors) {
    double noise = label_rng.uniform(-1.0, 1.0) * cfg.sigma_noise;
    double v = party_mean[static_cast<std::size_t>(a.party)] + noise;
    ideology.push_back(std::min(1.0, std::max(0.0, v)));
  }
  ExpertLabels labels;
  int n_actors = static_cast<int>(actors.size());
  int n_covered = std::max(1, static_cast<int>(std::floor(cfg.label_coverage * n_actors + 1e-9)));
  for (Source src : {Source::Liberal, Source::Conservative}) {
    std::vector<int> picked = coverage_rng.sample_indices(n_actors, n_covered);
    std::sort(picked.begin(), picked.end());  // stable output order by creation index
    for (int ix : picked) {
      LabelEntry e;
      e.id = actors[static_cast<std::size_t>(ix)].id;
      e.source = src;
      double s = ideology[static_cast<std::size_t>(ix)];
      e.score = src == Source::Liberal ? s : 1.0 - s;
      e.label = bin_score(e.score, labels.n_labels);
      labels.entries.push_back(std::move(e));
    }
  }

  return {b.build(), std::move(labels)};
}

// ---- embeddings CSV ----

namespace detail_io {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';  // embedded quotes are doubled
    out += c;
  }
  out += "\"";
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

}  // namespace detail_io

// CSV header id,kind,name,x_0..x_{d-1}; values round-trip to 1e-9.
inline void export_embeddings(const Eigen::MatrixXd& emb, const Hin& hin,
                              const std::filesystem::path& path) {
  if (emb.rows() != hin.node_count())
    throw ad::DimensionError("export_embeddings: " + std::to_string(emb.rows()) +
                             " embedding rows for " + std::to_string(hin.node_count()) +
                             " nodes");
  std::ostringstream os;
  os << "id,kind,name";
  for (Eigen::Index c = 0; c < emb.cols(); ++c) os << ",x_" << c;
  os << "\n";
  for (int i = 0; i < hin.node_count(); ++i) {
    const Node& n = hin.node(i);
    os << detail_io::csv_escape(n.id) << "," << to_string(n.kind) << ","
       << detail_io::csv_escape(n.name);
    for (Eigen::Index c = 0; c < emb.cols(); ++c)
      os << "," << detail_io::format_double(emb(i, c));
    os << "\n";
  }
  detail_io::write_text_file(path, os.str(), "export_embeddings");
}

// ---- checkpoints ----

// Config echo plus flat name -> row-major array map; shapes are implied by
// the echoed dims and verified on load.
inline void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "gated-rgcn-checkpoint-v1";
  doc["d_in"] = p.d_in;
  doc["d_hidden"] = p.d_hidden;
  doc["layers"] = p.layer_count();
  doc["n_labels"] = p.n_labels;
  json tensors;
  for (const auto& [name, t] : p.named_tensors()) {
    json arr = json::array();
    const Eigen::MatrixXd& m = t.value();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    tensors[name] = std::move(arr);
  }
  doc["tensors"] = std::move(tensors);
  detail_io::write_text_file(path, doc.dump() + "\n", "checkpoint");
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  json doc = detail_io::read_json_file(path, "checkpoint");
  if (!doc.is_object()) throw DataError("checkpoint: root must be a JSON object");
  for (const char* key : {"d_in", "d_hidden", "layers", "n_labels"})
    if (!doc.contains(key) || !doc[key].is_number_integer())
      throw DataError(std::string("checkpoint: missing integer field \"") + key + "\"");
  int d_in = doc["d_in"].get<int>();
  int d_hidden = doc["d_hidden"].get<int>();
  int layers = doc["layers"].get<int>();
  int n_labels = doc["n_labels"].get<int>();
  ModelParams p = init_params(d_in, d_hidden, layers, n_labels, 0);
  const json& tensors = detail_io::require(doc, "tensors", "checkpoint");
  if (!tensors.is_object()) throw DataError("checkpoint.tensors: expected an object");
  for (auto& [name, t] : p.named_tensors()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint: missing tensor \"" + name + "\"");
    if (!it->is_array() || static_cast<Eigen::Index>(it->size()) != t.size())
      throw DataError("checkpoint: tensor \"" + name + "\" has " + std::to_string(it->size()) +
                      " entries, expected " + std::to_string(t.size()));
    ad::Tensor tt = t;
    Eigen::MatrixXd& m = tt.mutable_value();
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c, ++k) {
        const json& x = (*it)[k];
        if (!x.is_number()) throw DataError("checkpoint: tensor \"" + name + "\" has non-numeric entries");
        m(r, c) = x.get<double>();
      }
    ad::check_finite(m, "checkpoint");
  }
  for (const auto& [name, _] : tensors.items())
    if (![&p, &name] {
          for (const auto& [pname, t] : p.named_tensors())
            if (pname == name) return true;
          return false;
        }())
      throw DataError("checkpoint: unexpected tensor \"" + name + "\"");
  return p;
}

// ---- config serialization ----

inline json config_to_json(const TrainConfig& c) {
  json j;
  j["d_hidden"] = c.d_hidden;
  j["layers"] = c.n_layers;
  j["n_labels"] = c.n_labels;
  j["learning_rate"] = c.learning_rate;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["max_epochs"] = c.max_epochs;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["lambda3"] = c.lambda3;
  j["lambda4"] = c.lambda4;
  j["q"] = c.q;
  j["k_neg"] = c.k_neg;
  j["phi"] = std::string(to_string(c.phi));
  j["gated"] = c.gated;
  j["split_train"] = c.split_ratio[0];
  j["split_val"] = c.split_ratio[1];
  j["split_test"] = c.split_ratio[2];
  j["seed"] = c.seed;
  j["batch_size"] = c.batch_size;
  j["consistency_all_nodes"] = c.consistency_all_nodes;
  j["echo_actors_only"] = c.echo_actors_only;
  return j;
}

inline TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: root must be a JSON object");
  TrainConfig c;
  auto num = [&](const char* key, double& slot) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw ConfigError(std::string("config: ") + key + " must be a number");
    slot = j[key].get<double>();
  };
  auto integer = [&](const char* key, int& slot) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer())
      throw ConfigError(std::string("config: ") + key + " must be an integer");
    slot = j[key].get<int>();
  };
  auto boolean = [&](const char* key, bool& slot) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) throw ConfigError(std::string("config: ") + key + " must be a boolean");
    slot = j[key].get<bool>();
  };
  static const std::set<std::string> known = {
      "d_hidden", "layers", "n_labels", "learning_rate", "adam_beta1", "adam_beta2",
      "adam_eps", "max_epochs", "lambda1", "lambda2", "lambda3", "lambda4",
      "q", "k_neg", "phi", "gated", "split_train", "split_val",
      "split_test", "seed", "batch_size", "consistency_all_nodes", "echo_actors_only"};
  for (const auto& [key, value] : j.items())
    if (known.find(key) == known.end())
      throw ConfigError("config: unknown key \"" + key + "\"");
  integer("d_hidden", c.d_hidden);
  integer("layers", c.n_layers);
  integer("n_labels", c.n_labels);
  num("learning_rate", c.learning_rate);
  num("adam_beta1", c.adam_beta1);
  num("adam_beta2", c.adam_beta2);
  num("adam_eps", c.adam_eps);
  integer("max_epochs", c.max_epochs);
  num("lambda1", c.lambda1);
  num("lambda2", c.lambda2);
  num("lambda3", c.lambda3);
  num("lambda4", c.lambda4);
  num("q", c.q);
  integer("k_neg", c.k_neg);
  if (j.contains("phi")) {
    if (!j["phi"].is_string()) throw ConfigError("config: phi must be a string");
    auto phi = parse_activation(j["phi"].get<std::string>());
    if (!phi)
      throw ConfigError("config: phi must be \"leaky_relu\" or \"relu\", got \"" +
                        j["phi"].get<std::string>() + "\"");
    c.phi = *phi;
  }
  boolean("gated", c.gated);
  num("split_train", c.split_ratio[0]);
  num("split_val", c.split_ratio[1]);
  num("split_test", c.split_ratio[2]);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw ConfigError("config: seed must be an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  integer("batch_size", c.batch_size);
  boolean("consistency_all_nodes", c.consistency_all_nodes);
  boolean("echo_actors_only", c.echo_actors_only);
  c.validate();
  return c;
}

inline std::string config_hash(const TrainConfig& c) {
  std::uint64_t h = fnv1a(config_to_json(c).dump());
  char buf[20];
  std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(h & 0xffffffffu));
  return std::string(buf);
}

// ---- reports and logs ----

inline json metrics_to_json(const ConfusionMetrics& m) {
  json j;
  j["count"] = m.count;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["micro_f1"] = m.micro_f1;
  return j;
}

inline json to_json_value(double v) {
  // JSON has no infinity; exports use a string marker instead of null
  if (std::isinf(v)) return json(v > 0 ? "infinity" : "-infinity");
  return json(v);
}

inline json eval_report_to_json(const EvalReport& r) {
  json j;
  j["split"] = r.split;
  j["liberal"] = metrics_to_json(r.liberal);
  j["conservative"] = metrics_to_json(r.conservative);
  j["h_accuracy"] = r.h_accuracy;
  j["h_macro_f1"] = r.h_macro_f1;
  j["h_micro_f1"] = r.h_micro_f1;
  j["consistency_rate"] = r.consistency_rate;
  json d;
  for (const auto& [name, v] : r.dbi) d[name] = to_json_value(v);
  j["dbi"] = std::move(d);
  return j;
}

inline json epoch_record_to_json(const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["l1"] = r.loss.l1;
  j["l2"] = r.loss.l2;
  j["l3"] = r.loss.l3;
  j["l2reg"] = r.loss.l2reg;
  j["total"] = r.loss.total;
  j["val_liberal_accuracy"] = r.val_liberal.accuracy;
  j["val_liberal_macro_f1"] = r.val_liberal.macro_f1;
  j["val_liberal_micro_f1"] = r.val_liberal.micro_f1;
  j["val_conservative_accuracy"] = r.val_conservative.accuracy;
  j["val_conservative_macro_f1"] = r.val_conservative.macro_f1;
  j["val_conservative_micro_f1"] = r.val_conservative.micro_f1;
  j["val_h_accuracy"] = r.val_h_accuracy;
  j["val_h_macro_f1"] = r.val_h_macro_f1;
  j["val_h_micro_f1"] = r.val_h_micro_f1;
  j["val_consistency_rate"] = r.val_consistency_rate;
  return j;
}

inline std::string train_log_to_jsonl(const std::vector<EpochRecord>& log) {
  std::ostringstream os;
  for (const EpochRecord& r : log) os << epoch_record_to_json(r).dump() << "\n";
  return os.str();
}

inline json gradcheck_report_to_json(const ad::GradCheckReport& r) {
  json j;
  j["eps"] = r.eps;
  j["tol"] = r.tol;
  j["max_rel_err"] = r.max_rel_err;
  j["pass"] = r.pass;
  json arr = json::array();
  for (const ad::GradCheckEntry& e : r.tensors) {
    json je;
    je["name"] = e.name;
    je["max_rel_err"] = e.max_rel_err;
    je["entries_checked"] = e.entries_checked;
    arr.push_back(std::move(je));
  }
  j["tensors"] = std::move(arr);
  return j;
}

}  // namespace hinrep
