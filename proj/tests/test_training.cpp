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

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "hinrep/data_io.hpp"
#include "hinrep/training.hpp"
#include "oracles.hpp"

using namespace hinrep;
using Catch::Matchers::WithinAbs;
using Eigen::MatrixXd;

namespace {

ExpertLabels synthetic_labels(int per_source) {
  ExpertLabels labels;
  for (int i = 0; i < per_source; ++i)
    for (Source src : {Source::Liberal, Source::Conservative}) {
      LabelEntry e;
      e.id = "actor_" + std::to_string(i);
      e.source = src;
      e.score = (i % 5) * 0.2 + 0.05;
      e.label = bin_score(e.score);
      labels.entries.push_back(e);
    }
  return labels;
}

std::pair<Hin, ExpertLabels> small_dataset() {
  SynthConfig sc;
  sc.n_legislators = 14;
  sc.n_states = 4;
  sc.n_terms = 2;
  sc.n_governors = 2;
  sc.n_presidents = 2;
  sc.n_justices = 2;
  sc.feature_dim = 10;
  sc.seed = 5;
  return gen_synthetic(sc);
}

}  // namespace

TEST_CASE("largest-remainder apportionment hits the documented splits") {
  std::array<double, 3> ratio = {0.7, 0.2, 0.1};
  CHECK(apportion_counts(777, ratio) == std::array<int, 3>{544, 155, 78});
  CHECK(apportion_counts(10, ratio) == std::array<int, 3>{7, 2, 1});
  CHECK(apportion_counts(3, ratio) == std::array<int, 3>{2, 1, 0});
  CHECK(apportion_counts(0, ratio) == std::array<int, 3>{0, 0, 0});
  std::array<double, 3> even = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  auto c = apportion_counts(100, even);
  CHECK(c[0] + c[1] + c[2] == 100);
}

TEST_CASE("make_splits partitions each source independently and reproducibly") {
  ExpertLabels labels = make_splits(synthetic_labels(10), {0.7, 0.2, 0.1}, 42);
  for (Source src : {Source::Liberal, Source::Conservative}) {
    CHECK(labels.entry_indices(src, Split::Train).size() == 7);
    CHECK(labels.entry_indices(src, Split::Val).size() == 2);
    CHECK(labels.entry_indices(src, Split::Test).size() == 1);
  }
  ExpertLabels again = make_splits(synthetic_labels(10), {0.7, 0.2, 0.1}, 42);
  for (std::size_t i = 0; i < labels.entries.size(); ++i)
    CHECK(labels.entries[i].split == again.entries[i].split);

  ExpertLabels other = make_splits(synthetic_labels(10), {0.7, 0.2, 0.1}, 43);
  bool moved = false;
  for (std::size_t i = 0; i < labels.entries.size(); ++i)
    moved = moved || labels.entries[i].split != other.entries[i].split;
  CHECK(moved);

  SECTION("777 labels per source split 544/155/78") {
    ExpertLabels big = make_splits(synthetic_labels(777), {0.7, 0.2, 0.1}, 1);
    CHECK(big.entry_indices(Source::Liberal, Split::Train).size() == 544);
    CHECK(big.entry_indices(Source::Liberal, Split::Val).size() == 155);
    CHECK(big.entry_indices(Source::Liberal, Split::Test).size() == 78);
  }
  SECTION("fewer than three labels per source is a data error") {
    CHECK_THROWS_AS(make_splits(synthetic_labels(2), {0.7, 0.2, 0.1}, 1), DataError);
  }
  SECTION("bad ratios are config errors") {
    CHECK_THROWS_AS(make_splits(synthetic_labels(10), {0.7, 0.2, 0.2}, 1), ConfigError);
    CHECK_THROWS_AS(make_splits(synthetic_labels(10), {-0.1, 1.0, 0.1}, 1), ConfigError);
  }
}

TEST_CASE("classification metrics") {
  SECTION("documented three-point example") {
    ConfusionMetrics m = classification_metrics({0, 0, 1}, {0, 1, 1}, 5);
    CHECK_THAT(m.accuracy, WithinAbs(2.0 / 3.0, 1e-12));
    CHECK_THAT(m.macro_f1, WithinAbs(2.0 / 3.0, 1e-12));  // classes 2..4 excluded
    CHECK_THAT(m.micro_f1, WithinAbs(2.0 / 3.0, 1e-12));
    CHECK(m.count == 3);
  }
  SECTION("classes absent from one side score zero") {
    ConfusionMetrics m = classification_metrics({0, 0}, {1, 1}, 5);
    CHECK(m.accuracy == 0.0);
    CHECK(m.macro_f1 == 0.0);
  }
  SECTION("perfect prediction") {
    ConfusionMetrics m = classification_metrics({2, 4, 2, 0}, {2, 4, 2, 0}, 5);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_f1 == 1.0);
    CHECK(m.micro_f1 == 1.0);
  }
  SECTION("micro equals accuracy for single-label rows") {
    std::vector<int> gold = {0, 1, 2, 3, 4, 0, 2, 2}, pred = {0, 2, 2, 3, 0, 0, 1, 2};
    ConfusionMetrics m = classification_metrics(gold, pred, 5);
    CHECK_THAT(m.micro_f1, WithinAbs(m.accuracy, 1e-12));
  }
  SECTION("size mismatch rejected") {
    CHECK_THROWS_AS(classification_metrics({0}, {0, 1}, 5), ConfigError);
  }
}

TEST_CASE("harmonic mean") {
  CHECK_THAT(harmonic_mean(0.5, 1.0), WithinAbs(2.0 / 3.0, 1e-12));
  CHECK(harmonic_mean(0.0, 0.9) == 0.0);
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
  CHECK_THAT(harmonic_mean(0.8, 0.8), WithinAbs(0.8, 1e-12));
}

TEST_CASE("consistency rate counts mutually reversed argmax rows") {
  MatrixXd pl(2, 5), pc(2, 5);
  pl << 0, 0, 0, 1, 0,  // argmax 3
        1, 0, 0, 0, 0;  // argmax 0
  pc << 0, 1, 0, 0, 0,  // argmax 1 == 4-3 -> consistent
        1, 0, 0, 0, 0;  // argmax 0 != 4-0
  CHECK_THAT(consistency_rate(pl, pc), WithinAbs(0.5, 1e-12));
  CHECK(consistency_rate(MatrixXd(0, 5), MatrixXd(0, 5)) == 0.0);
}

TEST_CASE("Davies-Bouldin index") {
  SECTION("hand example: symmetric clusters give 0.2") {
    MatrixXd emb(4, 1);
    emb << -1, 1, 9, 11;  // centroids 0 and 10, scatter 1 each
    CHECK_THAT(dbi(emb, {{0, 1}, {2, 3}}), WithinAbs(0.2, 1e-12));
  }
  SECTION("collapsed groups far apart give 0") {
    MatrixXd emb(4, 2);
    emb << 1, 1, 1, 1, 5, 5, 5, 5;
    CHECK(dbi(emb, {{0, 1}, {2, 3}}) == 0.0);
  }
  SECTION("coincident centroids of distinct groups give +infinity") {
    MatrixXd emb(4, 1);
    emb << -1, 1, -2, 2;
    CHECK(std::isinf(dbi(emb, {{0, 1}, {2, 3}})));
  }
  SECTION("random data matches the loop oracle") {
    Rng rng(17);
    MatrixXd emb(30, 4);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 4; ++j) emb(i, j) = rng.normal();
    std::vector<std::vector<int>> groups(3);
    for (int i = 0; i < 30; ++i) groups[static_cast<std::size_t>(i % 3)].push_back(i);
    CHECK_THAT(dbi(emb, groups), WithinAbs(oracles::dbi(emb, groups), 1e-12));
  }
  SECTION("grouping-map overload agrees with explicit groups") {
    auto [hin, labels] = small_dataset();
    MatrixXd emb(hin.node_count(), 3);
    Rng rng(8);
    for (int i = 0; i < emb.rows(); ++i)
      for (int j = 0; j < 3; ++j) emb(i, j) = rng.normal();
    std::map<std::string, std::string> by_kind;
    for (int i = 0; i < hin.node_count(); ++i)
      by_kind[hin.node(i).id] = std::string(to_string(hin.node(i).kind));
    CHECK_THAT(dbi(emb, hin, by_kind), WithinAbs(dbi(emb, group_by_kind(hin)), 1e-12));
  }
}

TEST_CASE("grouping helpers") {
  auto [hin, labels] = small_dataset();
  auto kinds = group_by_kind(hin);
  std::size_t total = 0;
  for (const auto& g : kinds) total += g.size();
  CHECK(total == static_cast<std::size_t>(hin.node_count()));

  auto parties = group_by_party(hin);
  REQUIRE(parties.size() == 2);
  // justices carry no party edge, so they are absent here
  CHECK(parties[0].size() + parties[1].size() == hin.actor_indices().size() - 2);

  SECTION("randomized grouping preserves sizes and members") {
    Rng rng(3);
    auto shuffled = randomize_grouping(parties, rng);
    REQUIRE(shuffled.size() == parties.size());
    std::multiset<int> before, after;
    for (std::size_t g = 0; g < parties.size(); ++g) {
      CHECK(shuffled[g].size() == parties[g].size());
      before.insert(parties[g].begin(), parties[g].end());
      after.insert(shuffled[g].begin(), shuffled[g].end());
    }
    CHECK(before == after);
  }
}

TEST_CASE("Adam steps") {
  SECTION("first step moves by almost exactly the learning rate") {
    ModelParams p = init_params(1, 1, 0, 5, 1);
    // single scalar surrogate: use in_w as the parameter of w^2
    p.in_w.mutable_value()(0, 0) = 3.0;
    AdamState st = AdamState::init(p);
    ad::Tape t;
    ad::Tensor loss = ad::dot(t, p.in_w, p.in_w);
    t.backward(loss);
    double before = p.in_w.value()(0, 0);
    adam_step(p, st, 1e-3, 0.9, 0.999, 1e-8);
    double delta = p.in_w.value()(0, 0) - before;
    CHECK_THAT(std::abs(delta), WithinAbs(1e-3, 1e-6));
    CHECK(delta < 0.0);
    CHECK(p.in_w.grad().isZero());  // gradients cleared after the step
  }
  SECTION("five steps on w^2 match the scalar oracle and descend") {
    ModelParams p = init_params(1, 1, 0, 5, 1);
    p.in_w.mutable_value()(0, 0) = 3.0;
    AdamState st = AdamState::init(p);
    // oracle trajectory: the gradient of w^2 is 2w at each visited point
    std::vector<double> traj_expected;
    {
      double w = 3.0, m = 0, v = 0;
      for (int step = 1; step <= 5; ++step) {
        double g = 2.0 * w;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        double mh = m / (1.0 - std::pow(0.9, step));
        double vh = v / (1.0 - std::pow(0.999, step));
        w -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
        traj_expected.push_back(w);
      }
    }
    std::vector<double> losses;
    for (int step = 0; step < 5; ++step) {
      ad::Tape t;
      ad::Tensor loss = ad::dot(t, p.in_w, p.in_w);
      losses.push_back(loss.scalar_value());
      t.backward(loss);
      adam_step(p, st, 1e-2, 0.9, 0.999, 1e-8);
      CHECK_THAT(p.in_w.value()(0, 0),
                 WithinAbs(traj_expected[static_cast<std::size_t>(step)], 1e-12));
    }
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
  }
}

TEST_CASE("majority baseline uses the train majority per source") {
  ExpertLabels labels;
  auto put = [&](Source s, int label, Split sp) {
    LabelEntry e;
    e.id = "x" + std::to_string(labels.entries.size());
    e.source = s;
    e.label = label;
    e.split = sp;
    labels.entries.push_back(e);
  };
  // liberal train majority = 2; conservative train majority = 0
  put(Source::Liberal, 2, Split::Train);
  put(Source::Liberal, 2, Split::Train);
  put(Source::Liberal, 1, Split::Train);
  put(Source::Conservative, 0, Split::Train);
  put(Source::Conservative, 0, Split::Train);
  // test: liberal hits 1/2, conservative hits 1/1
  put(Source::Liberal, 2, Split::Test);
  put(Source::Liberal, 4, Split::Test);
  put(Source::Conservative, 0, Split::Test);
  double h = majority_baseline_h_accuracy(labels, Split::Test);
  CHECK_THAT(h, WithinAbs(harmonic_mean(0.5, 1.0), 1e-12));
}

TEST_CASE("training loop end to end") {
  auto [hin, labels] = small_dataset();
  TrainConfig cfg;
  cfg.d_hidden = 12;
  cfg.max_epochs = 8;
  cfg.seed = 21;

  TrainResult res = train(hin, labels, cfg);
  REQUIRE(res.log.size() == 8);
  for (std::size_t i = 0; i < res.log.size(); ++i) {
    CHECK(res.log[i].epoch == static_cast<int>(i) + 1);
    CHECK(std::isfinite(res.log[i].loss.total));
    CHECK(res.log[i].loss.l1 > 0.0);
    CHECK(res.log[i].loss.l2 > 0.0);
    CHECK(res.log[i].loss.l3 > 0.0);
    CHECK(res.log[i].loss.l2reg > 0.0);
    CHECK_THAT(res.log[i].loss.total,
               WithinAbs(cfg.lambda1 * res.log[i].loss.l1 + cfg.lambda2 * res.log[i].loss.l2 +
                             cfg.lambda3 * res.log[i].loss.l3 + cfg.lambda4 * res.log[i].loss.l2reg,
                         1e-9));
  }

  SECTION("best epoch is the earliest argmax of validation harmonic accuracy") {
    double best = -1.0;
    int best_epoch = 0;
    for (const EpochRecord& r : res.log)
      if (r.val_h_accuracy > best) {
        best = r.val_h_accuracy;
        best_epoch = r.epoch;
      }
    CHECK(res.best_epoch == best_epoch);
    CHECK_THAT(res.best_val_report.h_accuracy, WithinAbs(best, 1e-12));
  }
  SECTION("reruns are bitwise identical") {
    TrainResult res2 = train(hin, labels, cfg);
    REQUIRE(res2.log.size() == res.log.size());
    for (std::size_t i = 0; i < res.log.size(); ++i) {
      CHECK(res.log[i].loss.total == res2.log[i].loss.total);
      CHECK(res.log[i].val_h_accuracy == res2.log[i].val_h_accuracy);
      CHECK(res.log[i].val_consistency_rate == res2.log[i].val_consistency_rate);
    }
    CHECK(res.best_epoch == res2.best_epoch);
  }
  SECTION("another seed gives a different trajectory") {
    TrainConfig cfg2 = cfg;
    cfg2.seed = 22;
    TrainResult res2 = train(hin, labels, cfg2);
    CHECK(res.log[0].loss.total != res2.log[0].loss.total);
  }
  SECTION("zero-weight components are skipped and logged as zero") {
    TrainConfig cfg2 = cfg;
    cfg2.lambda2 = 0.0;
    cfg2.lambda3 = 0.0;
    TrainResult res2 = train(hin, labels, cfg2);
    CHECK(res2.log[0].loss.l2 == 0.0);
    CHECK(res2.log[0].loss.l3 == 0.0);
    CHECK(res2.log[0].loss.l1 > 0.0);
  }
  SECTION("zero layers still trains") {
    TrainConfig cfg2 = cfg;
    cfg2.n_layers = 0;
    TrainResult res2 = train(hin, labels, cfg2);
    CHECK(res2.log.size() == 8);
    CHECK(std::isfinite(res2.log.back().loss.total));
  }
  SECTION("expert-loss batching caps the labeled set") {
    TrainConfig cfg2 = cfg;
    cfg2.batch_size = 4;
    TrainResult res2 = train(hin, labels, cfg2);
    // smaller labeled set -> strictly smaller summed CE on epoch 1
    CHECK(res2.log[0].loss.l1 < res.log[0].loss.l1);
    // validation metrics still computed on the full val split
    CHECK(res2.log[0].val_liberal.count == res.log[0].val_liberal.count);
  }
  SECTION("gate off and relu activation still run") {
    TrainConfig cfg2 = cfg;
    cfg2.gated = false;
    cfg2.phi = Activation::Relu;
    cfg2.max_epochs = 3;
    TrainResult res2 = train(hin, labels, cfg2);
    CHECK(res2.log.size() == 3);
  }
  SECTION("divergence surfaces as a numeric error naming the epoch") {
    TrainConfig cfg2 = cfg;
    cfg2.learning_rate = 1e18;  // drive weights to overflow
    cfg2.max_epochs = 50;
    try {
      train(hin, labels, cfg2);
      // acceptable: stayed finite; nothing to assert
    } catch (const NumericError& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("epoch"));
    }
  }
}

TEST_CASE("evaluation report wiring") {
  auto [hin, labels0] = small_dataset();
  TrainConfig cfg;
  cfg.d_hidden = 10;
  cfg.seed = 33;
  ExpertLabels labels = make_splits(std::move(labels0), cfg.split_ratio, cfg.seed);
  ModelParams p = init_params(hin.feature_dim(), cfg.d_hidden, cfg.n_layers, cfg.n_labels,
                              cfg.seed);
  EvalReport rep = evaluate(p, hin, labels, Split::Val, cfg);
  CHECK(rep.split == "val");
  CHECK(rep.liberal.count ==
        static_cast<int>(labels.entry_indices(Source::Liberal, Split::Val).size()));
  CHECK(rep.conservative.count ==
        static_cast<int>(labels.entry_indices(Source::Conservative, Split::Val).size()));
  CHECK(rep.consistency_rate >= 0.0);
  CHECK(rep.consistency_rate <= 1.0);
  REQUIRE(rep.dbi.count("kind") == 1);
  REQUIRE(rep.dbi.count("party") == 1);
  CHECK(rep.h_accuracy >= 0.0);
  CHECK_THAT(rep.h_accuracy,
             WithinAbs(harmonic_mean(rep.liberal.accuracy, rep.conservative.accuracy), 1e-12));
}
