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

// Minimal end-to-end walkthrough: generate a small planted dataset, train
// for a handful of epochs, evaluate, and export embeddings.

#include <cstdio>

#include "hinrep/data_io.hpp"

int main() {
  using namespace hinrep;

  SynthConfig sc;
  sc.n_legislators = 40;
  sc.n_states = 8;
  sc.n_governors = 4;
  sc.n_presidents = 2;
  sc.n_justices = 4;
  sc.feature_dim = 32;
  sc.seed = 7;
  auto [hin, labels] = gen_synthetic(sc);
  std::printf("dataset: %s\n", describe(hin, labels).c_str());

  TrainConfig cfg;
  cfg.d_hidden = 32;
  cfg.max_epochs = 40;
  cfg.seed = 7;
  TrainResult res = train(hin, labels, cfg);
  std::printf("best epoch %d: val h-accuracy %.3f, consistency %.3f\n", res.best_epoch,
              res.best_val_report.h_accuracy, res.best_val_report.consistency_rate);

  EvalReport test = evaluate(res.best_params, hin, res.labels, Split::Test, cfg);
  std::printf("test: h-accuracy %.3f, h-macro-F1 %.3f\n", test.h_accuracy, test.h_macro_f1);

  Eigen::MatrixXd emb = forward(res.best_params, hin, cfg.gate_mode(), cfg.phi);
  export_embeddings(emb, hin, "quickstart_embeddings.csv");
  std::printf("DBI by kind %.3f, by party %.3f\n", dbi(emb, group_by_kind(hin)),
              dbi(emb, group_by_party(hin)));
  std::printf("wrote quickstart_embeddings.csv\n");
  return 0;
}
