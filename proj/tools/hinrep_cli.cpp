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

// Command-line surface: gen / train / eval / export / ablate / gradcheck.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
// Every command is deterministic given flags + seed; timestamps live only in
// the meta.json sidecar.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hinrep/data_io.hpp"

namespace fs = std::filesystem;
using namespace hinrep;

namespace {

std::string iso_utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Values the built-in defaults deliberately diverge from; printed at startup
// so a run's provenance is visible in its transcript.
void print_reference_divergences(const TrainConfig& c) {
  if (c.lambda1 != 0.01)
    std::printf("note: lambda1 = %g (reference table: 0.01)\n", c.lambda1);
  if (c.lambda3 != 1.0)
    std::printf("note: lambda3 = %g (reference table: 1)\n", c.lambda3);
  if (c.phi != Activation::Relu)
    std::printf("note: phi = %s (reference table: relu)\n",
                std::string(to_string(c.phi)).c_str());
  if (c.batch_size != 64)
    std::printf("note: batch_size = %d (0 = full batch; reference table: 64)\n", c.batch_size);
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

struct RunPaths {
  fs::path dir, config, log, checkpoint, report, meta;
  explicit RunPaths(fs::path d)
      : dir(std::move(d)),
        config(dir / "config.json"),
        log(dir / "train_log.jsonl"),
        checkpoint(dir / "checkpoint.json"),
        report(dir / "eval_report.json"),
        meta(dir / "meta.json") {}
};

// ---- train ----

struct TrainCli {
  std::string data;
  std::string config_path;
  std::string out_dir;
  // flag overrides; only applied when the flag was actually passed
  CLI::App* cmd = nullptr;
  int epochs = 0, hidden = 0, layers = 0, kneg = 0, batch = 0;
  double lr = 0, l1 = 0, l2 = 0, l3 = 0, l4 = 0, q = 0;
  std::uint64_t seed = 0;
  std::string phi;
  bool ungated = false;
};

TrainConfig effective_config(const TrainCli& o) {
  TrainConfig cfg;
  if (!o.config_path.empty()) cfg = load_config_file(o.config_path);
  auto passed = [&](const char* flag) { return o.cmd->count(flag) > 0; };
  if (passed("--epochs")) cfg.max_epochs = o.epochs;
  if (passed("--hidden")) cfg.d_hidden = o.hidden;
  if (passed("--layers")) cfg.n_layers = o.layers;
  if (passed("--kneg")) cfg.k_neg = o.kneg;
  if (passed("--batch-size")) cfg.batch_size = o.batch;
  if (passed("--lr")) cfg.learning_rate = o.lr;
  if (passed("--lambda1")) cfg.lambda1 = o.l1;
  if (passed("--lambda2")) cfg.lambda2 = o.l2;
  if (passed("--lambda3")) cfg.lambda3 = o.l3;
  if (passed("--lambda4")) cfg.lambda4 = o.l4;
  if (passed("--q")) cfg.q = o.q;
  if (passed("--seed")) cfg.seed = o.seed;
  if (passed("--ungated")) cfg.gated = false;
  if (passed("--phi")) {
    auto a = parse_activation(o.phi);
    if (!a) throw ConfigError("train: unknown phi \"" + o.phi + "\"");
    cfg.phi = *a;
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainCli& o) {
  TrainConfig cfg = effective_config(o);
  print_reference_divergences(cfg);

  auto [hin, labels] = load_dataset(o.data);
  std::printf("loaded %s\n", describe(hin, labels).c_str());

  fs::path dir = o.out_dir.empty()
                     ? fs::path("runs") / ("run-" + config_hash(cfg) + "-s" + std::to_string(cfg.seed))
                     : fs::path(o.out_dir);
  RunPaths paths(dir);
  std::error_code ec;
  fs::create_directories(paths.dir, ec);

  std::string started = iso_utc_now();
  auto t0 = std::chrono::steady_clock::now();

  detail_io::write_text_file(paths.config, config_to_json(cfg).dump(2) + "\n", "config");
  TrainResult res = train(hin, labels, cfg);

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail_io::write_text_file(paths.log, train_log_to_jsonl(res.log), "train log");
  save_checkpoint(res.best_params, paths.checkpoint);
  detail_io::write_text_file(paths.report, eval_report_to_json(res.best_val_report).dump(2) + "\n",
                             "eval report");
  json meta;
  meta["started"] = started;
  meta["finished"] = iso_utc_now();
  meta["wall_seconds"] = wall;
  detail_io::write_text_file(paths.meta, meta.dump(2) + "\n", "meta");

  int stride = std::max(1, cfg.max_epochs / 10);
  for (const EpochRecord& r : res.log)
    if (r.epoch == 1 || r.epoch % stride == 0 || r.epoch == cfg.max_epochs)
      std::printf("epoch %4d  total %.6f  l1 %.4f l2 %.4f l3 %.4f  val h-acc %.4f  cons %.4f\n",
                  r.epoch, r.loss.total, r.loss.l1, r.loss.l2, r.loss.l3, r.val_h_accuracy,
                  r.val_consistency_rate);
  std::printf("best epoch %d: val h-accuracy %.4f, h-macro-F1 %.4f, consistency %.4f\n",
              res.best_epoch, res.best_val_report.h_accuracy, res.best_val_report.h_macro_f1,
              res.best_val_report.consistency_rate);
  std::printf("run dir: %s\n", paths.dir.string().c_str());
  return 0;
}

// ---- eval / export ----

int cmd_eval(const std::string& data, const std::string& checkpoint,
             const std::string& config_path, const std::string& split_s,
             std::optional<std::uint64_t> seed) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  if (seed) cfg.seed = *seed;
  auto split = parse_split(split_s);
  if (!split) throw ConfigError("eval: unknown split \"" + split_s + "\"");
  auto [hin, labels] = load_dataset(data);
  ModelParams params = load_checkpoint(checkpoint);
  if (params.d_in != hin.feature_dim())
    throw DataError("eval: checkpoint d_in " + std::to_string(params.d_in) +
                    " != dataset feature dim " + std::to_string(hin.feature_dim()));
  cfg.d_hidden = params.d_hidden;
  cfg.n_layers = params.layer_count();
  cfg.n_labels = params.n_labels;
  labels = make_splits(std::move(labels), cfg.split_ratio, cfg.seed);
  EvalReport rep = evaluate(params, hin, labels, *split, cfg);
  std::printf("%s\n", eval_report_to_json(rep).dump(2).c_str());
  return 0;
}

int cmd_export(const std::string& data, const std::string& checkpoint,
               const std::string& config_path, const std::string& out,
               std::vector<std::string> group_by) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  auto [hin, labels] = load_dataset(data);
  ModelParams params = load_checkpoint(checkpoint);
  if (params.d_in != hin.feature_dim())
    throw DataError("export: checkpoint d_in " + std::to_string(params.d_in) +
                    " != dataset feature dim " + std::to_string(hin.feature_dim()));
  Eigen::MatrixXd emb = forward(params, hin, cfg.gate_mode(), cfg.phi);
  export_embeddings(emb, hin, out);
  std::printf("wrote %s (%d rows, dim %d)\n", out.c_str(), hin.node_count(),
              static_cast<int>(emb.cols()));

  if (group_by.empty()) group_by = {"kind", "party", "liberal", "conservative"};
  for (const std::string& g : group_by) {
    std::vector<std::vector<int>> groups;
    if (g == "kind") {
      groups = group_by_kind(hin);
    } else if (g == "party") {
      groups = group_by_party(hin);
    } else if (g == "liberal" || g == "conservative") {
      // label-bin grouping over the entities scored by that source
      Source src = g == "liberal" ? Source::Liberal : Source::Conservative;
      groups.assign(static_cast<std::size_t>(labels.n_labels), {});
      for (const LabelEntry& e : labels.entries)
        if (e.source == src)
          groups[static_cast<std::size_t>(e.label)].push_back(hin.index_of(e.id));
    } else {
      throw ConfigError("export: unknown grouping \"" + g + "\"");
    }
    std::erase_if(groups, [](const std::vector<int>& v) { return v.empty(); });
    if (groups.size() < 2) {
      std::printf("DBI(%s) undefined: fewer than 2 nonempty groups\n", g.c_str());
      continue;
    }
    double v = dbi(emb, groups);
    std::printf("DBI(%s) = %.6f over %zu groups\n", g.c_str(), v, groups.size());
  }
  return 0;
}

// ---- gradcheck ----

// Fixed verification graph: 20 nodes (9 actors), 2 gated layers, all three
// objectives plus weight decay, negatives frozen across re-evaluations.
int cmd_gradcheck(double eps, double tol, std::uint64_t seed) {
  SynthConfig sc;
  sc.n_legislators = 5;
  sc.n_states = 3;
  sc.n_terms = 2;
  sc.n_governors = 1;
  sc.n_presidents = 1;
  sc.n_justices = 2;
  sc.feature_dim = 8;
  sc.seed = seed;
  auto [hin, labels0] = gen_synthetic(sc);

  TrainConfig cfg;
  cfg.d_hidden = 16;
  cfg.n_layers = 2;
  cfg.seed = seed;
  ExpertLabels labels = make_splits(std::move(labels0), cfg.split_ratio, cfg.seed);
  ModelParams params = init_params(hin.feature_dim(), cfg.d_hidden, cfg.n_layers, cfg.n_labels,
                                   cfg.seed);
  GraphTensors graph = GraphTensors::build(hin);
  auto lib = detail_train::eval_set(hin, labels, Source::Liberal, Split::Train);
  auto con = detail_train::eval_set(hin, labels, Source::Conservative, Split::Train);
  std::vector<int> stance = hin.actor_indices();
  std::vector<int> echo_scope = hin.all_indices();
  LossBreakdown w;
  w.lambda1 = cfg.lambda1;
  w.lambda2 = cfg.lambda2;
  w.lambda3 = cfg.lambda3;
  w.lambda4 = cfg.lambda4;

  auto head_softmax = [](ad::Tape& t, const ad::Tensor& emb, const HeadParams& h,
                         const std::vector<int>& rows) {
    return ad::softmax(t, affine(t, ad::gather_rows(t, emb, rows), h.w, h.b));
  };
  auto loss_fn = [&](ad::Tape& t) {
    ad::Tensor emb = embed_t(t, params, graph, cfg.gate_mode(), cfg.phi);
    ad::Tensor pl = head_softmax(t, emb, params.head_liberal, lib.node_rows);
    ad::Tensor pc = head_softmax(t, emb, params.head_conservative, con.node_rows);
    ad::Tensor l1 = expert_loss(t, pl, lib.gold, pc, con.gold);
    ad::Tensor sl = head_softmax(t, emb, params.head_liberal, stance);
    ad::Tensor sc_ = head_softmax(t, emb, params.head_conservative, stance);
    auto [tl, tc] = consistency_labels(sl.value(), sc_.value());
    ad::Tensor l2 = consistency_loss(t, sl, sc_, tl, tc);
    Rng echo_rng(mix64(seed, fnv1a("gradcheck_echo")));  // frozen per evaluation
    ad::Tensor l3 = echo_chamber_loss(t, emb, hin, echo_scope, cfg.k_neg, cfg.q, echo_rng);
    ad::Tensor reg = weight_decay_term(t, params);
    return combine_losses(t, l1, l2, l3, reg, w).first;
  };

  auto t0 = std::chrono::steady_clock::now();
  ad::GradCheckReport report = ad::grad_check(loss_fn, params.named_tensors(), eps, tol);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const ad::GradCheckEntry& e : report.tensors)
    std::printf("  %-32s max rel err %.3e  (%d entries)\n", e.name.c_str(), e.max_rel_err,
                e.entries_checked);
  std::printf("%s\n", gradcheck_report_to_json(report).dump().c_str());
  std::printf("gradcheck %s: max rel err %.3e (tol %g, eps %g, %.2fs, %d nodes)\n",
              report.pass ? "PASS" : "FAIL", report.max_rel_err, tol, eps, wall,
              hin.node_count());
  return report.pass ? 0 : 1;
}

// ---- ablate ----

struct GridAxis {
  std::string name;
  std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::string& spec) {
  static const std::set<std::string> axes = {"loss",   "relation", "edges",   "labels", "layers",
                                             "kneg",   "q",        "lambda2", "lambda3"};
  std::vector<GridAxis> grid;
  std::istringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string::npos)
      throw ConfigError("ablate: grid axis \"" + part + "\" is not of the form name=v1,v2");
    GridAxis axis;
    axis.name = part.substr(0, eq);
    if (axes.find(axis.name) == axes.end())
      throw ConfigError("ablate: unknown grid axis \"" + axis.name + "\"");
    std::istringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      if (v.empty()) throw ConfigError("ablate: empty value in axis \"" + axis.name + "\"");
      axis.values.push_back(v);
    }
    if (axis.values.empty())
      throw ConfigError("ablate: axis \"" + axis.name + "\" has no values");
    for (const GridAxis& g : grid)
      if (g.name == axis.name)
        throw ConfigError("ablate: duplicate grid axis \"" + axis.name + "\"");
    grid.push_back(std::move(axis));
  }
  if (grid.empty()) throw ConfigError("ablate: empty grid spec");
  return grid;
}

double parse_num(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("ablate: " + where + ": \"" + s + "\" is not a number");
  }
}

// One grid cell: (axis, value) for every axis. Applies itself to a config
// and dataset copy; numeric values validated up front so a bad grid fails
// before any training starts.
struct Cell {
  std::vector<std::pair<std::string, std::string>> assign;

  void validate() const {
    for (const auto& [axis, value] : assign) validate_one(axis, value);
  }

  static void validate_one(const std::string& axis, const std::string& value) {
    if (axis == "loss") {
      std::istringstream ts(value);
      std::string tok;
      bool any = false;
      while (std::getline(ts, tok, '+')) {
        if (tok != "l1" && tok != "l2" && tok != "l3")
          throw ConfigError("ablate: loss combo token \"" + tok + "\" (want l1/l2/l3)");
        any = true;
      }
      if (!any) throw ConfigError("ablate: empty loss combo");
    } else if (axis == "relation") {
      if (value != "none" && !parse_relation_kind(value))
        throw ConfigError("ablate: unknown relation \"" + value + "\"");
    } else if (axis == "edges" || axis == "labels") {
      double f = parse_num(value, axis);
      if (f < 0.0 || f > 1.0)
        throw ConfigError("ablate: " + axis + " fraction " + value + " outside [0,1]");
    } else if (axis == "layers" || axis == "kneg") {
      double v = parse_num(value, axis);
      if (v != std::floor(v) || v < 0) throw ConfigError("ablate: " + axis + " must be a nonnegative integer");
    } else {
      parse_num(value, axis);  // q, lambda2, lambda3
    }
  }

  void apply_config(TrainConfig& cfg) const {
    for (const auto& [axis, value] : assign) {
      if (axis == "loss") {
        bool has2 = value.find("l2") != std::string::npos;
        bool has3 = value.find("l3") != std::string::npos;
        bool has1 = value.find("l1") != std::string::npos;
        if (!has1) cfg.lambda1 = 0.0;
        if (!has2) cfg.lambda2 = 0.0;
        if (!has3) cfg.lambda3 = 0.0;
      } else if (axis == "layers") {
        cfg.n_layers = static_cast<int>(parse_num(value, axis));
      } else if (axis == "kneg") {
        cfg.k_neg = static_cast<int>(parse_num(value, axis));
      } else if (axis == "q") {
        cfg.q = parse_num(value, axis);
      } else if (axis == "lambda2") {
        cfg.lambda2 = parse_num(value, axis);
      } else if (axis == "lambda3") {
        cfg.lambda3 = parse_num(value, axis);
      }
    }
  }

  // Graph and label edits; seeded so a cell is reproducible independent of
  // scheduling. Label subsets are nested: a larger fraction is a superset.
  std::pair<Hin, ExpertLabels> apply_data(const Hin& hin, const ExpertLabels& labels,
                                          std::uint64_t seed) const {
    Hin h = hin;
    ExpertLabels l = labels;
    for (const auto& [axis, value] : assign) {
      if (axis == "relation" && value != "none") {
        h = h.drop_relation({*parse_relation_kind(value)});
      } else if (axis == "edges") {
        Rng rng(mix64(seed, fnv1a("ablate_edges")));
        h = h.drop_edge_fraction(parse_num(value, axis), rng);
      } else if (axis == "labels") {
        double frac = parse_num(value, axis);
        ExpertLabels kept;
        kept.n_labels = l.n_labels;
        for (Source src : {Source::Liberal, Source::Conservative}) {
          std::vector<int> ix;
          for (std::size_t i = 0; i < l.entries.size(); ++i)
            if (l.entries[i].source == src) ix.push_back(static_cast<int>(i));
          Rng rng(mix64(seed, mix64(fnv1a("ablate_labels"),
                                    static_cast<std::uint64_t>(src == Source::Liberal ? 0 : 1))));
          rng.shuffle(ix);
          std::size_t keep = static_cast<std::size_t>(
              std::floor(frac * static_cast<double>(ix.size()) + 1e-9));
          ix.resize(keep);
          std::sort(ix.begin(), ix.end());
          for (int i : ix) kept.entries.push_back(l.entries[static_cast<std::size_t>(i)]);
        }
        l = std::move(kept);
      }
    }
    return {std::move(h), std::move(l)};
  }

  std::string label() const {
    std::string s;
    for (const auto& [axis, value] : assign) {
      if (!s.empty()) s += " ";
      s += axis + "=" + value;
    }
    return s;
  }
};

struct CellStats {
  double hacc_mean = 0, hacc_std = 0;
  double hmaf_mean = 0, hmaf_std = 0;
  double cons_mean = 0, cons_std = 0;
};

int cmd_ablate(const std::string& data, const std::string& grid_spec, const std::string& seeds_s,
               const std::string& out_dir, int epochs, int jobs) {
  std::vector<GridAxis> grid = parse_grid(grid_spec);
  std::vector<std::uint64_t> seeds;
  {
    std::istringstream ss(seeds_s);
    std::string v;
    while (std::getline(ss, v, ',')) {
      if (v.empty()) continue;
      try {
        seeds.push_back(std::stoull(v));
      } catch (const std::exception&) {
        throw ConfigError("ablate: bad seed \"" + v + "\"");
      }
    }
    if (seeds.empty()) throw ConfigError("ablate: no seeds given");
  }
  if (epochs < 1) throw ConfigError("ablate: epochs must be >= 1");
  if (jobs < 1) throw ConfigError("ablate: jobs must be >= 1");

  // cartesian product, first axis slowest
  std::vector<Cell> cells;
  std::vector<std::size_t> cursor(grid.size(), 0);
  for (;;) {
    Cell c;
    for (std::size_t a = 0; a < grid.size(); ++a)
      c.assign.emplace_back(grid[a].name, grid[a].values[cursor[a]]);
    c.validate();
    cells.push_back(std::move(c));
    std::size_t a = grid.size();
    while (a > 0) {
      --a;
      if (++cursor[a] < grid[a].values.size()) break;
      cursor[a] = 0;
      if (a == 0) goto done;
    }
  }
done:;

  auto [hin, labels] = load_dataset(data);
  std::printf("loaded %s\n", describe(hin, labels).c_str());
  std::printf("grid: %zu cells x %zu seeds, %d epochs, %d workers\n", cells.size(), seeds.size(),
              epochs, jobs);

  struct Task {
    std::size_t cell, seed_ix;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::size_t s = 0; s < seeds.size(); ++s) tasks.push_back({c, s});

  struct Outcome {
    double hacc = 0, hmaf = 0, cons = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      const Task& task = tasks[k];
      Outcome& out = outcomes[k];
      try {
        TrainConfig cfg;
        cfg.max_epochs = epochs;
        cfg.seed = seeds[task.seed_ix];
        cells[task.cell].apply_config(cfg);
        auto [h, l] = cells[task.cell].apply_data(hin, labels, cfg.seed);
        TrainResult res = train(h, l, cfg);
        EvalReport test = evaluate(res.best_params, h, res.labels, Split::Test, cfg);
        out.hacc = test.h_accuracy;
        out.hmaf = test.h_macro_f1;
        out.cons = test.consistency_rate;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  {
    std::vector<std::thread> pool;
    int n = static_cast<int>(std::min(static_cast<std::size_t>(jobs), tasks.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  for (std::size_t k = 0; k < tasks.size(); ++k)
    if (!outcomes[k].error.empty())
      throw DataError("ablate: cell [" + cells[tasks[k].cell].label() + "] seed " +
                      std::to_string(seeds[tasks[k].seed_ix]) + ": " + outcomes[k].error);

  auto mean_std = [&](std::size_t cell, auto field) {
    double mean = 0, var = 0;
    std::vector<double> vals;
    for (std::size_t k = 0; k < tasks.size(); ++k)
      if (tasks[k].cell == cell) vals.push_back(field(outcomes[k]));
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());  // population std over seeds
    return std::pair<double, double>(mean, std::sqrt(var));
  };

  std::ostringstream csv;
  for (const GridAxis& a : grid) csv << a.name << ",";
  csv << "h_accuracy_mean,h_accuracy_std,h_macro_f1_mean,h_macro_f1_std,"
         "consistency_mean,consistency_std\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto& [axis, value] : cells[c].assign) csv << value << ",";
    auto [am, as] = mean_std(c, [](const Outcome& o) { return o.hacc; });
    auto [fm, fsd] = mean_std(c, [](const Outcome& o) { return o.hmaf; });
    auto [cm, cs] = mean_std(c, [](const Outcome& o) { return o.cons; });
    char line[256];
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", am, as, fm, fsd, cm, cs);
    csv << line;
  }
  fs::path out = fs::path(out_dir) / "ablation.csv";
  detail_io::write_text_file(out, csv.str(), "ablation table");
  std::printf("%s", csv.str().c_str());
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"political-actor graph representation learning"};
  app.require_subcommand(1);

  // gen
  SynthConfig sc;
  std::string gen_out = "dataset.json";
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic planted-ideology dataset");
  gen->add_option("--out", gen_out, "output dataset path");
  gen->add_option("--legislators", sc.n_legislators, "legislator count");
  gen->add_option("--states", sc.n_states, "state count");
  gen->add_option("--terms", sc.n_terms, "office-term count");
  gen->add_option("--governors", sc.n_governors, "governor count");
  gen->add_option("--presidents", sc.n_presidents, "president count");
  gen->add_option("--justices", sc.n_justices, "justice count");
  gen->add_option("--dim", sc.feature_dim, "feature dimension");
  gen->add_option("--beta", sc.beta, "party-signal strength in features [0,1]");
  gen->add_option("--noise", sc.sigma_noise, "ideology noise half-width [0,1]");
  gen->add_option("--coverage", sc.label_coverage, "label coverage per source (0,1]");
  gen->add_option("--seed", sc.seed, "generator seed");

  // train
  TrainCli tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train on a dataset, write a run directory");
  tr.cmd = train_cmd;
  train_cmd->add_option("--data", tr.data, "dataset path")->required();
  train_cmd->add_option("--config", tr.config_path, "flat JSON config file");
  train_cmd->add_option("--out", tr.out_dir, "run directory (default runs/run-<hash>-s<seed>)");
  train_cmd->add_option("--epochs", tr.epochs, "max epochs");
  train_cmd->add_option("--hidden", tr.hidden, "hidden dimension");
  train_cmd->add_option("--layers", tr.layers, "gated layer count");
  train_cmd->add_option("--kneg", tr.kneg, "negative samples per positive");
  train_cmd->add_option("--batch-size", tr.batch, "expert-loss batch size (0 = full)");
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--lambda1", tr.l1, "expert loss weight");
  train_cmd->add_option("--lambda2", tr.l2, "consistency loss weight");
  train_cmd->add_option("--lambda3", tr.l3, "echo-chamber loss weight");
  train_cmd->add_option("--lambda4", tr.l4, "weight decay");
  train_cmd->add_option("--q", tr.q, "negative-sample weight");
  train_cmd->add_option("--seed", tr.seed, "training seed");
  train_cmd->add_option("--phi", tr.phi, "activation: leaky_relu | relu");
  train_cmd->add_flag("--ungated", tr.ungated, "disable the update gate");

  // eval
  std::string ev_data, ev_ckpt, ev_cfg, ev_split = "test";
  std::uint64_t ev_seed = 0;
  CLI::App* ev = app.add_subcommand("eval", "print the evaluation report for a checkpoint");
  ev->add_option("--data", ev_data, "dataset path")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--config", ev_cfg, "config file used for training");
  ev->add_option("--split", ev_split, "train | val | test");
  CLI::Option* ev_seed_opt = ev->add_option("--seed", ev_seed, "split seed override");

  // export
  std::string ex_data, ex_ckpt, ex_cfg, ex_out = "embeddings.csv";
  std::vector<std::string> ex_groups;
  CLI::App* ex = app.add_subcommand("export", "write embeddings CSV and print DBI per grouping");
  ex->add_option("--data", ex_data, "dataset path")->required();
  ex->add_option("--checkpoint", ex_ckpt, "checkpoint path")->required();
  ex->add_option("--config", ex_cfg, "config file used for training");
  ex->add_option("--out", ex_out, "output CSV path");
  ex->add_option("--group-by", ex_groups, "kind | party | liberal | conservative (repeatable)");

  // ablate
  std::string ab_data, ab_grid, ab_seeds = "1,2,3", ab_out = "ablation";
  int ab_epochs = 100;
  int ab_jobs = std::max(1u, std::thread::hardware_concurrency());
  CLI::App* ab = app.add_subcommand("ablate", "run a grid of training cells, write mean+-std CSV");
  ab->add_option("--data", ab_data, "dataset path")->required();
  ab->add_option("--grid", ab_grid,
                 "axes joined by ';': loss=l1,l1+l2,... | relation=none,R1,.. | edges=f,.. | "
                 "labels=f,.. | layers=n,.. | kneg=n,.. | q=f,.. | lambda2=f,.. | lambda3=f,..")
      ->required();
  ab->add_option("--seeds", ab_seeds, "comma-separated seeds");
  ab->add_option("--out", ab_out, "output directory");
  ab->add_option("--epochs", ab_epochs, "epochs per cell");
  ab->add_option("--jobs", ab_jobs, "worker pool size (default: available parallelism)");

  // gradcheck
  double gc_eps = 1e-5, gc_tol = 1e-4;
  std::uint64_t gc_seed = 20;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  gc->add_option("--eps", gc_eps, "finite-difference step");
  gc->add_option("--tol", gc_tol, "max relative error tolerance");
  gc->add_option("--seed", gc_seed, "graph/parameter seed");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      sc.validate();
      auto [hin, labels] = gen_synthetic(sc);
      write_dataset(hin, labels, gen_out);
      std::printf("wrote %s: %s\n", gen_out.c_str(), describe(hin, labels).c_str());
      return 0;
    }
    if (train_cmd->parsed()) return cmd_train(tr);
    if (ev->parsed())
      return cmd_eval(ev_data, ev_ckpt, ev_cfg, ev_split,
                      ev_seed_opt->count() ? std::optional<std::uint64_t>(ev_seed) : std::nullopt);
    if (ex->parsed()) return cmd_export(ex_data, ex_ckpt, ex_cfg, ex_out, ex_groups);
    if (ab->parsed()) return cmd_ablate(ab_data, ab_grid, ab_seeds, ab_out, ab_epochs, ab_jobs);
    if (gc->parsed()) return cmd_gradcheck(gc_eps, gc_tol, gc_seed);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage problems are config errors
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
