// painlarks command-line tool: train/evaluate the pain classifiers, run the
// k-fold protocol, generate synthetic landmark data, inspect the facial
// graph, and run the built-in selftest.
//
// Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 training
// divergence. Errors print a single line "ERROR <code>: <message>" to stderr.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "painlarks/config.hpp"
#include "painlarks/data.hpp"
#include "painlarks/selftest.hpp"
#include "painlarks/training.hpp"

namespace fs = std::filesystem;
using namespace painlarks;

namespace {

std::uint64_t resolve_seed(const RunConfig& cfg, const std::optional<std::uint64_t>& flag_seed) {
  if (flag_seed.has_value()) return *flag_seed;
  if (cfg.explicit_keys.count("seed") != 0) return cfg.seed;
  if (const char* env = std::getenv("PAINLARKS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("PAINLARKS_SEED is not an unsigned integer: '" + std::string(env) + "'");
    }
  }
  return cfg.seed;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

// Loads the data named in the config and reconciles it with the model kind:
// stgcn kinds need landmark clips; the hybrid kind needs feature clips and
// will flatten landmark CSVs into per-frame 136-wide features.
Dataset load_for_model(const RunConfig& cfg, const std::string& path, ModelKind kind) {
  if (path.empty()) throw ConfigError("no data file given (config key 'data')");
  std::vector<std::string> warnings;
  Dataset ds = load_dataset(path, cfg.strict_frames, &warnings);
  print_warnings(warnings);
  if (kind == ModelKind::kHybrid) {
    if (ds.kind == DatasetKind::kLandmark) ds = features_from_landmarks(ds);
  } else if (ds.kind != DatasetKind::kLandmark) {
    throw ConfigError(std::string(model_kind_name(kind)) +
                      " models train on landmark CSV data, got feature clips");
  }
  return ds;
}

void resolve_hybrid_feature_dim(RunConfig& cfg, const Dataset& ds) {
  if (cfg.model.kind != ModelKind::kHybrid) return;
  if (cfg.model.backbone == BackboneKind::kToyConvNext) {
    throw ConfigError(
        "the batch CLI trains the hybrid model on precomputed features; "
        "set backbone=precomputed_features (toy_convnext is exercised via selftest/tests)");
  }
  if (ds.size() == 0) throw DataError("dataset is empty");
  const int d = ds.feature_clips[0].features.dim(1);
  if (cfg.model.feature_dim == 0) {
    cfg.model.feature_dim = d;
  } else if (cfg.model.feature_dim != d) {
    throw ConfigError("feature_dim=" + std::to_string(cfg.model.feature_dim) +
                      " but data has " + std::to_string(d) + "-wide features");
  }
}

std::shared_ptr<const FacialGraph> graph_for(const RunConfig& cfg) {
  return cfg.model.kind == ModelKind::kHybrid ? nullptr : cfg.build_graph();
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag) {
  RunConfig cfg = RunConfig::load(config_path);
  const std::uint64_t seed = resolve_seed(cfg, seed_flag);
  Dataset ds = load_for_model(cfg, cfg.data_path, cfg.model.kind);
  resolve_hybrid_feature_dim(cfg, ds);
  fs::create_directories(cfg.outdir);
  try {
    TrainResult result = train_model(cfg.model, graph_for(cfg), ds, cfg.resolved_optimizer(),
                                     seed, cfg.resolved_use_smote());
    result.model.save_checkpoint((fs::path(cfg.outdir) / "checkpoint").string());
    write_history_csv((fs::path(cfg.outdir) / "history.csv").string(), result.history);

    std::vector<int> labels;
    for (std::size_t i = 0; i < result.test_split.size(); ++i) {
      labels.push_back(result.test_split.label(i));
    }
    const std::string report = format_report(
        single_report(evaluate_metrics(predict_dataset(result.model, result.test_split), labels)));
    std::ofstream rf(fs::path(cfg.outdir) / "report.txt");
    rf << report;
    std::cout << "trained " << model_kind_name(cfg.model.kind) << " for "
              << result.history.size() << " epochs (best val accuracy "
              << result.best_val_accuracy << " at epoch " << result.best_epoch << ")\n"
              << "held-out test report:\n"
              << report;
    return 0;
  } catch (const DivergenceError& e) {
    write_history_csv((fs::path(cfg.outdir) / "history.csv").string(), e.history);
    std::cerr << "ERROR 3: " << e.what() << "\n";
    return 3;
  }
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint,
                 const std::string& data_path) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::load(config_path);
  Model model = Model::load_checkpoint(checkpoint);
  Dataset ds = load_for_model(cfg, data_path, model.config().kind);
  std::vector<int> labels;
  for (std::size_t i = 0; i < ds.size(); ++i) labels.push_back(ds.label(i));
  std::cout << format_report(single_report(evaluate_metrics(predict_dataset(model, ds), labels)));
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& data_path,
                const std::string& out_path) {
  Model model = Model::load_checkpoint(checkpoint);
  RunConfig defaults;
  Dataset ds = load_for_model(defaults, data_path, model.config().kind);
  std::ostringstream os;
  os << "clip_id,label,p_pain\n";
  char buf[40];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Tensor logits = model_forward(model, ds, i);
    const auto [p0, p1] = softmax2(logits);
    if (std::fabs(p0 + p1 - 1.0) > 1e-9 || p1 < 0.0 || p1 > 1.0) {
      throw Error("predict: class probabilities failed the internal consistency check");
    }
    std::snprintf(buf, sizeof buf, "%.17g", p1);
    os << ds.clip_id(i) << "," << argmax(logits) << "," << buf << "\n";
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(out_path);
    if (!f) throw DataError("cannot write " + out_path);
    f << os.str();
  }
  return 0;
}

int cmd_kfold(const std::string& config_path, std::optional<int> k_flag,
              const std::optional<std::uint64_t>& seed_flag) {
  RunConfig cfg = RunConfig::load(config_path);
  const std::uint64_t seed = resolve_seed(cfg, seed_flag);
  const int k = k_flag.value_or(cfg.kfolds);
  Dataset ds = load_for_model(cfg, cfg.data_path, cfg.model.kind);
  resolve_hybrid_feature_dim(cfg, ds);
  EvalReport report =
      run_kfold_experiment(cfg.model, graph_for(cfg), ds, cfg.resolved_optimizer(), k, seed,
                           cfg.resolved_use_smote(), cfg.parallel_folds);
  const std::string text = format_report(report);
  fs::create_directories(cfg.outdir);
  std::ofstream rf(fs::path(cfg.outdir) / "kfold_report.txt");
  rf << text;
  std::cout << text;
  return 0;
}

int cmd_synth_data(int n, const std::string& out, const std::optional<std::uint64_t>& seed_flag,
                   double noise) {
  RunConfig defaults;
  const std::uint64_t seed = resolve_seed(defaults, seed_flag);
  write_landmark_csv(out, generate_synthetic(n, seed, noise));
  std::cout << "wrote " << 2 * n << " clips to " << out << "\n";
  return 0;
}

int cmd_inspect_graph(const std::string& edges_path) {
  FacialGraph g = edges_path.empty()
                      ? build_facial_adjacency()
                      : build_facial_graph(kNumLandmarks, load_edge_list(edges_path));
  const auto degrees = node_degrees(g.num_nodes, g.edges);
  for (int i = 0; i < g.num_nodes; ++i) {
    std::cout << "node " << i << " degree " << degrees[static_cast<size_t>(i)] << "\n";
  }
  std::cout << "nodes " << g.num_nodes << "\n"
            << "edges " << g.edges.size() << "\n"
            << "components " << count_components(g.num_nodes, g.edges) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"painlarks: pain classification from facial landmark clips and frame features"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, data_path, out_path, edges_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> k_flag;
  int synth_n = 8;
  double synth_noise = 0.8;

  auto* train = app.add_subcommand("train", "train a model, write checkpoint/history/report");
  train->add_option("--config", config_path, "run configuration file")->required();
  train->add_option("--seed", seed_flag, "seed override");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on held-out data");
  evaluate->add_option("--config", config_path, "run configuration file (optional)");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  evaluate->add_option("--data", data_path, "data file")->required();

  auto* predict = app.add_subcommand("predict", "per-clip pain probabilities as CSV");
  predict->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  predict->add_option("--data", data_path, "data file")->required();
  predict->add_option("--out", out_path, "output CSV (default stdout)");

  auto* kfold = app.add_subcommand("kfold", "k-fold cross-validation protocol");
  kfold->add_option("--config", config_path, "run configuration file")->required();
  kfold->add_option("--k", k_flag, "number of folds (default from config, 5)");
  kfold->add_option("--seed", seed_flag, "seed override");

  auto* synth = app.add_subcommand("synth-data", "write a synthetic landmark CSV");
  synth->add_option("--n", synth_n, "clips per class (default 8)");
  synth->add_option("--out", out_path, "output CSV path")->required();
  synth->add_option("--seed", seed_flag, "seed override");
  synth->add_option("--noise", synth_noise, "coordinate noise sigma (default 0.8)");

  auto* inspect = app.add_subcommand("inspect-graph", "print node degrees and components");
  inspect->add_option("--edges", edges_path, "edge-list file replacing the canonical graph");

  auto* selftest = app.add_subcommand("selftest", "gradient checks and core invariants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "ERROR 1: " << e.what() << "\n";
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, seed_flag);
    if (evaluate->parsed()) return cmd_evaluate(config_path, checkpoint, data_path);
    if (predict->parsed()) return cmd_predict(checkpoint, data_path, out_path);
    if (kfold->parsed()) return cmd_kfold(config_path, k_flag, seed_flag);
    if (synth->parsed()) return cmd_synth_data(synth_n, out_path, seed_flag, synth_noise);
    if (inspect->parsed()) return cmd_inspect_graph(edges_path);
    if (selftest->parsed()) return run_selftest(std::cout) == 0 ? 0 : 1;
    std::cerr << "ERROR 1: no subcommand\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "ERROR 3: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "ERROR 1: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "ERROR 2: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "ERROR 2: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ERROR 1: " << e.what() << "\n";
    return 1;
  }
}
