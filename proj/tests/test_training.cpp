#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "painlarks/config.hpp"
#include "painlarks/training.hpp"

using namespace painlarks;

namespace {

ModelConfig small_stgcn_lstm() {
  ModelConfig cfg;
  cfg.kind = ModelKind::kStgcnLstm;
  cfg.stgcn_channels = {4, 8};
  cfg.temporal_kernel = 3;
  cfg.lstm_hidden = 8;
  return cfg;
}

Dataset small_synthetic(int n_per_class, std::uint64_t seed) {
  Dataset ds = generate_synthetic(n_per_class, seed);
  normalize_dataset(ds);
  return ds;
}

}  // namespace

TEST_CASE("cross entropy: uniform logits, saturated logits, closed-form gradient") {
  Tensor uniform = Tensor::from_values({1, 2}, {0, 0});
  CHECK(cross_entropy_loss(uniform, {0}).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy_loss(uniform, {1}).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor saturated = Tensor::from_values({1, 2}, {1000, 0});
  CHECK(cross_entropy_loss(saturated, {0}).value() <= 1e-12);
  CHECK(cross_entropy_loss(saturated, {0}).value() >= 0.0);

  Rng rng(1);
  Tensor logits = Tensor::uniform({5, 2}, -3, 3, rng, true);
  std::vector<int> labels{0, 1, 1, 0, 1};
  {
    Tape tape;
    backward(cross_entropy_loss(logits, labels));
  }
  for (int r = 0; r < 5; ++r) {
    const double a = logits.at({r, 0}), b = logits.at({r, 1});
    const double m = std::max(a, b);
    const double ea = std::exp(a - m), eb = std::exp(b - m);
    const double p0 = ea / (ea + eb);
    const double want0 = (p0 - (labels[static_cast<size_t>(r)] == 0 ? 1.0 : 0.0)) / 5.0;
    const double want1 = ((1 - p0) - (labels[static_cast<size_t>(r)] == 1 ? 1.0 : 0.0)) / 5.0;
    CHECK(std::fabs(logits.grad()[2 * r] - want0) <= 1e-8);
    CHECK(std::fabs(logits.grad()[2 * r + 1] - want1) <= 1e-8);
  }
  CHECK_THROWS_AS(cross_entropy_loss(uniform, {2}), DataError);
}

TEST_CASE("loss positivity with equality only at saturation") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = Tensor::uniform({1, 2}, -5, 5, rng);
    const double loss = cross_entropy_loss(logits, {trial % 2}).value();
    CHECK(loss >= 0.0);
    CHECK(loss > 0.0);  // finite logits can't reach exactly zero
  }
}

TEST_CASE("lr schedule values and monotonicity") {
  OptimizerConfig cfg;
  CHECK(lr_schedule(cfg, 0) == 1e-4);
  CHECK(lr_schedule(cfg, cfg.decay_steps) == doctest::Approx(9.6e-5).epsilon(1e-12));
  double prev = lr_schedule(cfg, 0);
  for (int s = 1; s <= 10000; ++s) {
    const double cur = lr_schedule(cfg, s);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("adam: first step magnitude, zero-gradient no-op, quadratic descent") {
  OptimizerConfig cfg;
  Tensor w = Tensor::full({8}, 0.3, true);
  AdamOptimizer opt({{"w", w}}, cfg);
  w.grad_array().setConstant(1.0);
  opt.step();
  for (int i = 0; i < 8; ++i) {
    const double moved = std::fabs(w.data()[i] - 0.3);
    CHECK(std::fabs(moved - cfg.lr0) <= 1e-6 * cfg.lr0);
  }

  // zero gradient from a fresh optimizer never moves the parameters
  Tensor frozen = Tensor::full({4}, 0.7, true);
  AdamOptimizer idle({{"frozen", frozen}}, cfg);
  for (int i = 0; i < 5; ++i) idle.step();
  CHECK((frozen.array() == 0.7).all());

  // descend f(theta) = theta^2 from 1
  Tensor theta = Tensor::scalar(1.0, true);
  OptimizerConfig fast = cfg;
  fast.lr0 = 0.05;
  AdamOptimizer opt2({{"theta", theta}}, fast);
  for (int i = 0; i < 100; ++i) {
    theta.zero_grad();
    {
      Tape tape;
      backward(mul(theta, theta));
    }
    opt2.step();
  }
  CHECK(std::fabs(theta.value()) < 1.0);

  // non-finite gradient names the parameter
  Tensor bad = Tensor::scalar(0.0, true);
  AdamOptimizer opt3({{"layer.W", bad}}, cfg);
  bad.grad_array()[0] = std::nan("");
  bool threw = false;
  try {
    opt3.step();
  } catch (const DivergenceError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("layer.W") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("metrics: hand-computed confusion, perfect case, weighted-recall identity") {
  // TP=9 TN=8 FP=1 FN=2 with class 1 as positive
  std::vector<int> labels, preds;
  for (int i = 0; i < 9; ++i) { labels.push_back(1); preds.push_back(1); }   // TP
  for (int i = 0; i < 8; ++i) { labels.push_back(0); preds.push_back(0); }   // TN
  for (int i = 0; i < 1; ++i) { labels.push_back(0); preds.push_back(1); }   // FP
  for (int i = 0; i < 2; ++i) { labels.push_back(1); preds.push_back(0); }   // FN
  FoldMetrics m = evaluate_metrics(preds, labels);
  CHECK(m.accuracy == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(m.per_class[1].precision == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(m.per_class[1].recall == doctest::Approx(9.0 / 11.0).epsilon(1e-12));
  CHECK(m.confusion[0][0] == 8);
  CHECK(m.confusion[0][1] == 1);
  CHECK(m.confusion[1][0] == 2);
  CHECK(m.confusion[1][1] == 9);

  FoldMetrics perfect = evaluate_metrics({0, 1, 0, 1}, {0, 1, 0, 1});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(1, 30);
    std::vector<int> p(static_cast<size_t>(n)), l(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      p[static_cast<size_t>(i)] = rng.uniform_int(0, 1);
      l[static_cast<size_t>(i)] = rng.uniform_int(0, 1);
    }
    const FoldMetrics r = evaluate_metrics(p, l);
    CHECK(std::fabs(r.recall - r.accuracy) <= 1e-12);
  }
}

TEST_CASE("metrics: zero predicted positives flagged, relabeling invariance") {
  FoldMetrics m = evaluate_metrics({0, 0, 0}, {0, 1, 1});
  CHECK(m.per_class[1].precision == 0.0);
  REQUIRE(!m.notes.empty());
  CHECK(m.notes[0].find("class 1") != std::string::npos);

  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(2, 30);
    std::vector<int> p(static_cast<size_t>(n)), l(static_cast<size_t>(n)), pf, lf;
    for (int i = 0; i < n; ++i) {
      p[static_cast<size_t>(i)] = rng.uniform_int(0, 1);
      l[static_cast<size_t>(i)] = rng.uniform_int(0, 1);
      pf.push_back(1 - p[static_cast<size_t>(i)]);
      lf.push_back(1 - l[static_cast<size_t>(i)]);
    }
    const FoldMetrics a = evaluate_metrics(p, l);
    const FoldMetrics b = evaluate_metrics(pf, lf);
    CHECK(std::fabs(a.accuracy - b.accuracy) <= 1e-12);
    CHECK(std::fabs(a.recall - b.recall) <= 1e-12);
    CHECK(std::fabs(a.precision - b.precision) <= 1e-12);
    CHECK(std::fabs(a.f1 - b.f1) <= 1e-12);
  }
}

TEST_CASE("fit records history, improves loss, and restores the best snapshot") {
  Dataset ds = small_synthetic(8, 21);
  auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());
  DatasetSplit split = split_dataset(ds, 5);
  Model model = Model::build(small_stgcn_lstm(), graph, 6);
  OptimizerConfig opt;
  opt.lr0 = 3e-3;
  opt.epochs = 4;
  opt.batch_size = 4;
  FitResult res = fit(model, split.train, split.val, opt, 7);
  REQUIRE(res.history.size() == 4);
  for (size_t i = 0; i < res.history.size(); ++i) {
    CHECK(res.history[i].epoch == static_cast<int>(i) + 1);
    // recorded lr matches the schedule at the recorded step
    CHECK(res.history[i].lr ==
          doctest::Approx(lr_schedule(opt, res.history[i].step - 1)).epsilon(1e-15));
  }
  CHECK(res.history.back().step ==
        static_cast<std::int64_t>(res.history.size()) *
            static_cast<std::int64_t>((split.train.size() + 3) / 4));
  CHECK(res.best_epoch >= 1);
  CHECK(res.best_val_accuracy >= 0.0);
}

TEST_CASE("training over ten epochs mostly decreases the loss, seeds 0..4") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Dataset ds = small_synthetic(8, 100 + seed);
    auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());
    ModelConfig mc;
    mc.kind = ModelKind::kStgcn;
    mc.stgcn_channels = {4, 8};
    mc.temporal_kernel = 3;
    OptimizerConfig opt;
    opt.lr0 = 1e-3;
    opt.epochs = 10;
    opt.batch_size = static_cast<int>(ds.size());  // full batch: smooth loss curve
    Model model = Model::build(mc, graph, seed);
    Trainer trainer(model, opt, seed);
    std::vector<double> losses;
    for (int e = 0; e < 10; ++e) losses.push_back(trainer.run_epoch(ds));
    int decreasing = 0;
    for (int e = 1; e < 10; ++e) decreasing += losses[static_cast<size_t>(e)] <= losses[static_cast<size_t>(e - 1)];
    CHECK(decreasing >= 8);
  }
}

TEST_CASE("train_model is deterministic: identical history, bit for bit") {
  Dataset ds = small_synthetic(8, 31);
  auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());
  ModelConfig mc = small_stgcn_lstm();
  OptimizerConfig opt;
  opt.lr0 = 1e-3;
  opt.epochs = 3;
  opt.batch_size = 5;
  TrainResult a = train_model(mc, graph, ds, opt, 9, true);
  TrainResult b = train_model(mc, graph, ds, opt, 9, true);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(std::memcmp(&a.history[i].train_loss, &b.history[i].train_loss, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.history[i].val_accuracy, &b.history[i].val_accuracy, sizeof(double)) == 0);
    CHECK(a.history[i].step == b.history[i].step);
  }
}

TEST_CASE("kfold: five folds, disjoint tests, serial equals parallel bit-exactly") {
  Dataset ds = small_synthetic(10, 41);  // 20 clips
  auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());
  ModelConfig mc;
  mc.kind = ModelKind::kStgcn;
  mc.stgcn_channels = {4};
  mc.temporal_kernel = 3;
  OptimizerConfig opt;
  opt.lr0 = 1e-3;
  opt.epochs = 2;
  opt.batch_size = 8;
  EvalReport serial = run_kfold_experiment(mc, graph, ds, opt, 5, 3, true, false);
  EvalReport parallel = run_kfold_experiment(mc, graph, ds, opt, 5, 3, true, true);
  REQUIRE(serial.per_fold.size() == 5);
  REQUIRE(parallel.per_fold.size() == 5);
  CHECK(format_report(serial) == format_report(parallel));
  for (int f = 0; f < 5; ++f) {
    CHECK(std::memcmp(&serial.per_fold[static_cast<size_t>(f)].accuracy,
                      &parallel.per_fold[static_cast<size_t>(f)].accuracy, sizeof(double)) == 0);
  }
  // mean is the arithmetic mean of the fold metrics
  double acc = 0;
  for (const auto& f : serial.per_fold) acc += f.accuracy;
  CHECK(std::fabs(serial.mean.accuracy - acc / 5.0) <= 1e-12);
}

TEST_CASE("report formatting carries folds, mean, and two-decimal percentages") {
  FoldMetrics m = evaluate_metrics({1, 0, 1}, {1, 1, 1});
  EvalReport rep = make_report({m, m});
  const std::string text = format_report(rep);
  CHECK(text.find("fold 1") != std::string::npos);
  CHECK(text.find("fold 2") != std::string::npos);
  CHECK(text.find("mean over 2 folds") != std::string::npos);
  CHECK(text.find("accuracy 66.67") != std::string::npos);
}

TEST_CASE("history csv format") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "painlarks_history_test.csv";
  write_history_csv(path.string(), {{1, 2, 1e-4, 0.5, 0.25}});
  std::ifstream f(path);
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  CHECK(header == "epoch,step,lr,train_loss,val_accuracy");
  CHECK(row.rfind("1,2,", 0) == 0);
  fs::remove(path);
}
