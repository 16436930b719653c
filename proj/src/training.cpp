#include "painlarks/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace painlarks {

double lr_schedule(const OptimizerConfig& cfg, std::int64_t step) {
  if (step < 0) throw ConfigError("lr_schedule: negative step");
  return cfg.lr0 * std::pow(cfg.decay_rate,
                            static_cast<double>(step) / static_cast<double>(cfg.decay_steps));
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  return nll_from_log_probs(log_softmax_rows(logits), labels);
}

// ---- Adam -------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(ParamList params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (cfg_.lr0 <= 0) throw ConfigError("adam: lr0 must be positive");
  if (cfg_.decay_rate <= 0 || cfg_.decay_rate > 1) {
    throw ConfigError("adam: decay_rate must be in (0, 1]");
  }
  if (cfg_.decay_steps < 1) throw ConfigError("adam: decay_steps must be >= 1");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Eigen::ArrayXd::Zero(p.tensor.numel()));
    v_.push_back(Eigen::ArrayXd::Zero(p.tensor.numel()));
  }
}

void AdamOptimizer::step() {
  const double lr = lr_schedule(cfg_, t_);
  ++t_;
  last_lr_ = lr;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Eigen::ArrayXd& g = params_[i].tensor.grad_array();
    if (!g.allFinite()) {
      throw DivergenceError("adam: non-finite gradient in parameter '" + params_[i].name + "'");
    }
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.square();
    params_[i].tensor.array() -=
        lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + cfg_.eps);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

// ---- metrics ----------------------------------------------------------------------

FoldMetrics evaluate_metrics(const std::vector<int>& predictions,
                             const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw DataError("evaluate_metrics: " + std::to_string(predictions.size()) +
                    " predictions for " + std::to_string(labels.size()) + " labels");
  }
  FoldMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || t > 1 || p < 0 || p > 1) {
      throw DataError("evaluate_metrics: labels and predictions must be 0 or 1");
    }
    ++m.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)];
  }
  const double total = static_cast<double>(labels.size());
  m.accuracy = static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / total;
  for (int c = 0; c < 2; ++c) {
    const long tp = m.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
    const long fn = m.confusion[static_cast<size_t>(c)][static_cast<size_t>(1 - c)];
    const long fp = m.confusion[static_cast<size_t>(1 - c)][static_cast<size_t>(c)];
    ClassMetrics& cm = m.per_class[static_cast<size_t>(c)];
    cm.support = static_cast<int>(tp + fn);
    if (tp + fp > 0) {
      cm.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    } else {
      cm.precision = 0.0;
      m.notes.push_back("class " + std::to_string(c) +
                        ": nothing predicted, precision reported as 0");
    }
    cm.recall = cm.support > 0 ? static_cast<double>(tp) / cm.support : 0.0;
    cm.f1 = cm.precision + cm.recall > 0
                ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                : 0.0;
  }
  for (int c = 0; c < 2; ++c) {
    const double w = m.per_class[static_cast<size_t>(c)].support / total;
    m.precision += w * m.per_class[static_cast<size_t>(c)].precision;
    m.recall += w * m.per_class[static_cast<size_t>(c)].recall;
    m.f1 += w * m.per_class[static_cast<size_t>(c)].f1;
  }
  return m;
}

EvalReport single_report(FoldMetrics m) {
  EvalReport r;
  r.per_fold.push_back(m);
  r.mean = std::move(m);
  return r;
}

EvalReport make_report(std::vector<FoldMetrics> folds) {
  if (folds.empty()) throw DataError("make_report: no folds");
  EvalReport r;
  r.mean = FoldMetrics{};
  for (const FoldMetrics& f : folds) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        r.mean.confusion[static_cast<size_t>(a)][static_cast<size_t>(b)] +=
            f.confusion[static_cast<size_t>(a)][static_cast<size_t>(b)];
      }
    }
    r.mean.accuracy += f.accuracy;
    r.mean.precision += f.precision;
    r.mean.recall += f.recall;
    r.mean.f1 += f.f1;
  }
  const double n = static_cast<double>(folds.size());
  r.mean.accuracy /= n;
  r.mean.precision /= n;
  r.mean.recall /= n;
  r.mean.f1 /= n;
  r.per_fold = std::move(folds);
  return r;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  char buf[160];
  auto metrics_line = [&](const char* tag, const FoldMetrics& m) {
    std::snprintf(buf, sizeof buf,
                  "%s  accuracy %.2f  precision %.2f  recall %.2f  f1 %.2f\n", tag,
                  100.0 * m.accuracy, 100.0 * m.precision, 100.0 * m.recall,
                  100.0 * m.f1);
    os << buf;
  };
  auto confusion_block = [&](const FoldMetrics& m) {
    os << "  confusion [rows true 0/1, cols predicted 0/1]\n";
    for (int a = 0; a < 2; ++a) {
      std::snprintf(buf, sizeof buf, "    %6ld %6ld\n",
                    m.confusion[static_cast<size_t>(a)][0],
                    m.confusion[static_cast<size_t>(a)][1]);
      os << buf;
    }
    for (const std::string& note : m.notes) os << "  note: " << note << "\n";
  };
  for (std::size_t f = 0; f < report.per_fold.size(); ++f) {
    os << "fold " << f + 1 << "\n";
    confusion_block(report.per_fold[f]);
    metrics_line(" ", report.per_fold[f]);
  }
  os << "mean over " << report.per_fold.size() << " fold"
     << (report.per_fold.size() == 1 ? "" : "s") << "\n";
  confusion_block(report.mean);
  metrics_line(" ", report.mean);
  return os.str();
}

// ---- training --------------------------------------------------------------------

Tensor model_forward(const Model& model, const Dataset& ds, std::size_t idx) {
  if (ds.kind == DatasetKind::kLandmark) {
    return model.forward_landmarks(ds.landmark_clips[idx].frames);
  }
  return model.forward_features(ds.feature_clips[idx].features);
}

Trainer::Trainer(Model& model, const OptimizerConfig& cfg, std::uint64_t seed)
    : model_(model),
      cfg_(cfg),
      opt_(model.parameters(), cfg),
      shuffle_rng_(mix_stream(seed, 7)) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
}

double Trainer::run_epoch(const Dataset& train) {
  if (train.size() == 0) throw DataError("run_epoch: empty training set");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng_.shuffle(order);
  double loss_sum = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg_.batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg_.batch_size));
    Tape tape;
    std::vector<Tensor> logits;
    std::vector<int> labels;
    logits.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      logits.push_back(model_forward(model_, train, order[i]));
      labels.push_back(train.label(order[i]));
    }
    Tensor loss = cross_entropy_loss(stack_axis0(logits), labels);
    const double loss_v = loss.value();
    if (!std::isfinite(loss_v)) {
      throw DivergenceError("training loss is not finite");
    }
    backward(loss);
    opt_.step();
    opt_.zero_grad();
    loss_sum += loss_v * static_cast<double>(stop - start);
  }
  return loss_sum / static_cast<double>(order.size());
}

std::vector<int> predict_dataset(const Model& model, const Dataset& ds) {
  std::vector<int> preds;
  preds.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    preds.push_back(argmax(model_forward(model, ds, i)));
  }
  return preds;
}

double dataset_accuracy(const Model& model, const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  const std::vector<int> preds = predict_dataset(model, ds);
  int hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hits += preds[i] == ds.label(i);
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

FitResult fit(Model& model, const Dataset& train, const Dataset& val,
              const OptimizerConfig& cfg, std::uint64_t seed) {
  Trainer trainer(model, cfg, seed);
  FitResult result;
  std::vector<Tensor> best;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss;
    try {
      loss = trainer.run_epoch(train);
    } catch (DivergenceError& e) {
      e.history = result.history;
      throw;
    }
    const double val_acc = dataset_accuracy(model, val);
    result.history.push_back({epoch, trainer.optimizer().steps_done(),
                              trainer.optimizer().last_lr(), loss, val_acc});
    if (best.empty() || val_acc > result.best_val_accuracy) {
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch;
      best = model.snapshot_params();
    }
  }
  model.restore_params(best);
  return result;
}

TrainResult train_model(const ModelConfig& model_cfg,
                        std::shared_ptr<const FacialGraph> graph, const Dataset& dataset,
                        const OptimizerConfig& opt_cfg, std::uint64_t seed,
                        bool use_smote) {
  DatasetSplit split = split_dataset(dataset, seed);
  Dataset train = use_smote ? smote_oversample(split.train, 5, mix_stream(seed, 11))
                            : split.train;
  Model model = Model::build(model_cfg, std::move(graph), mix_stream(seed, 13));
  FitResult fitres = fit(model, train, split.val, opt_cfg, seed);
  TrainResult result;
  result.model = std::move(model);
  result.history = std::move(fitres.history);
  result.test_split = std::move(split.test);
  result.best_epoch = fitres.best_epoch;
  result.best_val_accuracy = fitres.best_val_accuracy;
  return result;
}

namespace {

FoldMetrics run_one_fold(const ModelConfig& model_cfg,
                         const std::shared_ptr<const FacialGraph>& graph,
                         const std::pair<Dataset, Dataset>& fold,
                         const OptimizerConfig& opt_cfg, std::uint64_t fold_seed,
                         bool use_smote) {
  auto [train_all, test] = fold;
  auto [train, val] = split_train_val(train_all, 0.1, fold_seed);
  if (use_smote) train = smote_oversample(train, 5, mix_stream(fold_seed, 11));
  Model model = Model::build(model_cfg, graph, mix_stream(fold_seed, 13));
  fit(model, train, val, opt_cfg, fold_seed);
  std::vector<int> labels;
  labels.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) labels.push_back(test.label(i));
  return evaluate_metrics(predict_dataset(model, test), labels);
}

}  // namespace

EvalReport run_kfold_experiment(const ModelConfig& model_cfg,
                                std::shared_ptr<const FacialGraph> graph,
                                const Dataset& dataset, const OptimizerConfig& opt_cfg,
                                int k, std::uint64_t seed, bool use_smote, bool parallel) {
  const auto folds = kfold_partitions(dataset, k, seed);
  std::vector<FoldMetrics> results(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());

  auto work = [&](std::size_t f) {
    try {
      results[f] = run_one_fold(model_cfg, graph, folds[f], opt_cfg,
                                seed ^ static_cast<std::uint64_t>(f), use_smote);
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };

  if (parallel) {
    std::vector<std::thread> threads;
    threads.reserve(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) threads.emplace_back(work, f);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t f = 0; f < folds.size(); ++f) work(f);
  }

  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (errors[f] == nullptr) continue;
    try {
      std::rethrow_exception(errors[f]);
    } catch (const DivergenceError& e) {
      throw DivergenceError("fold " + std::to_string(f) + ": " + e.what(), e.history);
    } catch (const DataError& e) {
      throw DataError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  return make_report(std::move(results));
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << "epoch,step,lr,train_loss,val_accuracy\n";
  char buf[128];
  for (const HistoryRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g\n", r.epoch,
                  static_cast<long long>(r.step), r.lr, r.train_loss, r.val_accuracy);
    f << buf;
  }
}

}  // namespace painlarks
