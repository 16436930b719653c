#pragma once

// Loss, Adam with exponential learning-rate decay, the training loop, and the
// evaluation metrics (support-weighted precision/recall/F1 over a 2x2
// confusion matrix).

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "painlarks/data.hpp"
#include "painlarks/models.hpp"

namespace painlarks {

struct OptimizerConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_rate = 0.96;
  int decay_steps = 1000;
  int epochs = 150;
  int batch_size = 10;
};

// lr0 * decay_rate^(step / decay_steps), continuous in the exponent.
double lr_schedule(const OptimizerConfig& cfg, std::int64_t step);

// mean_b of -log softmax(logits[b])[labels[b]], stabilized by max subtraction.
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

struct HistoryRow {
  int epoch = 0;            // 1-based
  std::int64_t step = 0;    // optimizer steps completed at epoch end
  double lr = 0;            // learning rate of the last step in the epoch
  double train_loss = 0;    // mean per-sample loss
  double val_accuracy = 0;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& msg, std::vector<HistoryRow> history = {})
      : Error(msg), history(std::move(history)) {}
  std::vector<HistoryRow> history;
};

class AdamOptimizer {
 public:
  AdamOptimizer(ParamList params, OptimizerConfig cfg);
  // One update over every parameter with the scheduled learning rate.
  // Non-finite gradients raise DivergenceError naming the parameter.
  void step();
  void zero_grad();
  std::int64_t steps_done() const { return t_; }
  double last_lr() const { return last_lr_; }

 private:
  ParamList params_;
  OptimizerConfig cfg_;
  std::vector<Eigen::ArrayXd> m_, v_;
  std::int64_t t_ = 0;
  double last_lr_ = 0;
};

// ---- metrics --------------------------------------------------------------------

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  int support = 0;
};

struct FoldMetrics {
  std::array<std::array<long, 2>, 2> confusion{};  // [true label][predicted]
  double accuracy = 0;
  double precision = 0, recall = 0, f1 = 0;  // support-weighted
  std::array<ClassMetrics, 2> per_class;
  std::vector<std::string> notes;  // e.g. zero-prediction classes
  long total() const { return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1]; }
};

FoldMetrics evaluate_metrics(const std::vector<int>& predictions,
                             const std::vector<int>& labels);

struct EvalReport {
  std::vector<FoldMetrics> per_fold;
  FoldMetrics mean;  // metrics averaged over folds; confusion summed
};

EvalReport single_report(FoldMetrics m);
EvalReport make_report(std::vector<FoldMetrics> folds);
// Percentages with two decimals, per fold plus the mean row.
std::string format_report(const EvalReport& report);

// ---- training -------------------------------------------------------------------

Tensor model_forward(const Model& model, const Dataset& ds, std::size_t idx);
std::vector<int> predict_dataset(const Model& model, const Dataset& ds);
double dataset_accuracy(const Model& model, const Dataset& ds);

class Trainer {
 public:
  Trainer(Model& model, const OptimizerConfig& cfg, std::uint64_t seed);
  // One pass over the training set: seeded shuffle, mini-batches (short final
  // batch included), forward/loss/backward/step. Returns mean sample loss.
  double run_epoch(const Dataset& train);
  AdamOptimizer& optimizer() { return opt_; }

 private:
  Model& model_;
  OptimizerConfig cfg_;
  AdamOptimizer opt_;
  Rng shuffle_rng_;
};

struct FitResult {
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  double best_val_accuracy = 0;
};

// Runs the epoch loop and leaves the model at its best-validation-accuracy
// snapshot.
FitResult fit(Model& model, const Dataset& train, const Dataset& val,
              const OptimizerConfig& cfg, std::uint64_t seed);

struct TrainResult {
  Model model;
  std::vector<HistoryRow> history;
  Dataset test_split;
  int best_epoch = 0;
  double best_val_accuracy = 0;
};

// 80/10/10 split, optional SMOTE on the training partition only, fit, and the
// held-out test partition returned for reporting.
TrainResult train_model(const ModelConfig& model_cfg,
                        std::shared_ptr<const FacialGraph> graph, const Dataset& dataset,
                        const OptimizerConfig& opt_cfg, std::uint64_t seed,
                        bool use_smote);

// One fresh model per fold; fold f draws its random streams from seed ^ f.
// With parallel=true folds run on separate threads; results are identical to
// the serial order either way.
EvalReport run_kfold_experiment(const ModelConfig& model_cfg,
                                std::shared_ptr<const FacialGraph> graph,
                                const Dataset& dataset, const OptimizerConfig& opt_cfg,
                                int k, std::uint64_t seed, bool use_smote, bool parallel);

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows);

}  // namespace painlarks
