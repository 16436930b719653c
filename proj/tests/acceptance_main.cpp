// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Slow end-to-end properties live here; the fast unit tests
// are in the doctest binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "painlarks/config.hpp"
#include "painlarks/data.hpp"
#include "painlarks/gradcheck.hpp"
#include "painlarks/graph.hpp"
#include "painlarks/models.hpp"
#include "painlarks/training.hpp"

using namespace painlarks;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

Tensor rand_t(Shape shape, Rng& rng, bool rg = true) {
  return Tensor::uniform(std::move(shape), -2.0, 2.0, rng, rg);
}

std::vector<Tensor> gather(std::initializer_list<Tensor> extra, const ParamList& named) {
  std::vector<Tensor> all(extra);
  for (const auto& n : named) all.push_back(n.tensor);
  return all;
}

struct CliResult {
  int exit_code;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(PAINLARKS_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {-1, "popen failed"};
  std::string output;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
  return {WEXITSTATUS(pclose(pipe)), output};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// ---- criterion 1: gradient suite ---------------------------------------------------

bool criterion_gradients(std::string& detail) {
  const double t0 = now_seconds();
  Rng rng(1);
  double prim = 0;  // worst primitive error over 100 trials per family

  for (int trial = 0; trial < 100; ++trial) {
    Tensor a = rand_t({3, 4}, rng), b = rand_t({4, 2}, rng);
    prim = std::max(prim, gradcheck([&] { return sum(mul(matmul(a, b), matmul(a, b))); }, {a, b}));

    Tensor img = rand_t({2, 5, 5}, rng), dw = rand_t({2, 1, 3, 3}, rng);
    prim = std::max(prim, gradcheck([&] { return sum(conv2d(img, dw, 1, 1, 2)); }, {img, dw}));

    Tensor seq = rand_t({5, 3}, rng), k1 = rand_t({2, 3, 3}, rng);
    prim = std::max(prim, gradcheck([&] { return sum(tanh(conv1d_temporal(seq, k1, 1))); },
                                    {seq, k1}));

    Tensor u = rand_t({5}, rng), v = rand_t({5}, rng);
    prim = std::max(prim, gradcheck(
        [&] { return sum(add(mul(gelu(u), sigmoid(v)), mul(relu(u), tanh(v)))); }, {u, v}));

    Tensor x = rand_t({2, 4}, rng), g = rand_t({4}, rng), be = rand_t({4}, rng);
    prim = std::max(prim, gradcheck([&] { return sum(mul(layer_norm(x, g, be), x)); },
                                    {x, g, be}, 1e-5));

    Tensor logits = rand_t({3, 2}, rng);
    prim = std::max(prim, gradcheck([&] { return cross_entropy_loss(logits, {1, 0, 1}); },
                                    {logits}));
  }
  if (prim > 1e-4) {
    detail = "primitive gradients off by " + std::to_string(prim);
    return false;
  }

  // layer-level checks: lstm cell through time, the sequence variants,
  // convlstm, graph conv, temporal conv, stgcn block, convnext block
  double layer = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng wr(1000 + static_cast<std::uint64_t>(trial));
    LstmParams p = LstmParams::init(2, 3, wr);
    Tensor seq = rand_t({3, 2}, rng);
    ParamList named;
    p.collect("p", named);
    layer = std::max(layer, gradcheck(
        [&] {
          LstmState st = LstmState::zeros(3);
          for (int t = 0; t < 3; ++t) st = lstm_cell_step(p, slice_axis0(seq, t), st);
          return sum(mul(st.h, st.h));
        },
        gather({seq}, named)));
  }
  {
    FacialGraph g3 = build_facial_graph(3, {{0, 1}, {1, 2}});
    for (int trial = 0; trial < 100; ++trial) {
      Rng wr(2000 + static_cast<std::uint64_t>(trial));
      ConvLstmParams p = ConvLstmParams::init(2, 2, wr);
      Tensor x0 = rand_t({3, 2}, rng), x1 = rand_t({3, 2}, rng);
      ParamList named;
      p.collect("p", named);
      layer = std::max(layer, gradcheck(
          [&] {
            ConvLstmState st = ConvLstmState::zeros(3, 2);
            st = convlstm_cell_step(p, g3.adjacency_norm, x0, st);
            st = convlstm_cell_step(p, g3.adjacency_norm, x1, st);
            return sum(mul(st.h, st.h));
          },
          gather({x0, x1}, named)));
    }
    for (int trial = 0; trial < 100; ++trial) {
      Tensor x = rand_t({3, 2}, rng), w = rand_t({2, 2}, rng);
      layer = std::max(layer, gradcheck(
          [&] { return sum(mul(graph_convolution(g3.adjacency_norm, x, w), x)); }, {x, w}));
      Tensor clip = rand_t({4, 3, 2}, rng), tk = rand_t({2, 2, 3}, rng);
      layer = std::max(layer, gradcheck(
          [&] { return sum(mul(temporal_convolution(clip, tk), clip)); }, {clip, tk}));
    }
    for (int variant = 0; variant < 4; ++variant) {
      for (int trial = 0; trial < 25; ++trial) {
        Rng wr(3000 + static_cast<std::uint64_t>(100 * variant + trial));
        SequenceLstm s = SequenceLstm::init(static_cast<LstmVariant>(variant), 2, 3, wr);
        Tensor seq = rand_t({3, 2}, rng);
        ParamList named;
        s.collect("s", named);
        layer = std::max(layer, gradcheck(
            [&] {
              Tensor f = s.forward(seq);
              return sum(mul(f, f));
            },
            gather({seq}, named)));
      }
    }
  }
  if (layer > 1e-4) {
    detail = "layer gradients off by " + std::to_string(layer);
    return false;
  }

  // full models, sampled coordinates, 100 trials each
  double models_err = 0;
  {
    EdgeList edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    auto graph = std::make_shared<FacialGraph>(build_facial_graph(5, edges));
    for (ModelKind kind : {ModelKind::kStgcn, ModelKind::kStgcnLstm}) {
      ModelConfig cfg;
      cfg.kind = kind;
      cfg.stgcn_channels = {3, 4};
      cfg.temporal_kernel = 3;
      cfg.lstm_hidden = 4;
      for (int instance = 0; instance < 5; ++instance) {
        Model model = Model::build(cfg, graph, 50 + static_cast<std::uint64_t>(instance));
        Tensor clip = rand_t({4, 5, 2}, rng);
        Rng pick(60 + static_cast<std::uint64_t>(instance));
        models_err = std::max(models_err, gradcheck_sampled(
            [&] {
              return cross_entropy_loss(reshape(model.forward_landmarks(clip), {1, 2}),
                                        {instance % 2});
            },
            gather({clip}, model.parameters()), 20, pick));
      }
    }
    ModelConfig hybrid;
    hybrid.kind = ModelKind::kHybrid;
    hybrid.backbone = BackboneKind::kToyConvNext;
    hybrid.convnext.stage_channels = {4, 4, 8, 8};
    hybrid.convnext.stage_blocks = {1, 1, 1, 1};
    hybrid.convnext.image_size = 32;
    hybrid.convnext.expansion = 2;
    hybrid.lstm_hidden = 4;
    for (int instance = 0; instance < 5; ++instance) {
      Model model = Model::build(hybrid, nullptr, 70 + static_cast<std::uint64_t>(instance));
      std::vector<Tensor> frames{rand_t({3, 32, 32}, rng), rand_t({3, 32, 32}, rng)};
      Rng pick(80 + static_cast<std::uint64_t>(instance));
      std::vector<Tensor> inputs = gather({frames[0], frames[1]}, model.parameters());
      models_err = std::max(models_err, gradcheck_sampled(
          [&] {
            return cross_entropy_loss(reshape(model.forward_images(frames), {1, 2}), {1});
          },
          inputs, 20, pick));
    }
  }
  const double elapsed = now_seconds() - t0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "primitives %.2e, layers %.2e, models %.2e, %.0f s (budget 300)", prim, layer,
                models_err, elapsed);
  detail = buf;
  return models_err <= 1e-3 && elapsed <= 300.0;
}

// ---- criterion 2: graph correctness ---------------------------------------------------

bool criterion_graph(std::string& detail) {
  FacialGraph g = build_facial_adjacency();
  if (g.num_nodes != 68 || g.edges.size() != 67 || count_components(68, g.edges) != 9) {
    detail = "expected 68 nodes / 67 edges / 9 components, got " + std::to_string(g.num_nodes) +
             "/" + std::to_string(g.edges.size()) + "/" +
             std::to_string(count_components(68, g.edges));
    return false;
  }
  double asym = 0;
  for (int i = 0; i < 68; ++i) {
    for (int j = 0; j < 68; ++j) {
      asym = std::max(asym, std::fabs(g.adjacency_norm.at({i, j}) - g.adjacency_norm.at({j, i})));
    }
  }
  if (asym > 1e-12) {
    detail = "asymmetry " + std::to_string(asym);
    return false;
  }
  // spectral radius via power iteration on the symmetric matrix
  Rng rng(5);
  Eigen::VectorXd v(68);
  for (int i = 0; i < 68; ++i) v[i] = rng.uniform(0.1, 1.0);
  Eigen::MatrixXd a(68, 68);
  for (int i = 0; i < 68; ++i) {
    for (int j = 0; j < 68; ++j) a(i, j) = g.adjacency_norm.at({i, j});
  }
  double radius = 0;
  for (int iter = 0; iter < 500; ++iter) {
    v = a * v;
    radius = v.norm();
    v /= radius;
  }
  if (radius > 1.0 + 1e-9) {
    detail = "spectral radius " + std::to_string(radius);
    return false;
  }

  // adjacency-level permutation equivariance
  Rng prng(6);
  std::vector<int> perm(68);
  for (int i = 0; i < 68; ++i) perm[static_cast<size_t>(i)] = i;
  prng.shuffle(perm);
  EdgeList pedges;
  for (const auto& [i, j] : g.edges) {
    pedges.emplace_back(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  Tensor pnorm = normalize_adjacency(68, pedges);
  double perm_err = 0;
  for (int i = 0; i < 68; ++i) {
    for (int j = 0; j < 68; ++j) {
      perm_err = std::max(perm_err,
                          std::fabs(pnorm.at({perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]}) -
                                    g.adjacency_norm.at({i, j})));
    }
  }
  if (perm_err > 1e-12) {
    detail = "adjacency permutation error " + std::to_string(perm_err);
    return false;
  }

  // model-level: permuting nodes and adjacency together leaves logits alone
  ModelConfig cfg;
  cfg.kind = ModelKind::kStgcn;
  cfg.stgcn_channels = {3, 4};
  cfg.temporal_kernel = 3;
  auto graph = std::make_shared<FacialGraph>(g);
  auto pgraph = std::make_shared<FacialGraph>(build_facial_graph(68, pedges));
  Model model = Model::build(cfg, graph, 9);
  Model pmodel = Model::build(cfg, pgraph, 9);
  Rng crng(7);
  Tensor clip = rand_t({5, 68, 2}, crng, false);
  Tensor pclip = Tensor::zeros({5, 68, 2});
  for (int t = 0; t < 5; ++t) {
    for (int n = 0; n < 68; ++n) {
      for (int c = 0; c < 2; ++c) {
        pclip.at({t, perm[static_cast<size_t>(n)], c}) = clip.at({t, n, c});
      }
    }
  }
  Tensor l1 = model.forward_landmarks(clip);
  Tensor l2 = pmodel.forward_landmarks(pclip);
  const double logit_err =
      std::max(std::fabs(l1.data()[0] - l2.data()[0]), std::fabs(l1.data()[1] - l2.data()[1]));
  if (logit_err > 1e-9) {
    detail = "model permutation error " + std::to_string(logit_err);
    return false;
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "radius %.9f, perm errs %.1e / %.1e", radius, perm_err,
                logit_err);
  detail = buf;
  return true;
}

// ---- criterion 3: shape protocol ---------------------------------------------------

bool criterion_shapes(std::string& detail) {
  Rng rng(11);
  ConvNextConfig tiny;  // defaults are the Tiny layout
  ConvNextBackbone bb = ConvNextBackbone::init(tiny, rng);
  Tensor img = Tensor::uniform({3, 224, 224}, 0, 1, rng);
  ConvNextStageTrace trace;
  Tensor feat = bb.forward(img, &trace);
  const std::vector<std::array<int, 3>> want{{96, 56, 56}, {192, 28, 28}, {384, 14, 14},
                                             {768, 7, 7}};
  if (trace.stage_shapes != want || trace.blocks_executed != 18 || feat.shape() != Shape{768}) {
    detail = "convnext trace mismatch (blocks " + std::to_string(trace.blocks_executed) + ")";
    return false;
  }

  ModelConfig cfg;
  cfg.kind = ModelKind::kStgcn;  // default channel plan 2 -> 32 -> 64 -> 64
  auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());
  Model model = Model::build(cfg, graph, 3);
  Tensor clip = Tensor::uniform({20, 68, 2}, -1, 1, rng);
  Tensor logits = model.forward_landmarks(clip);
  if (logits.shape() != Shape{2}) {
    detail = "stgcn head produced " + shape_str(logits.shape());
    return false;
  }
  detail = "stages 56/28/14/7 at (96,192,384,768), 18 blocks, stgcn 20x68x2 -> 2 logits";
  return true;
}

// ---- criterion 4: overfit capacity ---------------------------------------------------

bool criterion_overfit(std::string& detail) {
  const double t0 = now_seconds();
  std::ostringstream note;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Dataset land = generate_synthetic(8, 500 + seed);
    normalize_dataset(land);
    Dataset feats = features_from_landmarks(land);
    auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());

    auto overfit = [&](const char* name, const ModelConfig& cfg, const Dataset& ds) {
      OptimizerConfig opt;
      opt.lr0 = 5e-3;
      opt.epochs = 1;
      opt.batch_size = 8;
      Model model = Model::build(cfg, cfg.kind == ModelKind::kHybrid ? nullptr : graph,
                                 mix_stream(seed, 99));
      Trainer trainer(model, opt, seed);
      for (int epoch = 1; epoch <= 300; ++epoch) {
        trainer.run_epoch(ds);
        if (dataset_accuracy(model, ds) == 1.0) {
          note << name << "/s" << seed << ":" << epoch << "ep ";
          return true;
        }
      }
      return false;
    };

    ModelConfig stgcn;
    stgcn.kind = ModelKind::kStgcn;
    stgcn.stgcn_channels = {8, 8};
    stgcn.temporal_kernel = 3;
    if (!overfit("stgcn", stgcn, land)) {
      detail = "stgcn failed to overfit at seed " + std::to_string(seed);
      return false;
    }

    ModelConfig stgcn_lstm = stgcn;
    stgcn_lstm.kind = ModelKind::kStgcnLstm;
    stgcn_lstm.lstm_hidden = 8;
    if (!overfit("stgcn_lstm", stgcn_lstm, land)) {
      detail = "stgcn_lstm failed to overfit at seed " + std::to_string(seed);
      return false;
    }

    ModelConfig hybrid;
    hybrid.kind = ModelKind::kHybrid;
    hybrid.lstm_hidden = 8;
    hybrid.lstm_variant = LstmVariant::kPlain;
    hybrid.feature_dim = 2 * kNumLandmarks;
    if (!overfit("hybrid", hybrid, feats)) {
      detail = "hybrid failed to overfit at seed " + std::to_string(seed);
      return false;
    }
  }
  const double elapsed = now_seconds() - t0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f s (budget 600); ", elapsed);
  detail = buf + note.str();
  return elapsed <= 600.0;
}

// ---- criterion 5: learnability separation ---------------------------------------------

bool criterion_learnability(std::string& detail) {
  Dataset ds = generate_synthetic(100, 1234);
  normalize_dataset(ds);
  auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());

  OptimizerConfig opt;
  opt.lr0 = 3e-3;
  opt.epochs = 24;
  opt.batch_size = 10;
  opt.decay_rate = 0.8;  // calm the late epochs; best-val snapshots pick the peak
  opt.decay_steps = 50;

  ModelConfig lstm_cfg;
  lstm_cfg.kind = ModelKind::kStgcnLstm;
  lstm_cfg.stgcn_channels = {8, 8};
  lstm_cfg.temporal_kernel = 3;
  lstm_cfg.lstm_hidden = 8;
  EvalReport lstm_rep = run_kfold_experiment(lstm_cfg, graph, ds, opt, 5, 17, true, false);

  ModelConfig plain_cfg = lstm_cfg;
  plain_cfg.kind = ModelKind::kStgcn;
  OptimizerConfig plain_opt = opt;
  plain_opt.epochs = 12;  // converges much faster
  EvalReport plain_rep = run_kfold_experiment(plain_cfg, graph, ds, plain_opt, 5, 17, true, false);

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "stgcn_lstm mean acc %.4f (gate: >= 0.90); stgcn mean acc %.4f; expected "
                "ordering stgcn <= stgcn_lstm %s",
                lstm_rep.mean.accuracy, plain_rep.mean.accuracy,
                plain_rep.mean.accuracy <= lstm_rep.mean.accuracy ? "observed" : "NOT observed");
  detail = buf;
  return lstm_rep.mean.accuracy >= 0.90;
}

// ---- criterion 6: smote ---------------------------------------------------------------

bool criterion_smote(std::string& detail) {
  Dataset ds = generate_synthetic(30, 77);
  ds.landmark_clips.erase(ds.landmark_clips.begin() + 39, ds.landmark_clips.end());
  // 30 neutral, 9 pain
  Dataset bal = smote_oversample(ds, 5, 7);
  const auto counts = bal.class_counts();
  if (counts[0] != counts[1]) {
    detail = "classes " + std::to_string(counts[0]) + "/" + std::to_string(counts[1]);
    return false;
  }
  std::vector<const Tensor*> minority;
  for (int i = 30; i < 39; ++i) minority.push_back(&ds.landmark_clips[static_cast<size_t>(i)].frames);
  double worst = 0;
  for (std::size_t s = 39; s < bal.size(); ++s) {
    const Eigen::ArrayXd& x = bal.landmark_clips[s].frames.array();
    double best = 1e18;
    for (size_t a = 0; a < minority.size(); ++a) {
      for (size_t b = 0; b < minority.size(); ++b) {
        if (a == b) continue;
        const Eigen::ArrayXd& pa = minority[a]->array();
        const Eigen::ArrayXd seg = minority[b]->array() - pa;
        const double len2 = (seg * seg).sum();
        double t = len2 > 0 ? ((x - pa) * seg).sum() / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        best = std::min(best, std::sqrt((x - pa - t * seg).square().sum()));
      }
    }
    worst = std::max(worst, best);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "balanced %d/%d, worst segment residual %.2e", counts[0],
                counts[1], worst);
  detail = buf;
  return worst <= 1e-9;
}

// ---- criterion 7: metrics oracle -------------------------------------------------------

bool criterion_metrics(std::string& detail) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(1, 60);
    std::vector<int> pred(static_cast<size_t>(n)), lab(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      pred[static_cast<size_t>(i)] = rng.uniform_int(0, 1);
      lab[static_cast<size_t>(i)] = rng.uniform_int(0, 1);
    }
    const FoldMetrics m = evaluate_metrics(pred, lab);

    // independent brute-force recomputation
    long conf[2][2] = {{0, 0}, {0, 0}};
    for (int i = 0; i < n; ++i) ++conf[lab[static_cast<size_t>(i)]][pred[static_cast<size_t>(i)]];
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        if (m.confusion[static_cast<size_t>(a)][static_cast<size_t>(b)] != conf[a][b]) {
          detail = "confusion mismatch at trial " + std::to_string(trial);
          return false;
        }
      }
    }
    const double acc = static_cast<double>(conf[0][0] + conf[1][1]) / n;
    double wprec = 0, wrec = 0, wf1 = 0;
    for (int c = 0; c < 2; ++c) {
      const double support = conf[c][0] + conf[c][1];
      const double tp = conf[c][c];
      const double fp = conf[1 - c][c];
      const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double rec = support > 0 ? tp / support : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      wprec += support / n * prec;
      wrec += support / n * rec;
      wf1 += support / n * f1;
    }
    if (std::fabs(m.accuracy - acc) > 1e-12 || std::fabs(m.precision - wprec) > 1e-12 ||
        std::fabs(m.recall - wrec) > 1e-12 || std::fabs(m.f1 - wf1) > 1e-12) {
      detail = "metric mismatch at trial " + std::to_string(trial);
      return false;
    }
    if (std::fabs(m.recall - m.accuracy) > 1e-12) {
      detail = "weighted recall != accuracy at trial " + std::to_string(trial);
      return false;
    }
  }
  detail = "1000 random prediction vectors, exact confusion, metrics within 1e-12";
  return true;
}

// ---- criterion 8: optimizer ------------------------------------------------------------

bool criterion_optimizer(std::string& detail) {
  OptimizerConfig cfg;
  Tensor w = Tensor::full({16}, 0.25, true);
  AdamOptimizer opt({{"w", w}}, cfg);
  w.grad_array().setConstant(1.0);
  opt.step();
  double worst = 0;
  for (int i = 0; i < 16; ++i) {
    worst = std::max(worst, std::fabs(std::fabs(w.data()[i] - 0.25) - cfg.lr0) / cfg.lr0);
  }
  if (worst > 1e-6) {
    detail = "first-step relative error " + std::to_string(worst);
    return false;
  }
  if (lr_schedule(cfg, 0) != 1e-4) {
    detail = "lr_schedule(0) != 1e-4";
    return false;
  }
  double prev = lr_schedule(cfg, 0);
  for (int s = 1; s <= 10000; ++s) {
    const double cur = lr_schedule(cfg, s);
    if (cur > prev) {
      detail = "schedule increased at step " + std::to_string(s);
      return false;
    }
    prev = cur;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "first-step rel err %.2e, schedule exact and monotone", worst);
  detail = buf;
  return true;
}

// ---- criterion 9: determinism -----------------------------------------------------------

bool criterion_determinism(std::string& detail) {
  // library level: serial vs parallel fold execution
  Dataset ds = generate_synthetic(10, 3);
  normalize_dataset(ds);
  auto graph = std::make_shared<FacialGraph>(build_facial_adjacency());
  ModelConfig cfg;
  cfg.kind = ModelKind::kStgcn;
  cfg.stgcn_channels = {4};
  cfg.temporal_kernel = 3;
  OptimizerConfig opt;
  opt.lr0 = 1e-3;
  opt.epochs = 2;
  opt.batch_size = 8;
  const std::string serial =
      format_report(run_kfold_experiment(cfg, graph, ds, opt, 5, 21, true, false));
  const std::string parallel =
      format_report(run_kfold_experiment(cfg, graph, ds, opt, 5, 21, true, true));
  if (serial != parallel) {
    detail = "serial and parallel fold reports differ";
    return false;
  }

  // CLI level: two identical kfold invocations write byte-identical reports
  const fs::path dir = fs::temp_directory_path() / "painlarks_accept_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path csv = dir / "clips.csv";
  if (run_cli("synth-data --n 10 --out " + csv.string() + " --seed 2").exit_code != 0) {
    detail = "synth-data failed";
    return false;
  }
  const fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream f(cfg_path);
    f << "kind = stgcn\nstgcn_channels = 4\ntemporal_kernel = 3\nlr0 = 1e-3\nepochs = 2\n"
      << "batch_size = 8\nseed = 5\ndata = " << csv.string() << "\noutdir = "
      << (dir / "out").string() << "\n";
  }
  if (run_cli("kfold --config " + cfg_path.string()).exit_code != 0) {
    detail = "first kfold run failed";
    return false;
  }
  const std::string rep1 = slurp(dir / "out" / "kfold_report.txt");
  if (run_cli("kfold --config " + cfg_path.string()).exit_code != 0) {
    detail = "second kfold run failed";
    return false;
  }
  const std::string rep2 = slurp(dir / "out" / "kfold_report.txt");
  fs::remove_all(dir);
  if (rep1.empty() || rep1 != rep2) {
    detail = "kfold reports not byte-identical";
    return false;
  }
  detail = "serial==parallel fold reports; repeated CLI kfold byte-identical";
  return true;
}

// ---- criterion 10: format fidelity --------------------------------------------------------

bool criterion_formats(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "painlarks_accept_fmt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path raw = dir / "raw.csv", once = dir / "once.csv", twice = dir / "twice.csv";
  write_landmark_csv(raw.string(), generate_synthetic(3, 8));
  write_landmark_csv(once.string(), load_landmark_csv(raw.string()));
  write_landmark_csv(twice.string(), load_landmark_csv(once.string()));

  // numeric comparison of the two normalized files
  std::ifstream fa(once), fb(twice);
  std::string la, lb;
  std::getline(fa, la);  // header
  std::getline(fb, lb);
  if (la != lb) {
    detail = "headers differ";
    return false;
  }
  double worst = 0;
  while (std::getline(fa, la) && std::getline(fb, lb)) {
    std::stringstream sa(la), sb(lb);
    std::string ta, tb;
    int field = 0;
    while (std::getline(sa, ta, ',') && std::getline(sb, tb, ',')) {
      if (field >= 3) worst = std::max(worst, std::fabs(std::stod(ta) - std::stod(tb)));
      ++field;
    }
  }
  if (worst > 1e-9) {
    detail = "round-trip delta " + std::to_string(worst);
    return false;
  }

  // a corrupted row must surface as exit 2 with its line number
  std::vector<std::string> lines;
  {
    std::ifstream f(raw);
    std::string line;
    while (std::getline(f, line)) lines.push_back(line);
  }
  lines[11] = lines[11] + ",0.5";  // line 12 gains a stray field
  {
    std::ofstream f(raw);
    for (const auto& l : lines) f << l << "\n";
  }
  const fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream f(cfg_path);
    f << "kind = stgcn\nstgcn_channels = 4\ntemporal_kernel = 3\nepochs = 1\ndata = "
      << raw.string() << "\noutdir = " << (dir / "out").string() << "\n";
  }
  const CliResult r = run_cli("train --config " + cfg_path.string());
  fs::remove_all(dir);
  if (r.exit_code != 2) {
    detail = "corrupted row exited " + std::to_string(r.exit_code) + ", expected 2";
    return false;
  }
  if (r.output.find("line 12") == std::string::npos) {
    detail = "error did not name line 12: " + r.output;
    return false;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "round trip delta %.2e; corrupt row -> exit 2 naming line 12",
                worst);
  detail = buf;
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* label;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient suite", criterion_gradients},
      {2, "graph correctness", criterion_graph},
      {3, "shape protocol fidelity", criterion_shapes},
      {4, "overfit capacity", criterion_overfit},
      {5, "learnability separation", criterion_learnability},
      {6, "smote balance and segments", criterion_smote},
      {7, "metrics oracle", criterion_metrics},
      {8, "optimizer contract", criterion_optimizer},
      {9, "determinism", criterion_determinism},
      {10, "format fidelity", criterion_formats},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    std::string detail;
    bool ok = false;
    const double t0 = now_seconds();
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double dt = now_seconds() - t0;
    std::printf("criterion %2d: %s - %s [%s] (%.1f s)\n", c.id, ok ? "PASS" : "FAIL", c.label,
                detail.c_str(), dt);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures == 0) {
    std::printf("acceptance: all %zu criteria passed\n", criteria.size());
  } else {
    std::printf("acceptance: %d criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
