#include "painlarks/selftest.hpp"

#include <cmath>
#include <cstring>
#include <ostream>

#include "painlarks/data.hpp"
#include "painlarks/gradcheck.hpp"
#include "painlarks/graph.hpp"
#include "painlarks/models.hpp"
#include "painlarks/training.hpp"

namespace painlarks {

namespace {

struct Check {
  std::ostream& out;
  int failures = 0;
  void operator()(const char* name, bool ok) {
    out << (ok ? "ok   " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  }
};

Tensor rand_t(Shape shape, Rng& rng) {
  return Tensor::uniform(std::move(shape), -2.0, 2.0, rng, /*requires_grad=*/true);
}

}  // namespace

int run_selftest(std::ostream& out) {
  Check check{out};
  Rng rng(12345);

  {  // primitive gradients
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      Tensor a = rand_t({3, 4}, rng), b = rand_t({4, 2}, rng);
      worst = std::max(worst, gradcheck([&] { return sum(mul(matmul(a, b), matmul(a, b))); },
                                        {a, b}));
      Tensor x = rand_t({2, 5, 5}, rng), k = rand_t({2, 1, 3, 3}, rng);
      worst = std::max(worst, gradcheck([&] { return sum(conv2d(x, k, 1, 1, 2)); }, {x, k}));
      Tensor s = rand_t({5, 3}, rng), ck = rand_t({2, 3, 3}, rng);
      worst = std::max(worst,
                       gradcheck([&] { return sum(tanh(conv1d_temporal(s, ck, 1))); }, {s, ck}));
      Tensor u = rand_t({6}, rng), v = rand_t({6}, rng);
      worst = std::max(worst, gradcheck([&] { return sum(mul(gelu(u), sigmoid(v))); }, {u, v}));
      Tensor ln_x = rand_t({2, 4}, rng), g = rand_t({4}, rng), be = rand_t({4}, rng);
      worst = std::max(
          worst, gradcheck([&] { return sum(layer_norm(ln_x, g, be)); }, {ln_x, g, be}, 1e-5));
    }
    check("primitive gradient checks (rel err <= 1e-4)", worst <= 1e-4);
  }

  {  // cross-entropy gradient equals softmax minus one-hot
    Tensor logits = rand_t({4, 2}, rng);
    std::vector<int> labels{0, 1, 1, 0};
    {
      Tape tape;
      Tensor loss = cross_entropy_loss(logits, labels);
      backward(loss);
    }
    double worst = 0;
    for (int r = 0; r < 4; ++r) {
      const double a = logits.at({r, 0}), b = logits.at({r, 1});
      const double m = std::max(a, b);
      const double ea = std::exp(a - m), eb = std::exp(b - m);
      const double p0 = ea / (ea + eb), p1 = eb / (ea + eb);
      const double want0 = (p0 - (labels[static_cast<size_t>(r)] == 0 ? 1 : 0)) / 4.0;
      const double want1 = (p1 - (labels[static_cast<size_t>(r)] == 1 ? 1 : 0)) / 4.0;
      worst = std::max({worst, std::fabs(want0 - logits.grad()[2 * r]),
                        std::fabs(want1 - logits.grad()[2 * r + 1])});
    }
    check("cross-entropy gradient matches softmax - one_hot", worst <= 1e-8);
  }

  {  // lstm rollout
    Rng wrng(7);
    LstmParams p = LstmParams::init(3, 4, wrng);
    Tensor seq = rand_t({3, 3}, rng);
    ParamList named;
    p.collect("p", named);
    std::vector<Tensor> inputs{seq};
    for (auto& n : named) inputs.push_back(n.tensor);
    const double err = gradcheck(
        [&] {
          LstmState st = LstmState::zeros(4);
          for (int t = 0; t < 3; ++t) st = lstm_cell_step(p, slice_axis0(seq, t), st);
          return sum(mul(st.h, st.h));
        },
        inputs);
    check("lstm 3-step rollout gradient (rel err <= 1e-4)", err <= 1e-4);
  }

  {  // convlstm on a path graph
    FacialGraph g = build_facial_graph(3, {{0, 1}, {1, 2}});
    Rng wrng(8);
    ConvLstmParams p = ConvLstmParams::init(2, 3, wrng);
    Tensor x0 = rand_t({3, 2}, rng), x1 = rand_t({3, 2}, rng);
    ParamList named;
    p.collect("p", named);
    std::vector<Tensor> inputs{x0, x1};
    for (auto& n : named) inputs.push_back(n.tensor);
    const double err = gradcheck(
        [&] {
          ConvLstmState st = ConvLstmState::zeros(3, 3);
          st = convlstm_cell_step(p, g.adjacency_norm, x0, st);
          st = convlstm_cell_step(p, g.adjacency_norm, x1, st);
          return sum(mul(st.h, st.h));
        },
        inputs);
    check("convlstm 2-step gradient (rel err <= 1e-4)", err <= 1e-4);
  }

  {  // stgcn block end to end
    FacialGraph g = build_facial_graph(3, {{0, 1}, {1, 2}});
    Rng wrng(9);
    StgcnBlock block = StgcnBlock::init({2, 3, 3, true}, wrng);
    Tensor clip = rand_t({4, 3, 2}, rng);
    ParamList named;
    block.collect("b", named);
    std::vector<Tensor> inputs{clip};
    for (auto& n : named) inputs.push_back(n.tensor);
    Rng pick(10);
    const double err = gradcheck_sampled(
        [&] {
          Tensor y = block.forward(g, clip);
          return sum(mul(y, y));
        },
        inputs, 60, pick);
    check("stgcn block gradient (rel err <= 1e-4)", err <= 1e-4);
  }

  {  // facial graph
    FacialGraph g = build_facial_adjacency();
    bool ok = g.num_nodes == 68 && g.edges.size() == 67 &&
              count_components(68, g.edges) == 9;
    double asym = 0;
    for (int i = 0; i < 68; ++i) {
      for (int j = 0; j < 68; ++j) {
        asym = std::max(asym,
                        std::fabs(g.adjacency_norm.at({i, j}) - g.adjacency_norm.at({j, i})));
      }
    }
    check("facial graph: 68 nodes, 67 edges, 9 components, symmetric", ok && asym <= 1e-12);
  }

  {  // metrics identity
    Rng mrng(11);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
      const int n = mrng.uniform_int(1, 40);
      std::vector<int> pred(static_cast<size_t>(n)), lab(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        pred[static_cast<size_t>(i)] = mrng.uniform_int(0, 1);
        lab[static_cast<size_t>(i)] = mrng.uniform_int(0, 1);
      }
      const FoldMetrics m = evaluate_metrics(pred, lab);
      ok = ok && std::fabs(m.recall - m.accuracy) <= 1e-12;
    }
    check("weighted recall equals accuracy", ok);
  }

  {  // smote
    Dataset ds = generate_synthetic(6, 3);
    ds.landmark_clips.resize(8);  // 6 of class 0, 2 of class 1
    Dataset balanced = smote_oversample(ds, 5, 4);
    const auto counts = balanced.class_counts();
    check("smote balances classes exactly", counts[0] == counts[1] && counts[0] == 6);
  }

  {  // adam first step magnitude and zero-grad no-op
    Tensor w = Tensor::full({4}, 0.5, true);
    OptimizerConfig oc;
    oc.lr0 = 1e-4;
    AdamOptimizer opt({{"w", w}}, oc);
    w.grad_array().setConstant(1.0);
    opt.step();
    bool ok = true;
    for (int i = 0; i < 4; ++i) {
      ok = ok && std::fabs(std::fabs(w.data()[i] - 0.5) - oc.lr0) <= 1e-6 * oc.lr0;
    }
    Tensor frozen = Tensor::full({4}, 0.7, true);
    AdamOptimizer idle({{"frozen", frozen}}, oc);
    for (int i = 0; i < 3; ++i) idle.step();
    ok = ok && (frozen.array() == 0.7).all();
    check("adam: first-step magnitude lr0; zero gradient is a no-op", ok);
  }

  {  // lr schedule
    OptimizerConfig oc;
    bool ok = lr_schedule(oc, 0) == 1e-4 &&
              std::fabs(lr_schedule(oc, 1000) - 9.6e-5) <= 1e-18;
    double prev = lr_schedule(oc, 0);
    for (int s = 1; s <= 10000 && ok; s += 97) {
      const double cur = lr_schedule(oc, s);
      ok = cur <= prev;
      prev = cur;
    }
    check("lr schedule: initial value, one decay period, monotone", ok);
  }

  {  // determinism: same seed, bit-identical forward and gradients
    auto run = [&](Eigen::ArrayXd* grad_out) {
      Rng r(99);
      Tensor a = Tensor::uniform({4, 4}, -1, 1, r, true);
      Tensor x = Tensor::uniform({4, 3}, -1, 1, r, true);
      Tape tape;
      Tensor loss = sum(mul(tanh(matmul(a, x)), tanh(matmul(a, x))));
      backward(loss);
      *grad_out = a.grad_array();
      return loss.value();
    };
    Eigen::ArrayXd g1, g2;
    const double l1 = run(&g1), l2 = run(&g2);
    check("determinism: identical seed gives bit-identical results",
          std::memcmp(&l1, &l2, sizeof l1) == 0 &&
              std::memcmp(g1.data(), g2.data(), sizeof(double) * static_cast<size_t>(g1.size())) == 0);
  }

  out << (check.failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return check.failures;
}

}  // namespace painlarks
