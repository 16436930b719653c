#include "painlarks/layers.hpp"

#include <cmath>

namespace painlarks {

std::int64_t total_params(const ParamList& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Tensor init_weight(Shape shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(std::move(shape), -bound, bound, rng, /*requires_grad=*/true);
}

// ---- Linear -----------------------------------------------------------------

Linear Linear::init(int in, int out, Rng& rng) {
  Linear l;
  l.W = init_weight({in, out}, in, rng);
  l.b = Tensor::zeros({out}, /*requires_grad=*/true);
  return l;
}

Tensor Linear::apply_vec(const Tensor& x) const {
  const int in = W.dim(0), out = W.dim(1);
  return reshape(add_rowwise(matmul(reshape(x, {1, in}), W), b), {out});
}

Tensor Linear::apply_rows(const Tensor& x) const {
  return add_rowwise(matmul(x, W), b);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".W", W});
  out.push_back({prefix + ".b", b});
}

// ---- LSTM --------------------------------------------------------------------

LstmParams LstmParams::init(int input_dim, int hidden, Rng& rng) {
  LstmParams p;
  p.W_i = init_weight({hidden, input_dim}, input_dim, rng);
  p.W_f = init_weight({hidden, input_dim}, input_dim, rng);
  p.W_o = init_weight({hidden, input_dim}, input_dim, rng);
  p.W_c = init_weight({hidden, input_dim}, input_dim, rng);
  p.U_i = init_weight({hidden, hidden}, hidden, rng);
  p.U_f = init_weight({hidden, hidden}, hidden, rng);
  p.U_o = init_weight({hidden, hidden}, hidden, rng);
  p.U_c = init_weight({hidden, hidden}, hidden, rng);
  p.b_i = Tensor::zeros({hidden}, true);
  p.b_f = Tensor::full({hidden}, 1.0, true);
  p.b_o = Tensor::zeros({hidden}, true);
  p.b_c = Tensor::zeros({hidden}, true);
  return p;
}

void LstmParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".W_i", W_i});
  out.push_back({prefix + ".W_f", W_f});
  out.push_back({prefix + ".W_o", W_o});
  out.push_back({prefix + ".W_c", W_c});
  out.push_back({prefix + ".U_i", U_i});
  out.push_back({prefix + ".U_f", U_f});
  out.push_back({prefix + ".U_o", U_o});
  out.push_back({prefix + ".U_c", U_c});
  out.push_back({prefix + ".b_i", b_i});
  out.push_back({prefix + ".b_f", b_f});
  out.push_back({prefix + ".b_o", b_o});
  out.push_back({prefix + ".b_c", b_c});
}

std::int64_t LstmParams::param_count() const {
  return lstm_param_count(input_dim(), hidden());
}

std::int64_t lstm_param_count(int input_dim, int hidden) {
  const std::int64_t h = hidden, d = input_dim;
  return 4 * (h * d + h * h + h);
}

LstmState LstmState::zeros(int hidden) {
  return {Tensor::zeros({hidden}), Tensor::zeros({hidden})};
}

LstmState lstm_cell_step(const LstmParams& p, const Tensor& x, const LstmState& state) {
  if (x.ndim() != 1 || x.dim(0) != p.input_dim()) {
    throw ShapeError("lstm_cell_step: input " + shape_str(x.shape()) +
                     " for weights " + shape_str(p.W_i.shape()));
  }
  auto gate_pre = [&](const Tensor& W, const Tensor& U, const Tensor& b) {
    return add(add(matvec(W, x), matvec(U, state.h)), b);
  };
  Tensor i = sigmoid(gate_pre(p.W_i, p.U_i, p.b_i));
  Tensor f = sigmoid(gate_pre(p.W_f, p.U_f, p.b_f));
  Tensor o = sigmoid(gate_pre(p.W_o, p.U_o, p.b_o));
  Tensor cand = tanh(gate_pre(p.W_c, p.U_c, p.b_c));
  Tensor c_next = add(mul(f, state.c), mul(i, cand));
  Tensor h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

const char* lstm_variant_name(LstmVariant v) {
  switch (v) {
    case LstmVariant::kPlain: return "plain";
    case LstmVariant::kBi: return "bi";
    case LstmVariant::kAttention: return "attention";
    case LstmVariant::kStacked: return "stacked";
  }
  return "?";
}

LstmVariant parse_lstm_variant(const std::string& s) {
  if (s == "plain") return LstmVariant::kPlain;
  if (s == "bi") return LstmVariant::kBi;
  if (s == "attention") return LstmVariant::kAttention;
  if (s == "stacked") return LstmVariant::kStacked;
  throw ConfigError("unknown lstm_variant '" + s + "' (plain|bi|attention|stacked)");
}

SequenceLstm SequenceLstm::init(LstmVariant variant, int input_dim, int hidden, Rng& rng) {
  SequenceLstm s;
  s.variant = variant;
  s.first = LstmParams::init(input_dim, hidden, rng);
  if (variant == LstmVariant::kBi) {
    s.second = LstmParams::init(input_dim, hidden, rng);
  } else if (variant == LstmVariant::kStacked) {
    s.second = LstmParams::init(hidden, hidden, rng);
  } else if (variant == LstmVariant::kAttention) {
    s.attn_W = init_weight({hidden, hidden}, hidden, rng);
    s.attn_v = init_weight({hidden}, hidden, rng);
  }
  return s;
}

int SequenceLstm::output_dim() const {
  return variant == LstmVariant::kBi ? 2 * first.hidden() : first.hidden();
}

Tensor SequenceLstm::forward(const Tensor& seq, std::vector<double>* attn_out) const {
  if (seq.ndim() != 2 || seq.dim(1) != first.input_dim()) {
    throw ShapeError("SequenceLstm: sequence " + shape_str(seq.shape()) +
                     " for input width " + std::to_string(first.input_dim()));
  }
  const int t_len = seq.dim(0);
  if (t_len < 1) throw ShapeError("SequenceLstm: empty sequence");
  const int h = first.hidden();

  auto roll = [&](const LstmParams& p, bool reversed, std::vector<Tensor>* hs) {
    LstmState st = LstmState::zeros(p.hidden());
    for (int t = 0; t < t_len; ++t) {
      const int idx = reversed ? t_len - 1 - t : t;
      st = lstm_cell_step(p, slice_axis0(seq, idx), st);
      if (hs != nullptr) hs->push_back(st.h);
    }
    return st.h;
  };

  switch (variant) {
    case LstmVariant::kPlain:
      return roll(first, false, nullptr);
    case LstmVariant::kBi: {
      Tensor hf = roll(first, false, nullptr);
      Tensor hb = roll(*second, true, nullptr);
      return concat_last(hf, hb);
    }
    case LstmVariant::kAttention: {
      std::vector<Tensor> hs;
      roll(first, false, &hs);
      std::vector<Tensor> scores;
      scores.reserve(hs.size());
      for (const Tensor& ht : hs) {
        scores.push_back(dot(attn_v, tanh(matvec(attn_W, ht))));
      }
      Tensor e = reshape(stack_axis0(scores), {t_len});
      Tensor alpha = softmax(e);
      if (attn_out != nullptr) {
        attn_out->assign(alpha.data(), alpha.data() + alpha.numel());
      }
      Tensor hs_mat = stack_axis0(hs);  // [T,H]
      return matvec(transpose2d(hs_mat), alpha);
    }
    case LstmVariant::kStacked: {
      std::vector<Tensor> hs;
      roll(first, false, &hs);
      LstmState st = LstmState::zeros(h);
      for (int t = 0; t < t_len; ++t) st = lstm_cell_step(*second, hs[static_cast<size_t>(t)], st);
      return st.h;
    }
  }
  throw Error("SequenceLstm: unreachable");
}

void SequenceLstm::collect(const std::string& prefix, ParamList& out) const {
  switch (variant) {
    case LstmVariant::kPlain:
      first.collect(prefix + ".lstm", out);
      break;
    case LstmVariant::kBi:
      first.collect(prefix + ".fwd", out);
      second->collect(prefix + ".bwd", out);
      break;
    case LstmVariant::kAttention:
      first.collect(prefix + ".lstm", out);
      out.push_back({prefix + ".attn.W", attn_W});
      out.push_back({prefix + ".attn.v", attn_v});
      break;
    case LstmVariant::kStacked:
      first.collect(prefix + ".layer1", out);
      second->collect(prefix + ".layer2", out);
      break;
  }
}

std::int64_t SequenceLstm::param_count() const {
  std::int64_t n = first.param_count();
  if (second.has_value()) n += second->param_count();
  if (variant == LstmVariant::kAttention) n += attn_W.numel() + attn_v.numel();
  return n;
}

// ---- graph ops -----------------------------------------------------------------

Tensor graph_convolution(const Tensor& a_hat, const Tensor& x, const Tensor& w) {
  if (a_hat.ndim() != 2 || a_hat.dim(0) != a_hat.dim(1)) {
    throw ShapeError("graph_convolution: adjacency must be square, got " +
                     shape_str(a_hat.shape()));
  }
  if (x.ndim() != 2 || x.dim(0) != a_hat.dim(0)) {
    throw ShapeError("graph_convolution: features " + shape_str(x.shape()) +
                     " for adjacency " + shape_str(a_hat.shape()));
  }
  return matmul(matmul(a_hat, x), w);
}

Tensor temporal_convolution(const Tensor& x, const Tensor& kernel) {
  if (x.ndim() != 3) {
    throw ShapeError("temporal_convolution: need [T,V,C], got " + shape_str(x.shape()));
  }
  if (kernel.ndim() != 3 || kernel.dim(1) != x.dim(2)) {
    throw ShapeError("temporal_convolution: kernel " + shape_str(kernel.shape()) +
                     " for input " + shape_str(x.shape()));
  }
  const int k = kernel.dim(2);
  if (k % 2 == 0) {
    throw ConfigError("temporal_convolution: same padding needs an odd kernel, got " +
                      std::to_string(k));
  }
  const int pad = (k - 1) / 2;
  const int v = x.dim(1);
  Tensor per_node = transpose01(x);  // [V,T,C]
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(v));
  for (int n = 0; n < v; ++n) {
    outs.push_back(conv1d_temporal(slice_axis0(per_node, n), kernel, pad));
  }
  return transpose01(stack_axis0(outs));  // [T,V,C_out]
}

// ---- ConvLSTM -------------------------------------------------------------------

ConvLstmParams ConvLstmParams::init(int in_channels, int hidden, Rng& rng) {
  ConvLstmParams p;
  p.W_i = init_weight({in_channels, hidden}, in_channels, rng);
  p.W_f = init_weight({in_channels, hidden}, in_channels, rng);
  p.W_o = init_weight({in_channels, hidden}, in_channels, rng);
  p.W_c = init_weight({in_channels, hidden}, in_channels, rng);
  p.U_i = init_weight({hidden, hidden}, hidden, rng);
  p.U_f = init_weight({hidden, hidden}, hidden, rng);
  p.U_o = init_weight({hidden, hidden}, hidden, rng);
  p.U_c = init_weight({hidden, hidden}, hidden, rng);
  p.b_i = Tensor::zeros({hidden}, true);
  p.b_f = Tensor::full({hidden}, 1.0, true);
  p.b_o = Tensor::zeros({hidden}, true);
  p.b_c = Tensor::zeros({hidden}, true);
  return p;
}

void ConvLstmParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".W_i", W_i});
  out.push_back({prefix + ".W_f", W_f});
  out.push_back({prefix + ".W_o", W_o});
  out.push_back({prefix + ".W_c", W_c});
  out.push_back({prefix + ".U_i", U_i});
  out.push_back({prefix + ".U_f", U_f});
  out.push_back({prefix + ".U_o", U_o});
  out.push_back({prefix + ".U_c", U_c});
  out.push_back({prefix + ".b_i", b_i});
  out.push_back({prefix + ".b_f", b_f});
  out.push_back({prefix + ".b_o", b_o});
  out.push_back({prefix + ".b_c", b_c});
}

std::int64_t ConvLstmParams::param_count() const {
  const std::int64_t c = in_channels(), h = hidden();
  return 4 * (c * h + h * h + h);
}

ConvLstmState ConvLstmState::zeros(int num_nodes, int hidden) {
  return {Tensor::zeros({num_nodes, hidden}), Tensor::zeros({num_nodes, hidden})};
}

ConvLstmState convlstm_cell_step(const ConvLstmParams& p, const Tensor& a_hat,
                                 const Tensor& x, const ConvLstmState& state) {
  if (x.ndim() != 2 || x.dim(0) != a_hat.dim(0) || x.dim(1) != p.in_channels()) {
    throw ShapeError("convlstm_cell_step: input " + shape_str(x.shape()) +
                     " for adjacency " + shape_str(a_hat.shape()) + " and weights " +
                     shape_str(p.W_i.shape()));
  }
  // Mix once, share across gates.
  Tensor xs = matmul(a_hat, x);
  Tensor hs = matmul(a_hat, state.h);
  auto gate_pre = [&](const Tensor& W, const Tensor& U, const Tensor& b) {
    return add_rowwise(add(matmul(xs, W), matmul(hs, U)), b);
  };
  Tensor i = sigmoid(gate_pre(p.W_i, p.U_i, p.b_i));
  Tensor f = sigmoid(gate_pre(p.W_f, p.U_f, p.b_f));
  Tensor o = sigmoid(gate_pre(p.W_o, p.U_o, p.b_o));
  Tensor cand = tanh(gate_pre(p.W_c, p.U_c, p.b_c));
  Tensor c_next = add(mul(f, state.c), mul(i, cand));
  Tensor h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

}  // namespace painlarks
