#pragma once

// Reusable trainable layers: LSTM family, graph-structured ConvLSTM, graph
// convolution, temporal convolution, and a plain linear map.
//
// Parameters are Tensors with requires_grad set; each layer can append its
// parameters to a ParamList under a stable dotted name, which is what the
// optimizer iterates over and what checkpoints are keyed by.

#include <optional>
#include <string>
#include <vector>

#include "painlarks/graph.hpp"
#include "painlarks/random.hpp"
#include "painlarks/tensor.hpp"

namespace painlarks {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

std::int64_t total_params(const ParamList& params);

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor init_weight(Shape shape, int fan_in, Rng& rng);

// ---- linear -----------------------------------------------------------------

struct Linear {
  Tensor W;  // [in, out]
  Tensor b;  // [out]

  static Linear init(int in, int out, Rng& rng);
  Tensor apply_vec(const Tensor& x) const;    // [in] -> [out]
  Tensor apply_rows(const Tensor& x) const;   // [N,in] -> [N,out]
  void collect(const std::string& prefix, ParamList& out) const;
  std::int64_t param_count() const { return W.numel() + b.numel(); }
};

// ---- LSTM -------------------------------------------------------------------

struct LstmParams {
  Tensor W_i, W_f, W_o, W_c;  // [H, D] input-to-gate
  Tensor U_i, U_f, U_o, U_c;  // [H, H] hidden-to-gate
  Tensor b_i, b_f, b_o, b_c;  // [H]; forget bias starts at 1

  static LstmParams init(int input_dim, int hidden, Rng& rng);
  int hidden() const { return W_i.dim(0); }
  int input_dim() const { return W_i.dim(1); }
  void collect(const std::string& prefix, ParamList& out) const;
  std::int64_t param_count() const;
};

// 4*(H*D + H^2 + H)
std::int64_t lstm_param_count(int input_dim, int hidden);

struct LstmState {
  Tensor h;  // [H]
  Tensor c;  // [H]
  static LstmState zeros(int hidden);
};

// i = sig(W_i x + U_i h + b_i), f/o likewise, cand = tanh(W_c x + U_c h + b_c),
// c' = f.c + i.cand, h' = o.tanh(c').
LstmState lstm_cell_step(const LstmParams& p, const Tensor& x, const LstmState& state);

enum class LstmVariant { kPlain, kBi, kAttention, kStacked };

const char* lstm_variant_name(LstmVariant v);
LstmVariant parse_lstm_variant(const std::string& s);

// A whole-sequence reducer: [T,D] in, fixed-size feature out.
//   plain     -> final hidden, F = H
//   bi        -> concat(forward final, backward final), F = 2H
//   attention -> additive attention over hidden states, F = H
//   stacked   -> two layers, second consumes the first's hidden sequence, F = H
struct SequenceLstm {
  LstmVariant variant = LstmVariant::kPlain;
  LstmParams first;                  // plain/attention; bi forward; stacked layer 1
  std::optional<LstmParams> second;  // bi backward; stacked layer 2
  Tensor attn_W;                     // [H,H], attention only
  Tensor attn_v;                     // [H], attention only

  static SequenceLstm init(LstmVariant variant, int input_dim, int hidden, Rng& rng);
  // attn_out, when given, receives the softmax weights (attention variant only).
  Tensor forward(const Tensor& seq, std::vector<double>* attn_out = nullptr) const;
  int output_dim() const;
  void collect(const std::string& prefix, ParamList& out) const;
  std::int64_t param_count() const;
};

// ---- graph ops ----------------------------------------------------------------

// A_hat [V,V] * X [V,C_in] * W [C_in,C_out]; activation is the caller's business.
Tensor graph_convolution(const Tensor& a_hat, const Tensor& x, const Tensor& w);

// Per-node temporal convolution with same padding; X [T,V,C_in],
// kernel [C_out,C_in,k], k odd -> [T,V,C_out].
Tensor temporal_convolution(const Tensor& x, const Tensor& kernel);

// ---- ConvLSTM over graph nodes ---------------------------------------------------

// LSTM gates per node, with input and hidden both spatially mixed through the
// normalized adjacency before their linear transforms: gate pre-activation is
// (A_hat X) W + (A_hat H) U + b.
struct ConvLstmParams {
  Tensor W_i, W_f, W_o, W_c;  // [C, H]
  Tensor U_i, U_f, U_o, U_c;  // [H, H]
  Tensor b_i, b_f, b_o, b_c;  // [H]

  static ConvLstmParams init(int in_channels, int hidden, Rng& rng);
  int hidden() const { return W_i.dim(1); }
  int in_channels() const { return W_i.dim(0); }
  void collect(const std::string& prefix, ParamList& out) const;
  std::int64_t param_count() const;
};

struct ConvLstmState {
  Tensor h;  // [V, H]
  Tensor c;  // [V, H]
  static ConvLstmState zeros(int num_nodes, int hidden);
};

ConvLstmState convlstm_cell_step(const ConvLstmParams& p, const Tensor& a_hat,
                                 const Tensor& x, const ConvLstmState& state);

}  // namespace painlarks
