#pragma once

// The three pain classifiers.
//
//   stgcn       three spatio-temporal graph blocks over a landmark clip,
//               global average pool, linear head
//   stgcn_lstm  same blocks, per-frame spatial pool, two-layer stacked LSTM,
//               linear head
//   hybrid      per-frame feature vectors (from a toy ConvNeXt backbone or
//               precomputed) fused as a sequence into an LSTM variant, then a
//               linear head
//
// All heads emit num_classes (= 2) logits.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "painlarks/graph.hpp"
#include "painlarks/layers.hpp"

namespace painlarks {

// ---- STGCN block --------------------------------------------------------------

struct StgcnBlockConfig {
  int c_in = 2;
  int c_out = 32;
  int temporal_kernel = 9;  // odd
  bool use_gate = true;
};

// One spatio-temporal unit: per-frame graph convolution + GELU, per-node
// temporal convolution, a graph ConvLSTM over the frame axis, a sigmoid gate
// computed from the temporal-conv stream and multiplied into the ConvLSTM
// stream, concatenation with a 1x1-projected residual of the block input, a
// 1x1 projection back to c_out, and layer normalization over channels.
struct StgcnBlock {
  StgcnBlockConfig cfg;
  Tensor W_gcn;            // [c_in, c_out]
  Tensor K_tc;             // [c_out, c_out, k]
  ConvLstmParams convlstm; // c_out -> c_out
  std::optional<Linear> gate;  // c_out -> c_out, present iff use_gate
  Linear residual;         // c_in -> c_out
  Linear proj;             // 2*c_out -> c_out
  Tensor ln_gamma, ln_beta;

  static StgcnBlock init(const StgcnBlockConfig& cfg, Rng& rng);
  Tensor forward(const FacialGraph& graph, const Tensor& x) const;  // [T,V,c_in] -> [T,V,c_out]
  void collect(const std::string& prefix, ParamList& out) const;
  std::int64_t param_count() const;
};

// ---- ConvNeXt ----------------------------------------------------------------

struct ConvNextConfig {
  std::array<int, 4> stage_channels{96, 192, 384, 768};
  std::array<int, 4> stage_blocks{3, 3, 9, 3};
  int image_size = 224;  // divisible by 32
  int expansion = 4;
};

// Depthwise 7x7 (pad 3) -> layer norm over channels -> 1x1 expand -> GELU ->
// 1x1 contract -> residual add.
struct ConvNextBlock {
  Tensor K_dw;  // [C,1,7,7]
  Tensor ln_gamma, ln_beta;
  Linear pw1;   // C -> expansion*C
  Linear pw2;   // expansion*C -> C

  static ConvNextBlock init(int channels, int expansion, Rng& rng);
  Tensor forward(const Tensor& x) const;  // [C,H,W] -> [C,H,W]
  void collect(const std::string& prefix, ParamList& out) const;
  std::int64_t param_count() const;
};

struct ConvNextStageTrace {
  std::vector<std::array<int, 3>> stage_shapes;  // [C,H,W] after each stage
  int blocks_executed = 0;
};

// 4x4 stride-4 patchify stem + LN, four block stages, LN + 2x2 stride-2
// downsampling between stages, global average pool at the end.
struct ConvNextBackbone {
  ConvNextConfig cfg;
  Tensor K_stem;  // [C0,3,4,4]
  Tensor stem_ln_gamma, stem_ln_beta;
  std::vector<std::vector<ConvNextBlock>> stages;
  struct Downsample {
    Tensor ln_gamma, ln_beta;
    Tensor K;  // [C_next,C_prev,2,2]
  };
  std::vector<Downsample> downsamples;  // 3 of them

  static ConvNextBackbone init(const ConvNextConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& image, ConvNextStageTrace* trace = nullptr) const;
  void collect(const std::string& prefix, ParamList& out) const;
  std::int64_t param_count() const;
};

// ---- composed models ------------------------------------------------------------

enum class ModelKind { kStgcn, kStgcnLstm, kHybrid };
enum class BackboneKind { kToyConvNext, kPrecomputedFeatures };

const char* model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);
const char* backbone_kind_name(BackboneKind k);
BackboneKind parse_backbone_kind(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::kStgcnLstm;
  std::vector<int> stgcn_channels = {32, 64, 64};  // block widths; input is 2
  int temporal_kernel = 9;
  bool use_gate = true;
  int lstm_hidden = 64;
  LstmVariant lstm_variant = LstmVariant::kPlain;  // hybrid sequence model
  int num_classes = 2;
  BackboneKind backbone = BackboneKind::kPrecomputedFeatures;
  ConvNextConfig convnext;
  int feature_dim = 0;  // hybrid precomputed input width; resolved from data

  std::vector<StgcnBlockConfig> stgcn_blocks() const;
  void validate() const;
};

class Model {
 public:
  static Model build(const ModelConfig& cfg, std::shared_ptr<const FacialGraph> graph,
                     std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const FacialGraph& graph() const { return *graph_; }

  Tensor forward_landmarks(const Tensor& clip) const;              // [T,68,2] -> [2]
  Tensor forward_features(const Tensor& seq) const;                // [T,D] -> [2]
  Tensor forward_images(const std::vector<Tensor>& frames) const;  // hybrid + toy backbone

  const ParamList& parameters() const { return params_; }
  ParamList& parameters() { return params_; }
  std::int64_t param_count() const { return total_params(params_); }

  // Deep copies of all parameter values (for best-epoch snapshots).
  std::vector<Tensor> snapshot_params() const;
  void restore_params(const std::vector<Tensor>& snapshot);

  void save_checkpoint(const std::string& dir) const;
  static Model load_checkpoint(const std::string& dir);

  const std::vector<StgcnBlock>& blocks() const { return blocks_; }
  const SequenceLstm* sequence_lstm() const {
    return seq_lstm_.has_value() ? &*seq_lstm_ : nullptr;
  }
  const ConvNextBackbone* convnext_backbone() const {
    return backbone_.has_value() ? &*backbone_ : nullptr;
  }

 private:
  ModelConfig cfg_;
  std::shared_ptr<const FacialGraph> graph_;
  std::vector<StgcnBlock> blocks_;
  std::optional<SequenceLstm> seq_lstm_;
  std::optional<ConvNextBackbone> backbone_;
  Linear head_;
  ParamList params_;

  void rebuild_param_list();
};

}  // namespace painlarks
