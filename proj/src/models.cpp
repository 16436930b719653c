#include "painlarks/models.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace painlarks {

namespace fs = std::filesystem;

// ---- StgcnBlock ---------------------------------------------------------------

StgcnBlock StgcnBlock::init(const StgcnBlockConfig& cfg, Rng& rng) {
  if (cfg.c_in < 1 || cfg.c_out < 1) throw ConfigError("stgcn block: widths must be >= 1");
  if (cfg.temporal_kernel % 2 == 0) {
    throw ConfigError("stgcn block: temporal kernel must be odd, got " +
                      std::to_string(cfg.temporal_kernel));
  }
  StgcnBlock b;
  b.cfg = cfg;
  b.W_gcn = init_weight({cfg.c_in, cfg.c_out}, cfg.c_in, rng);
  b.K_tc = init_weight({cfg.c_out, cfg.c_out, cfg.temporal_kernel},
                       cfg.c_out * cfg.temporal_kernel, rng);
  b.convlstm = ConvLstmParams::init(cfg.c_out, cfg.c_out, rng);
  if (cfg.use_gate) b.gate = Linear::init(cfg.c_out, cfg.c_out, rng);
  b.residual = Linear::init(cfg.c_in, cfg.c_out, rng);
  b.proj = Linear::init(2 * cfg.c_out, cfg.c_out, rng);
  b.ln_gamma = Tensor::full({cfg.c_out}, 1.0, true);
  b.ln_beta = Tensor::zeros({cfg.c_out}, true);
  return b;
}

Tensor StgcnBlock::forward(const FacialGraph& graph, const Tensor& x) const {
  if (x.ndim() != 3 || x.dim(2) != cfg.c_in) {
    throw ShapeError("stgcn block: input " + shape_str(x.shape()) + " for c_in " +
                     std::to_string(cfg.c_in));
  }
  if (x.dim(1) != graph.num_nodes) {
    throw ShapeError("stgcn block: clip has " + std::to_string(x.dim(1)) +
                     " nodes but graph has " + std::to_string(graph.num_nodes));
  }
  const int t_len = x.dim(0), v = x.dim(1), c = cfg.c_out;
  const Tensor& a_hat = graph.adjacency_norm;

  std::vector<Tensor> frames;
  frames.reserve(static_cast<size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    frames.push_back(gelu(graph_convolution(a_hat, slice_axis0(x, t), W_gcn)));
  }
  Tensor y = temporal_convolution(stack_axis0(frames), K_tc);  // [T,V,c]

  ConvLstmState st = ConvLstmState::zeros(v, c);
  std::vector<Tensor> hidden;
  hidden.reserve(static_cast<size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    st = convlstm_cell_step(convlstm, a_hat, slice_axis0(y, t), st);
    hidden.push_back(st.h);
  }
  Tensor z = reshape(stack_axis0(hidden), {t_len * v, c});

  if (cfg.use_gate) {
    Tensor g = sigmoid(gate->apply_rows(reshape(y, {t_len * v, c})));
    z = mul(g, z);
  }
  Tensor r = residual.apply_rows(reshape(x, {t_len * v, cfg.c_in}));
  Tensor out = proj.apply_rows(concat_last(z, r));
  out = layer_norm(out, ln_gamma, ln_beta);
  return reshape(out, {t_len, v, c});
}

void StgcnBlock::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gcn.W", W_gcn});
  out.push_back({prefix + ".tc.K", K_tc});
  convlstm.collect(prefix + ".convlstm", out);
  if (gate.has_value()) gate->collect(prefix + ".gate", out);
  residual.collect(prefix + ".residual", out);
  proj.collect(prefix + ".proj", out);
  out.push_back({prefix + ".ln.gamma", ln_gamma});
  out.push_back({prefix + ".ln.beta", ln_beta});
}

std::int64_t StgcnBlock::param_count() const {
  std::int64_t n = W_gcn.numel() + K_tc.numel() + convlstm.param_count() +
                   residual.param_count() + proj.param_count() + ln_gamma.numel() +
                   ln_beta.numel();
  if (gate.has_value()) n += gate->param_count();
  return n;
}

// ---- ConvNeXt -----------------------------------------------------------------

ConvNextBlock ConvNextBlock::init(int channels, int expansion, Rng& rng) {
  ConvNextBlock b;
  b.K_dw = init_weight({channels, 1, 7, 7}, 49, rng);
  b.ln_gamma = Tensor::full({channels}, 1.0, true);
  b.ln_beta = Tensor::zeros({channels}, true);
  b.pw1 = Linear::init(channels, expansion * channels, rng);
  b.pw2 = Linear::init(expansion * channels, channels, rng);
  return b;
}

Tensor ConvNextBlock::forward(const Tensor& x) const {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y = conv2d(x, K_dw, /*stride=*/1, /*pad=*/3, /*groups=*/c);
  Tensor rows = transpose2d(reshape(y, {c, h * w}));  // [HW, C]
  rows = layer_norm(rows, ln_gamma, ln_beta);
  rows = pw2.apply_rows(gelu(pw1.apply_rows(rows)));
  y = reshape(transpose2d(rows), {c, h, w});
  return add(x, y);
}

void ConvNextBlock::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".dw.K", K_dw});
  out.push_back({prefix + ".ln.gamma", ln_gamma});
  out.push_back({prefix + ".ln.beta", ln_beta});
  pw1.collect(prefix + ".pw1", out);
  pw2.collect(prefix + ".pw2", out);
}

std::int64_t ConvNextBlock::param_count() const {
  return K_dw.numel() + ln_gamma.numel() + ln_beta.numel() + pw1.param_count() +
         pw2.param_count();
}

ConvNextBackbone ConvNextBackbone::init(const ConvNextConfig& cfg, Rng& rng) {
  if (cfg.image_size % 32 != 0 || cfg.image_size < 32) {
    throw ConfigError("convnext: image_size must be a positive multiple of 32, got " +
                      std::to_string(cfg.image_size));
  }
  if (cfg.expansion < 1) throw ConfigError("convnext: expansion must be >= 1");
  for (int c : cfg.stage_channels) {
    if (c < 1) throw ConfigError("convnext: stage channels must be >= 1");
  }
  for (int n : cfg.stage_blocks) {
    if (n < 1) throw ConfigError("convnext: stage block counts must be >= 1");
  }
  ConvNextBackbone b;
  b.cfg = cfg;
  b.K_stem = init_weight({cfg.stage_channels[0], 3, 4, 4}, 3 * 16, rng);
  b.stem_ln_gamma = Tensor::full({cfg.stage_channels[0]}, 1.0, true);
  b.stem_ln_beta = Tensor::zeros({cfg.stage_channels[0]}, true);
  for (int s = 0; s < 4; ++s) {
    std::vector<ConvNextBlock> blocks;
    for (int i = 0; i < cfg.stage_blocks[static_cast<size_t>(s)]; ++i) {
      blocks.push_back(ConvNextBlock::init(cfg.stage_channels[static_cast<size_t>(s)],
                                           cfg.expansion, rng));
    }
    b.stages.push_back(std::move(blocks));
    if (s < 3) {
      Downsample d;
      const int ci = cfg.stage_channels[static_cast<size_t>(s)];
      const int co = cfg.stage_channels[static_cast<size_t>(s) + 1];
      d.ln_gamma = Tensor::full({ci}, 1.0, true);
      d.ln_beta = Tensor::zeros({ci}, true);
      d.K = init_weight({co, ci, 2, 2}, ci * 4, rng);
      b.downsamples.push_back(std::move(d));
    }
  }
  return b;
}

namespace {

// layer norm over channels for a [C,H,W] map
Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor rows = layer_norm(transpose2d(reshape(x, {c, h * w})), gamma, beta);
  return reshape(transpose2d(rows), {c, h, w});
}

}  // namespace

Tensor ConvNextBackbone::forward(const Tensor& image, ConvNextStageTrace* trace) const {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != cfg.image_size ||
      image.dim(2) != cfg.image_size) {
    throw ShapeError("convnext: image " + shape_str(image.shape()) + " but configured for [3," +
                     std::to_string(cfg.image_size) + "," + std::to_string(cfg.image_size) + "]");
  }
  Tensor x = conv2d(image, K_stem, /*stride=*/4, /*pad=*/0);
  x = channel_norm(x, stem_ln_gamma, stem_ln_beta);
  if (trace != nullptr) trace->blocks_executed = 0;
  for (size_t s = 0; s < stages.size(); ++s) {
    for (const ConvNextBlock& block : stages[s]) {
      x = block.forward(x);
      if (trace != nullptr) ++trace->blocks_executed;
    }
    if (trace != nullptr) trace->stage_shapes.push_back({x.dim(0), x.dim(1), x.dim(2)});
    if (s + 1 < stages.size()) {
      const Downsample& d = downsamples[s];
      x = channel_norm(x, d.ln_gamma, d.ln_beta);
      x = conv2d(x, d.K, /*stride=*/2, /*pad=*/0);
    }
  }
  const int c = x.dim(0);
  return mean_axis(reshape(x, {c, x.dim(1) * x.dim(2)}), 1);  // [C4]
}

void ConvNextBackbone::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".stem.K", K_stem});
  out.push_back({prefix + ".stem.ln.gamma", stem_ln_gamma});
  out.push_back({prefix + ".stem.ln.beta", stem_ln_beta});
  for (size_t s = 0; s < stages.size(); ++s) {
    for (size_t i = 0; i < stages[s].size(); ++i) {
      stages[s][i].collect(prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(i),
                           out);
    }
    if (s < downsamples.size()) {
      const std::string dp = prefix + ".down" + std::to_string(s);
      out.push_back({dp + ".ln.gamma", downsamples[s].ln_gamma});
      out.push_back({dp + ".ln.beta", downsamples[s].ln_beta});
      out.push_back({dp + ".K", downsamples[s].K});
    }
  }
}

std::int64_t ConvNextBackbone::param_count() const {
  std::int64_t n = K_stem.numel() + stem_ln_gamma.numel() + stem_ln_beta.numel();
  for (const auto& stage : stages) {
    for (const auto& b : stage) n += b.param_count();
  }
  for (const auto& d : downsamples) n += d.ln_gamma.numel() + d.ln_beta.numel() + d.K.numel();
  return n;
}

// ---- ModelConfig ----------------------------------------------------------------

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kStgcn: return "stgcn";
    case ModelKind::kStgcnLstm: return "stgcn_lstm";
    case ModelKind::kHybrid: return "hybrid";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "stgcn") return ModelKind::kStgcn;
  if (s == "stgcn_lstm" || s == "stgcn-lstm") return ModelKind::kStgcnLstm;
  if (s == "hybrid") return ModelKind::kHybrid;
  throw ConfigError("unknown model kind '" + s + "' (stgcn|stgcn_lstm|hybrid)");
}

const char* backbone_kind_name(BackboneKind k) {
  return k == BackboneKind::kToyConvNext ? "toy_convnext" : "precomputed_features";
}

BackboneKind parse_backbone_kind(const std::string& s) {
  if (s == "toy_convnext") return BackboneKind::kToyConvNext;
  if (s == "precomputed_features") return BackboneKind::kPrecomputedFeatures;
  throw ConfigError("unknown backbone '" + s + "' (toy_convnext|precomputed_features)");
}

std::vector<StgcnBlockConfig> ModelConfig::stgcn_blocks() const {
  std::vector<StgcnBlockConfig> blocks;
  int c_in = 2;  // landmark (x, y)
  for (int c_out : stgcn_channels) {
    blocks.push_back({c_in, c_out, temporal_kernel, use_gate});
    c_in = c_out;
  }
  return blocks;
}

void ModelConfig::validate() const {
  if (num_classes != 2) {
    throw ConfigError("num_classes must be 2 for binary pain classification, got " +
                      std::to_string(num_classes));
  }
  if (kind != ModelKind::kHybrid) {
    if (stgcn_channels.empty()) throw ConfigError("stgcn_channels must not be empty");
    for (int c : stgcn_channels) {
      if (c < 1) throw ConfigError("stgcn_channels entries must be >= 1");
    }
    if (temporal_kernel < 1 || temporal_kernel % 2 == 0) {
      throw ConfigError("temporal_kernel must be a positive odd number, got " +
                        std::to_string(temporal_kernel));
    }
  }
  if (lstm_hidden < 1) throw ConfigError("lstm_hidden must be >= 1");
}

// ---- Model -------------------------------------------------------------------------

Model Model::build(const ModelConfig& cfg, std::shared_ptr<const FacialGraph> graph,
                   std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  Rng rng(seed);
  switch (cfg.kind) {
    case ModelKind::kStgcn:
    case ModelKind::kStgcnLstm: {
      if (graph == nullptr) throw ConfigError("stgcn models need a facial graph");
      m.graph_ = std::move(graph);
      int c_last = 0;
      for (const StgcnBlockConfig& bc : cfg.stgcn_blocks()) {
        m.blocks_.push_back(StgcnBlock::init(bc, rng));
        c_last = bc.c_out;
      }
      if (cfg.kind == ModelKind::kStgcnLstm) {
        // two stacked layers over the pooled frame sequence
        m.seq_lstm_ = SequenceLstm::init(LstmVariant::kStacked, c_last, cfg.lstm_hidden, rng);
        m.head_ = Linear::init(cfg.lstm_hidden, cfg.num_classes, rng);
      } else {
        m.head_ = Linear::init(c_last, cfg.num_classes, rng);
      }
      break;
    }
    case ModelKind::kHybrid: {
      int feat = cfg.feature_dim;
      if (cfg.backbone == BackboneKind::kToyConvNext) {
        m.backbone_ = ConvNextBackbone::init(cfg.convnext, rng);
        feat = cfg.convnext.stage_channels[3];
        m.cfg_.feature_dim = feat;
      } else if (feat < 1) {
        throw ConfigError("hybrid model with precomputed features needs feature_dim >= 1");
      }
      m.seq_lstm_ = SequenceLstm::init(cfg.lstm_variant, feat, cfg.lstm_hidden, rng);
      m.head_ = Linear::init(m.seq_lstm_->output_dim(), cfg.num_classes, rng);
      break;
    }
  }
  m.rebuild_param_list();
  return m;
}

void Model::rebuild_param_list() {
  params_.clear();
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect("block" + std::to_string(i), params_);
  }
  if (backbone_.has_value()) backbone_->collect("backbone", params_);
  if (seq_lstm_.has_value()) seq_lstm_->collect("lstm", params_);
  head_.collect("head", params_);
}

Tensor Model::forward_landmarks(const Tensor& clip) const {
  if (cfg_.kind == ModelKind::kHybrid) {
    throw ConfigError("hybrid model does not take landmark clips; use feature input");
  }
  if (clip.ndim() != 3 || clip.dim(2) != 2) {
    throw ShapeError("landmark clip must be [T,V,2], got " + shape_str(clip.shape()));
  }
  Tensor x = clip;
  for (const StgcnBlock& b : blocks_) x = b.forward(*graph_, x);
  if (cfg_.kind == ModelKind::kStgcn) {
    Tensor pooled = mean_axis(mean_axis(x, 0), 0);  // over T then V
    return head_.apply_vec(pooled);
  }
  Tensor frames = mean_axis(x, 1);  // [T,C]
  return head_.apply_vec(seq_lstm_->forward(frames));
}

Tensor Model::forward_features(const Tensor& seq) const {
  if (cfg_.kind != ModelKind::kHybrid) {
    throw ConfigError(std::string(model_kind_name(cfg_.kind)) + " model does not take feature clips");
  }
  return head_.apply_vec(seq_lstm_->forward(seq));
}

Tensor Model::forward_images(const std::vector<Tensor>& frames) const {
  if (cfg_.kind != ModelKind::kHybrid || !backbone_.has_value()) {
    throw ConfigError("image input needs a hybrid model with the toy_convnext backbone");
  }
  std::vector<Tensor> feats;
  feats.reserve(frames.size());
  for (const Tensor& f : frames) feats.push_back(backbone_->forward(f));
  return head_.apply_vec(seq_lstm_->forward(stack_axis0(feats)));
}

std::vector<Tensor> Model::snapshot_params() const {
  std::vector<Tensor> snap;
  snap.reserve(params_.size());
  for (const auto& p : params_) snap.push_back(p.tensor.clone());
  return snap;
}

void Model::restore_params(const std::vector<Tensor>& snapshot) {
  if (snapshot.size() != params_.size()) {
    throw Error("restore_params: snapshot has " + std::to_string(snapshot.size()) +
                " tensors, model has " + std::to_string(params_.size()));
  }
  for (size_t i = 0; i < params_.size(); ++i) params_[i].tensor.copy_data_from(snapshot[i]);
}

// ---- checkpoints -----------------------------------------------------------------

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

void Model::save_checkpoint(const std::string& dir) const {
  fs::create_directories(fs::path(dir) / "params");
  std::ofstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw DataError("cannot write checkpoint manifest in " + dir);
  mf << "kind=" << model_kind_name(cfg_.kind) << "\n";
  mf << "stgcn_channels=" << join_ints(cfg_.stgcn_channels) << "\n";
  mf << "temporal_kernel=" << cfg_.temporal_kernel << "\n";
  mf << "use_gate=" << (cfg_.use_gate ? "true" : "false") << "\n";
  mf << "lstm_hidden=" << cfg_.lstm_hidden << "\n";
  mf << "lstm_variant=" << lstm_variant_name(cfg_.lstm_variant) << "\n";
  mf << "num_classes=" << cfg_.num_classes << "\n";
  mf << "backbone=" << backbone_kind_name(cfg_.backbone) << "\n";
  mf << "stage_channels=" << cfg_.convnext.stage_channels[0] << ","
     << cfg_.convnext.stage_channels[1] << "," << cfg_.convnext.stage_channels[2] << ","
     << cfg_.convnext.stage_channels[3] << "\n";
  mf << "stage_blocks=" << cfg_.convnext.stage_blocks[0] << "," << cfg_.convnext.stage_blocks[1]
     << "," << cfg_.convnext.stage_blocks[2] << "," << cfg_.convnext.stage_blocks[3] << "\n";
  mf << "image_size=" << cfg_.convnext.image_size << "\n";
  mf << "expansion=" << cfg_.convnext.expansion << "\n";
  mf << "feature_dim=" << cfg_.feature_dim << "\n";
  if (graph_ != nullptr) {
    mf << "graph_nodes=" << graph_->num_nodes << "\n";
    std::ofstream ef(fs::path(dir) / "edges.txt");
    for (const auto& [i, j] : graph_->edges) ef << i << " " << j << "\n";
  }
  for (const auto& p : params_) {
    write_tensor_file((fs::path(dir) / "params" / (p.name + ".txt")).string(), p.tensor);
  }
}

Model Model::load_checkpoint(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw DataError("cannot read checkpoint manifest in " + dir);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(mf, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig cfg;
  cfg.kind = parse_model_kind(kv.at("kind"));
  cfg.stgcn_channels = split_ints(kv.at("stgcn_channels"));
  cfg.temporal_kernel = std::stoi(kv.at("temporal_kernel"));
  cfg.use_gate = kv.at("use_gate") == "true";
  cfg.lstm_hidden = std::stoi(kv.at("lstm_hidden"));
  cfg.lstm_variant = parse_lstm_variant(kv.at("lstm_variant"));
  cfg.num_classes = std::stoi(kv.at("num_classes"));
  cfg.backbone = parse_backbone_kind(kv.at("backbone"));
  auto sc = split_ints(kv.at("stage_channels"));
  auto sb = split_ints(kv.at("stage_blocks"));
  for (int i = 0; i < 4; ++i) {
    cfg.convnext.stage_channels[static_cast<size_t>(i)] = sc[static_cast<size_t>(i)];
    cfg.convnext.stage_blocks[static_cast<size_t>(i)] = sb[static_cast<size_t>(i)];
  }
  cfg.convnext.image_size = std::stoi(kv.at("image_size"));
  cfg.convnext.expansion = std::stoi(kv.at("expansion"));
  cfg.feature_dim = std::stoi(kv.at("feature_dim"));

  std::shared_ptr<const FacialGraph> graph;
  if (cfg.kind != ModelKind::kHybrid) {
    const fs::path edges_path = fs::path(dir) / "edges.txt";
    if (fs::exists(edges_path)) {
      const int nodes = kv.count("graph_nodes") != 0 ? std::stoi(kv.at("graph_nodes")) : 68;
      graph = std::make_shared<FacialGraph>(
          build_facial_graph(nodes, load_edge_list(edges_path.string())));
    } else {
      graph = std::make_shared<FacialGraph>(build_facial_adjacency());
    }
  }
  Model m = build(cfg, graph, /*seed=*/0);
  for (auto& p : m.params_) {
    const fs::path path = fs::path(dir) / "params" / (p.name + ".txt");
    if (!fs::exists(path)) throw DataError("checkpoint missing parameter " + p.name);
    Tensor stored = read_tensor_file(path.string());
    if (stored.shape() != p.tensor.shape()) {
      throw DataError("checkpoint parameter " + p.name + " has shape " +
                      shape_str(stored.shape()) + ", expected " + shape_str(p.tensor.shape()));
    }
    p.tensor.copy_data_from(stored);
  }
  return m;
}

}  // namespace painlarks
