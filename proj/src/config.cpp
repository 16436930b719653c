#include "painlarks/config.hpp"

#include <fstream>
#include <sstream>

namespace painlarks {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not an unsigned integer");
  }
}

}  // namespace

RunConfig RunConfig::from_string(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" +
                        line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!cfg.explicit_keys.insert(key).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }

    if (key == "kind") cfg.model.kind = parse_model_kind(value);
    else if (key == "stgcn_channels") cfg.model.stgcn_channels = to_int_list(key, value);
    else if (key == "temporal_kernel") cfg.model.temporal_kernel = to_int(key, value);
    else if (key == "use_gate") cfg.model.use_gate = to_bool(key, value);
    else if (key == "lstm_hidden") cfg.model.lstm_hidden = to_int(key, value);
    else if (key == "lstm_variant") cfg.model.lstm_variant = parse_lstm_variant(value);
    else if (key == "num_classes") cfg.model.num_classes = to_int(key, value);
    else if (key == "backbone") cfg.model.backbone = parse_backbone_kind(value);
    else if (key == "stage_channels") {
      const auto v = to_int_list(key, value);
      if (v.size() != 4) throw ConfigError("stage_channels needs exactly 4 entries");
      for (int i = 0; i < 4; ++i) cfg.model.convnext.stage_channels[static_cast<size_t>(i)] = v[static_cast<size_t>(i)];
    } else if (key == "stage_blocks") {
      const auto v = to_int_list(key, value);
      if (v.size() != 4) throw ConfigError("stage_blocks needs exactly 4 entries");
      for (int i = 0; i < 4; ++i) cfg.model.convnext.stage_blocks[static_cast<size_t>(i)] = v[static_cast<size_t>(i)];
    } else if (key == "image_size") cfg.model.convnext.image_size = to_int(key, value);
    else if (key == "expansion") cfg.model.convnext.expansion = to_int(key, value);
    else if (key == "feature_dim") cfg.model.feature_dim = to_int(key, value);
    else if (key == "lr0") cfg.opt.lr0 = to_double(key, value);
    else if (key == "beta1") cfg.opt.beta1 = to_double(key, value);
    else if (key == "beta2") cfg.opt.beta2 = to_double(key, value);
    else if (key == "adam_eps") cfg.opt.eps = to_double(key, value);
    else if (key == "decay_rate") cfg.opt.decay_rate = to_double(key, value);
    else if (key == "decay_steps") cfg.opt.decay_steps = to_int(key, value);
    else if (key == "epochs") cfg.opt.epochs = to_int(key, value);
    else if (key == "batch_size") cfg.batch_size = to_int(key, value);
    else if (key == "use_smote") {
      if (value != "auto" && value != "on" && value != "off") {
        throw ConfigError("use_smote must be auto, on, or off");
      }
      cfg.use_smote = value;
    } else if (key == "k") cfg.kfolds = to_int(key, value);
    else if (key == "parallel_folds") cfg.parallel_folds = to_bool(key, value);
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "data") cfg.data_path = value;
    else if (key == "edges_file") cfg.edges_file = value;
    else if (key == "extra_edges") cfg.extra_edges = value;
    else if (key == "outdir") cfg.outdir = value;
    else if (key == "strict_frames") cfg.strict_frames = to_bool(key, value);
    else if (key == "augment_crop_area") cfg.augment_crop_area = to_double(key, value);
    else if (key == "augment_max_rotation_deg") cfg.augment_max_rotation_deg = to_double(key, value);
    else {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown config key '" + key +
                        "'");
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_string(buf.str(), path);
}

int RunConfig::resolved_batch_size() const {
  if (batch_size > 0) return batch_size;
  if (batch_size < 0) throw ConfigError("batch_size must be positive (or 0 for auto)");
  return model.kind == ModelKind::kHybrid ? 8 : 10;
}

bool RunConfig::resolved_use_smote() const {
  if (use_smote == "on") return true;
  if (use_smote == "off") return false;
  return model.kind != ModelKind::kHybrid;
}

OptimizerConfig RunConfig::resolved_optimizer() const {
  OptimizerConfig o = opt;
  o.batch_size = resolved_batch_size();
  return o;
}

std::shared_ptr<const FacialGraph> RunConfig::build_graph() const {
  EdgeList edges =
      edges_file.empty() ? canonical_facial_edges() : load_edge_list(edges_file);
  if (!extra_edges.empty()) {
    const EdgeList extra = load_edge_list(extra_edges);
    edges.insert(edges.end(), extra.begin(), extra.end());
  }
  return std::make_shared<FacialGraph>(build_facial_graph(kNumLandmarks, std::move(edges)));
}

}  // namespace painlarks
