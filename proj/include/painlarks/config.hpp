#pragma once

// Flat key=value run configuration ('#' comments, one key per line). Unknown
// and duplicate keys are hard errors. Every key has a default except the data
// path.

#include <memory>
#include <set>
#include <string>

#include "painlarks/models.hpp"
#include "painlarks/training.hpp"

namespace painlarks {

struct RunConfig {
  ModelConfig model;
  OptimizerConfig opt;
  int batch_size = 0;  // 0 = auto: 8 for hybrid, 10 for the stgcn kinds

  std::string data_path;
  std::string edges_file;   // replaces the canonical facial edge set
  std::string extra_edges;  // appended to the edge set
  std::string outdir = "out";
  std::uint64_t seed = 0;
  std::string use_smote = "auto";  // auto|on|off; auto = on for stgcn kinds
  int kfolds = 5;
  bool parallel_folds = true;
  bool strict_frames = true;
  double augment_crop_area = 0.875;
  double augment_max_rotation_deg = 15.0;

  std::set<std::string> explicit_keys;  // keys actually present in the file

  static RunConfig from_string(const std::string& text, const std::string& origin);
  static RunConfig load(const std::string& path);

  int resolved_batch_size() const;
  bool resolved_use_smote() const;
  OptimizerConfig resolved_optimizer() const;
  std::shared_ptr<const FacialGraph> build_graph() const;
};

}  // namespace painlarks
