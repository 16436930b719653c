#pragma once

// Dataset ingestion and preparation.
//
// Landmark CSV schema (one row per frame):
//   clip_id,frame_idx,label,x0,y0,x1,y1,...,x67,y67
// Feature-clip files are blocks of
//   FEATCLIP v1 <clip_id> <label> <T> <D>
// followed by T lines of D space-separated floats.
//
// Loading a landmark CSV normalizes each clip to zero mean and unit RMS
// radius (jointly over all frames), so raw pixel coordinates may be fed in at
// any translation or scale.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "painlarks/tensor.hpp"

namespace painlarks {

inline constexpr int kClipFrames = 20;
inline constexpr int kNumLandmarks = 68;

struct LandmarkClip {
  std::string clip_id;
  Tensor frames;  // [20,68,2]
  int label = 0;  // 0 no-pain, 1 pain
};

struct FeatureClip {
  std::string clip_id;
  Tensor features;  // [T,D]
  int label = 0;
};

enum class DatasetKind { kLandmark, kFeature };

struct Dataset {
  DatasetKind kind = DatasetKind::kLandmark;
  std::vector<LandmarkClip> landmark_clips;
  std::vector<FeatureClip> feature_clips;

  std::size_t size() const {
    return kind == DatasetKind::kLandmark ? landmark_clips.size() : feature_clips.size();
  }
  int label(std::size_t i) const {
    return kind == DatasetKind::kLandmark ? landmark_clips[i].label : feature_clips[i].label;
  }
  const std::string& clip_id(std::size_t i) const {
    return kind == DatasetKind::kLandmark ? landmark_clips[i].clip_id
                                          : feature_clips[i].clip_id;
  }
  std::array<int, 2> class_counts() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

// ---- landmark CSV -------------------------------------------------------------

// Clips with missing frames are dropped with a warning; malformed rows,
// duplicate (clip_id, frame_idx) pairs, and inconsistent labels are hard
// errors carrying the line number.
Dataset load_landmark_csv(const std::string& path,
                          std::vector<std::string>* warnings = nullptr);
void write_landmark_csv(const std::string& path, const Dataset& ds);

// Zero mean, unit RMS radius, per clip over all frames jointly.
void normalize_landmark_clip(Tensor& frames);
void normalize_dataset(Dataset& ds);

// ---- synthetic clips ------------------------------------------------------------

// Class 0: a neutral face template, static in time, plus coordinate noise.
// Class 1: the same template with a deformation that grows linearly over the
// 20 frames (brows lowered, mouth corners pulled, eyes narrowed), plus the
// same noise. Raw coordinates; normalize (or round-trip through a CSV) before
// training.
Dataset generate_synthetic(int n_per_class, std::uint64_t seed, double noise = 0.8);

// ---- rebalancing and splits --------------------------------------------------------

// Balances classes by interpolating between minority samples and their k
// nearest minority neighbors (Euclidean on flattened clips). Majority samples
// and all labels pass through untouched.
Dataset smote_oversample(const Dataset& ds, int k, std::uint64_t seed);

struct DatasetSplit {
  Dataset train, val, test;
};

// Stratified 80/10/10; remainder goes to train.
DatasetSplit split_dataset(const Dataset& ds, std::uint64_t seed);

// Stratified train/val carve-out (used inside k-fold training).
std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, double val_fraction,
                                            std::uint64_t seed);

// Stratified k folds; every clip lands in exactly one test fold.
std::vector<std::pair<Dataset, Dataset>> kfold_partitions(const Dataset& ds, int k,
                                                          std::uint64_t seed);

// ---- image augmentation -------------------------------------------------------------

struct AugmentParams {
  double crop_area = 0.875;          // crop to this fraction of the area, resize back
  double max_rotation_deg = 15.0;    // rotation uniform in +-this, bilinear, zero fill
};

Tensor augment_image(const Tensor& image, const AugmentParams& params,
                     std::uint64_t seed);

// ---- feature clips ---------------------------------------------------------------------

Dataset load_feature_clips(const std::string& path, bool strict_frames = true,
                           std::vector<std::string>* warnings = nullptr);
void write_feature_clips(const std::string& path, const Dataset& ds);

// Flattens each frame's 68 (x,y) pairs into a 136-wide feature vector; the
// stand-in "extractor" for the precomputed-feature path.
Dataset features_from_landmarks(const Dataset& ds);

// Sniffs the format: .csv extension or csv header -> landmark CSV, FEATCLIP
// magic -> feature clips.
Dataset load_dataset(const std::string& path, bool strict_frames = true,
                     std::vector<std::string>* warnings = nullptr);

}  // namespace painlarks
