#include "painlarks/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "painlarks/random.hpp"

namespace painlarks {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string expected_csv_header() {
  std::string h = "clip_id,frame_idx,label";
  for (int i = 0; i < kNumLandmarks; ++i) {
    h += ",x" + std::to_string(i) + ",y" + std::to_string(i);
  }
  return h;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_coord(const std::string& s, long lineno) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) {
      throw DataError("bad coordinate '" + s + "'", lineno);
    }
    return v;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    throw DataError("bad coordinate '" + s + "'", lineno);
  }
}

}  // namespace

std::array<int, 2> Dataset::class_counts() const {
  std::array<int, 2> counts{0, 0};
  for (std::size_t i = 0; i < size(); ++i) ++counts[static_cast<size_t>(label(i))];
  return counts;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.kind = kind;
  for (std::size_t i : indices) {
    if (kind == DatasetKind::kLandmark) {
      out.landmark_clips.push_back(landmark_clips[i]);
    } else {
      out.feature_clips.push_back(feature_clips[i]);
    }
  }
  return out;
}

// ---- landmark CSV ----------------------------------------------------------------

void normalize_landmark_clip(Tensor& frames) {
  const std::int64_t points = frames.numel() / 2;
  double mx = 0, my = 0;
  for (std::int64_t p = 0; p < points; ++p) {
    mx += frames.data()[2 * p];
    my += frames.data()[2 * p + 1];
  }
  mx /= static_cast<double>(points);
  my /= static_cast<double>(points);
  double rms = 0;
  for (std::int64_t p = 0; p < points; ++p) {
    frames.data()[2 * p] -= mx;
    frames.data()[2 * p + 1] -= my;
    rms += frames.data()[2 * p] * frames.data()[2 * p] +
           frames.data()[2 * p + 1] * frames.data()[2 * p + 1];
  }
  rms = std::sqrt(rms / static_cast<double>(points));
  if (rms > 1e-12) {
    for (std::int64_t i = 0; i < frames.numel(); ++i) frames.data()[i] /= rms;
  }
}

void normalize_dataset(Dataset& ds) {
  if (ds.kind != DatasetKind::kLandmark) return;
  for (LandmarkClip& clip : ds.landmark_clips) normalize_landmark_clip(clip.frames);
}

Dataset load_landmark_csv(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_csv_header()) {
    throw DataError(path + ": bad header, expected '" + expected_csv_header() + "'", 1);
  }

  struct PendingClip {
    std::map<int, std::vector<double>> frames;  // frame_idx -> 136 coords
    int label = -1;
  };
  std::vector<std::string> order;
  std::map<std::string, PendingClip> pending;

  long lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_row(line);
    if (static_cast<int>(fields.size()) != 3 + 2 * kNumLandmarks) {
      throw DataError(path + ": expected " + std::to_string(3 + 2 * kNumLandmarks) +
                          " fields, got " + std::to_string(fields.size()),
                      lineno);
    }
    const std::string& clip_id = fields[0];
    if (clip_id.empty()) throw DataError(path + ": empty clip_id", lineno);
    int frame_idx, label;
    try {
      frame_idx = std::stoi(fields[1]);
      label = std::stoi(fields[2]);
    } catch (const std::exception&) {
      throw DataError(path + ": bad frame_idx/label", lineno);
    }
    if (frame_idx < 0) throw DataError(path + ": negative frame_idx", lineno);
    if (label != 0 && label != 1) {
      throw DataError(path + ": label must be 0 or 1, got " + fields[2], lineno);
    }
    auto it = pending.find(clip_id);
    if (it == pending.end()) {
      order.push_back(clip_id);
      it = pending.emplace(clip_id, PendingClip{}).first;
      it->second.label = label;
    } else if (it->second.label != label) {
      throw DataError(path + ": clip '" + clip_id + "' has inconsistent labels", lineno);
    }
    if (it->second.frames.count(frame_idx) != 0) {
      throw DataError(path + ": duplicate frame " + std::to_string(frame_idx) +
                          " for clip '" + clip_id + "'",
                      lineno);
    }
    std::vector<double> coords;
    coords.reserve(2 * kNumLandmarks);
    for (int c = 0; c < 2 * kNumLandmarks; ++c) {
      coords.push_back(parse_coord(fields[static_cast<size_t>(3 + c)], lineno));
    }
    it->second.frames.emplace(frame_idx, std::move(coords));
  }

  Dataset ds;
  ds.kind = DatasetKind::kLandmark;
  for (const std::string& id : order) {
    const PendingClip& pc = pending.at(id);
    bool complete = static_cast<int>(pc.frames.size()) == kClipFrames;
    if (complete) {
      for (int t = 0; t < kClipFrames; ++t) complete = complete && pc.frames.count(t) != 0;
    }
    if (!complete) {
      if (warnings != nullptr) {
        warnings->push_back("clip '" + id + "' dropped: has " +
                            std::to_string(pc.frames.size()) + " frames, expected " +
                            std::to_string(kClipFrames));
      }
      continue;
    }
    LandmarkClip clip;
    clip.clip_id = id;
    clip.label = pc.label;
    clip.frames = Tensor::zeros({kClipFrames, kNumLandmarks, 2});
    for (int t = 0; t < kClipFrames; ++t) {
      const auto& coords = pc.frames.at(t);
      for (int c = 0; c < 2 * kNumLandmarks; ++c) {
        clip.frames.data()[static_cast<std::int64_t>(t) * 2 * kNumLandmarks + c] =
            coords[static_cast<size_t>(c)];
      }
    }
    normalize_landmark_clip(clip.frames);
    ds.landmark_clips.push_back(std::move(clip));
  }
  return ds;
}

void write_landmark_csv(const std::string& path, const Dataset& ds) {
  if (ds.kind != DatasetKind::kLandmark) {
    throw DataError("write_landmark_csv: dataset does not hold landmark clips");
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << expected_csv_header() << "\n";
  char buf[40];
  for (const LandmarkClip& clip : ds.landmark_clips) {
    for (int t = 0; t < kClipFrames; ++t) {
      f << clip.clip_id << "," << t << "," << clip.label;
      for (int c = 0; c < 2 * kNumLandmarks; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g",
                      clip.frames.data()[static_cast<std::int64_t>(t) * 2 * kNumLandmarks + c]);
        f << "," << buf;
      }
      f << "\n";
    }
  }
}

// ---- synthetic clips -----------------------------------------------------------------

namespace {

// Neutral face in a 200x200 frame, y growing downward.
std::array<double, 2 * kNumLandmarks> neutral_face_template() {
  std::array<double, 2 * kNumLandmarks> pts{};
  auto set = [&](int i, double x, double y) {
    pts[static_cast<size_t>(2 * i)] = x;
    pts[static_cast<size_t>(2 * i) + 1] = y;
  };
  for (int i = 0; i <= 16; ++i) {  // jaw arc, temple to temple through the chin
    const double a = kPi * i / 16.0;
    set(i, 100.0 - 55.0 * std::cos(a), 85.0 + 75.0 * std::sin(a));
  }
  for (int j = 0; j <= 4; ++j) {  // brows
    const double arch = 6.0 * std::sin(kPi * j / 4.0);
    set(17 + j, 55.0 + 8.25 * j, 62.0 - arch);
    set(22 + j, 112.0 + 8.25 * j, 62.0 - arch);
  }
  for (int j = 0; j <= 3; ++j) set(27 + j, 100.0, 70.0 + 10.0 * j);  // nose bridge
  for (int j = 0; j <= 4; ++j) {                                     // lower nose
    set(31 + j, 88.0 + 6.0 * j, 108.0 + 3.0 * std::sin(kPi * j / 4.0));
  }
  auto eye = [&](int base, double cx) {  // six-point loop
    const double cy = 78.0, rx = 12.0, ry = 5.0;
    set(base + 0, cx - rx, cy);
    set(base + 1, cx - rx / 2, cy - ry);
    set(base + 2, cx + rx / 2, cy - ry);
    set(base + 3, cx + rx, cy);
    set(base + 4, cx + rx / 2, cy + ry);
    set(base + 5, cx - rx / 2, cy + ry);
  };
  eye(36, 72.0);
  eye(42, 128.0);
  for (int j = 0; j < 12; ++j) {  // outer lip
    const double a = kPi * j / 6.0;
    set(48 + j, 100.0 - 24.0 * std::cos(a), 135.0 - 10.0 * std::sin(a));
  }
  for (int j = 0; j < 8; ++j) {  // inner lip
    const double a = kPi * j / 4.0;
    set(60 + j, 100.0 - 15.0 * std::cos(a), 135.0 - 4.0 * std::sin(a));
  }
  return pts;
}

}  // namespace

Dataset generate_synthetic(int n_per_class, std::uint64_t seed, double noise) {
  if (n_per_class < 1) throw DataError("generate_synthetic: n_per_class must be >= 1");
  const auto base = neutral_face_template();
  Rng rng(seed);
  Dataset ds;
  ds.kind = DatasetKind::kLandmark;

  auto make_clip = [&](int label, int index) {
    LandmarkClip clip;
    clip.clip_id = (label == 0 ? "neutral_" : "pain_") + std::to_string(index);
    clip.label = label;
    clip.frames = Tensor::zeros({kClipFrames, kNumLandmarks, 2});
    for (int t = 0; t < kClipFrames; ++t) {
      const double ramp = label == 1 ? static_cast<double>(t) / (kClipFrames - 1) : 0.0;
      for (int n = 0; n < kNumLandmarks; ++n) {
        double x = base[static_cast<size_t>(2 * n)];
        double y = base[static_cast<size_t>(2 * n) + 1];
        if (label == 1) {
          if (n >= 17 && n <= 26) y += 6.0 * ramp;  // brows lowered
          if (n == 48) {
            x -= 3.0 * ramp;
            y += 4.0 * ramp;
          }
          if (n == 54) {
            x += 3.0 * ramp;
            y += 4.0 * ramp;
          }
          if (n >= 36 && n <= 47) {  // eyes narrow toward their centres
            const double cx = n <= 41 ? 72.0 : 128.0;
            const double cy = 78.0;
            const double shrink = 1.0 - 0.35 * ramp;
            x = cx + (x - cx) * shrink;
            y = cy + (y - cy) * shrink;
          }
        }
        clip.frames.at({t, n, 0}) = x + rng.normal(0.0, noise);
        clip.frames.at({t, n, 1}) = y + rng.normal(0.0, noise);
      }
    }
    return clip;
  };

  for (int i = 0; i < n_per_class; ++i) ds.landmark_clips.push_back(make_clip(0, i));
  for (int i = 0; i < n_per_class; ++i) ds.landmark_clips.push_back(make_clip(1, i));
  return ds;
}

// ---- SMOTE ---------------------------------------------------------------------------

namespace {

Eigen::ArrayXd flat_clip(const Dataset& ds, std::size_t i) {
  if (ds.kind == DatasetKind::kLandmark) return ds.landmark_clips[i].frames.array();
  return ds.feature_clips[i].features.array();
}

}  // namespace

Dataset smote_oversample(const Dataset& ds, int k, std::uint64_t seed) {
  const auto counts = ds.class_counts();
  if (counts[0] == counts[1]) return ds;
  const int minority = counts[0] < counts[1] ? 0 : 1;
  const int need = std::abs(counts[0] - counts[1]);
  if (counts[static_cast<size_t>(minority)] == 0) {
    throw DataError("smote: class " + std::to_string(minority) + " is empty");
  }
  if (counts[static_cast<size_t>(minority)] == 1) {
    throw DataError("smote: minority class has a single sample, no neighbour to interpolate");
  }

  std::vector<std::size_t> min_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.label(i) == minority) min_idx.push_back(i);
  }
  const int m = static_cast<int>(min_idx.size());
  const int k_eff = std::min(k, m - 1);
  if (k_eff < 1) throw DataError("smote: k must leave at least one neighbour");

  std::vector<Eigen::ArrayXd> flat;
  flat.reserve(static_cast<size_t>(m));
  for (std::size_t i : min_idx) flat.push_back(flat_clip(ds, i));
  for (int a = 1; a < m; ++a) {
    if (flat[static_cast<size_t>(a)].size() != flat[0].size()) {
      throw DataError("smote: clips have differing sizes");
    }
  }

  // k nearest minority neighbours per minority sample, ties broken by index
  std::vector<std::vector<int>> neighbours(static_cast<size_t>(m));
  for (int a = 0; a < m; ++a) {
    std::vector<std::pair<double, int>> dist;
    dist.reserve(static_cast<size_t>(m - 1));
    for (int b = 0; b < m; ++b) {
      if (b == a) continue;
      const double d2 = (flat[static_cast<size_t>(a)] - flat[static_cast<size_t>(b)]).square().sum();
      dist.emplace_back(d2, b);
    }
    std::sort(dist.begin(), dist.end());
    for (int j = 0; j < k_eff; ++j) {
      neighbours[static_cast<size_t>(a)].push_back(dist[static_cast<size_t>(j)].second);
    }
  }

  Dataset out = ds;
  Rng rng(seed);
  for (int s = 0; s < need; ++s) {
    const int a = rng.uniform_int(0, m - 1);
    const int b = neighbours[static_cast<size_t>(a)][static_cast<size_t>(rng.uniform_int(0, k_eff - 1))];
    const double u = rng.uniform(0.0, 1.0);
    Eigen::ArrayXd synth = flat[static_cast<size_t>(a)] +
                           u * (flat[static_cast<size_t>(b)] - flat[static_cast<size_t>(a)]);
    const std::size_t src = min_idx[static_cast<size_t>(a)];
    if (ds.kind == DatasetKind::kLandmark) {
      LandmarkClip clip;
      clip.clip_id = ds.landmark_clips[src].clip_id + "_sm" + std::to_string(s);
      clip.label = minority;
      clip.frames = Tensor::zeros({kClipFrames, kNumLandmarks, 2});
      clip.frames.array() = synth;
      out.landmark_clips.push_back(std::move(clip));
    } else {
      FeatureClip clip;
      clip.clip_id = ds.feature_clips[src].clip_id + "_sm" + std::to_string(s);
      clip.label = minority;
      clip.features = Tensor::zeros(ds.feature_clips[src].features.shape());
      clip.features.array() = synth;
      out.feature_clips.push_back(std::move(clip));
    }
  }
  return out;
}

// ---- splits ---------------------------------------------------------------------------

namespace {

std::array<std::vector<std::size_t>, 2> indices_by_class(const Dataset& ds) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[static_cast<size_t>(ds.label(i))].push_back(i);
  }
  return by_class;
}

}  // namespace

DatasetSplit split_dataset(const Dataset& ds, std::uint64_t seed) {
  if (ds.size() < 10) {
    throw DataError("split_dataset: need at least 10 clips, got " + std::to_string(ds.size()));
  }
  auto by_class = indices_by_class(ds);
  for (int c = 0; c < 2; ++c) {
    if (by_class[static_cast<size_t>(c)].empty()) {
      throw DataError("split_dataset: class " + std::to_string(c) + " is absent");
    }
  }
  Rng rng(mix_stream(seed, 101));
  std::vector<std::size_t> tr, va, te;
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[static_cast<size_t>(c)];
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    // 80/10/10 with the remainder to train; tiny classes still contribute one
    // clip each to val and test
    std::size_t n_val = n / 10, n_test = n / 10;
    if (n_val == 0 && n >= 3) n_val = n_test = 1;
    va.insert(va.end(), idx.begin(), idx.begin() + static_cast<long>(n_val));
    te.insert(te.end(), idx.begin() + static_cast<long>(n_val),
              idx.begin() + static_cast<long>(n_val + n_test));
    tr.insert(tr.end(), idx.begin() + static_cast<long>(n_val + n_test), idx.end());
  }
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  std::sort(te.begin(), te.end());
  return {ds.subset(tr), ds.subset(va), ds.subset(te)};
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, double val_fraction,
                                            std::uint64_t seed) {
  auto by_class = indices_by_class(ds);
  Rng rng(mix_stream(seed, 102));
  std::vector<std::size_t> tr, va;
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[static_cast<size_t>(c)];
    if (idx.empty()) continue;
    rng.shuffle(idx);
    std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(idx.size())));
    if (n_val == 0 && idx.size() >= 2) n_val = 1;
    va.insert(va.end(), idx.begin(), idx.begin() + static_cast<long>(n_val));
    tr.insert(tr.end(), idx.begin() + static_cast<long>(n_val), idx.end());
  }
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  return {ds.subset(tr), ds.subset(va)};
}

std::vector<std::pair<Dataset, Dataset>> kfold_partitions(const Dataset& ds, int k,
                                                          std::uint64_t seed) {
  if (k < 2) throw DataError("kfold: k must be >= 2");
  auto by_class = indices_by_class(ds);
  for (int c = 0; c < 2; ++c) {
    if (static_cast<int>(by_class[static_cast<size_t>(c)].size()) < k) {
      throw DataError("kfold: class " + std::to_string(c) + " has " +
                      std::to_string(by_class[static_cast<size_t>(c)].size()) +
                      " clips, fewer than k=" + std::to_string(k));
    }
  }
  Rng rng(mix_stream(seed, 103));
  std::vector<std::vector<std::size_t>> fold_test(static_cast<size_t>(k));
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[static_cast<size_t>(c)];
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      fold_test[i % static_cast<size_t>(k)].push_back(idx[i]);
    }
  }
  std::vector<std::pair<Dataset, Dataset>> folds;
  for (int f = 0; f < k; ++f) {
    auto te = fold_test[static_cast<size_t>(f)];
    std::sort(te.begin(), te.end());
    std::set<std::size_t> te_set(te.begin(), te.end());
    std::vector<std::size_t> tr;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (te_set.count(i) == 0) tr.push_back(i);
    }
    folds.emplace_back(ds.subset(tr), ds.subset(te));
  }
  return folds;
}

// ---- image augmentation -----------------------------------------------------------------

Tensor augment_image(const Tensor& image, const AugmentParams& params, std::uint64_t seed) {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != image.dim(2)) {
    throw ShapeError("augment_image: need a square [3,S,S] image, got " +
                     shape_str(image.shape()));
  }
  const int s = image.dim(1);
  Rng rng(seed);

  // crop then nearest-neighbour resize back
  int cs = static_cast<int>(std::lround(s * std::sqrt(params.crop_area)));
  cs = std::max(1, std::min(s, cs));
  const int oy = cs < s ? rng.uniform_int(0, s - cs) : 0;
  const int ox = cs < s ? rng.uniform_int(0, s - cs) : 0;
  Tensor cropped = Tensor::zeros({3, s, s});
  const double ratio = static_cast<double>(cs) / s;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < s; ++y) {
      const int sy = oy + std::min(cs - 1, static_cast<int>((y + 0.5) * ratio));
      for (int x = 0; x < s; ++x) {
        const int sx = ox + std::min(cs - 1, static_cast<int>((x + 0.5) * ratio));
        cropped.at({c, y, x}) = image.at({c, sy, sx});
      }
    }
  }

  // rotation about the image centre, bilinear, zero fill
  const double deg = params.max_rotation_deg > 0
                         ? rng.uniform(-params.max_rotation_deg, params.max_rotation_deg)
                         : 0.0;
  const double th = deg * kPi / 180.0;
  const double cosv = std::cos(th), sinv = std::sin(th);
  const double ctr = (s - 1) / 2.0;
  Tensor out = Tensor::zeros({3, s, s});
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double dy = y - ctr, dx = x - ctr;
      const double srcy = ctr + cosv * dy - sinv * dx;
      const double srcx = ctr + sinv * dy + cosv * dx;
      const int y0 = static_cast<int>(std::floor(srcy));
      const int x0 = static_cast<int>(std::floor(srcx));
      const double fy = srcy - y0, fx = srcx - x0;
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int py = 0; py <= 1; ++py) {
          for (int px = 0; px <= 1; ++px) {
            const int yy = y0 + py, xx = x0 + px;
            if (yy < 0 || yy >= s || xx < 0 || xx >= s) continue;
            const double wgt = (py ? fy : 1 - fy) * (px ? fx : 1 - fx);
            acc += wgt * cropped.at({c, yy, xx});
          }
        }
        out.at({c, y, x}) = acc;
      }
    }
  }
  return out;
}

// ---- feature clips ------------------------------------------------------------------------

Dataset load_feature_clips(const std::string& path, bool strict_frames,
                           std::vector<std::string>* warnings) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path);
  Dataset ds;
  ds.kind = DatasetKind::kFeature;
  std::set<std::string> seen_ids;
  std::string line;
  long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream hs(line);
    std::string magic, version, clip_id;
    int label, t_len, dim;
    if (!(hs >> magic >> version >> clip_id >> label >> t_len >> dim) ||
        magic != "FEATCLIP" || version != "v1") {
      throw DataError(path + ": expected 'FEATCLIP v1 <clip_id> <label> <T> <D>'", lineno);
    }
    if (label != 0 && label != 1) throw DataError(path + ": label must be 0 or 1", lineno);
    if (t_len < 1 || dim < 1) throw DataError(path + ": bad T or D", lineno);
    if (!seen_ids.insert(clip_id).second) {
      throw DataError(path + ": duplicate clip_id '" + clip_id + "'", lineno);
    }
    FeatureClip clip;
    clip.clip_id = clip_id;
    clip.label = label;
    clip.features = Tensor::zeros({t_len, dim});
    for (int t = 0; t < t_len; ++t) {
      if (!std::getline(f, line)) throw DataError(path + ": unexpected end of file", lineno);
      ++lineno;
      std::istringstream vs(line);
      for (int d = 0; d < dim; ++d) {
        double v;
        if (!(vs >> v) || !std::isfinite(v)) {
          throw DataError(path + ": bad feature value", lineno);
        }
        clip.features.at({t, d}) = v;
      }
    }
    if (strict_frames && t_len != kClipFrames) {
      if (warnings != nullptr) {
        warnings->push_back("clip '" + clip_id + "' dropped: has " + std::to_string(t_len) +
                            " frames, expected " + std::to_string(kClipFrames));
      }
      continue;
    }
    ds.feature_clips.push_back(std::move(clip));
  }
  return ds;
}

void write_feature_clips(const std::string& path, const Dataset& ds) {
  if (ds.kind != DatasetKind::kFeature) {
    throw DataError("write_feature_clips: dataset does not hold feature clips");
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  char buf[40];
  for (const FeatureClip& clip : ds.feature_clips) {
    const int t_len = clip.features.dim(0), dim = clip.features.dim(1);
    f << "FEATCLIP v1 " << clip.clip_id << " " << clip.label << " " << t_len << " " << dim
      << "\n";
    for (int t = 0; t < t_len; ++t) {
      for (int d = 0; d < dim; ++d) {
        std::snprintf(buf, sizeof buf, "%.17g", clip.features.at({t, d}));
        f << (d ? " " : "") << buf;
      }
      f << "\n";
    }
  }
}

Dataset features_from_landmarks(const Dataset& ds) {
  if (ds.kind != DatasetKind::kLandmark) {
    throw DataError("features_from_landmarks: dataset does not hold landmark clips");
  }
  Dataset out;
  out.kind = DatasetKind::kFeature;
  for (const LandmarkClip& clip : ds.landmark_clips) {
    FeatureClip fc;
    fc.clip_id = clip.clip_id;
    fc.label = clip.label;
    fc.features = reshape(clip.frames, {kClipFrames, 2 * kNumLandmarks});
    out.feature_clips.push_back(std::move(fc));
  }
  return out;
}

Dataset load_dataset(const std::string& path, bool strict_frames,
                     std::vector<std::string>* warnings) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path);
  std::string first;
  std::getline(f, first);
  f.close();
  if (first.rfind("FEATCLIP", 0) == 0) {
    return load_feature_clips(path, strict_frames, warnings);
  }
  return load_landmark_csv(path, warnings);
}

}  // namespace painlarks
