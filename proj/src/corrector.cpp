#include "segfix/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "segfix/rng.hpp"

namespace segfix {

VectorField::VectorField(const Box3& w, int dims)
    : window(w), k(dims), data(w.count() * static_cast<std::size_t>(dims), 0.0) {
  if (dims < 1) throw std::invalid_argument("VectorField: k must be >= 1");
}

PruningTask advice_mask(const LabelVolume& segmentation, const LabelVolume& supervoxels,
                        const ErrorMap& binarized, const Point3& center, const Shape3& shape,
                        BorderMode mode) {
  if (!(segmentation.shape() == supervoxels.shape())) {
    throw std::invalid_argument("advice_mask: segmentation and supervoxels differ in shape");
  }
  const Box3 window = window_box(segmentation.shape(), center, shape, mode);
  const Label central = segmentation[center];
  if (central == 0) {
    throw std::invalid_argument("advice_mask: central voxel is background");
  }
  if (!binarized.box.contains(window)) {
    throw std::invalid_argument("advice_mask: error map does not cover the window");
  }
  std::set<Label> chosen{central};
  for (int z = window.min.z; z < window.max.z; ++z) {
    for (int y = window.min.y; y < window.max.y; ++y) {
      for (int x = window.min.x; x < window.max.x; ++x) {
        const Point3 p{x, y, z};
        const Label l = segmentation[p];
        if (l != 0 && binarized.at(p) >= 0.5f) chosen.insert(l);
      }
    }
  }
  PruningTask task;
  task.window = window;
  task.center = center;
  task.supervoxels = supervoxels.crop(window);
  task.candidate = ObjectMask(window.shape(), 0, segmentation.voxel_size());
  const LabelVolume seg_window = segmentation.crop(window);
  for (std::size_t i = 0; i < seg_window.size(); ++i) {
    task.candidate[i] = chosen.contains(seg_window[i]) ? 1 : 0;
  }
  return task;
}

PruningTask advice_mask(const SegmentationView& view, const ErrorMap& binarized,
                        const Point3& center, const Shape3& shape, BorderMode mode) {
  return advice_mask(render_labels(view), view.supervoxels, binarized, center, shape, mode);
}

SoftMask mask_from_vector_field(const VectorField& v, std::span<const double> anchor) {
  if (anchor.size() != static_cast<std::size_t>(v.k)) {
    throw std::invalid_argument("mask_from_vector_field: anchor dimension mismatch");
  }
  SoftMask m{v.window, Volume<double>(v.window.shape(), 0.0)};
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const auto vi = v.at(i);
    double d2 = 0.0;
    for (std::size_t c = 0; c < anchor.size(); ++c) {
      const double d = vi[c] - anchor[c];
      d2 += d * d;
    }
    m.values[i] = std::exp(-d2);
  }
  return m;
}

std::vector<double> anchor_vector(const VectorField& v, const LabelVolume& sv_window,
                                  const Point3& central) {
  if (!(sv_window.shape() == v.window.shape())) {
    throw std::invalid_argument("anchor_vector: supervoxel window does not match the field");
  }
  const Point3 local{central.x - v.window.min.x, central.y - v.window.min.y,
                     central.z - v.window.min.z};
  if (!sv_window.bounds().contains(local)) {
    throw std::out_of_range("anchor_vector: central voxel outside the window");
  }
  const Label s = sv_window[local];
  if (s == 0) {
    throw std::invalid_argument("anchor_vector: central voxel is background");
  }
  std::vector<double> mean(static_cast<std::size_t>(v.k), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < sv_window.size(); ++i) {
    if (sv_window[i] != s) continue;
    const auto vi = v.at(i);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += vi[c];
    ++n;
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  return mean;
}

Box3 central_box(const Box3& window, const Point3& center, const Shape3& window_shape) {
  auto half_odd = [](int extent) { return std::max(1, (extent / 2) | 1); };
  const Shape3 c(half_odd(window_shape.x), half_odd(window_shape.y), half_odd(window_shape.z));
  const Box3 box{{center.x - c.x / 2, center.y - c.y / 2, center.z - c.z / 2},
                 {center.x + c.x / 2 + 1, center.y + c.y / 2 + 1, center.z + c.z / 2 + 1}};
  return box.intersect(window);
}

std::map<SupervoxelId, double> score_supervoxels(const SoftMask& m, const LabelVolume& sv_window,
                                                 const Box3& central) {
  if (!(sv_window.shape() == m.window.shape())) {
    throw std::invalid_argument("score_supervoxels: supervoxel window does not match the mask");
  }
  std::set<SupervoxelId> touching;
  const Box3 c = central.intersect(m.window);
  for (int z = c.min.z; z < c.max.z; ++z) {
    for (int y = c.min.y; y < c.max.y; ++y) {
      for (int x = c.min.x; x < c.max.x; ++x) {
        const Label s = sv_window(x - m.window.min.x, y - m.window.min.y, z - m.window.min.z);
        if (s != 0) touching.insert(s);
      }
    }
  }
  std::map<SupervoxelId, std::pair<double, std::size_t>> acc;
  for (SupervoxelId s : touching) acc.emplace(s, std::pair<double, std::size_t>{0.0, 0});
  for (std::size_t i = 0; i < sv_window.size(); ++i) {
    auto it = acc.find(sv_window[i]);
    if (it == acc.end()) continue;
    it->second.first += m.values[i];
    ++it->second.second;
  }
  std::map<SupervoxelId, double> scores;
  for (const auto& [s, sum_n] : acc) {
    scores.emplace(s, sum_n.first / static_cast<double>(sum_n.second));
  }
  return scores;
}

SupervoxelDecision decide(const std::map<SupervoxelId, double>& scores, double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("decide: lo must be below hi");
  }
  SupervoxelDecision d;
  for (const auto& [s, score] : scores) {
    if (score >= lo && score <= hi) {
      d.abstain = true;
    } else if (score > hi) {
      d.merge.push_back(s);
    } else {
      d.cut.push_back(s);
    }
  }
  if (d.abstain) {
    d.merge.clear();
    d.cut.clear();
  }
  return d;
}

OracleCorrector::OracleCorrector(std::shared_ptr<const LabelVolume> gt) : gt_(std::move(gt)) {
  if (!gt_) throw std::invalid_argument("OracleCorrector: ground truth required");
}

SoftMask OracleCorrector::correct(const PruningTask& task) const {
  if (!gt_->bounds().contains(task.window)) {
    throw std::invalid_argument("oracle corrector: task window outside ground truth");
  }
  const Label object = (*gt_)[task.center];
  if (object == 0) {
    throw std::invalid_argument("oracle corrector: central voxel is background in ground truth");
  }
  SoftMask m{task.window, Volume<double>(task.window.shape(), kOracleEpsilon)};
  const Box3& w = task.window;
  for (int z = w.min.z; z < w.max.z; ++z) {
    for (int y = w.min.y; y < w.max.y; ++y) {
      for (int x = w.min.x; x < w.max.x; ++x) {
        const Point3 local{x - w.min.x, y - w.min.y, z - w.min.z};
        if (task.candidate[local] && (*gt_)(x, y, z) == object) m.values[local] = 1.0;
      }
    }
  }
  return m;
}

NoisyCorrector::NoisyCorrector(std::shared_ptr<const LabelVolume> gt, double fp_rate,
                               double fn_rate, std::uint64_t seed)
    : oracle_(std::move(gt)), fp_rate_(fp_rate), fn_rate_(fn_rate), seed_(seed) {
  if (!(fp_rate >= 0.0 && fp_rate < 1.0) || !(fn_rate >= 0.0 && fn_rate < 1.0)) {
    throw std::invalid_argument("noisy corrector rates must lie in [0, 1)");
  }
}

SoftMask NoisyCorrector::correct(const PruningTask& task) const {
  SoftMask m = oracle_.correct(task);
  std::map<SupervoxelId, bool> on_object;
  for (std::size_t i = 0; i < task.supervoxels.size(); ++i) {
    const Label s = task.supervoxels[i];
    if (s == 0) continue;
    on_object[s] = on_object[s] || m.values[i] == 1.0;
  }
  constexpr std::uint64_t kStream = 0x636f72726563746fULL;
  const std::uint64_t where = (static_cast<std::uint64_t>(task.center.z) << 42) ^
                              (static_cast<std::uint64_t>(task.center.y) << 21) ^
                              static_cast<std::uint64_t>(task.center.x);
  std::map<SupervoxelId, double> replacement;
  for (const auto& [s, inside] : on_object) {
    const double u = hash_unit(seed_, kStream ^ splitmix64(where), s);
    if (inside && u < fn_rate_) replacement[s] = kOracleEpsilon;
    if (!inside && u < fp_rate_) replacement[s] = 1.0;
  }
  for (std::size_t i = 0; i < task.supervoxels.size(); ++i) {
    auto it = replacement.find(task.supervoxels[i]);
    if (it != replacement.end()) m.values[i] = it->second;
  }
  return m;
}

ConstantCorrector::ConstantCorrector(double value) : value_(value) {
  if (!(value > 0.0 && value <= 1.0)) {
    throw std::invalid_argument("ConstantCorrector: value must lie in (0, 1]");
  }
}

SoftMask ConstantCorrector::correct(const PruningTask& task) const {
  return SoftMask{task.window, Volume<double>(task.window.shape(), value_)};
}

std::unique_ptr<CorrectorBackend> oracle_corrector(std::shared_ptr<const LabelVolume> gt) {
  return std::make_unique<OracleCorrector>(std::move(gt));
}

TrainingExample make_pruning_task(const LabelVolume& gt, const Point3& center,
                                  const Shape3& shape, std::optional<double> p,
                                  std::uint64_t seed) {
  const Box3 window = window_box(gt.shape(), center, shape, BorderMode::valid);
  const Label object = gt[center];
  if (object == 0) {
    throw std::invalid_argument("make_pruning_task: central voxel is background");
  }
  Rng rng(seed);
  const double prob = p ? *p : uniform01(rng);
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw std::invalid_argument("make_pruning_task: p must lie in [0, 1]");
  }
  const LabelVolume labels = gt.crop(window);
  std::set<Label> present(labels.data().begin(), labels.data().end());
  std::set<Label> selected{object};
  for (Label l : present) {
    if (l == 0 || l == object) continue;
    if (uniform01(rng) < prob) selected.insert(l);
  }
  TrainingExample ex;
  ex.p = prob;
  ex.task.window = window;
  ex.task.center = center;
  ex.task.supervoxels = labels;
  ex.task.candidate = ObjectMask(window.shape(), 0, gt.voxel_size());
  ex.target = ObjectMask(window.shape(), 0, gt.voxel_size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ex.task.candidate[i] = selected.contains(labels[i]) ? 1 : 0;
    ex.target[i] = labels[i] == object ? 1 : 0;
  }
  return ex;
}

}  // namespace segfix
