#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "segfix/errormap.hpp"
#include "segfix/svgraph.hpp"
#include "segfix/volume.hpp"

namespace segfix {

/// Input of object mask pruning: erase every voxel of `candidate` that is not
/// part of the true object overlapping `center`. All volumes are window-local
/// and aligned to `window`; `center` is in global coordinates.
struct PruningTask {
  Box3 window;
  ObjectMask candidate;
  Point3 center;
  std::optional<RawVolume> raw;
  LabelVolume supervoxels;

  Point3 local(const Point3& global) const {
    return {global.x - window.min.x, global.y - window.min.y, global.z - window.min.z};
  }
};

/// k values per voxel over a window, voxel-major.
struct VectorField {
  Box3 window;
  int k = 6;
  std::vector<double> data;

  VectorField() = default;
  VectorField(const Box3& w, int dims);

  std::span<double> at(std::size_t voxel) {
    return {data.data() + voxel * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }
  std::span<const double> at(std::size_t voxel) const {
    return {data.data() + voxel * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }
};

/// Soft object mask with values in (0, 1].
struct SoftMask {
  Box3 window;
  Volume<double> values;
};

struct SupervoxelDecision {
  std::vector<SupervoxelId> merge;
  std::vector<SupervoxelId> cut;
  bool abstain = false;
};

/// Candidate mask for a corrector window at `center`: the segment under the
/// center plus every segment with a flagged voxel of `binarized` inside the
/// window. `segmentation` is the rendered segment labels.
PruningTask advice_mask(const LabelVolume& segmentation, const LabelVolume& supervoxels,
                        const ErrorMap& binarized, const Point3& center, const Shape3& shape,
                        BorderMode mode = BorderMode::valid);
PruningTask advice_mask(const SegmentationView& view, const ErrorMap& binarized,
                        const Point3& center, const Shape3& shape,
                        BorderMode mode = BorderMode::valid);

/// M = exp(-||v - anchor||^2) pointwise.
SoftMask mask_from_vector_field(const VectorField& v, std::span<const double> anchor);

/// Mean of v over the supervoxel holding `central` inside the window.
std::vector<double> anchor_vector(const VectorField& v, const LabelVolume& sv_window,
                                  const Point3& central);

/// Window-shrunk box around the center: half the window extent per axis,
/// rounded up to odd, clipped to the window.
Box3 central_box(const Box3& window, const Point3& center, const Shape3& window_shape);

/// Mean of `m` over each supervoxel that has a voxel in `central`, averaged
/// over that supervoxel's voxels anywhere in the window.
std::map<SupervoxelId, double> score_supervoxels(const SoftMask& m, const LabelVolume& sv_window,
                                                 const Box3& central);

/// Abstains if any score lies in [lo, hi]; otherwise merges scores > hi and
/// cuts scores < lo.
SupervoxelDecision decide(const std::map<SupervoxelId, double>& scores, double lo = 0.1,
                          double hi = 0.9);

class CorrectorBackend {
 public:
  virtual ~CorrectorBackend() = default;
  virtual SoftMask correct(const PruningTask& task) const = 0;
};

inline constexpr double kOracleEpsilon = 1e-6;

/// 1 on the ground-truth object under the center (within the candidate),
/// kOracleEpsilon elsewhere.
class OracleCorrector final : public CorrectorBackend {
 public:
  explicit OracleCorrector(std::shared_ptr<const LabelVolume> gt);
  SoftMask correct(const PruningTask& task) const override;

 private:
  std::shared_ptr<const LabelVolume> gt_;
};

/// Oracle output with per-supervoxel flips keyed by (seed, center,
/// supervoxel): a true-object supervoxel is erased with probability
/// `fn_rate`, a foreign one kept with probability `fp_rate`.
class NoisyCorrector final : public CorrectorBackend {
 public:
  NoisyCorrector(std::shared_ptr<const LabelVolume> gt, double fp_rate, double fn_rate,
                 std::uint64_t seed);
  SoftMask correct(const PruningTask& task) const override;

 private:
  OracleCorrector oracle_;
  double fp_rate_;
  double fn_rate_;
  std::uint64_t seed_;
};

/// Outputs the same value everywhere; 0.5 makes every decision abstain.
class ConstantCorrector final : public CorrectorBackend {
 public:
  explicit ConstantCorrector(double value = 0.5);
  SoftMask correct(const PruningTask& task) const override;

 private:
  double value_;
};

std::unique_ptr<CorrectorBackend> oracle_corrector(std::shared_ptr<const LabelVolume> gt);

struct TrainingExample {
  PruningTask task;
  ObjectMask target;
  double p = 0.0;
};

/// Corrector training example from ground truth alone: the object under
/// `center` plus each other object in the window with probability p. With no
/// `p`, it is drawn uniformly from [0, 1] using `seed`.
TrainingExample make_pruning_task(const LabelVolume& gt, const Point3& center,
                                  const Shape3& shape, std::optional<double> p,
                                  std::uint64_t seed);

}  // namespace segfix
