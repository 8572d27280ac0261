#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "segfix/volume.hpp"

namespace segfix {

struct ErrorWindowSpec {
  Shape3 shape{3, 3, 1};
  BorderMode mode = BorderMode::valid;

  ErrorWindowSpec() = default;
  ErrorWindowSpec(Shape3 s, BorderMode m);

  int rx() const { return shape.x / 2; }
  int ry() const { return shape.y / 2; }
  int rz() const { return shape.z / 2; }
};

/// Scalar field in [0,1] over `box` of a source volume. Voxels whose window
/// leaves the volume under valid mode are out of domain and hold 0.
struct ErrorMap {
  Box3 box;
  ErrorWindowSpec spec;
  Volume<float> values;
  Volume<std::uint8_t> in_domain;

  ErrorMap() = default;
  ErrorMap(const Box3& region, const ErrorWindowSpec& s);

  float at(const Point3& global) const {
    return values(global.x - box.min.x, global.y - box.min.y, global.z - box.min.z);
  }
  float& at(const Point3& global) {
    return values(global.x - box.min.x, global.y - box.min.y, global.z - box.min.z);
  }
  /// Copies `other` into the overlapping part of this map.
  void paste(const ErrorMap& other);
};

/// Whether the window at `center` fits inside `volume` (always true when clipped).
bool window_in_domain(const Shape3& volume, const Point3& center, const ErrorWindowSpec& spec);

/// Err(obj): 0 at i iff obj restricted to the window at i equals the
/// restriction of some nonzero ground-truth object. An empty window matches
/// vacuously.
ErrorMap oracle_error_map(const ObjectMask& obj, const LabelVolume& gt,
                          const ErrorWindowSpec& spec);

/// Sum over proposal objects of Err(obj) * obj, evaluated for centers in
/// `region` (the whole volume when omitted). `threads` splits the region into
/// z-slabs; results do not depend on it.
ErrorMap combined_error_map(const LabelVolume& proposal, const LabelVolume& gt,
                            const ErrorWindowSpec& spec, const Box3& region, int threads = 1);
ErrorMap combined_error_map(const LabelVolume& proposal, const LabelVolume& gt,
                            const ErrorWindowSpec& spec, int threads = 1);

/// Combined-map decision at a single voxel, by direct window comparison.
bool error_at(const LabelVolume& proposal, const LabelVolume& gt, const Point3& center,
              const ErrorWindowSpec& spec);

/// Per-voxel maximum over overlapping tiles. `target` defaults to the hull of
/// the tiles; every voxel of it must be covered.
ErrorMap blend_max(std::span<const ErrorMap> tiles);
ErrorMap blend_max(std::span<const ErrorMap> tiles, const Box3& target);

/// 1 where value >= threshold, else 0.
ErrorMap binarize(const ErrorMap& map, float threshold);

/// Produces the combined error map of a proposal over a region.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual ErrorMap detect(const LabelVolume& proposal, const RawVolume* raw,
                          const Box3& region) const = 0;
  virtual const ErrorWindowSpec& spec() const = 0;

  ErrorMap detect(const LabelVolume& proposal, const RawVolume* raw = nullptr) const {
    return detect(proposal, raw, proposal.bounds());
  }
};

class OracleDetector final : public DetectorBackend {
 public:
  OracleDetector(std::shared_ptr<const LabelVolume> gt, ErrorWindowSpec spec, int threads = 1);

  using DetectorBackend::detect;
  ErrorMap detect(const LabelVolume& proposal, const RawVolume* raw,
                  const Box3& region) const override;
  const ErrorWindowSpec& spec() const override { return spec_; }

 private:
  std::shared_ptr<const LabelVolume> gt_;
  ErrorWindowSpec spec_;
  int threads_;
};

/// Oracle decisions with i.i.d. flips per location: an error is dropped with
/// probability `fn_rate`, a clean foreground location flagged with
/// probability `fp_rate`. Flips depend only on (seed, voxel index), so a
/// location keeps its flip across re-evaluations.
class NoisyDetector final : public DetectorBackend {
 public:
  NoisyDetector(std::shared_ptr<const LabelVolume> gt, ErrorWindowSpec spec, double fp_rate,
                double fn_rate, std::uint64_t seed, int threads = 1);

  using DetectorBackend::detect;
  ErrorMap detect(const LabelVolume& proposal, const RawVolume* raw,
                  const Box3& region) const override;
  const ErrorWindowSpec& spec() const override { return oracle_.spec(); }

 private:
  OracleDetector oracle_;
  double fp_rate_;
  double fn_rate_;
  std::uint64_t seed_;
};

std::unique_ptr<DetectorBackend> noisy_detector(std::shared_ptr<const LabelVolume> gt,
                                                const ErrorWindowSpec& spec, double fp_rate,
                                                double fn_rate, std::uint64_t seed);

}  // namespace segfix
