#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "segfix/corrector.hpp"
#include "segfix/errormap.hpp"
#include "segfix/svgraph.hpp"

namespace segfix {

enum class LocationOrder { lexicographic, shuffled };

LocationOrder parse_location_order(const std::string& s);
std::string to_string(LocationOrder o);

/// Voxels whose visit count a corrector call increments: its whole window,
/// the central box its decisions apply to, or the part of that box in the
/// segment under the center (the object the corrector reconstructs).
enum class VisitRegion { window, central, central_segment };

VisitRegion parse_visit_region(const std::string& s);
std::string to_string(VisitRegion r);

struct RefinementConfig {
  Shape3 corrector_window{33, 33, 9};
  BorderMode corrector_border = BorderMode::clipped;
  ErrorWindowSpec error_window{Shape3{9, 9, 3}, BorderMode::clipped};
  float threshold = 0.25f;
  double lo = 0.1;
  double hi = 0.9;
  int max_visits = 2;
  LocationOrder order = LocationOrder::lexicographic;
  VisitRegion visit_region = VisitRegion::central_segment;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SupervoxelExtent {
  Box3 bbox;
  std::vector<std::uint32_t> voxels;
};

struct RefinementState {
  SegmentationView view;
  /// Rendered segment labels, kept in step with view.graph.
  LabelVolume segmentation;
  std::unordered_map<SupervoxelId, SupervoxelExtent> extents;
  std::shared_ptr<const RawVolume> raw;
  ErrorMap soft;
  ErrorMap binary;
  Volume<std::uint16_t> visits;
  /// Voxels marked 1 at any point of the run.
  Volume<std::uint8_t> ever_marked;
  std::vector<std::uint32_t> scan_order;
  float threshold = 0.25f;
  std::size_t steps = 0;
  std::size_t applied = 0;
  std::size_t abstained = 0;
  std::size_t edges_added = 0;
  std::size_t edges_removed = 0;
  std::size_t initial_error_voxels = 0;

  std::size_t error_voxels() const;
  std::size_t ever_marked_voxels() const;
};

enum class StepResult { applied, abstained, exhausted };

std::string to_string(StepResult r);

struct RefinementReport {
  std::size_t steps = 0;
  std::size_t applied = 0;
  std::size_t abstained = 0;
  std::size_t edges_added = 0;
  std::size_t edges_removed = 0;
  std::size_t initial_error_voxels = 0;
  std::size_t ever_error_voxels = 0;
  std::size_t final_error_voxels = 0;
  double wall_seconds = 0.0;
  std::string termination;

  nlohmann::json to_json(bool with_timing = true) const;
};

RefinementState init_state(SegmentationView view, const DetectorBackend& detector,
                           const RefinementConfig& config,
                           std::shared_ptr<const RawVolume> raw = nullptr);

/// First error voxel with fewer than max_visits visits, in the configured order.
std::optional<Point3> next_location(const RefinementState& state, const RefinementConfig& config);

StepResult step(RefinementState& state, const DetectorBackend& detector,
                const CorrectorBackend& corrector, const RefinementConfig& config);

RefinementReport run(RefinementState& state, const DetectorBackend& detector,
                     const CorrectorBackend& corrector, const RefinementConfig& config);

/// Re-runs the detector over the bounding boxes of `changed` supervoxels,
/// dilated by the detector's window radius.
void update_error_map_local(RefinementState& state, const DetectorBackend& detector,
                            const std::vector<SupervoxelId>& changed);

}  // namespace segfix
