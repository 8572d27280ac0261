#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "segfix/errormap.hpp"
#include "segfix/svgraph.hpp"
#include "segfix/volume.hpp"

namespace segfix {

/// Parameters of the synthetic ground truth. Objects come from a random
/// axis-aligned k-d partition of the volume: elongated cells act as tubes,
/// and a fraction are drawn as inscribed ellipsoids (blobs). Each object is
/// cut into supervoxels by a regular grid.
struct SynthConfig {
  Shape3 shape{64, 64, 16};
  int objects = 24;
  Shape3 min_extent{4, 4, 2};
  Shape3 supervoxel_cell{8, 8, 4};
  double blob_fraction = 0.25;
  /// Background gap left on the upper faces of each object.
  int membrane = 0;
  /// Adjacent supervoxel pairs from different objects fused into one label.
  int corrupt_supervoxels = 0;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthVolumes {
  LabelVolume gt;
  LabelVolume supervoxels;
};

SynthVolumes generate_gt(const SynthConfig& config);

/// Majority ground-truth object of every supervoxel.
std::map<SupervoxelId, Label> supervoxel_objects(const LabelVolume& gt,
                                                 const LabelVolume& supervoxels);

/// Edges joining face-adjacent supervoxels of the same ground-truth object;
/// their components reproduce the ground-truth partition.
std::vector<Edge> ground_truth_edges(const LabelVolume& gt, const LabelVolume& supervoxels);

struct Mutation {
  enum class Kind { merge, split };

  Kind kind = Kind::merge;
  /// Merge: the two objects joined. Split: `a` is the object cut.
  Label a = 0;
  Label b = 0;
  /// Merge: supervoxel of `a` linked to supervoxel of `b`.
  Edge link{0, 0};
  /// Split: supervoxels of `a` on one side of the cut.
  std::vector<SupervoxelId> side;
  /// A voxel next to the injected error.
  Point3 witness;

  nlohmann::json to_json() const;
  static Mutation from_json(const nlohmann::json& j);
};

/// Ground-truth graph with `mutations` applied: splits remove the edges
/// across their bipartition, merges add their link edge.
SegmentationView inject_errors(const LabelVolume& gt, const LabelVolume& supervoxels,
                               const std::vector<Mutation>& mutations);

struct MutationPlan {
  int merges = 0;
  int splits = 0;
  /// Largest voxel distance between two objects that may be merged.
  int max_gap = 1;
  /// Every witness must be flagged by the oracle under this window.
  ErrorWindowSpec witness_window{Shape3{3, 3, 3}, BorderMode::clipped};
  std::uint64_t seed = 1;
};

/// Random merges of nearby object pairs and splits along supervoxel grid
/// planes. Pairs and planes are distinct, witnesses are distinct, and each
/// witness stays an error once all mutations are applied.
std::vector<Mutation> random_mutations(const LabelVolume& gt, const LabelVolume& supervoxels,
                                       const MutationPlan& plan);

/// Inverse occupancy weights: 1 / (fraction of the clipped window at v
/// occupied by v's object); 0 on background.
Volume<double> sampling_weights(const LabelVolume& seg, const Shape3& window);

inline const Shape3 kSamplingWindow{129, 129, 17};

std::vector<Point3> sample_locations(const LabelVolume& seg, std::size_t n, const Shape3& window,
                                     std::uint64_t seed);

struct EvalPoint {
  Point3 point;
  Label object = 0;
  /// 1 iff the proposal object has an error within the small window.
  std::uint8_t erroneous = 0;
};

struct EvalPointConfig {
  ErrorWindowSpec large{Shape3{81, 81, 9}, BorderMode::clipped};
  ErrorWindowSpec small{Shape3{41, 41, 5}, BorderMode::clipped};
  Shape3 spacing{80, 80, 8};
  Shape3 sampling_window = kSamplingWindow;
  std::size_t candidates = 10000;
  std::uint64_t seed = 1;
};

/// Candidates drawn by inverse-occupancy sampling on the proposal; a point is
/// dropped when its large window has an error but its small one does not, or
/// when a kept point of the same object lies closer than `spacing` on every
/// axis.
std::vector<EvalPoint> select_eval_points(const LabelVolume& gt, const LabelVolume& proposal,
                                          const EvalPointConfig& config);

/// Small-window error decision at each point for `proposal`.
std::vector<std::uint8_t> point_errors(const LabelVolume& gt, const LabelVolume& proposal,
                                       const std::vector<Point3>& points,
                                       const ErrorWindowSpec& window);

}  // namespace segfix
