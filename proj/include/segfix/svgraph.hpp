#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "segfix/volume.hpp"

namespace segfix {

using SupervoxelId = Label;
using Edge = std::pair<SupervoxelId, SupervoxelId>;

/// Undirected graph over supervoxels. Segments are its connected components,
/// named by their smallest member id.
///
/// Edge insertions and deletions recompute connectivity only for the
/// components that contain a touched vertex, so deletions that split a
/// component are handled exactly.
class SegGraph {
 public:
  SegGraph() = default;
  SegGraph(std::vector<SupervoxelId> vertices, std::span<const Edge> edges);

  /// One vertex per distinct nonzero label of `supervoxels`.
  static SegGraph build(const LabelVolume& supervoxels, std::span<const Edge> initial_merges);

  bool has_vertex(SupervoxelId v) const { return index_.contains(v); }
  bool has_edge(SupervoxelId a, SupervoxelId b) const;
  /// Canonical component id (minimum member) of `v`.
  SupervoxelId component(SupervoxelId v) const;
  std::size_t component_count() const;
  std::size_t vertex_count() const { return ids_.size(); }
  std::size_t edge_count() const;

  const std::vector<SupervoxelId>& vertices() const { return ids_; }
  /// Edges with a < b, sorted.
  std::vector<Edge> edges() const;
  /// Members of every component, keyed by canonical id.
  std::vector<std::vector<SupervoxelId>> components() const;

  void add_clique(std::span<const SupervoxelId> members);
  void cut_between(std::span<const SupervoxelId> a, std::span<const SupervoxelId> b);

  /// Adds a clique on `clique`, then removes every edge between `cut_a` and
  /// `cut_b`, recomputing components once. Returns the vertices whose
  /// component (as a member set) changed, sorted.
  std::vector<SupervoxelId> apply(std::span<const SupervoxelId> clique,
                                  std::span<const SupervoxelId> cut_a,
                                  std::span<const SupervoxelId> cut_b);

  nlohmann::json to_json() const;
  static SegGraph from_json(const nlohmann::json& j);

 private:
  std::uint32_t slot(SupervoxelId v) const;
  std::vector<std::uint32_t> slots(std::span<const SupervoxelId> ids) const;
  /// Relabels the components reachable from `seeds`; returns changed vertices.
  std::vector<SupervoxelId> recompute(const std::vector<std::uint32_t>& seeds);

  std::vector<SupervoxelId> ids_;
  std::unordered_map<SupervoxelId, std::uint32_t> index_;
  std::vector<std::set<std::uint32_t>> adj_;
  std::vector<SupervoxelId> comp_;
};

/// A supervoxel volume together with the graph that groups it into segments.
struct SegmentationView {
  LabelVolume supervoxels;
  SegGraph graph;
};

/// Every voxel gets the canonical component id of its supervoxel; 0 stays 0.
LabelVolume render_labels(const SegmentationView& view);

/// Component ids with at least one voxel in `box` (clipped to the volume).
std::set<SupervoxelId> segments_touching(const SegmentationView& view, const Box3& box);

/// Face-adjacent pairs (a < b) of distinct nonzero labels.
std::vector<Edge> adjacent_pairs(const LabelVolume& labels);

}  // namespace segfix
