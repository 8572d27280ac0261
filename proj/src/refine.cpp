#include "segfix/refine.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <stdexcept>

#include "segfix/rng.hpp"

namespace segfix {

LocationOrder parse_location_order(const std::string& s) {
  if (s == "lexicographic") return LocationOrder::lexicographic;
  if (s == "shuffled") return LocationOrder::shuffled;
  throw std::invalid_argument("unknown location order '" + s + "'");
}

std::string to_string(LocationOrder o) {
  return o == LocationOrder::lexicographic ? "lexicographic" : "shuffled";
}

VisitRegion parse_visit_region(const std::string& s) {
  if (s == "window") return VisitRegion::window;
  if (s == "central") return VisitRegion::central;
  if (s == "central_segment") return VisitRegion::central_segment;
  throw std::invalid_argument("unknown visit region '" + s + "'");
}

std::string to_string(VisitRegion r) {
  switch (r) {
    case VisitRegion::window: return "window";
    case VisitRegion::central: return "central";
    default: return "central_segment";
  }
}

std::string to_string(StepResult r) {
  switch (r) {
    case StepResult::applied: return "applied";
    case StepResult::abstained: return "abstained";
    default: return "exhausted";
  }
}

void RefinementConfig::validate() const {
  if (!corrector_window.odd()) {
    throw std::invalid_argument("corrector window dimensions must be odd");
  }
  if (max_visits < 1) throw std::invalid_argument("max_visits must be >= 1");
  if (!(threshold >= 0.0f && threshold <= 1.0f)) {
    throw std::invalid_argument("binarization threshold must lie in [0, 1]");
  }
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) {
    throw std::invalid_argument("confidence band must satisfy 0 <= lo < hi <= 1");
  }
}

std::size_t RefinementState::error_voxels() const {
  return static_cast<std::size_t>(
      std::count(binary.values.data().begin(), binary.values.data().end(), 1.0f));
}

std::size_t RefinementState::ever_marked_voxels() const {
  return static_cast<std::size_t>(
      std::count(ever_marked.data().begin(), ever_marked.data().end(), std::uint8_t{1}));
}

nlohmann::json RefinementReport::to_json(bool with_timing) const {
  nlohmann::json j{{"steps", steps},
                   {"corrector_calls", steps},
                   {"applied", applied},
                   {"abstained", abstained},
                   {"edges_added", edges_added},
                   {"edges_removed", edges_removed},
                   {"initial_error_voxels", initial_error_voxels},
                   {"ever_error_voxels", ever_error_voxels},
                   {"final_error_voxels", final_error_voxels},
                   {"termination", termination}};
  if (with_timing) j["wall_seconds"] = wall_seconds;
  return j;
}

namespace {

void mark(RefinementState& state, const ErrorMap& part) {
  const ErrorMap bin = binarize(part, state.threshold);
  state.soft.paste(part);
  state.binary.paste(bin);
  const Box3& b = part.box;
  for (int z = b.min.z; z < b.max.z; ++z) {
    for (int y = b.min.y; y < b.max.y; ++y) {
      for (int x = b.min.x; x < b.max.x; ++x) {
        const Point3 p{x, y, z};
        if (bin.at(p) == 1.0f) state.ever_marked[p] = 1;
      }
    }
  }
}

}  // namespace

RefinementState init_state(SegmentationView view, const DetectorBackend& detector,
                           const RefinementConfig& config, std::shared_ptr<const RawVolume> raw) {
  config.validate();
  RefinementState s;
  s.view = std::move(view);
  const LabelVolume& sv = s.view.supervoxels;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const Label l = sv[i];
    if (l == 0) continue;
    if (!s.view.graph.has_vertex(l)) {
      throw std::invalid_argument("init_state: supervoxel " + std::to_string(l) +
                                  " missing from the graph");
    }
    auto [it, fresh] = s.extents.try_emplace(l);
    const Point3 p = sv.point(i);
    it->second.bbox = fresh ? Box3{p, {p.x + 1, p.y + 1, p.z + 1}} : it->second.bbox.hull(p);
    it->second.voxels.push_back(static_cast<std::uint32_t>(i));
  }
  s.segmentation = render_labels(s.view);
  s.raw = std::move(raw);
  s.threshold = config.threshold;
  s.soft = ErrorMap(sv.bounds(), detector.spec());
  s.binary = ErrorMap(sv.bounds(), detector.spec());
  s.visits = Volume<std::uint16_t>(sv.shape(), 0);
  s.ever_marked = Volume<std::uint8_t>(sv.shape(), 0);
  mark(s, detector.detect(s.segmentation, s.raw.get(), sv.bounds()));
  s.initial_error_voxels = s.error_voxels();
  if (config.order == LocationOrder::shuffled) {
    s.scan_order.resize(sv.size());
    for (std::uint32_t i = 0; i < s.scan_order.size(); ++i) s.scan_order[i] = i;
    Rng rng(config.seed);
    for (std::size_t i = s.scan_order.size(); i > 1; --i) {
      std::swap(s.scan_order[i - 1], s.scan_order[uniform_below(rng, i)]);
    }
  }
  return s;
}

std::optional<Point3> next_location(const RefinementState& state, const RefinementConfig& config) {
  const auto& err = state.binary.values.data();
  const auto& visits = state.visits.data();
  const auto limit = static_cast<std::uint16_t>(config.max_visits);
  if (state.scan_order.empty()) {
    for (std::size_t i = 0; i < err.size(); ++i) {
      if (err[i] == 1.0f && visits[i] < limit) return state.visits.point(i);
    }
  } else {
    for (std::uint32_t i : state.scan_order) {
      if (err[i] == 1.0f && visits[i] < limit) return state.visits.point(i);
    }
  }
  return std::nullopt;
}

void update_error_map_local(RefinementState& state, const DetectorBackend& detector,
                            const std::vector<SupervoxelId>& changed) {
  const ErrorWindowSpec& spec = detector.spec();
  const Box3 bounds = state.segmentation.bounds();
  for (SupervoxelId s : changed) {
    auto it = state.extents.find(s);
    if (it == state.extents.end()) continue;
    const Box3 region = it->second.bbox.dilate(spec.rx(), spec.ry(), spec.rz()).intersect(bounds);
    mark(state, detector.detect(state.segmentation, state.raw.get(), region));
  }
}

StepResult step(RefinementState& state, const DetectorBackend& detector,
                const CorrectorBackend& corrector, const RefinementConfig& config) {
  const auto where = next_location(state, config);
  if (!where) return StepResult::exhausted;
  const Point3 loc = *where;
  const Label center_segment = state.segmentation[loc];

  PruningTask task = advice_mask(state.segmentation, state.view.supervoxels, state.binary, loc,
                                 config.corrector_window, config.corrector_border);
  if (state.raw) task.raw = state.raw->crop(task.window);
  const SoftMask m = corrector.correct(task);
  const Box3 central = central_box(task.window, loc, config.corrector_window);
  const auto scores = score_supervoxels(m, task.supervoxels, central);
  const SupervoxelDecision d = decide(scores, config.lo, config.hi);

  // segment membership must be read before the graph changes
  std::vector<std::uint8_t> own;
  if (config.visit_region == VisitRegion::central_segment) {
    own.reserve(central.count());
    for (int z = central.min.z; z < central.max.z; ++z) {
      for (int y = central.min.y; y < central.max.y; ++y) {
        for (int x = central.min.x; x < central.max.x; ++x) {
          own.push_back(state.segmentation(x, y, z) == center_segment ? 1 : 0);
        }
      }
    }
  }

  StepResult result = StepResult::abstained;
  if (!d.abstain) {
    SegGraph& g = state.view.graph;
    std::size_t added = 0, removed = 0;
    for (std::size_t i = 0; i < d.merge.size(); ++i) {
      for (std::size_t j = i + 1; j < d.merge.size(); ++j) {
        if (!g.has_edge(d.merge[i], d.merge[j])) ++added;
      }
    }
    for (SupervoxelId a : d.cut) {
      for (SupervoxelId b : d.merge) {
        if (g.has_edge(a, b)) ++removed;
      }
    }
    const auto changed = g.apply(d.merge, d.cut, d.merge);
    for (SupervoxelId s : changed) {
      auto it = state.extents.find(s);
      if (it == state.extents.end()) continue;
      const Label seg = g.component(s);
      for (std::uint32_t i : it->second.voxels) state.segmentation[i] = seg;
    }
    update_error_map_local(state, detector, changed);
    state.edges_added += added;
    state.edges_removed += removed;
    ++state.applied;
    result = StepResult::applied;
  } else {
    ++state.abstained;
  }

  const Box3& w = config.visit_region == VisitRegion::window ? task.window : central;
  std::size_t k = 0;
  for (int z = w.min.z; z < w.max.z; ++z) {
    for (int y = w.min.y; y < w.max.y; ++y) {
      for (int x = w.min.x; x < w.max.x; ++x, ++k) {
        if (!own.empty() && !own[k]) continue;
        auto& v = state.visits(x, y, z);
        if (v < UINT16_MAX) ++v;
      }
    }
  }
  ++state.steps;
  return result;
}

RefinementReport run(RefinementState& state, const DetectorBackend& detector,
                     const CorrectorBackend& corrector, const RefinementConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  while (step(state, detector, corrector, config) != StepResult::exhausted) {
  }
  RefinementReport r;
  r.steps = state.steps;
  r.applied = state.applied;
  r.abstained = state.abstained;
  r.edges_added = state.edges_added;
  r.edges_removed = state.edges_removed;
  r.initial_error_voxels = state.initial_error_voxels;
  r.ever_error_voxels = state.ever_marked_voxels();
  r.final_error_voxels = state.error_voxels();
  r.termination = r.final_error_voxels == 0 ? "error_map_clear" : "visit_limit";
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace segfix
