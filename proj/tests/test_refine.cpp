#include <doctest.h>

#include "oracles.hpp"
#include "segfix/refine.hpp"
#include "segfix/synth.hpp"

using namespace segfix;

namespace {

struct Scene {
  std::shared_ptr<const LabelVolume> gt;
  LabelVolume supervoxels;
  std::vector<Mutation> mutations;
};

Scene scene(std::uint64_t seed, int merges, int splits, Shape3 shape = Shape3(48, 48, 12)) {
  SynthConfig sc;
  sc.shape = shape;
  sc.objects = 16;
  sc.min_extent = Shape3(6, 6, 3);
  sc.supervoxel_cell = Shape3(6, 6, 3);
  sc.seed = seed;
  auto vols = generate_gt(sc);
  MutationPlan plan;
  plan.merges = merges;
  plan.splits = splits;
  plan.seed = seed + 100;
  Scene s{std::make_shared<const LabelVolume>(std::move(vols.gt)), std::move(vols.supervoxels), {}};
  s.mutations = random_mutations(*s.gt, s.supervoxels, plan);
  return s;
}

SegmentationView view_of(const Scene& s) { return inject_errors(*s.gt, s.supervoxels, s.mutations); }

RefinementConfig small_config() {
  RefinementConfig c;
  c.corrector_window = Shape3(17, 17, 5);
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  RefinementConfig c;
  CHECK_NOTHROW(c.validate());
  c.max_visits = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.corrector_window = Shape3(4, 5, 5);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.lo = 0.9;
  c.hi = 0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.threshold = 2.0f;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(parse_visit_region(to_string(VisitRegion::central)) == VisitRegion::central);
  CHECK(parse_location_order("shuffled") == LocationOrder::shuffled);
  CHECK_THROWS_AS(parse_visit_region("everywhere"), std::invalid_argument);
}

TEST_CASE("a correct proposal needs no steps") {
  const Scene s = scene(3, 0, 0);
  const RefinementConfig cfg = small_config();
  const OracleDetector det(s.gt, cfg.error_window);
  const OracleCorrector cor(s.gt);
  RefinementState st = init_state(view_of(s), det, cfg);
  CHECK(st.error_voxels() == 0);
  for (auto v : st.visits.data()) CHECK(v == 0);
  const RefinementReport r = run(st, det, cor, cfg);
  CHECK(r.steps == 0);
  CHECK(r.termination == "error_map_clear");
}

TEST_CASE("an empty proposal takes zero steps") {
  const Scene s = scene(3, 0, 0);
  const RefinementConfig cfg = small_config();
  const OracleDetector det(s.gt, cfg.error_window);
  const OracleCorrector cor(s.gt);
  SegmentationView empty{LabelVolume(s.gt->shape(), 0), SegGraph{}};
  RefinementState st = init_state(std::move(empty), det, cfg);
  CHECK(run(st, det, cor, cfg).steps == 0);
}

TEST_CASE("initial map equals the oracle map of the injected proposal") {
  const Scene s = scene(4, 3, 3);
  const RefinementConfig cfg = small_config();
  const OracleDetector det(s.gt, cfg.error_window);
  const RefinementState st = init_state(view_of(s), det, cfg);
  const auto brute = oracle::combined_map(st.segmentation, *s.gt, cfg.error_window);
  for (std::size_t i = 0; i < brute.size(); ++i) CHECK(st.binary.values[i] == brute[i]);
  CHECK(st.error_voxels() > 0);
}

TEST_CASE("one step repairs a single merge") {
  // Two ground-truth slabs, one supervoxel each, joined by the proposal.
  auto gt = std::make_shared<LabelVolume>(Shape3(12, 8, 3), 0);
  for (std::size_t i = 0; i < gt->size(); ++i) (*gt)[i] = gt->point(i).x < 6 ? 1 : 2;
  const std::vector<Edge> merge{{1, 2}};
  SegmentationView view{*gt, SegGraph::build(*gt, merge)};
  RefinementConfig cfg;
  cfg.corrector_window = Shape3(9, 9, 3);
  cfg.error_window = ErrorWindowSpec(Shape3(3, 3, 1), BorderMode::clipped);
  const OracleDetector det(gt, cfg.error_window);
  const OracleCorrector cor(gt);
  RefinementState st = init_state(std::move(view), det, cfg);
  CHECK(st.error_voxels() > 0);
  CHECK(step(st, det, cor, cfg) == StepResult::applied);
  CHECK(st.error_voxels() == 0);
  CHECK(st.edges_removed == 1);
  CHECK(oracle::same_partition(st.segmentation, *gt));
  CHECK(step(st, det, cor, cfg) == StepResult::exhausted);
}

TEST_CASE("oracle backends restore the ground-truth partition") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Scene s = scene(seed, 4, 4);
    const RefinementConfig cfg = small_config();
    const OracleDetector det(s.gt, cfg.error_window);
    const OracleCorrector cor(s.gt);
    RefinementState st = init_state(view_of(s), det, cfg);
    const RefinementReport r = run(st, det, cor, cfg);
    CHECK(r.applied + r.abstained == r.steps);
    CHECK(r.final_error_voxels == 0);
    CHECK(oracle::same_partition(st.segmentation, *s.gt));
  }
}

TEST_CASE("an abstaining corrector stops at the visit bound") {
  const Scene s = scene(21, 3, 3);
  const ConstantCorrector abstain(0.5);
  for (VisitRegion region : {VisitRegion::window, VisitRegion::central, VisitRegion::central_segment}) {
    RefinementConfig cfg = small_config();
    cfg.visit_region = region;
    const OracleDetector det(s.gt, cfg.error_window);
    RefinementState st = init_state(view_of(s), det, cfg);
    const RefinementReport r = run(st, det, abstain, cfg);
    CHECK(r.abstained == r.steps);
    CHECK(r.steps <= static_cast<std::size_t>(cfg.max_visits) * r.initial_error_voxels);
    CHECK(r.final_error_voxels == r.initial_error_voxels);
    for (std::size_t i = 0; i < st.visits.size(); ++i) {
      if (st.binary.values[i] == 1.0f) CHECK(st.visits[i] >= cfg.max_visits);
    }
  }
}

TEST_CASE("visit regions") {
  const Scene s = scene(22, 2, 0);
  const ConstantCorrector abstain(0.5);
  RefinementConfig cfg = small_config();
  const OracleDetector det(s.gt, cfg.error_window);
  for (VisitRegion region : {VisitRegion::window, VisitRegion::central, VisitRegion::central_segment}) {
    cfg.visit_region = region;
    RefinementState st = init_state(view_of(s), det, cfg);
    const Point3 loc = *next_location(st, cfg);
    const Box3 w = window_box(st.segmentation.shape(), loc, cfg.corrector_window, cfg.corrector_border);
    const Box3 c = central_box(w, loc, cfg.corrector_window);
    const Label seg = st.segmentation[loc];
    CHECK(step(st, det, abstain, cfg) == StepResult::abstained);
    for (std::size_t i = 0; i < st.visits.size(); ++i) {
      const Point3 p = st.visits.point(i);
      bool expect = false;
      switch (region) {
        case VisitRegion::window: expect = w.contains(p); break;
        case VisitRegion::central: expect = c.contains(p); break;
        case VisitRegion::central_segment: expect = c.contains(p) && st.segmentation[p] == seg; break;
      }
      CHECK(st.visits[i] == (expect ? 1 : 0));
    }
  }
}

TEST_CASE("local updates match full recomputation after every step") {
  for (std::uint64_t seed : {31u, 32u, 33u, 34u}) {
    const Scene s = scene(seed, 3, 3, Shape3(36, 36, 9));
    RefinementConfig cfg = small_config();
    cfg.order = seed % 2 ? LocationOrder::shuffled : LocationOrder::lexicographic;
    cfg.seed = seed;
    const NoisyDetector det(s.gt, cfg.error_window, 0.02, 0.1, seed);
    const NoisyCorrector cor(s.gt, 0.05, 0.05, seed);
    RefinementState st = init_state(view_of(s), det, cfg);
    int applied = 0;
    for (;;) {
      const StepResult r = step(st, det, cor, cfg);
      if (r == StepResult::exhausted) break;
      CHECK(oracle::same_partition(st.segmentation, render_labels(st.view)));
      if (r != StepResult::applied) continue;
      ++applied;
      const ErrorMap full = det.detect(st.segmentation);
      CHECK(full.values == st.soft.values);
    }
    CHECK(applied > 0);
    CHECK(st.steps <= static_cast<std::size_t>(cfg.max_visits) * st.ever_marked_voxels());
  }
}

TEST_CASE("local update touches only the dilated supervoxel box") {
  const Scene s = scene(41, 2, 2, Shape3(36, 36, 9));
  RefinementConfig cfg = small_config();
  const OracleDetector det(s.gt, cfg.error_window);
  RefinementState st = init_state(view_of(s), det, cfg);
  const SupervoxelId sv = st.view.graph.vertices()[st.view.graph.vertices().size() / 2];
  const Box3 reach = st.extents.at(sv)
                         .bbox.dilate(cfg.error_window.rx(), cfg.error_window.ry(), cfg.error_window.rz())
                         .intersect(st.segmentation.bounds());
  for (auto& v : st.soft.values.data()) v = 0.5f;
  update_error_map_local(st, det, {sv});
  const ErrorMap full = det.detect(st.segmentation);
  for (std::size_t i = 0; i < full.values.size(); ++i) {
    const Point3 p = full.values.point(i);
    CHECK(st.soft.values[i] == (reach.contains(p) ? full.values[i] : 0.5f));
  }
  CHECK(cfg.error_window.rx() == 4);
  CHECK(cfg.error_window.rz() == 1);
}

TEST_CASE("noisy detection with an oracle corrector terminates within the bound") {
  const Scene s = scene(51, 4, 4);
  const RefinementConfig cfg = small_config();
  const NoisyDetector det(s.gt, cfg.error_window, 0.05, 0.0, 9);
  const OracleCorrector cor(s.gt);
  RefinementState st = init_state(view_of(s), det, cfg);
  const RefinementReport r = run(st, det, cor, cfg);
  CHECK(r.steps <= static_cast<std::size_t>(cfg.max_visits) * r.ever_error_voxels);
  CHECK(r.to_json(false).contains("steps"));
  CHECK_FALSE(r.to_json(false).contains("wall_seconds"));
}
