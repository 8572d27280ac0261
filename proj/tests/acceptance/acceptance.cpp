// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "segfix/corrector.hpp"
#include "segfix/metrics.hpp"
#include "segfix/refine.hpp"
#include "segfix/synth.hpp"

using namespace segfix;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

struct Scene {
  std::shared_ptr<const LabelVolume> gt;
  LabelVolume supervoxels;
  std::vector<Mutation> mutations;
  SegmentationView view() const { return inject_errors(*gt, supervoxels, mutations); }
};

Scene make_scene(const SynthConfig& sc, int merges, int splits, std::uint64_t seed) {
  SynthVolumes v = generate_gt(sc);
  MutationPlan plan;
  plan.merges = merges;
  plan.splits = splits;
  plan.seed = seed;
  Scene s{std::make_shared<const LabelVolume>(std::move(v.gt)), std::move(v.supervoxels), {}};
  s.mutations = random_mutations(*s.gt, s.supervoxels, plan);
  return s;
}

SynthConfig medium(std::uint64_t seed) {
  SynthConfig c;
  c.shape = Shape3(48, 48, 12);
  c.objects = 16;
  c.min_extent = Shape3(6, 6, 3);
  c.supervoxel_cell = Shape3(6, 6, 3);
  c.seed = seed;
  return c;
}

Outcome error_map_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  std::size_t mismatches = 0, voxels = 0;
  const int volumes = 100;
  for (int n = 0; n < volumes; ++n) {
    const Shape3 s(uniform_int(rng, 3, 24), uniform_int(rng, 3, 24), uniform_int(rng, 1, 8));
    const LabelVolume gt = oracle::random_blocks(s, uniform_int(rng, 1, 8), 0.05, rng);
    const LabelVolume prop = oracle::perturb(gt, rng);
    const ErrorWindowSpec spec(Shape3(2 * uniform_int(rng, 0, 4) + 1, 2 * uniform_int(rng, 0, 4) + 1,
                                      2 * uniform_int(rng, 0, 1) + 1),
                               n % 2 ? BorderMode::valid : BorderMode::clipped);
    const ErrorMap fast = combined_error_map(prop, gt, spec);
    const auto brute = oracle::combined_map(prop, gt, spec);
    for (std::size_t i = 0; i < brute.size(); ++i) mismatches += (fast.values[i] == 1.0f) != (brute[i] == 1);
    voxels += brute.size();

    const Label l = prop[uniform_below(rng, prop.size())];
    if (l == 0) continue;
    const ObjectMask obj = object_mask(prop, l);
    const ErrorMap one = oracle_error_map(obj, gt, spec);
    const auto ref = oracle::err_map(obj, gt, spec);
    for (std::size_t i = 0; i < ref.size(); ++i) mismatches += (one.values[i] == 1.0f) != (ref[i] == 1);
    voxels += ref.size();
  }
  const double secs = since(start);
  return {mismatches == 0 && secs < 60.0,
          fmt("%d volumes, %zu voxel comparisons, %zu mismatches, %.1f s", volumes, voxels, mismatches, secs)};
}

Outcome vi_decomposition() {
  Rng rng(102);
  double worst = 0.0;
  std::uint64_t largest = 0;
  for (int n = 0; n < 100; ++n) {
    std::vector<ContingencyTable::Entry> e;
    const int rows = uniform_int(rng, 1, 40), cols = uniform_int(rng, 1, 40), cells = uniform_int(rng, 1, 400);
    const std::uint64_t budget = 1 + uniform_below(rng, 1000000);
    for (int k = 0; k < cells; ++k) {
      e.push_back({static_cast<Label>(uniform_int(rng, 1, rows)), static_cast<Label>(uniform_int(rng, 1, cols)),
                   1 + uniform_below(rng, std::max<std::uint64_t>(1, budget / cells))});
    }
    const ContingencyTable t(std::move(e));
    largest = std::max(largest, t.total());
    const ViScores v = vi_scores(t);
    double split = 0.0, merge = 0.0;
    for (const auto& o : per_object_vi(t)) {
      split += o.weight * o.vi_split;
      merge += o.weight * o.vi_merge;
    }
    worst = std::max({worst, std::abs(v.vi_split - split), std::abs(v.vi_merge - merge)});
  }
  return {worst <= 1e-9, fmt("100 tables (largest total %llu), max deviation %.3g",
                             static_cast<unsigned long long>(largest), worst)};
}

Outcome hand_metrics() {
  LabelVolume two(Shape3(4, 4, 1), 0), one(Shape3(4, 4, 1), 1);
  for (std::size_t i = 0; i < two.size(); ++i) two[i] = two.point(i).x < 2 ? 1 : 2;
  auto vec = [](const ContingencyTable& t) {
    const ViScores v = vi_scores(t);
    const RandScores r = rand_scores(t);
    return std::vector<double>{v.vi_split, v.vi_merge, r.rand_recall, r.rand_precision};
  };
  const double ln2 = std::log(2.0);
  const auto merged = vec(contingency(two, one)), split = vec(contingency(one, two));
  const std::vector<double> want_merged{0.0, ln2, 1.0, 0.5}, want_split{ln2, 0.0, 0.5, 1.0};
  double worst = 0.0;
  for (int k = 0; k < 4; ++k) {
    worst = std::max({worst, std::abs(merged[k] - want_merged[k]), std::abs(split[k] - want_split[k])});
  }
  return {worst <= 1e-12,
          fmt("merged (%.6f, %.6f, %.3f, %.3f), split (%.6f, %.6f, %.3f, %.3f), max error %.3g", merged[0],
              merged[1], merged[2], merged[3], split[0], split[1], split[2], split[3], worst)};
}

Outcome oracle_refinement() {
  const auto start = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.shape = Shape3(128, 128, 32);
  sc.objects = 40;
  sc.min_extent = Shape3(8, 8, 4);
  sc.supervoxel_cell = Shape3(16, 16, 8);
  sc.seed = 1;
  const Scene s = make_scene(sc, 50, 50, 1);
  const std::set<Label> objects(s.gt->data().begin(), s.gt->data().end());
  const std::size_t object_count = objects.size() - objects.count(0);

  const RefinementConfig cfg;
  const OracleDetector det(s.gt, cfg.error_window);
  const OracleCorrector cor(s.gt);
  RefinementState st = init_state(s.view(), det, cfg);
  const LabelVolume initial = st.segmentation;
  const RefinementReport r = run(st, det, cor, cfg);

  const ViScores vi = vi_scores(contingency(*s.gt, st.segmentation));
  std::vector<Point3> witnesses;
  for (const auto& m : s.mutations) witnesses.push_back(m.witness);
  const MutationPlan plan;
  const PointErrorCounts c = count_point_errors(point_errors(*s.gt, initial, witnesses, plan.witness_window),
                                                point_errors(*s.gt, st.segmentation, witnesses, plan.witness_window));
  const double secs = since(start);
  const bool pass = object_count >= 20 && s.mutations.size() == 100 && vi.vi_split == 0.0 &&
                    vi.vi_merge == 0.0 && oracle::same_partition(st.segmentation, *s.gt) &&
                    c.fixed == 100 && c.introduced == 0 && secs < 300.0;
  return {pass, fmt("%zu objects, %zu steps, VI (%.3g, %.3g), fixed %zu, introduced %zu, %.1f s", object_count,
                    r.steps, vi.vi_split, vi.vi_merge, c.fixed, c.introduced, secs)};
}

Outcome termination_bound() {
  const ConstantCorrector abstain(0.5);
  RefinementConfig cfg;
  cfg.corrector_window = Shape3(17, 17, 5);
  bool pass = true;
  std::size_t worst_steps = 0, worst_bound = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Scene s = make_scene(medium(seed), 3, 3, seed + 50);
    const OracleDetector det(s.gt, cfg.error_window);
    RefinementState st = init_state(s.view(), det, cfg);
    const RefinementReport r = run(st, det, abstain, cfg);
    const std::size_t bound = static_cast<std::size_t>(cfg.max_visits) * r.initial_error_voxels;
    pass = pass && r.steps <= bound && r.termination == "visit_limit";
    if (seed == 1 || r.steps * worst_bound > worst_steps * bound) {
      worst_steps = r.steps;
      worst_bound = bound;
    }
  }
  return {pass, fmt("10 instances, tightest %zu calls against bound %zu", worst_steps, worst_bound)};
}

Outcome advice_superset() {
  const Shape3 win(17, 17, 5);
  const ErrorWindowSpec det_window(win, BorderMode::clipped);
  std::size_t held = 0, tasks = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    SynthConfig sc = medium(seed);
    sc.shape = Shape3(64, 64, 16);
    sc.objects = 24;
    const Scene s = make_scene(sc, 5, 5, seed + 200);
    const LabelVolume seg = render_labels(s.view());
    const ErrorMap err = binarize(combined_error_map(seg, *s.gt, det_window), 0.25f);
    Rng rng(seed);
    for (int k = 0; k < 250;) {
      const Point3 c = seg.point(uniform_below(rng, seg.size()));
      if (seg[c] == 0 || (*s.gt)[c] == 0) continue;
      ++k;
      ++tasks;
      const PruningTask t = advice_mask(seg, s.supervoxels, err, c, win, BorderMode::clipped);
      const LabelVolume gw = s.gt->crop(t.window);
      bool ok = true;
      for (std::size_t i = 0; i < gw.size() && ok; ++i) ok = gw[i] != (*s.gt)[c] || t.candidate[i];
      held += ok;
    }
  }
  return {held == tasks && tasks == 1000, fmt("containment in %zu/%zu tasks", held, tasks)};
}

Outcome local_update_fidelity() {
  RefinementConfig cfg;
  cfg.corrector_window = Shape3(17, 17, 5);
  std::size_t checks = 0, mismatched = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthConfig sc = medium(seed + 300);
    sc.shape = Shape3(40, 40, 10);
    sc.objects = 12;
    const Scene s = make_scene(sc, 3, 3, seed + 400);
    cfg.order = seed % 2 ? LocationOrder::shuffled : LocationOrder::lexicographic;
    cfg.seed = seed;
    const NoisyDetector det(s.gt, cfg.error_window, 0.02, 0.1, seed);
    const NoisyCorrector cor(s.gt, 0.05, 0.05, seed);
    RefinementState st = init_state(s.view(), det, cfg);
    for (;;) {
      const StepResult r = step(st, det, cor, cfg);
      if (r == StepResult::exhausted) break;
      if (r != StepResult::applied) continue;
      ++checks;
      const ErrorMap full = det.detect(st.segmentation);
      mismatched += !(full.values == st.soft.values) ||
                    !(binarize(full, cfg.threshold).values == st.binary.values);
    }
  }
  return {checks > 0 && mismatched == 0,
          fmt("20 runs, %zu applied steps checked, %zu mismatched", checks, mismatched)};
}

Outcome detector_operating_point() {
  const double fp = 0.015, fn = 0.03;
  RefinementConfig cfg;
  EvalPointConfig ep;
  ep.large = ErrorWindowSpec(Shape3(21, 21, 5), BorderMode::clipped);
  ep.small = ErrorWindowSpec(Shape3(11, 11, 3), BorderMode::clipped);
  ep.spacing = Shape3(10, 10, 3);
  ep.sampling_window = Shape3(33, 33, 9);
  ep.candidates = 20000;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::size_t before = 0, after = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc;
    sc.shape = Shape3(128, 128, 32);
    sc.objects = 40;
    sc.min_extent = Shape3(8, 8, 4);
    sc.supervoxel_cell = Shape3(16, 16, 8);
    sc.seed = seed;
    const Scene s = make_scene(sc, 50, 50, seed);
    const SegmentationView view = s.view();
    const LabelVolume initial = render_labels(view);
    ep.seed = seed;
    const auto pts = select_eval_points(*s.gt, initial, ep);
    const NoisyDetector small(s.gt, ep.small, fp, fn, seed);
    const ErrorMap score_map = small.detect(initial);
    std::vector<Point3> where;
    for (const auto& p : pts) {
      where.push_back(p.point);
      scores.push_back(score_map.at(p.point));
      labels.push_back(p.erroneous);
    }
    const NoisyDetector det(s.gt, cfg.error_window, fp, fn, seed);
    const OracleCorrector cor(s.gt);
    RefinementState st = init_state(view, det, cfg);
    run(st, det, cor, cfg);
    const PointErrorCounts c = count_point_errors(
        std::vector<std::uint8_t>(labels.end() - static_cast<long>(pts.size()), labels.end()),
        point_errors(*s.gt, st.segmentation, where, ep.small));
    before += c.errors_before;
    after += c.errors_after;
  }
  bool operating = false;
  double best_p = 0.0, best_r = 0.0;
  for (const auto& p : pr_curve(scores, labels)) {
    if (p.recall > 0.95 && p.precision > 0.85) {
      operating = true;
      best_p = p.precision;
      best_r = p.recall;
    }
  }
  const bool halved = before > 0 && 2 * after <= before;
  return {scores.size() >= 5000 && operating && halved,
          fmt("%zu points, %s (precision %.3f, recall %.3f), errors %zu -> %zu", scores.size(),
              operating ? "operating point found" : "no threshold meets the operating point", best_p, best_r,
              before, after)};
}

Outcome transform_checks() {
  Rng rng(109);
  double central = 0.0, formula = 0.0, iso = 0.0;
  const Box3 box{{0, 0, 0}, {6, 5, 4}};
  for (int n = 0; n < 50; ++n) {
    VectorField v(box, 6);
    for (auto& x : v.data) x = 3.0 * uniform01(rng) - 1.5;
    const std::size_t c = uniform_below(rng, box.count());
    const std::vector<double> anchor(v.at(c).begin(), v.at(c).end());
    const SoftMask m = mask_from_vector_field(v, anchor);
    central = std::max(central, std::abs(m.values[c] - 1.0));
    for (std::size_t i = 0; i < box.count(); ++i) {
      double d2 = 0.0;
      for (int k = 0; k < 6; ++k) d2 += (v.at(i)[k] - anchor[k]) * (v.at(i)[k] - anchor[k]);
      formula = std::max(formula, std::abs(m.values[i] - std::exp(-d2)));
    }
    const auto q = oracle::random_orthogonal(6, rng);
    VectorField w(box, 6);
    std::vector<double> anchor2(6, 0.0);
    for (std::size_t i = 0; i < box.count(); ++i)
      for (int r = 0; r < 6; ++r)
        for (int k = 0; k < 6; ++k) w.at(i)[r] += q[r * 6 + k] * v.at(i)[k];
    for (int r = 0; r < 6; ++r)
      for (int k = 0; k < 6; ++k) anchor2[r] += q[r * 6 + k] * anchor[k];
    const SoftMask m2 = mask_from_vector_field(w, anchor2);
    for (std::size_t i = 0; i < box.count(); ++i) iso = std::max(iso, std::abs(m.values[i] - m2.values[i]));
  }
  return {central == 0.0 && formula <= 1e-12 && iso <= 1e-9,
          fmt("|M(central)-1| = %.3g, formula error %.3g, isometry error %.3g", central, formula, iso)};
}

Outcome sampling_law() {
  LabelVolume seg(Shape3(4, 4, 2), 0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) seg(x, y, 0) = 1;
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 3; ++x) seg(x, y, 1) = 2;
  const Shape3 window(7, 7, 1);
  const std::size_t draws = 10000;
  const Volume<double> w = sampling_weights(seg, window);
  std::vector<std::size_t> counts(seg.size(), 0);
  for (const auto& p : sample_locations(seg, draws, window, 110)) ++counts[seg.index(p)];
  double total = 0.0;
  for (double x : w.data()) total += x;
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double expected = static_cast<double>(draws) * w[i] / total;
    stat += (counts[i] - expected) * (counts[i] - expected) / expected;
    ++cells;
  }
  const boost::math::chi_squared dist(cells - 1);
  const double critical = boost::math::quantile(dist, 0.99);
  return {stat < critical, fmt("chi-square %.2f on %d degrees of freedom, critical %.2f", stat, cells - 1, critical)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"error map oracle equivalence", error_map_equivalence},
      {"VI decomposition identity", vi_decomposition},
      {"hand-computed metric vectors", hand_metrics},
      {"oracle end-to-end refinement", oracle_refinement},
      {"termination bound", termination_bound},
      {"advice superset", advice_superset},
      {"local update fidelity", local_update_fidelity},
      {"detector operating point", detector_operating_point},
      {"vector field transform", transform_checks},
      {"sampling law", sampling_law},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
