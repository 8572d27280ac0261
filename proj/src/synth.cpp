#include "segfix/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "segfix/box_sum.hpp"
#include "segfix/rng.hpp"

namespace segfix {

using json = nlohmann::json;

namespace {

Shape3 shape_from_json(const json& j) {
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 3) throw std::invalid_argument("shape must have three entries");
  return Shape3(v[0], v[1], v[2]);
}

json shape_to_json(const Shape3& s) { return json::array({s.x, s.y, s.z}); }

}  // namespace

json SynthConfig::to_json() const {
  return json{{"shape", shape_to_json(shape)},
              {"objects", objects},
              {"min_extent", shape_to_json(min_extent)},
              {"supervoxel_cell", shape_to_json(supervoxel_cell)},
              {"blob_fraction", blob_fraction},
              {"membrane", membrane},
              {"corrupt_supervoxels", corrupt_supervoxels},
              {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  if (j.contains("shape")) c.shape = shape_from_json(j.at("shape"));
  if (j.contains("objects")) c.objects = j.at("objects").get<int>();
  if (j.contains("min_extent")) c.min_extent = shape_from_json(j.at("min_extent"));
  if (j.contains("supervoxel_cell")) c.supervoxel_cell = shape_from_json(j.at("supervoxel_cell"));
  if (j.contains("blob_fraction")) c.blob_fraction = j.at("blob_fraction").get<double>();
  if (j.contains("membrane")) c.membrane = j.at("membrane").get<int>();
  if (j.contains("corrupt_supervoxels")) {
    c.corrupt_supervoxels = j.at("corrupt_supervoxels").get<int>();
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

SynthVolumes generate_gt(const SynthConfig& config) {
  if (config.objects < 1) throw std::invalid_argument("generate_gt: need at least one object");
  if (config.membrane < 0) throw std::invalid_argument("generate_gt: membrane must be >= 0");
  Rng rng(config.seed);

  std::vector<Box3> leaves{Box3::of(config.shape)};
  while (static_cast<int>(leaves.size()) < config.objects) {
    // split the largest leaf that still has room on some axis
    std::size_t best = leaves.size();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const Shape3 s = leaves[i].shape();
      bool splittable = false;
      for (int a = 0; a < 3; ++a) splittable |= s[a] >= 2 * config.min_extent[a];
      if (splittable && (best == leaves.size() || s.count() > leaves[best].shape().count())) {
        best = i;
      }
    }
    if (best == leaves.size()) {
      throw std::invalid_argument("generate_gt: volume too small for " +
                                  std::to_string(config.objects) + " objects");
    }
    const Box3 box = leaves[best];
    const Shape3 s = box.shape();
    std::vector<int> axes;
    for (int a = 0; a < 3; ++a) {
      if (s[a] >= 2 * config.min_extent[a]) axes.push_back(a);
    }
    const int axis = axes[uniform_below(rng, axes.size())];
    const int lo = config.min_extent[axis], hi = s[axis] - config.min_extent[axis];
    const int cut = (axis == 0 ? box.min.x : axis == 1 ? box.min.y : box.min.z) +
                    uniform_int(rng, lo, hi);
    Box3 left = box, right = box;
    if (axis == 0) {
      left.max.x = right.min.x = cut;
    } else if (axis == 1) {
      left.max.y = right.min.y = cut;
    } else {
      left.max.z = right.min.z = cut;
    }
    leaves[best] = left;
    leaves.push_back(right);
  }

  LabelVolume gt(config.shape, 0);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Box3 b = leaves[i];
    if (config.membrane > 0) {
      if (b.max.x < config.shape.x) b.max.x = std::max(b.min.x + 1, b.max.x - config.membrane);
      if (b.max.y < config.shape.y) b.max.y = std::max(b.min.y + 1, b.max.y - config.membrane);
      if (b.max.z < config.shape.z) b.max.z = std::max(b.min.z + 1, b.max.z - config.membrane);
    }
    const bool blob = uniform01(rng) < config.blob_fraction;
    const double cx = (b.min.x + b.max.x - 1) / 2.0, cy = (b.min.y + b.max.y - 1) / 2.0,
                 cz = (b.min.z + b.max.z - 1) / 2.0;
    const double ax = std::max(0.5, (b.max.x - b.min.x) / 2.0),
                 ay = std::max(0.5, (b.max.y - b.min.y) / 2.0),
                 az = std::max(0.5, (b.max.z - b.min.z) / 2.0);
    const Label label = static_cast<Label>(i + 1);
    for (int z = b.min.z; z < b.max.z; ++z) {
      for (int y = b.min.y; y < b.max.y; ++y) {
        for (int x = b.min.x; x < b.max.x; ++x) {
          if (blob) {
            const double dx = (x - cx) / ax, dy = (y - cy) / ay, dz = (z - cz) / az;
            const bool core = std::abs(x - cx) < 1.0 && std::abs(y - cy) < 1.0 &&
                              std::abs(z - cz) < 1.0;
            if (dx * dx + dy * dy + dz * dz > 1.0 && !core) continue;
          }
          gt(x, y, z) = label;
        }
      }
    }
  }

  const Shape3& cell = config.supervoxel_cell;
  LabelVolume sv(config.shape, 0);
  std::map<std::tuple<Label, int, int, int>, Label> ids;
  for (int z = 0; z < config.shape.z; ++z) {
    for (int y = 0; y < config.shape.y; ++y) {
      for (int x = 0; x < config.shape.x; ++x) {
        const Label g = gt(x, y, z);
        if (g == 0) continue;
        const auto key = std::make_tuple(g, x / cell.x, y / cell.y, z / cell.z);
        auto [it, fresh] = ids.try_emplace(key, static_cast<Label>(ids.size() + 1));
        sv(x, y, z) = it->second;
      }
    }
  }

  if (config.corrupt_supervoxels > 0) {
    const auto owner = supervoxel_objects(gt, sv);
    std::vector<Edge> cross;
    for (const auto& e : adjacent_pairs(sv)) {
      if (owner.at(e.first) != owner.at(e.second)) cross.push_back(e);
    }
    std::set<Label> used;
    std::map<Label, Label> fuse;
    for (std::size_t i = cross.size(); i > 1; --i) {
      std::swap(cross[i - 1], cross[uniform_below(rng, i)]);
    }
    for (const auto& [a, b] : cross) {
      if (static_cast<int>(fuse.size()) >= config.corrupt_supervoxels) break;
      if (used.contains(a) || used.contains(b)) continue;
      used.insert(a);
      used.insert(b);
      fuse[b] = a;
    }
    for (auto& l : sv.data()) {
      auto it = fuse.find(l);
      if (it != fuse.end()) l = it->second;
    }
  }
  return SynthVolumes{std::move(gt), std::move(sv)};
}

std::map<SupervoxelId, Label> supervoxel_objects(const LabelVolume& gt,
                                                 const LabelVolume& supervoxels) {
  if (!(gt.shape() == supervoxels.shape())) {
    throw std::invalid_argument("supervoxel_objects: volume shapes differ");
  }
  std::map<SupervoxelId, std::map<Label, std::size_t>> votes;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (supervoxels[i] != 0) ++votes[supervoxels[i]][gt[i]];
  }
  std::map<SupervoxelId, Label> out;
  for (const auto& [s, counts] : votes) {
    auto best = std::max_element(counts.begin(), counts.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    out.emplace(s, best->first);
  }
  return out;
}

std::vector<Edge> ground_truth_edges(const LabelVolume& gt, const LabelVolume& supervoxels) {
  const auto owner = supervoxel_objects(gt, supervoxels);
  std::vector<Edge> out;
  for (const auto& e : adjacent_pairs(supervoxels)) {
    const Label a = owner.at(e.first);
    if (a != 0 && a == owner.at(e.second)) out.push_back(e);
  }
  return out;
}

json Mutation::to_json() const {
  json j{{"kind", kind == Kind::merge ? "merge" : "split"},
         {"a", a},
         {"witness", {witness.x, witness.y, witness.z}}};
  if (kind == Kind::merge) {
    j["b"] = b;
    j["link"] = {link.first, link.second};
  } else {
    j["side"] = side;
  }
  return j;
}

Mutation Mutation::from_json(const json& j) {
  Mutation m;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "merge") {
    m.kind = Kind::merge;
    m.b = j.at("b").get<Label>();
    const auto link = j.at("link").get<std::vector<SupervoxelId>>();
    if (link.size() != 2) throw std::invalid_argument("merge link must be a pair");
    m.link = {link[0], link[1]};
  } else if (kind == "split") {
    m.kind = Kind::split;
    m.side = j.at("side").get<std::vector<SupervoxelId>>();
  } else {
    throw std::invalid_argument("unknown mutation kind '" + kind + "'");
  }
  m.a = j.at("a").get<Label>();
  if (j.contains("witness")) {
    const auto w = j.at("witness").get<std::vector<int>>();
    if (w.size() != 3) throw std::invalid_argument("witness must have three coordinates");
    m.witness = Point3{w[0], w[1], w[2]};
  }
  return m;
}

namespace {

void apply_mutation(SegGraph& g, const Mutation& m, const std::map<SupervoxelId, Label>& owner,
                    const std::map<Label, std::vector<SupervoxelId>>& members) {
  auto object_of = [&](SupervoxelId s) {
    auto it = owner.find(s);
    if (it == owner.end()) {
      throw std::invalid_argument("mutation names unknown supervoxel " + std::to_string(s));
    }
    return it->second;
  };
  if (!members.contains(m.a)) {
    throw std::invalid_argument("mutation names unknown object " + std::to_string(m.a));
  }
  if (m.kind == Mutation::Kind::merge) {
    if (!members.contains(m.b) || m.a == m.b) {
      throw std::invalid_argument("merge needs two distinct existing objects");
    }
    if (object_of(m.link.first) != m.a || object_of(m.link.second) != m.b) {
      throw std::invalid_argument("merge link does not join the named objects");
    }
    const SupervoxelId pair[2] = {m.link.first, m.link.second};
    g.add_clique(pair);
    return;
  }
  const std::set<SupervoxelId> side(m.side.begin(), m.side.end());
  for (SupervoxelId s : side) {
    if (object_of(s) != m.a) {
      throw std::invalid_argument("split side holds a supervoxel outside the object");
    }
  }
  std::vector<SupervoxelId> rest;
  for (SupervoxelId s : members.at(m.a)) {
    if (!side.contains(s)) rest.push_back(s);
  }
  if (side.empty() || rest.empty()) {
    throw std::invalid_argument("split side must be a proper nonempty subset of the object");
  }
  g.cut_between(m.side, rest);
}

std::map<Label, std::vector<SupervoxelId>> object_members(
    const std::map<SupervoxelId, Label>& owner) {
  std::map<Label, std::vector<SupervoxelId>> out;
  for (const auto& [s, o] : owner) out[o].push_back(s);
  return out;
}

}  // namespace

SegmentationView inject_errors(const LabelVolume& gt, const LabelVolume& supervoxels,
                               const std::vector<Mutation>& mutations) {
  const auto owner = supervoxel_objects(gt, supervoxels);
  const auto members = object_members(owner);
  const auto edges = ground_truth_edges(gt, supervoxels);
  SegmentationView view{supervoxels, SegGraph::build(supervoxels, edges)};
  for (const auto& m : mutations) apply_mutation(view.graph, m, owner, members);
  return view;
}

std::vector<Mutation> random_mutations(const LabelVolume& gt, const LabelVolume& supervoxels,
                                       const MutationPlan& plan) {
  if (plan.merges < 0 || plan.splits < 0 || plan.max_gap < 1) {
    throw std::invalid_argument("random_mutations: invalid plan");
  }
  Rng rng(plan.seed);
  const auto owner = supervoxel_objects(gt, supervoxels);
  const auto members = object_members(owner);
  const Shape3& shape = gt.shape();

  struct Contact {
    SupervoxelId sa, sb;
    Point3 witness;
  };
  // Nearby object pairs, keyed (a, b) with a < b; links run from a to b.
  std::map<std::pair<Label, Label>, std::vector<Contact>> contacts;
  for (int z = 0; z < shape.z; ++z) {
    for (int y = 0; y < shape.y; ++y) {
      for (int x = 0; x < shape.x; ++x) {
        const Point3 p{x, y, z};
        const SupervoxelId s = supervoxels[p];
        if (s == 0) continue;
        const Label a = owner.at(s);
        for (int axis = 0; axis < 3; ++axis) {
          for (int d = 1; d <= plan.max_gap; ++d) {
            Point3 q = p;
            (axis == 0 ? q.x : axis == 1 ? q.y : q.z) += d;
            if (!gt.bounds().contains(q)) break;
            const SupervoxelId t = supervoxels[q];
            if (t == 0) continue;
            const Label b = owner.at(t);
            if (b != a) {
              if (a < b) {
                contacts[{a, b}].push_back({s, t, p});
              } else {
                contacts[{b, a}].push_back({t, s, q});
              }
            }
            break;
          }
        }
      }
    }
  }

  struct Plane {
    Label object;
    int axis;
    int coord;
  };
  std::map<SupervoxelId, Box3> sv_box;
  for (std::size_t i = 0; i < supervoxels.size(); ++i) {
    const SupervoxelId s = supervoxels[i];
    if (s == 0) continue;
    const Point3 p = supervoxels.point(i);
    auto [it, fresh] = sv_box.try_emplace(s, Box3{p, {p.x + 1, p.y + 1, p.z + 1}});
    if (!fresh) it->second = it->second.hull(p);
  }
  std::vector<Plane> planes;
  for (const auto& [o, svs] : members) {
    if (o == 0 || svs.size() < 2) continue;
    std::set<int> cuts[3];
    for (SupervoxelId s : svs) {
      const Box3& b = sv_box.at(s);
      cuts[0].insert(b.min.x);
      cuts[1].insert(b.min.y);
      cuts[2].insert(b.min.z);
    }
    for (int axis = 0; axis < 3; ++axis) {
      for (int c : cuts[axis]) {
        bool below = false, above = false, straddle = false;
        for (SupervoxelId s : svs) {
          const Box3& b = sv_box.at(s);
          const int lo = b.min[axis], hi = b.max[axis];
          if (hi <= c) below = true;
          else if (lo >= c) above = true;
          else straddle = true;
        }
        if (below && above && !straddle) planes.push_back({o, axis, c});
      }
    }
  }

  std::vector<std::pair<Label, Label>> pair_keys;
  for (const auto& [k, v] : contacts) {
    if (k.first != 0 && k.second != 0) pair_keys.push_back(k);
  }
  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
  };
  shuffle(pair_keys);
  shuffle(planes);

  SegmentationView view{supervoxels,
                        SegGraph::build(supervoxels, ground_truth_edges(gt, supervoxels))};
  std::vector<Mutation> out;
  std::set<Point3> witnesses;
  auto still_flagged = [&](const SegGraph& g, const std::vector<Mutation>& ms) {
    const LabelVolume prop = render_labels(SegmentationView{supervoxels, g});
    return std::all_of(ms.begin(), ms.end(), [&](const Mutation& m) {
      return error_at(prop, gt, m.witness, plan.witness_window);
    });
  };
  auto try_add = [&](Mutation m) {
    if (witnesses.contains(m.witness)) return false;
    SegGraph g = view.graph;
    apply_mutation(g, m, owner, members);
    auto trial = out;
    trial.push_back(m);
    if (!still_flagged(g, trial)) return false;
    view.graph = std::move(g);
    witnesses.insert(m.witness);
    out = std::move(trial);
    return true;
  };

  int merges = 0, splits = 0;
  std::size_t next_pair = 0, next_plane = 0;
  while (merges < plan.merges || splits < plan.splits) {
    const bool want_merge = merges < plan.merges &&
                            (splits >= plan.splits || (merges + splits) % 2 == 0);
    if (want_merge) {
      if (next_pair >= pair_keys.size()) {
        throw std::invalid_argument("random_mutations: not enough nearby object pairs");
      }
      const auto key = pair_keys[next_pair++];
      auto& cands = contacts.at(key);
      // a few random contacts per pair; witnesses must not collide
      for (int attempt = 0; attempt < 8; ++attempt) {
        const Contact& c = cands[uniform_below(rng, cands.size())];
        Mutation m;
        m.kind = Mutation::Kind::merge;
        m.a = key.first;
        m.b = key.second;
        m.link = {c.sa, c.sb};
        m.witness = c.witness;
        if (try_add(std::move(m))) {
          ++merges;
          break;
        }
      }
    } else {
      if (next_plane >= planes.size()) {
        throw std::invalid_argument("random_mutations: not enough split planes");
      }
      const Plane pl = planes[next_plane++];
      Mutation m;
      m.kind = Mutation::Kind::split;
      m.a = pl.object;
      for (SupervoxelId s : members.at(pl.object)) {
        if (sv_box.at(s).max[pl.axis] <= pl.coord) m.side.push_back(s);
      }
      const std::set<SupervoxelId> side(m.side.begin(), m.side.end());
      std::vector<Point3> faces;
      for (SupervoxelId s : m.side) {
        const Box3& b = sv_box.at(s);
        if (b.max[pl.axis] != pl.coord) continue;
        for (int z = b.min.z; z < b.max.z; ++z) {
          for (int y = b.min.y; y < b.max.y; ++y) {
            for (int x = b.min.x; x < b.max.x; ++x) {
              const Point3 p{x, y, z};
              if (supervoxels[p] != s || p[pl.axis] != pl.coord - 1) continue;
              Point3 q = p;
              (pl.axis == 0 ? q.x : pl.axis == 1 ? q.y : q.z) += 1;
              const SupervoxelId t = supervoxels[q];
              if (t != 0 && !side.contains(t) && owner.at(t) == pl.object) faces.push_back(p);
            }
          }
        }
      }
      if (faces.empty()) continue;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Mutation trial = m;
        trial.witness = faces[uniform_below(rng, faces.size())];
        if (try_add(std::move(trial))) {
          ++splits;
          break;
        }
      }
    }
  }
  return out;
}

Volume<double> sampling_weights(const LabelVolume& seg, const Shape3& window) {
  if (!window.odd()) throw std::invalid_argument("sampling window dimensions must be odd");
  const Box3 bounds = seg.bounds();
  const int rx = window.x / 2, ry = window.y / 2, rz = window.z / 2;
  std::map<Label, Box3> extent;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (seg[i] == 0) continue;
    const Point3 p = seg.point(i);
    auto [it, fresh] = extent.try_emplace(seg[i], Box3{p, {p.x + 1, p.y + 1, p.z + 1}});
    if (!fresh) it->second = it->second.hull(p);
  }
  Volume<double> w(seg.shape(), 0.0);
  const auto& labels = seg.data();
  for (const auto& [l, box] : extent) {
    const Box3 data = box.dilate(rx, ry, rz).intersect(bounds);
    const BoxSum occupied(seg.shape(), data, [&](std::size_t i) { return labels[i] == l; });
    for (int z = box.min.z; z < box.max.z; ++z) {
      for (int y = box.min.y; y < box.max.y; ++y) {
        for (int x = box.min.x; x < box.max.x; ++x) {
          const Point3 p{x, y, z};
          if (seg[p] != l) continue;
          const Box3 win = centered_box(p, window).intersect(bounds);
          w[p] = static_cast<double>(win.count()) / static_cast<double>(occupied.sum(win));
        }
      }
    }
  }
  return w;
}

std::vector<Point3> sample_locations(const LabelVolume& seg, std::size_t n, const Shape3& window,
                                     std::uint64_t seed) {
  const Volume<double> w = sampling_weights(seg, window);
  std::vector<double> cdf(w.size());
  std::partial_sum(w.data().begin(), w.data().end(), cdf.begin());
  const double total = cdf.empty() ? 0.0 : cdf.back();
  if (!(total > 0.0)) {
    throw std::invalid_argument("sample_locations: volume has no foreground");
  }
  Rng rng(seed);
  std::vector<Point3> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = uniform01(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cdf.begin());
    if (i >= w.size()) i = w.size() - 1;
    // skip zero-weight voxels a rounding tie could land on
    while (w[i] == 0.0 && i > 0) --i;
    out.push_back(w.point(i));
  }
  return out;
}

std::vector<std::uint8_t> point_errors(const LabelVolume& gt, const LabelVolume& proposal,
                                       const std::vector<Point3>& points,
                                       const ErrorWindowSpec& window) {
  std::vector<std::uint8_t> out;
  out.reserve(points.size());
  for (const Point3& p : points) out.push_back(error_at(proposal, gt, p, window) ? 1 : 0);
  return out;
}

std::vector<EvalPoint> select_eval_points(const LabelVolume& gt, const LabelVolume& proposal,
                                          const EvalPointConfig& config) {
  const auto candidates =
      sample_locations(proposal, config.candidates, config.sampling_window, config.seed);
  const ErrorMap large = combined_error_map(proposal, gt, config.large);
  const ErrorMap small = combined_error_map(proposal, gt, config.small);
  std::map<Label, std::vector<Point3>> kept_by_object;
  std::vector<EvalPoint> out;
  for (const Point3& p : candidates) {
    const bool err_large = large.at(p) >= 0.5f;
    const bool err_small = small.at(p) >= 0.5f;
    if (err_large && !err_small) continue;
    const Label obj = proposal[p];
    auto& kept = kept_by_object[obj];
    const bool crowded = std::any_of(kept.begin(), kept.end(), [&](const Point3& q) {
      return std::abs(p.x - q.x) < config.spacing.x && std::abs(p.y - q.y) < config.spacing.y &&
             std::abs(p.z - q.z) < config.spacing.z;
    });
    if (crowded) continue;
    kept.push_back(p);
    out.push_back(EvalPoint{p, obj, static_cast<std::uint8_t>(err_small ? 1 : 0)});
  }
  return out;
}

}  // namespace segfix
