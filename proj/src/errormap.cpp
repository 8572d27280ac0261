#include "segfix/errormap.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <thread>

#include "segfix/box_sum.hpp"
#include "segfix/rng.hpp"

namespace segfix {

ErrorWindowSpec::ErrorWindowSpec(Shape3 s, BorderMode m) : shape(s), mode(m) {
  if (!shape.odd()) {
    throw std::invalid_argument("error window dimensions must be odd");
  }
}

ErrorMap::ErrorMap(const Box3& region, const ErrorWindowSpec& s)
    : box(region),
      spec(s),
      values(region.empty() ? Shape3{} : region.shape(), 0.0f),
      in_domain(region.empty() ? Shape3{} : region.shape(), 0) {
  if (region.empty()) {
    throw std::invalid_argument("ErrorMap over an empty region");
  }
}

void ErrorMap::paste(const ErrorMap& other) {
  const Box3 b = box.intersect(other.box);
  for (int z = b.min.z; z < b.max.z; ++z) {
    for (int y = b.min.y; y < b.max.y; ++y) {
      for (int x = b.min.x; x < b.max.x; ++x) {
        const int ox = x - other.box.min.x, oy = y - other.box.min.y, oz = z - other.box.min.z;
        const int sx = x - box.min.x, sy = y - box.min.y, sz = z - box.min.z;
        values(sx, sy, sz) = other.values(ox, oy, oz);
        in_domain(sx, sy, sz) = other.in_domain(ox, oy, oz);
      }
    }
  }
}

bool window_in_domain(const Shape3& volume, const Point3& c, const ErrorWindowSpec& spec) {
  if (spec.mode == BorderMode::clipped) return true;
  return c.x - spec.rx() >= 0 && c.y - spec.ry() >= 0 && c.z - spec.rz() >= 0 &&
         c.x + spec.rx() < volume.x && c.y + spec.ry() < volume.y && c.z + spec.rz() < volume.z;
}

namespace {

void require_same_shape(const Shape3& a, const Shape3& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": volume shapes differ");
  }
}

template <typename F>
void for_each_point(const Box3& box, F&& f) {
  for (int z = box.min.z; z < box.max.z; ++z) {
    for (int y = box.min.y; y < box.max.y; ++y) {
      for (int x = box.min.x; x < box.max.x; ++x) f(Point3{x, y, z});
    }
  }
}

// Centers of proposal object a lying on ground-truth object g can only match
// g, and they match iff no voxel in the window is in exactly one of {a, g}.
// Counting those mismatches with a summed-volume table over each (a, g)
// pair's footprint gives every center in O(1).
ErrorMap combined_region(const LabelVolume& prop, const LabelVolume& gt,
                         const ErrorWindowSpec& spec, const Box3& region) {
  ErrorMap out(region, spec);
  const Shape3& shape = prop.shape();
  const Box3 bounds = prop.bounds();
  std::map<std::pair<Label, Label>, Box3> pair_boxes;
  std::pair<Label, Label> last{0, 0};
  Box3* last_box = nullptr;
  for_each_point(region, [&](const Point3& c) {
    if (!window_in_domain(shape, c, spec)) return;
    out.in_domain(c.x - region.min.x, c.y - region.min.y, c.z - region.min.z) = 1;
    const Label a = prop[c];
    if (a == 0) return;
    const Label g = gt[c];
    if (g == 0) {
      out.at(c) = 1.0f;
      return;
    }
    const std::pair<Label, Label> key{a, g};
    if (last_box == nullptr || key != last) {
      last = key;
      last_box = &pair_boxes.try_emplace(key, Box3{c, c}).first->second;
    }
    *last_box = last_box->hull(c);
  });

  for (const auto& [key, centers] : pair_boxes) {
    const auto [a, g] = key;
    const Box3 data = centers.dilate(spec.rx(), spec.ry(), spec.rz()).intersect(bounds);
    const auto& pv = prop.data();
    const auto& gv = gt.data();
    const BoxSum mismatch(shape, data, [&](std::size_t i) { return (pv[i] == a) != (gv[i] == g); });
    for_each_point(centers, [&](const Point3& c) {
      const std::size_t i = prop.index(c);
      if (pv[i] != a || gv[i] != g) return;
      if (!window_in_domain(shape, c, spec)) return;
      out.at(c) = mismatch.sum(centered_box(c, spec.shape)) > 0 ? 1.0f : 0.0f;
    });
  }
  return out;
}

}  // namespace

ErrorMap oracle_error_map(const ObjectMask& obj, const LabelVolume& gt,
                          const ErrorWindowSpec& spec) {
  require_same_shape(obj.shape(), gt.shape(), "oracle_error_map");
  const Shape3& shape = obj.shape();
  const Box3 bounds = obj.bounds();
  ErrorMap out(bounds, spec);
  const auto& ov = obj.data();
  const auto& gv = gt.data();

  const BoxSum occupancy(shape, bounds, [&](std::size_t i) { return ov[i] != 0; });
  for_each_point(bounds, [&](const Point3& c) {
    if (!window_in_domain(shape, c, spec)) return;
    out.in_domain[c] = 1;
    if (occupancy.sum(centered_box(c, spec.shape)) > 0) out.at(c) = 1.0f;
  });

  // Only ground-truth objects overlapping the mask can match it.
  std::map<Label, Box3> overlap;
  for (std::size_t i = 0; i < ov.size(); ++i) {
    if (ov[i] == 0 || gv[i] == 0) continue;
    const Point3 p = obj.point(i);
    auto [it, fresh] = overlap.try_emplace(gv[i], Box3{p, p});
    it->second = it->second.hull(p);
  }
  for (const auto& [g, box] : overlap) {
    const Box3 centers = box.dilate(spec.rx(), spec.ry(), spec.rz()).intersect(bounds);
    const Box3 data = centers.dilate(spec.rx(), spec.ry(), spec.rz()).intersect(bounds);
    const BoxSum mismatch(shape, data,
                          [&](std::size_t i) { return (ov[i] != 0) != (gv[i] == g); });
    for_each_point(centers, [&](const Point3& c) {
      if (out.at(c) == 0.0f) return;
      if (mismatch.sum(centered_box(c, spec.shape)) == 0) out.at(c) = 0.0f;
    });
  }
  return out;
}

ErrorMap combined_error_map(const LabelVolume& proposal, const LabelVolume& gt,
                            const ErrorWindowSpec& spec, const Box3& region, int threads) {
  require_same_shape(proposal.shape(), gt.shape(), "combined_error_map");
  const Box3 r = region.intersect(proposal.bounds());
  if (r.empty()) {
    throw std::invalid_argument("combined_error_map: region outside the volume");
  }
  const int depth = r.max.z - r.min.z;
  const int slabs = std::clamp(threads, 1, depth);
  if (slabs == 1) {
    return combined_region(proposal, gt, spec, r);
  }
  std::vector<ErrorMap> parts(static_cast<std::size_t>(slabs));
  {
    std::vector<std::jthread> workers;
    for (int s = 0; s < slabs; ++s) {
      Box3 slab = r;
      slab.min.z = r.min.z + depth * s / slabs;
      slab.max.z = r.min.z + depth * (s + 1) / slabs;
      workers.emplace_back([&, s, slab] {
        parts[static_cast<std::size_t>(s)] = combined_region(proposal, gt, spec, slab);
      });
    }
  }
  ErrorMap out(r, spec);
  for (const auto& p : parts) out.paste(p);
  return out;
}

ErrorMap combined_error_map(const LabelVolume& proposal, const LabelVolume& gt,
                            const ErrorWindowSpec& spec, int threads) {
  return combined_error_map(proposal, gt, spec, proposal.bounds(), threads);
}

bool error_at(const LabelVolume& proposal, const LabelVolume& gt, const Point3& center,
              const ErrorWindowSpec& spec) {
  require_same_shape(proposal.shape(), gt.shape(), "error_at");
  if (!window_in_domain(proposal.shape(), center, spec)) return false;
  const Label a = proposal[center];
  if (a == 0) return false;
  const Label g = gt[center];
  if (g == 0) return true;
  const Box3 w = centered_box(center, spec.shape).intersect(proposal.bounds());
  for (int z = w.min.z; z < w.max.z; ++z) {
    for (int y = w.min.y; y < w.max.y; ++y) {
      for (int x = w.min.x; x < w.max.x; ++x) {
        if ((proposal(x, y, z) == a) != (gt(x, y, z) == g)) return true;
      }
    }
  }
  return false;
}

ErrorMap blend_max(std::span<const ErrorMap> tiles) {
  if (tiles.empty()) {
    throw std::invalid_argument("blend_max: no tiles");
  }
  Box3 target = tiles.front().box;
  for (const auto& t : tiles) target = target.hull(t.box);
  return blend_max(tiles, target);
}

ErrorMap blend_max(std::span<const ErrorMap> tiles, const Box3& target) {
  if (tiles.empty()) {
    throw std::invalid_argument("blend_max: no tiles");
  }
  ErrorMap out(target, tiles.front().spec);
  Volume<std::uint8_t> covered(target.shape(), 0);
  for (const auto& t : tiles) {
    for_each_point(t.box.intersect(target), [&](const Point3& p) {
      const Point3 local{p.x - target.min.x, p.y - target.min.y, p.z - target.min.z};
      const float v = t.at(p);
      const auto dom = t.in_domain(p.x - t.box.min.x, p.y - t.box.min.y, p.z - t.box.min.z);
      if (!covered[local]) {
        covered[local] = 1;
        out.values[local] = v;
        out.in_domain[local] = dom;
      } else {
        out.values[local] = std::max(out.values[local], v);
        out.in_domain[local] = std::max(out.in_domain[local], dom);
      }
    });
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) {
      const Point3 p = covered.point(i);
      throw std::invalid_argument("blend_max: voxel (" + std::to_string(p.x + target.min.x) +
                                  ", " + std::to_string(p.y + target.min.y) + ", " +
                                  std::to_string(p.z + target.min.z) + ") covered by no tile");
    }
  }
  return out;
}

ErrorMap binarize(const ErrorMap& map, float threshold) {
  if (!(threshold >= 0.0f && threshold <= 1.0f)) {
    throw std::invalid_argument("binarize: threshold must lie in [0, 1]");
  }
  ErrorMap out = map;
  for (auto& v : out.values.data()) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

OracleDetector::OracleDetector(std::shared_ptr<const LabelVolume> gt, ErrorWindowSpec spec,
                               int threads)
    : gt_(std::move(gt)), spec_(spec), threads_(threads) {
  if (!gt_) throw std::invalid_argument("OracleDetector: ground truth required");
}

ErrorMap OracleDetector::detect(const LabelVolume& proposal, const RawVolume*,
                                const Box3& region) const {
  return combined_error_map(proposal, *gt_, spec_, region, threads_);
}

NoisyDetector::NoisyDetector(std::shared_ptr<const LabelVolume> gt, ErrorWindowSpec spec,
                             double fp_rate, double fn_rate, std::uint64_t seed, int threads)
    : oracle_(std::move(gt), spec, threads), fp_rate_(fp_rate), fn_rate_(fn_rate), seed_(seed) {
  if (!(fp_rate >= 0.0 && fp_rate < 1.0) || !(fn_rate >= 0.0 && fn_rate <= 1.0)) {
    throw std::invalid_argument("noisy detector needs fp_rate in [0, 1) and fn_rate in [0, 1]");
  }
}

ErrorMap NoisyDetector::detect(const LabelVolume& proposal, const RawVolume* raw,
                               const Box3& region) const {
  ErrorMap out = oracle_.detect(proposal, raw, region);
  constexpr std::uint64_t kStream = 0x6465746563746f72ULL;
  for_each_point(out.box, [&](const Point3& p) {
    const Point3 local{p.x - out.box.min.x, p.y - out.box.min.y, p.z - out.box.min.z};
    if (!out.in_domain[local] || proposal[p] == 0) return;
    const bool flagged = out.values[local] >= 0.5f;
    const double u = hash_unit(seed_, kStream, proposal.index(p));
    if (flagged && u < fn_rate_) out.values[local] = 0.0f;
    if (!flagged && u < fp_rate_) out.values[local] = 1.0f;
  });
  return out;
}

std::unique_ptr<DetectorBackend> noisy_detector(std::shared_ptr<const LabelVolume> gt,
                                                const ErrorWindowSpec& spec, double fp_rate,
                                                double fn_rate, std::uint64_t seed) {
  return std::make_unique<NoisyDetector>(std::move(gt), spec, fp_rate, fn_rate, seed);
}

}  // namespace segfix
