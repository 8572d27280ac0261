#include "segfix/svgraph.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace segfix {

SegGraph::SegGraph(std::vector<SupervoxelId> vertices, std::span<const Edge> edges) {
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
  ids_ = std::move(vertices);
  index_.reserve(ids_.size());
  for (std::uint32_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == 0) {
      throw std::invalid_argument("SegGraph: supervoxel id 0 is background");
    }
    index_.emplace(ids_[i], i);
  }
  adj_.assign(ids_.size(), {});
  comp_ = ids_;
  for (const auto& [a, b] : edges) {
    const auto sa = slot(a), sb = slot(b);
    if (sa == sb) continue;
    adj_[sa].insert(sb);
    adj_[sb].insert(sa);
  }
  std::vector<std::uint32_t> all(ids_.size());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  recompute(all);
}

SegGraph SegGraph::build(const LabelVolume& supervoxels, std::span<const Edge> initial_merges) {
  std::vector<SupervoxelId> ids;
  {
    std::vector<Label> sorted(supervoxels.data());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (Label l : sorted) {
      if (l != 0) ids.push_back(l);
    }
  }
  std::set<SupervoxelId> known(ids.begin(), ids.end());
  for (const auto& [a, b] : initial_merges) {
    if (!known.contains(a) || !known.contains(b)) {
      throw std::invalid_argument("build_graph: edge (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ") names a label not in the volume");
    }
  }
  return SegGraph(std::move(ids), initial_merges);
}

std::uint32_t SegGraph::slot(SupervoxelId v) const {
  auto it = index_.find(v);
  if (it == index_.end()) {
    throw std::invalid_argument("unknown supervoxel " + std::to_string(v));
  }
  return it->second;
}

std::vector<std::uint32_t> SegGraph::slots(std::span<const SupervoxelId> ids) const {
  std::vector<std::uint32_t> out;
  out.reserve(ids.size());
  for (SupervoxelId v : ids) out.push_back(slot(v));
  return out;
}

bool SegGraph::has_edge(SupervoxelId a, SupervoxelId b) const {
  auto ia = index_.find(a), ib = index_.find(b);
  if (ia == index_.end() || ib == index_.end()) return false;
  return adj_[ia->second].contains(ib->second);
}

SupervoxelId SegGraph::component(SupervoxelId v) const { return comp_[slot(v)]; }

std::size_t SegGraph::component_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (comp_[i] == ids_[i]) ++n;
  }
  return n;
}

std::size_t SegGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adj_) n += a.size();
  return n / 2;
}

std::vector<Edge> SegGraph::edges() const {
  std::vector<Edge> out;
  for (std::uint32_t i = 0; i < adj_.size(); ++i) {
    for (std::uint32_t j : adj_[i]) {
      if (i < j) out.emplace_back(ids_[i], ids_[j]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<SupervoxelId>> SegGraph::components() const {
  std::map<SupervoxelId, std::vector<SupervoxelId>> groups;
  for (std::size_t i = 0; i < ids_.size(); ++i) groups[comp_[i]].push_back(ids_[i]);
  std::vector<std::vector<SupervoxelId>> out;
  out.reserve(groups.size());
  for (auto& [c, members] : groups) out.push_back(std::move(members));
  return out;
}

std::vector<SupervoxelId> SegGraph::recompute(const std::vector<std::uint32_t>& seeds) {
  // Old component of every vertex reachable from the seeds. Edits only ever
  // connect seeds to each other, so the reachable set is the same before and
  // after an edit; only its grouping changes.
  std::vector<std::uint32_t> affected;
  std::vector<std::uint32_t> stack;
  std::vector<SupervoxelId> new_comp;
  std::unordered_map<std::uint32_t, std::size_t> position;
  for (std::uint32_t s : seeds) {
    if (position.contains(s)) continue;
    const std::size_t start = affected.size();
    position.emplace(s, affected.size());
    affected.push_back(s);
    stack.assign(1, s);
    SupervoxelId smallest = ids_[s];
    while (!stack.empty()) {
      const std::uint32_t u = stack.back();
      stack.pop_back();
      for (std::uint32_t w : adj_[u]) {
        if (position.emplace(w, affected.size()).second) {
          affected.push_back(w);
          stack.push_back(w);
          smallest = std::min(smallest, ids_[w]);
        }
      }
    }
    new_comp.resize(affected.size(), smallest);
  }

  // A vertex changed iff its old member set differs from its new one, i.e.
  // its old component did not map wholesale onto its new component.
  std::map<SupervoxelId, std::set<SupervoxelId>> old_to_new;
  std::map<SupervoxelId, std::size_t> old_size, new_size;
  for (std::size_t k = 0; k < affected.size(); ++k) {
    const SupervoxelId before = comp_[affected[k]];
    old_to_new[before].insert(new_comp[k]);
    ++old_size[before];
    ++new_size[new_comp[k]];
  }
  std::vector<SupervoxelId> changed;
  for (std::size_t k = 0; k < affected.size(); ++k) {
    const SupervoxelId before = comp_[affected[k]];
    const bool same = old_to_new[before].size() == 1 && old_size[before] == new_size[new_comp[k]];
    if (!same) changed.push_back(ids_[affected[k]]);
  }
  for (std::size_t k = 0; k < affected.size(); ++k) comp_[affected[k]] = new_comp[k];
  std::sort(changed.begin(), changed.end());
  return changed;
}

std::vector<SupervoxelId> SegGraph::apply(std::span<const SupervoxelId> clique,
                                          std::span<const SupervoxelId> cut_a,
                                          std::span<const SupervoxelId> cut_b) {
  const auto sc = slots(clique), sa = slots(cut_a), sb = slots(cut_b);
  std::vector<std::uint32_t> seeds;
  for (std::size_t i = 0; i < sc.size(); ++i) {
    for (std::size_t j = i + 1; j < sc.size(); ++j) {
      if (sc[i] == sc[j]) continue;
      if (adj_[sc[i]].insert(sc[j]).second) {
        adj_[sc[j]].insert(sc[i]);
        seeds.push_back(sc[i]);
        seeds.push_back(sc[j]);
      }
    }
  }
  const std::set<std::uint32_t> in_b(sb.begin(), sb.end());
  for (std::uint32_t u : sa) {
    for (auto it = adj_[u].begin(); it != adj_[u].end();) {
      if (in_b.contains(*it)) {
        adj_[*it].erase(u);
        seeds.push_back(u);
        seeds.push_back(*it);
        it = adj_[u].erase(it);
      } else {
        ++it;
      }
    }
  }
  if (seeds.empty()) return {};
  return recompute(seeds);
}

void SegGraph::add_clique(std::span<const SupervoxelId> members) { apply(members, {}, {}); }

void SegGraph::cut_between(std::span<const SupervoxelId> a, std::span<const SupervoxelId> b) {
  apply({}, a, b);
}

nlohmann::json SegGraph::to_json() const {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : this->edges()) edges.push_back({a, b});
  return nlohmann::json{{"vertices", ids_}, {"edges", std::move(edges)}};
}

SegGraph SegGraph::from_json(const nlohmann::json& j) {
  auto vertices = j.at("vertices").get<std::vector<SupervoxelId>>();
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) {
      throw std::invalid_argument("graph edges must be [a, b] pairs");
    }
    edges.emplace_back(e[0].get<SupervoxelId>(), e[1].get<SupervoxelId>());
  }
  std::set<SupervoxelId> known(vertices.begin(), vertices.end());
  for (const auto& [a, b] : edges) {
    if (!known.contains(a) || !known.contains(b)) {
      throw std::invalid_argument("graph edge names an unknown vertex");
    }
  }
  return SegGraph(std::move(vertices), edges);
}

LabelVolume render_labels(const SegmentationView& view) {
  const LabelVolume& sv = view.supervoxels;
  LabelVolume out(sv.shape(), 0, sv.voxel_size());
  Label last_in = 0, last_out = 0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const Label l = sv[i];
    if (l == 0) continue;
    if (l != last_in) {
      last_in = l;
      last_out = view.graph.component(l);
    }
    out[i] = last_out;
  }
  return out;
}

std::set<SupervoxelId> segments_touching(const SegmentationView& view, const Box3& box) {
  std::set<SupervoxelId> seen_sv;
  const Box3 b = box.intersect(view.supervoxels.bounds());
  for (int z = b.min.z; z < b.max.z; ++z) {
    for (int y = b.min.y; y < b.max.y; ++y) {
      for (int x = b.min.x; x < b.max.x; ++x) {
        const Label l = view.supervoxels(x, y, z);
        if (l != 0) seen_sv.insert(l);
      }
    }
  }
  std::set<SupervoxelId> out;
  for (SupervoxelId s : seen_sv) out.insert(view.graph.component(s));
  return out;
}

std::vector<Edge> adjacent_pairs(const LabelVolume& labels) {
  std::set<Edge> pairs;
  const Shape3& s = labels.shape();
  for (int z = 0; z < s.z; ++z) {
    for (int y = 0; y < s.y; ++y) {
      for (int x = 0; x < s.x; ++x) {
        const Label a = labels(x, y, z);
        if (a == 0) continue;
        auto visit = [&](Label b) {
          if (b != 0 && b != a) pairs.emplace(std::min(a, b), std::max(a, b));
        };
        if (x + 1 < s.x) visit(labels(x + 1, y, z));
        if (y + 1 < s.y) visit(labels(x, y + 1, z));
        if (z + 1 < s.z) visit(labels(x, y, z + 1));
      }
    }
  }
  return {pairs.begin(), pairs.end()};
}

}  // namespace segfix
