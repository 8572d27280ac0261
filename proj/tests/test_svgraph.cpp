#include <doctest.h>

#include "oracles.hpp"
#include "segfix/svgraph.hpp"

using namespace segfix;

namespace {

LabelVolume labels_123() {
  LabelVolume v(Shape3(3, 1, 1), 0);
  v[0] = 1;
  v[1] = 2;
  v[2] = 3;
  return v;
}

std::vector<Edge> random_edges(const std::vector<SupervoxelId>& ids, int n, Rng& rng) {
  std::vector<Edge> out;
  for (int k = 0; k < n; ++k) {
    const auto a = ids[uniform_below(rng, ids.size())], b = ids[uniform_below(rng, ids.size())];
    if (a != b) out.emplace_back(a, b);
  }
  return out;
}

void check_against_bfs(const SegGraph& g) {
  const auto rep = oracle::components(g.vertices(), g.edges());
  std::set<SupervoxelId> reps;
  for (auto v : g.vertices()) {
    CHECK(g.component(v) == rep.at(v));
    reps.insert(rep.at(v));
  }
  CHECK(g.component_count() == reps.size());
}

}  // namespace

TEST_CASE("build from labels") {
  const SegGraph none = SegGraph::build(labels_123(), {});
  CHECK(none.component_count() == 3);
  const std::vector<Edge> e{{1, 2}};
  const SegGraph one = SegGraph::build(labels_123(), e);
  CHECK(one.component_count() == 2);
  CHECK(one.component(2) == 1);
  CHECK(one.component(3) == 3);
  const std::vector<Edge> bad{{1, 7}};
  CHECK_THROWS_AS(SegGraph::build(labels_123(), bad), std::invalid_argument);
}

TEST_CASE("cliques and cuts") {
  SegGraph g = SegGraph::build(labels_123(), {});
  const std::vector<SupervoxelId> single{2};
  g.add_clique(single);
  CHECK(g.edge_count() == 0);
  const std::vector<SupervoxelId> all{1, 2, 3};
  g.add_clique(all);
  CHECK(g.component_count() == 1);
  CHECK(g.edge_count() == 3);
  const std::vector<SupervoxelId> bad{1, 9};
  CHECK_THROWS_AS(g.add_clique(bad), std::invalid_argument);

  const std::vector<Edge> e{{1, 2}};
  SegGraph h = SegGraph::build(labels_123(), e);
  const std::vector<SupervoxelId> a{1}, b{2}, c{3};
  h.cut_between(a, c);
  CHECK(h.component_count() == 2);
  h.cut_between(a, b);
  CHECK(h.component_count() == 3);
  CHECK_FALSE(h.has_edge(1, 2));
}

TEST_CASE("self loops are never stored") {
  SegGraph g = SegGraph::build(labels_123(), {});
  const std::vector<SupervoxelId> twice{1, 1};
  g.add_clique(twice);
  CHECK(g.edge_count() == 0);
  CHECK_FALSE(g.has_edge(1, 1));
}

TEST_CASE("apply is atomic and reports changed vertices") {
  std::vector<SupervoxelId> ids{1, 2, 3, 4};
  const std::vector<Edge> e{{1, 2}, {3, 4}};
  SegGraph g(ids, e);
  const std::vector<SupervoxelId> clique{1, 3}, cut_a{4}, cut_b{3};
  const auto changed = g.apply(clique, cut_a, cut_b);
  CHECK(g.component(3) == 1);
  CHECK(g.component(4) == 4);
  CHECK(changed == std::vector<SupervoxelId>{1, 2, 3, 4});
  const auto again = g.apply(clique, cut_a, cut_b);
  CHECK(again.empty());
}

TEST_CASE("random update sequences match breadth-first search") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SupervoxelId> ids;
    for (int k = 0; k < 20; ++k) ids.push_back(3 * k + 1 + uniform_below(rng, 3));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    SegGraph g(ids, random_edges(ids, 12, rng));
    check_against_bfs(g);
    for (int op = 0; op < 20; ++op) {
      const std::size_t before = g.component_count();
      std::vector<SupervoxelId> a, b;
      for (auto v : ids) {
        const double u = uniform01(rng);
        if (u < 0.2) a.push_back(v);
        else if (u < 0.5) b.push_back(v);
      }
      if (uniform01(rng) < 0.5) {
        g.add_clique(a);
        CHECK(g.component_count() <= before);
      } else {
        g.cut_between(a, b);
        CHECK(g.component_count() >= before);
        for (auto x : a)
          for (auto y : b) CHECK_FALSE(g.has_edge(x, y));
      }
      check_against_bfs(g);
    }
  }
}

TEST_CASE("cuts leave edges inside each side alone") {
  std::vector<SupervoxelId> ids{1, 2, 3, 4};
  const std::vector<Edge> e{{1, 2}, {3, 4}, {2, 3}};
  SegGraph g(ids, e);
  const std::vector<SupervoxelId> a{1, 2}, b{3, 4};
  g.cut_between(a, b);
  CHECK(g.has_edge(1, 2));
  CHECK(g.has_edge(3, 4));
  CHECK_FALSE(g.has_edge(2, 3));
}

TEST_CASE("rendering uses the minimum member as the label") {
  LabelVolume sv(Shape3(4, 1, 1), 0);
  sv[0] = 5;
  sv[1] = 2;
  sv[3] = 9;
  SegmentationView view{sv, SegGraph::build(sv, {})};
  CHECK(render_labels(view) == sv);
  const std::vector<SupervoxelId> pair{5, 9};
  view.graph.add_clique(pair);
  const LabelVolume r = render_labels(view);
  CHECK(r[0] == 5);
  CHECK(r[2] == 0);
  CHECK(r[3] == 5);
}

TEST_CASE("random rendering matches the component partition") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    LabelVolume sv = oracle::random_blocks(Shape3(10, 9, 4), 12, 0.1, rng);
    std::set<Label> present(sv.data().begin(), sv.data().end());
    present.erase(0);
    std::vector<SupervoxelId> ids(present.begin(), present.end());
    SegmentationView view{sv, SegGraph::build(sv, random_edges(ids, 6, rng))};
    const LabelVolume r = render_labels(view);
    const auto rep = oracle::components(ids, view.graph.edges());
    LabelVolume expect = sv;
    for (auto& l : expect.data())
      if (l != 0) l = rep.at(l);
    CHECK(r == expect);
  }
}

TEST_CASE("segments touching a box") {
  LabelVolume sv(Shape3(4, 4, 1), 0);
  sv(0, 0, 0) = 1;
  sv(3, 3, 0) = 2;
  const std::vector<Edge> none;
  SegmentationView view{sv, SegGraph::build(sv, none)};
  CHECK(segments_touching(view, sv.bounds()) == std::set<SupervoxelId>{1, 2});
  CHECK(segments_touching(view, Box3{{1, 1, 0}, {3, 3, 1}}).empty());

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    LabelVolume v = oracle::random_blocks(Shape3(8, 8, 3), 6, 0.2, rng);
    SegmentationView w{v, SegGraph::build(v, none)};
    const Point3 a{uniform_int(rng, -2, 7), uniform_int(rng, -2, 7), uniform_int(rng, 0, 2)};
    const Box3 box{a, {a.x + uniform_int(rng, 1, 5), a.y + uniform_int(rng, 1, 5), a.z + 1}};
    std::set<SupervoxelId> expect;
    for (int y = std::max(0, box.min.y); y < std::min(8, box.max.y); ++y)
      for (int x = std::max(0, box.min.x); x < std::min(8, box.max.x); ++x)
        if (v(x, y, a.z) != 0) expect.insert(v(x, y, a.z));
    CHECK(segments_touching(w, box) == expect);
  }
}

TEST_CASE("adjacent pairs are face neighbours only") {
  LabelVolume v(Shape3(2, 2, 1), 0);
  v(0, 0, 0) = 1;
  v(1, 1, 0) = 2;
  CHECK(adjacent_pairs(v).empty());
  v(1, 0, 0) = 3;
  CHECK(adjacent_pairs(v) == std::vector<Edge>{{1, 3}, {2, 3}});
}

TEST_CASE("graph JSON round trip") {
  std::vector<SupervoxelId> ids{1, 4, 6};
  const std::vector<Edge> e{{6, 1}};
  const SegGraph g(ids, e);
  const SegGraph back = SegGraph::from_json(g.to_json());
  CHECK(back.vertices() == g.vertices());
  CHECK(back.edges() == g.edges());
  CHECK(back.edges() == std::vector<Edge>{{1, 6}});
  nlohmann::json bad = g.to_json();
  bad["edges"].push_back({1, 99});
  CHECK_THROWS_AS(SegGraph::from_json(bad), std::invalid_argument);
}
