#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <set>

#include "supergraph/fixtures.hpp"
#include "supergraph/hierarchy.hpp"

using namespace supergraph;

namespace {

SuperpixelMap labeled_map(int w, int h, const std::vector<int>& labels, int n, int d = 2) {
  SuperpixelMap sp;
  sp.width = w;
  sp.height = h;
  sp.n_superpixels = n;
  sp.labels = labels;
  sp.sizes.assign(n, 0);
  for (int l : labels) ++sp.sizes[l];
  sp.centers_u = Mat::Zero(n, d);
  sp.centers_r = Mat::Zero(n, 2);
  sp.soft_mass = Vec::Ones(n);
  return sp;
}

SpGraph path_graph(const std::vector<Scalar>& node_feature) {
  const int n = static_cast<int>(node_feature.size());
  SpGraph g;
  g.n = n;
  g.feats = Mat::Zero(n, 1);
  for (int v = 0; v < n; ++v) g.feats(v, 0) = node_feature[v];
  g.centroids = Mat::Zero(n, 2);
  for (int v = 0; v < n; ++v) g.centroids(v, 1) = v;
  g.sizes.assign(n, 1);
  std::vector<AdjEntry> edges;
  for (int v = 0; v + 1 < n; ++v) edges.push_back({v, v + 1, 1});
  g.adj = SparseAdj::from_undirected(n, edges);
  return g;
}

}  // namespace

TEST_CASE("build_rag on one region") {
  const SuperpixelMap sp = labeled_map(3, 3, std::vector<int>(9, 0), 1);
  const SpGraph g = build_rag(sp);
  CHECK(g.n == 1);
  CHECK(g.adj.nnz() == 0);
}

TEST_CASE("build_rag on a left/right split") {
  std::vector<int> labels(4 * 2, 0);
  for (int y = 0; y < 2; ++y)
    for (int x = 2; x < 4; ++x) labels[static_cast<std::size_t>(y) * 4 + x] = 1;
  const SpGraph g = build_rag(labeled_map(4, 2, labels, 2));
  CHECK(g.n == 2);
  CHECK(g.adj.nnz() == 2);  // one undirected edge
  CHECK(g.adj.has_entry(0, 1));
}

TEST_CASE("build_rag on a 3x3 block grid is the 12-edge grid graph") {
  // 9 regions of 2x2 pixels each.
  std::vector<int> labels(6 * 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) labels[static_cast<std::size_t>(y) * 6 + x] = (y / 2) * 3 + x / 2;
  const SpGraph g = build_rag(labeled_map(6, 6, labels, 9));

  // Brute-force oracle: count 4-adjacent label pairs on the raster.
  std::set<std::pair<int, int>> expect;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      const int a = labels[static_cast<std::size_t>(y) * 6 + x];
      if (x + 1 < 6) {
        const int b = labels[static_cast<std::size_t>(y) * 6 + x + 1];
        if (a != b) expect.insert({std::min(a, b), std::max(a, b)});
      }
      if (y + 1 < 6) {
        const int b = labels[static_cast<std::size_t>(y + 1) * 6 + x];
        if (a != b) expect.insert({std::min(a, b), std::max(a, b)});
      }
    }
  CHECK(expect.size() == 12);
  CHECK(g.adj.nnz() == 2 * expect.size());
  for (const auto& [a, b] : expect) CHECK(g.adj.has_entry(a, b));
}

TEST_CASE("edge_weights is the L1 feature distance") {
  SpGraph g = path_graph({0, 0, 0});
  g.feats.resize(3, 2);
  g.feats << 1, 2, 4, 0, 1, 1;  // rows: (1,2), (4,0), (1,1)
  const SparseAdj w = edge_weights(g);
  CHECK(w.at(0, 1) == 5.0);   // |1-4| + |2-0|
  CHECK(w.at(1, 2) == 4.0);   // |4-1| + |0-1|
  CHECK(w.at(1, 0) == w.at(0, 1));

  const SpGraph same = path_graph({3, 3, 3});
  const SparseAdj same_w = edge_weights(same);
  for (const AdjEntry& e : same_w.entries()) CHECK(e.w == 0);
}

TEST_CASE("boruvka_merge joins the lightest path edge first") {
  const SpGraph g = path_graph({0, 1, 3});  // weights: (0-1)=1, (1-2)=2
  const ScaleHierarchy hier = boruvka_merge(g, {2});
  REQUIRE(hier.record.steps.size() == 1);
  CHECK(hier.record.steps[0].i == 0);
  CHECK(hier.record.steps[0].j == 1);
  CHECK(hier.scales[0].n == 2);
  CHECK(hier.record.parent_maps[0] == std::vector<int>{0, 0, 1});
}

TEST_CASE("boruvka_merge triangle MST weight matches the light edges") {
  SpGraph g;
  g.n = 3;
  g.feats = Mat::Zero(3, 1);
  g.feats << 0, 1, 3;  // edge weights: (0,1)=1, (1,2)=2, (0,2)=3
  g.centroids = Mat::Zero(3, 2);
  g.centroids << 0, 0, 0, 1, 1, 0;
  g.sizes = {1, 1, 1};
  g.adj = SparseAdj::from_undirected(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
  const ScaleHierarchy hier = boruvka_merge(g, {1});
  Scalar total = 0;
  for (const MergeStep& st : hier.record.steps) total += st.w;
  CHECK(total == 3.0);  // Kruskal picks 1 and 2
  CHECK(hier.record.steps.size() == 2);
}

TEST_CASE("boruvka_merge to n-1 performs exactly one merge") {
  Rng rng(61);
  const PixelFeatureMap fm = random_feature_map(rng, 8, 8, 2, 1);
  ClusterConfig cfg;
  cfg.grid_w = 4;
  cfg.grid_h = 4;
  const auto [q, sp] = init_grid(fm, cfg);
  SpGraph g = build_rag(sp);
  g.feats = random_matrix(rng, g.n, 3, -1, 1);
  const ScaleHierarchy hier = boruvka_merge(g, {g.n - 1});
  CHECK(hier.record.steps.size() == 1);
}

TEST_CASE("boruvka_merge validates targets") {
  const SpGraph g = path_graph({0, 1, 2, 3});
  CHECK_THROWS_AS(boruvka_merge(g, {2, 3}), std::invalid_argument);  // increasing
  CHECK_THROWS_AS(boruvka_merge(g, {0}), std::invalid_argument);     // below 1
  CHECK_THROWS_AS(boruvka_merge(g, {5}), std::invalid_argument);     // above n
}

TEST_CASE("boruvka_merge surfaces the component count when disconnected") {
  SpGraph g = path_graph({0, 1});
  g.n = 4;  // two extra isolated nodes
  g.feats = Mat::Zero(4, 1);
  g.centroids = Mat::Zero(4, 2);
  g.sizes = {1, 1, 1, 1};
  g.adj = SparseAdj::from_undirected(4, {{0, 1, 1}});
  CHECK_THROWS_WITH_AS(boruvka_merge(g, {1}), doctest::Contains("3 components"),
                       std::runtime_error);
}

TEST_CASE("boruvka_merge with empty targets returns the finest scale only") {
  const SpGraph g = path_graph({0, 2, 5});
  const ScaleHierarchy hier = boruvka_merge(g, {});
  CHECK(hier.K() == 1);
  CHECK(hier.scales[0].n == 3);
  CHECK(hier.record.steps.empty());
}

TEST_CASE("boruvka_merge snapshots at a target equal to n") {
  const SpGraph g = path_graph({0, 2, 5});
  const ScaleHierarchy hier = boruvka_merge(g, {3, 1});
  CHECK(hier.K() == 2);
  CHECK(hier.scales[0].n == 3);
  CHECK(hier.scales[1].n == 1);
  CHECK(hier.record.steps.size() == 2);
}

TEST_CASE("coarse node features are size-weighted means") {
  SpGraph g = path_graph({1, 5, 9});
  g.sizes = {3, 1, 2};
  const ScaleHierarchy hier = boruvka_merge(g, {2});
  // Edge (0,1) weighs 4, edge (1,2) weighs 4: tie broken toward (0,1).
  REQUIRE(hier.scales[0].n == 2);
  CHECK(hier.record.parent_maps[0] == std::vector<int>{0, 0, 1});
  CHECK(hier.scales[0].feats(0, 0) == doctest::Approx((3.0 * 1 + 1 * 5) / 4).epsilon(1e-15));
  CHECK(hier.scales[0].sizes[0] == 4);
  CHECK(hier.scales[0].sizes[1] == 2);
}

TEST_CASE("coarsen_association at the finest scale is the identity projection") {
  Rng rng(62);
  const SoftAssociation q = random_association(rng, 6, 6, 3, 3);
  MergeRecord record;
  std::vector<int> identity(9);
  std::iota(identity.begin(), identity.end(), 0);
  record.parent_maps.push_back(identity);
  const NodeAssociation a = coarsen_association(q, record, 0);
  for (Index p = 0; p < q.probs.rows(); ++p) {
    Scalar sum = 0;
    for (int c = 0; c < 9 && a.nodes[p][c] >= 0; ++c) {
      sum += a.probs(p, c);
      // Locate the candidate slot addressing this cell; probabilities carry over.
      int slot = -1;
      for (int cc = 0; cc < 9; ++cc)
        if (q.candidate_cell(p, cc) == a.nodes[p][c]) slot = cc;
      REQUIRE(slot >= 0);
      CHECK(a.probs(p, c) == q.probs(p, slot));
    }
    CHECK(sum == doctest::Approx(1).epsilon(1e-9));
  }
}

TEST_CASE("coarsen_association sums sibling probabilities") {
  Rng rng(63);
  const SoftAssociation q = random_association(rng, 4, 4, 2, 1);
  MergeRecord record;
  record.parent_maps.push_back({0, 0});  // both cells merge into one parent
  const NodeAssociation a = coarsen_association(q, record, 0);
  for (Index p = 0; p < q.probs.rows(); ++p) {
    CHECK(a.nodes[p][0] == 0);
    CHECK(a.nodes[p][1] == -1);
    CHECK(a.probs(p, 0) == doctest::Approx(1).epsilon(1e-9));
  }
}

TEST_CASE("coarsen_association validates the scale index") {
  Rng rng(64);
  const SoftAssociation q = random_association(rng, 4, 4, 2, 2);
  MergeRecord record;
  record.parent_maps.push_back({0, 0, 1, 1});
  CHECK_THROWS_AS(coarsen_association(q, record, 1), std::invalid_argument);
  CHECK_THROWS_AS(coarsen_association(q, record, -1), std::invalid_argument);
}

TEST_CASE("cell_to_node_map covers every cell") {
  Rng rng(65);
  const PixelFeatureMap fm = random_feature_map(rng, 10, 10, 2, 0.7);
  ClusterConfig cfg;
  cfg.grid_w = 3;
  cfg.grid_h = 3;
  cfg.iterations = 3;
  cfg.pos_scale = 0.7;
  const ClusterResult res = cluster(fm, cfg);
  const SuperpixelMap sp = enforce_connectivity(fm, res.sp);
  const std::vector<int> map = cell_to_node_map(res.q, sp);
  CHECK(static_cast<int>(map.size()) == 9);
  for (int node : map) {
    CHECK(node >= 0);
    CHECK(node < sp.n_superpixels);
  }
}
