#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "supergraph/cdgc.hpp"
#include "supergraph/fixtures.hpp"
#include "supergraph/grad_check.hpp"

using namespace supergraph;

namespace {

SpGraph make_graph(const Mat& centroids, const std::vector<AdjEntry>& edges, const Mat& feats,
                   std::vector<std::int64_t> sizes = {}) {
  SpGraph g;
  g.n = static_cast<int>(centroids.rows());
  g.feats = feats;
  g.centroids = centroids;
  g.sizes = sizes.empty() ? std::vector<std::int64_t>(g.n, 1) : std::move(sizes);
  g.adj = SparseAdj::from_undirected(g.n, edges);
  return g;
}

SpGraph random_connected(Rng& rng, int n, int d) {
  std::vector<AdjEntry> edges;
  for (int v = 1; v < n; ++v)
    edges.push_back({static_cast<int>(rng.next_below(v)), v, 1});
  return make_graph(random_matrix(rng, n, 2, 0, 20), edges, random_matrix(rng, n, d, -2, 2));
}

CdgcLayer identity_layer(int d, Scalar alpha) {
  CdgcLayer layer;
  layer.w_d0 = Mat::Identity(d, d);
  layer.w_d1 = layer.w_d0;
  layer.w_d2 = layer.w_d0;
  layer.alpha = alpha;
  layer.tied = true;
  layer.activation = CdgcLayer::Activation::none;
  return layer;
}

}  // namespace

TEST_CASE("partition labels all pairs d0 when every node shares a location") {
  const Mat c = Mat::Zero(3, 2);
  const SpGraph g = make_graph(c, {{0, 1, 1}, {1, 2, 1}}, Mat::Zero(3, 1));
  const PartitionMap pm = partition(g);
  for (int i = 0; i < 3; ++i)
    for (const auto& [j, s] : pm.nbr[i]) CHECK(s == Subset::d0);
}

TEST_CASE("partition separates centripetal and centrifugal neighbors") {
  // Gravity sits midway; node 1 is nearer to it than node 0.
  Mat c(2, 2);
  c << 0, 0, 0, 1;  // gravity at (0, 0.5), radii 0.5 each -> equal, both d0
  const SpGraph eq = make_graph(c, {{0, 1, 1}}, Mat::Zero(2, 1));
  const PartitionMap pm_eq = partition(eq);
  CHECK(pm_eq.nbr[0][0].second == Subset::d0);

  Mat c2(3, 2);
  c2 << 0, 0, 0, 3, 0, 6;  // gravity at (0,3): radii 3, 0, 3
  const SpGraph g = make_graph(c2, {{0, 1, 1}, {1, 2, 1}}, Mat::Zero(3, 1));
  const PartitionMap pm = partition(g);
  CHECK(pm.nbr[0][0].second == Subset::d1);  // neighbor 1 is closer to gravity
  CHECK(pm.nbr[1][0].second == Subset::d2);  // neighbor 0 is farther
  CHECK(pm.nbr[1][1].second == Subset::d2);
}

TEST_CASE("partition matches a direct rule evaluation on a random layout") {
  Rng rng(71);
  const SpGraph g = random_connected(rng, 8, 2);
  const PartitionMap pm = partition(g);

  const Vec2 gravity = g.centroids.colwise().mean().transpose();
  for (int i = 0; i < g.n; ++i) {
    const Scalar ri = (g.centroids.row(i).transpose() - gravity).norm();
    CHECK(pm.radii[i] == doctest::Approx(ri).epsilon(1e-14));
    for (const auto& [j, s] : pm.nbr[i]) {
      const Scalar rj = (g.centroids.row(j).transpose() - gravity).norm();
      Subset expect = Subset::d0;
      if (std::abs(rj - ri) > 1e-9) expect = rj < ri ? Subset::d1 : Subset::d2;
      CHECK(s == expect);
    }
    int total = 0;
    for (int k = 0; k < 3; ++k) total += pm.subset_size[i][k];
    CHECK(total == static_cast<int>(pm.nbr[i].size()));
  }
}

TEST_CASE("gcn_forward on a single node is the identity") {
  const SpGraph g = make_graph(Mat::Zero(1, 2), {}, Mat::Zero(1, 3));
  Mat h(1, 3);
  h << 1, -2, 0.5;
  const Mat out = gcn_forward(normalize_graph(g), partition(g), identity_layer(3, 0), h);
  CHECK((out - h).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("gcn_forward with constant features reproduces them on a 2-node graph") {
  Mat c(2, 2);
  c << 0, 0, 0, 5;
  const SpGraph g = make_graph(c, {{0, 1, 1}}, Mat::Zero(2, 2));
  Mat h(2, 2);
  h << 3, -1, 3, -1;
  const Mat out = gcn_forward(normalize_graph(g), partition(g), identity_layer(2, 0), h);
  CHECK((out - h).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("tied weights equal untied-but-equal weights") {
  Rng rng(72);
  const SpGraph g = random_connected(rng, 7, 3);
  const NormalizedGraph ng = normalize_graph(g);
  const PartitionMap pm = partition(g);
  CdgcLayer tied = make_layer(3, 4, 0.4, true, CdgcLayer::Activation::none, rng);
  CdgcLayer untied = tied;
  untied.tied = false;  // same matrices, node-wise path
  const Mat h = random_matrix(rng, 7, 3, -1, 1);
  const Mat a = cdgc_forward(ng, pm, tied, h);
  const Mat b = cdgc_forward(ng, pm, untied, h);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cdgc_forward at alpha 0 equals gcn_forward") {
  Rng rng(73);
  const SpGraph g = random_connected(rng, 6, 2);
  const NormalizedGraph ng = normalize_graph(g);
  const PartitionMap pm = partition(g);
  const CdgcLayer layer = make_layer(2, 3, 0, false, CdgcLayer::Activation::rectifier, rng);
  const Mat h = random_matrix(rng, 6, 2, -1, 1);
  CHECK((cdgc_forward(ng, pm, layer, h) - gcn_forward(ng, pm, layer, h)).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("constant features annihilate the difference term") {
  Mat c(3, 2);
  c << 0, 0, 4, 1, 2, 7;
  const SpGraph g = make_graph(c, {{0, 1, 1}, {1, 2, 1}}, Mat::Zero(3, 2));
  const NormalizedGraph ng = normalize_graph(g);
  const PartitionMap pm = partition(g);
  Mat h(3, 2);
  for (int v = 0; v < 3; ++v) h.row(v) << 1.5, -0.5;

  // Pure difference term (alpha = 1) vanishes; any alpha scales the vanilla
  // term by (1 - alpha).
  const Mat vanilla = cdgc_forward(ng, pm, identity_layer(2, 0), h);
  const Mat diff_only = cdgc_forward(ng, pm, identity_layer(2, 1), h);
  CHECK(diff_only.cwiseAbs().maxCoeff() <= 1e-12);
  const Mat mixed = cdgc_forward(ng, pm, identity_layer(2, 0.4), h);
  CHECK((mixed - 0.6 * vanilla).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("node-wise and matrix paths agree at alpha 0.4 on a random 6-node graph") {
  Rng rng(74);
  const SpGraph g = random_connected(rng, 6, 3);
  const NormalizedGraph ng = normalize_graph(g);
  const PartitionMap pm = partition(g);
  const CdgcLayer layer = make_layer(3, 3, 0.4, true, CdgcLayer::Activation::none, rng);
  const Mat h = random_matrix(rng, 6, 3, -2, 2);
  const Mat a = cdgc_forward_nodewise(ng, pm, layer, h);
  const Mat b = cdgc_forward_matrix(ng, pm, layer, h);
  const Scalar scale = std::max(Scalar(1), a.cwiseAbs().maxCoeff());
  CHECK((a - b).cwiseAbs().maxCoeff() / scale <= 1e-12);
}

TEST_CASE("alpha outside [0,1] is rejected") {
  Rng rng(75);
  const SpGraph g = random_connected(rng, 4, 2);
  CdgcLayer layer = make_layer(2, 2, 0.5, true, CdgcLayer::Activation::none, rng);
  layer.alpha = 1.5;
  CHECK_THROWS_AS(cdgc_forward(normalize_graph(g), partition(g), layer, Mat::Zero(4, 2)),
                  std::invalid_argument);
}

TEST_CASE("matrix path requires tied weights") {
  Rng rng(76);
  const SpGraph g = random_connected(rng, 4, 2);
  const CdgcLayer layer = make_layer(2, 2, 0.5, false, CdgcLayer::Activation::none, rng);
  CHECK_THROWS_AS(cdgc_forward_matrix(normalize_graph(g), partition(g), layer, Mat::Zero(4, 2)),
                  std::invalid_argument);
}

TEST_CASE("project_pixels_to_nodes averages one-hot pixel groups") {
  Rng rng(77);
  const PixelFeatureMap fm = random_feature_map(rng, 4, 2, 2, 1);
  NodeAssociation a;
  a.width = 4;
  a.height = 2;
  a.n_nodes = 2;
  a.nodes.assign(8, {-1, -1, -1, -1, -1, -1, -1, -1, -1});
  a.probs = Mat::Zero(8, 9);
  for (Index p = 0; p < 8; ++p) {
    a.nodes[p][0] = p % 4 < 2 ? 0 : 1;
    a.probs(p, 0) = 1;
  }
  const Mat nodes = project_pixels_to_nodes(fm, a);
  Vec expect = Vec::Zero(2);
  int count = 0;
  for (Index p = 0; p < 8; ++p)
    if (p % 4 < 2) {
      expect += fm.data.row(p).head(2).transpose();
      ++count;
    }
  expect /= count;
  CHECK((nodes.row(0).transpose() - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("project_pixels_to_nodes matches compute_centers on shared fixtures") {
  Rng rng(78);
  const PixelFeatureMap fm = random_feature_map(rng, 4, 4, 3, 0.5);
  const SoftAssociation q = random_association(rng, 4, 4, 2, 2);
  const SuperpixelMap sp = compute_centers(fm, q);
  std::vector<int> identity(4);
  std::iota(identity.begin(), identity.end(), 0);
  const Mat nodes = project_pixels_to_nodes(fm, project_association(q, identity, 4));
  CHECK((nodes - sp.centers_u).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("layer_gradients needs a cache and zero upstream gives zero gradients") {
  Rng rng(79);
  const SpGraph g = random_connected(rng, 5, 2);
  const NormalizedGraph ng = normalize_graph(g);
  const PartitionMap pm = partition(g);
  const CdgcLayer layer = make_layer(2, 3, 0.3, false, CdgcLayer::Activation::rectifier, rng);
  const Mat h = random_matrix(rng, 5, 2, -1, 1);

  CdgcCache cache;
  CHECK_THROWS_AS(layer_gradients(ng, pm, layer, cache, Mat::Zero(5, 3)),
                  std::invalid_argument);

  cdgc_forward_nodewise(ng, pm, layer, h, &cache);
  const CdgcGrads grads = layer_gradients(ng, pm, layer, cache, Mat::Zero(5, 3));
  for (const Mat& w : grads.w) CHECK(w.cwiseAbs().maxCoeff() == 0);
  CHECK(grads.alpha == 0);
  CHECK(grads.h.cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("analytic gradients match finite differences on a small fixture") {
  Rng rng(80);
  const SpGraph g = random_connected(rng, 5, 3);
  const NormalizedGraph ng = normalize_graph(g);
  const PartitionMap pm = partition(g);
  CdgcLayer layer = make_layer(3, 2, 0.35, false, CdgcLayer::Activation::none, rng);
  const Mat h = random_matrix(rng, 5, 3, -2, 2);
  const Mat upstream = random_matrix(rng, 5, 2, -1, 1);

  CdgcCache cache;
  cdgc_forward_nodewise(ng, pm, layer, h, &cache);
  const CdgcGrads grads = layer_gradients(ng, pm, layer, cache, upstream);

  auto loss = [&](const CdgcLayer& l, const Mat& hh) {
    return cdgc_forward_nodewise(ng, pm, l, hh).cwiseProduct(upstream).sum();
  };
  const Mat num_w1 = finite_diff_grad(
      [&](const Mat& w) {
        CdgcLayer probe = layer;
        probe.w_d1 = w;
        return loss(probe, h);
      },
      layer.w_d1);
  for (Index k = 0; k < num_w1.size(); ++k)
    CHECK(grad_close(grads.w[1].data()[k], num_w1.data()[k], 1e-5));

  const Mat num_h = finite_diff_grad([&](const Mat& hh) { return loss(layer, hh); }, h);
  for (Index k = 0; k < num_h.size(); ++k)
    CHECK(grad_close(grads.h.data()[k], num_h.data()[k], 1e-5));
}

TEST_CASE("tied-layer weight gradient is the sum over subsets") {
  Rng rng(81);
  const SpGraph g = random_connected(rng, 6, 2);
  const NormalizedGraph ng = normalize_graph(g);
  const PartitionMap pm = partition(g);
  const CdgcLayer layer = make_layer(2, 2, 0.4, true, CdgcLayer::Activation::none, rng);
  const Mat h = random_matrix(rng, 6, 2, -1, 1);
  const Mat upstream = random_matrix(rng, 6, 2, -1, 1);

  CdgcCache cache;
  cdgc_forward_matrix(ng, pm, layer, h, &cache);
  const CdgcGrads grads = layer_gradients(ng, pm, layer, cache, upstream);
  const Mat total = grads.w[0] + grads.w[1] + grads.w[2];

  const Mat numeric = finite_diff_grad(
      [&](const Mat& w) {
        CdgcLayer probe = layer;
        probe.w_d0 = w;
        probe.w_d1 = w;
        probe.w_d2 = w;
        return cdgc_forward_matrix(ng, pm, probe, h).cwiseProduct(upstream).sum();
      },
      layer.w_d0);
  for (Index k = 0; k < numeric.size(); ++k)
    CHECK(grad_close(total.data()[k], numeric.data()[k], 1e-5));
}

TEST_CASE("stack_forward composes projection and convolution") {
  Rng rng(82);
  const PixelFeatureMap fm = random_feature_map(rng, 8, 8, 2, 0.6);
  ClusterConfig cfg;
  cfg.grid_w = 4;
  cfg.grid_h = 4;
  const auto [q, sp] = init_grid(fm, cfg);
  const SpGraph rag = build_rag(sp);
  const ScaleHierarchy hier = boruvka_merge(rag, {8, 3});

  MdgcnStack stack = make_stack(hier, 2, 2, 1, 0, 5, true);
  for (auto& layers : stack.scale_layers)
    for (CdgcLayer& layer : layers) {
      layer.w_d0 = Mat::Identity(2, 2);
      layer.w_d1 = layer.w_d0;
      layer.w_d2 = layer.w_d0;
      layer.activation = CdgcLayer::Activation::none;
    }

  const NodeAssociation base = coarsen_association(q, hier.record, 0);
  const std::vector<Mat> out = stack_forward(hier, fm, base, stack);
  REQUIRE(out.size() == 2);

  // Scale 1: one smoothing application of the identity-weight layer.
  const Mat u = project_pixels_to_nodes(fm, base);
  const Mat expect = cdgc_forward(stack.scale_graphs[0], stack.scale_partitions[0],
                                  stack.scale_layers[0][0], u);
  CHECK((out[0] - expect).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(out[1].rows() == 3);
}

TEST_CASE("stack_forward on a single-node hierarchy multiplies the weights through") {
  const PixelFeatureMap fm = [] {
    PixelFeatureMap f;
    f.width = 2;
    f.height = 2;
    f.dim = 4;
    f.pos_scale = 1;
    f.data.resize(4, 4);
    f.data << 1, 2, 0, 0, 1, 2, 0, 1, 1, 2, 1, 0, 1, 2, 1, 1;
    return f;
  }();
  SuperpixelMap sp;
  sp.width = 2;
  sp.height = 2;
  sp.n_superpixels = 1;
  sp.labels.assign(4, 0);
  sp.sizes = {4};
  sp.centers_u = Mat::Zero(1, 2);
  sp.centers_u << 1, 2;
  sp.centers_r = Mat::Zero(1, 2);
  sp.soft_mass = Vec::Ones(1);
  const SpGraph rag = build_rag(sp);
  const ScaleHierarchy hier = boruvka_merge(rag, {1});

  Rng rng(83);
  MdgcnStack stack = make_stack(hier, 2, 3, 2, 0.7, 9, true);
  SoftAssociation q;
  q.width = 2;
  q.height = 2;
  q.grid_w = 1;
  q.grid_h = 1;
  q.probs = Mat::Zero(4, 9);
  q.probs.col(4).setOnes();
  q.cell_of.assign(4, 0);
  const std::vector<Mat> out = stack_forward(hier, fm, coarsen_association(q, hier.record, 0),
                                             stack);
  // Single node: normalized adjacency is 1, difference term vanishes, so the
  // output is the mean feature pushed through both weight matrices (with the
  // rectifier in between).
  Mat expect(1, 2);
  expect << 1, 2;
  expect = (1 - 0.7) * expect * stack.scale_layers[0][0].w_d0;
  expect = expect.cwiseMax(0.0);
  expect = (1 - 0.7) * expect * stack.scale_layers[0][1].w_d0;
  CHECK((out[0] - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("stack_forward is deterministic") {
  Rng rng(84);
  const PixelFeatureMap fm = random_feature_map(rng, 8, 6, 3, 0.5);
  ClusterConfig cfg;
  cfg.grid_w = 4;
  cfg.grid_h = 3;
  cfg.iterations = 2;
  cfg.pos_scale = 0.5;
  const ClusterResult res = cluster(fm, cfg);
  const SuperpixelMap sp = enforce_connectivity(fm, res.sp);
  const SpGraph rag = build_rag(sp);
  const ScaleHierarchy hier = boruvka_merge(rag, {6, 2});
  const MdgcnStack stack = make_stack(hier, 3, 4, 2, 0.4, 11, true);
  const NodeAssociation base = coarsen_association(
      project_association(res.q, cell_to_node_map(res.q, sp), rag.n),
      hier.record.parent_maps[0], hier.scales[0].n);
  const std::vector<Mat> a = stack_forward(hier, fm, base, stack);
  const std::vector<Mat> b = stack_forward(hier, fm, base, stack);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK((a[k] - b[k]).cwiseAbs().maxCoeff() == 0);
}
