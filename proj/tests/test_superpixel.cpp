#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "supergraph/fixtures.hpp"
#include "supergraph/superpixel.hpp"

using namespace supergraph;

namespace {

PixelFeatureMap constant_features(int w, int h, Scalar value, Scalar pos_scale = 1) {
  PixelFeatureMap fm;
  fm.width = w;
  fm.height = h;
  fm.dim = 3;
  fm.pos_scale = pos_scale;
  fm.data.resize(static_cast<Index>(w) * h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      fm.data(fm.pixel_index(y, x), 0) = value;
      fm.data(fm.pixel_index(y, x), 1) = y * pos_scale;
      fm.data(fm.pixel_index(y, x), 2) = x * pos_scale;
    }
  return fm;
}

ClusterConfig grid_config(int gw, int gh, int iters = 3, Scalar pos_scale = 1) {
  ClusterConfig cfg;
  cfg.grid_w = gw;
  cfg.grid_h = gh;
  cfg.iterations = iters;
  cfg.pos_scale = pos_scale;
  return cfg;
}

}  // namespace

TEST_CASE("init_grid partitions a 4x4 image into quadrants") {
  const PixelFeatureMap fm = constant_features(4, 4, 7);
  const auto [q, sp] = init_grid(fm, grid_config(2, 2));
  CHECK(sp.n_superpixels == 4);
  for (auto s : sp.sizes) CHECK(s == 4);
  // Quadrant centroids at (0.5, 0.5), (0.5, 2.5), (2.5, 0.5), (2.5, 2.5).
  CHECK(sp.centers_r(0, 0) == doctest::Approx(0.5));
  CHECK(sp.centers_r(0, 1) == doctest::Approx(0.5));
  CHECK(sp.centers_r(1, 1) == doctest::Approx(2.5));
  CHECK(sp.centers_r(3, 0) == doctest::Approx(2.5));
  CHECK(sp.centers_r(3, 1) == doctest::Approx(2.5));
}

TEST_CASE("init_grid splits a 5-wide image 3+2") {
  // Width 5, height 4, 2x2 grid: integer bucketing gives column spans 3 and 2.
  const PixelFeatureMap fm = constant_features(5, 4, 0);
  const auto [q, sp] = init_grid(fm, grid_config(2, 2));
  REQUIRE(sp.n_superpixels == 4);
  CHECK(sp.sizes[0] == 6);
  CHECK(sp.sizes[1] == 4);
  CHECK(sp.sizes[2] == 6);
  CHECK(sp.sizes[3] == 4);
}

TEST_CASE("init_grid handles a single-pixel image") {
  const PixelFeatureMap fm = constant_features(1, 1, 3);
  const auto [q, sp] = init_grid(fm, grid_config(1, 1));
  CHECK(sp.n_superpixels == 1);
  CHECK(sp.sizes[0] == 1);
  CHECK(sp.labels[0] == 0);
  CHECK(q.probs(0, 4) == 1);
}

TEST_CASE("init_grid rejects grids larger than the image") {
  const PixelFeatureMap fm = constant_features(3, 3, 0);
  CHECK_THROWS_AS(init_grid(fm, grid_config(4, 1)), std::invalid_argument);
}

TEST_CASE("compute_centers on a constant image reproduces the constant") {
  const PixelFeatureMap fm = constant_features(6, 6, 2.5);
  const auto [q, sp] = init_grid(fm, grid_config(3, 2));
  for (int s = 0; s < sp.n_superpixels; ++s)
    CHECK(sp.centers_u(s, 0) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("a lone pixel split 0.5/0.5 centers both cells on itself") {
  PixelFeatureMap fm = constant_features(2, 1, 0);
  fm.data(0, 0) = 4;   // the only pixel carrying mass
  fm.data(1, 0) = 9;   // ignored: its row is zeroed below
  SoftAssociation q;
  q.width = 2;
  q.height = 1;
  q.grid_w = 2;
  q.grid_h = 1;
  q.probs = Mat::Zero(2, 9);
  q.cell_of = {0, 1};
  q.probs(0, 4) = 0.5;  // home cell 0
  q.probs(0, 5) = 0.5;  // right neighbor cell 1
  const SuperpixelMap sp = compute_centers(fm, q);
  CHECK(sp.centers_u(0, 0) == doctest::Approx(4).epsilon(1e-15));
  CHECK(sp.centers_u(1, 0) == doctest::Approx(4).epsilon(1e-15));
  CHECK(sp.centers_r(0, 1) == doctest::Approx(0).epsilon(1e-15));
}

TEST_CASE("compute_centers matches a per-superpixel loop oracle") {
  Rng rng(33);
  const PixelFeatureMap fm = random_feature_map(rng, 6, 6, 3, 0.5);
  const SoftAssociation q = random_association(rng, 6, 6, 2, 3);
  const SuperpixelMap sp = compute_centers(fm, q);

  const int d = fm.feature_dim();
  for (int s = 0; s < q.n_cells(); ++s) {
    Vec acc = Vec::Zero(fm.dim);
    Scalar mass = 0;
    for (Index p = 0; p < fm.data.rows(); ++p)
      for (int c = 0; c < 9; ++c) {
        if (q.candidate_cell(p, c) != s) continue;
        acc += q.probs(p, c) * fm.data.row(p).transpose();
        mass += q.probs(p, c);
      }
    if (!(mass > 0)) continue;
    acc /= mass;
    for (int k = 0; k < d; ++k)
      CHECK(sp.centers_u(s, k) == doctest::Approx(acc[k]).epsilon(1e-12));
    CHECK(sp.centers_r(s, 0) == doctest::Approx(acc[d]).epsilon(1e-12));
    CHECK(sp.centers_r(s, 1) == doctest::Approx(acc[d + 1]).epsilon(1e-12));
  }
}

TEST_CASE("update_association saturates on the nearest center") {
  PixelFeatureMap fm = constant_features(2, 1, 0);
  SoftAssociation q;
  q.width = 2;
  q.height = 1;
  q.grid_w = 2;
  q.grid_h = 1;
  q.probs = Mat::Zero(2, 9);
  q.cell_of = {0, 1};
  SuperpixelMap sp;
  sp.n_superpixels = 2;
  sp.centers_u = Mat::Zero(2, 1);
  sp.centers_u(1, 0) = 100;  // far away in feature space
  sp.centers_r = Mat::Zero(2, 2);
  sp.centers_r.row(0) = fm.position(0, 0);
  sp.centers_r.row(1) = fm.position(0, 0);
  sp.soft_mass = Vec::Ones(2);
  const SoftAssociation out = update_association(fm, sp, q, 1);
  CHECK(out.probs(0, 4) > 1 - 1e-6);
}

TEST_CASE("update_association is uniform over equidistant candidates") {
  const PixelFeatureMap fm = constant_features(9, 9, 0);
  SoftAssociation q;
  q.width = 9;
  q.height = 9;
  q.grid_w = 3;
  q.grid_h = 3;
  q.probs = Mat::Zero(81, 9);
  q.cell_of.assign(81, 4);  // center cell: all 9 candidates in bounds
  SuperpixelMap sp;
  sp.n_superpixels = 9;
  sp.centers_u = Mat::Zero(9, 1);
  sp.centers_r = Mat::Zero(9, 2);  // all centers identical: equidistant
  sp.soft_mass = Vec::Ones(9);
  const SoftAssociation out = update_association(fm, sp, q, 1);
  for (int c = 0; c < 9; ++c)
    CHECK(out.probs(40, c) == doctest::Approx(1.0 / 9).epsilon(1e-12));
}

TEST_CASE("update_association softmax at squared distances 0 and 1") {
  PixelFeatureMap fm = constant_features(2, 1, 0);
  SoftAssociation q;
  q.width = 2;
  q.height = 1;
  q.grid_w = 2;
  q.grid_h = 1;
  q.probs = Mat::Zero(2, 9);
  q.cell_of = {0, 1};
  SuperpixelMap sp;
  sp.n_superpixels = 2;
  sp.centers_u = Mat::Zero(2, 1);
  sp.centers_u(1, 0) = 1;  // squared feature distance 1
  sp.centers_r = Mat::Zero(2, 2);
  sp.centers_r.row(0) = fm.position(0, 0);
  sp.centers_r.row(1) = fm.position(0, 0);
  sp.soft_mass = Vec::Ones(2);
  const SoftAssociation out = update_association(fm, sp, q, 1);
  CHECK(out.probs(0, 4) == doctest::Approx(0.731058578630).epsilon(1e-9));
  CHECK(out.probs(0, 5) == doctest::Approx(0.268941421370).epsilon(1e-9));
}

TEST_CASE("update_association rejects non-positive temperature") {
  const PixelFeatureMap fm = constant_features(2, 2, 0);
  const auto [q, sp] = init_grid(fm, grid_config(2, 2));
  CHECK_THROWS_AS(update_association(fm, sp, q, 0), std::invalid_argument);
}

TEST_CASE("reconstruction loss is zero for exact hard assignments") {
  const PixelFeatureMap fm = constant_features(4, 4, 3);
  const auto [q, sp] = init_grid(fm, grid_config(2, 2));
  CHECK(reconstruction_loss(fm, q, sp) == 0);

  const PixelFeatureMap one = constant_features(1, 1, 5);
  const auto [q1, sp1] = init_grid(one, grid_config(1, 1));
  CHECK(reconstruction_loss(one, q1, sp1) == 0);
}

TEST_CASE("reconstruction loss matches the direct oracle on a random 3x3 case") {
  Rng rng(44);
  const PixelFeatureMap fm = random_feature_map(rng, 3, 3, 2, 1);
  const SoftAssociation q = random_association(rng, 3, 3, 3, 3);
  const SuperpixelMap sp = compute_centers(fm, q);
  const Scalar loss = reconstruction_loss(fm, q, sp);

  const int d = fm.feature_dim();
  Scalar expected = 0;
  for (Index p = 0; p < fm.data.rows(); ++p) {
    Vec rec = Vec::Zero(d);
    for (int c = 0; c < 9; ++c) {
      const int s = q.candidate_cell(p, c);
      if (s < 0) continue;
      rec += q.probs(p, c) * sp.centers_u.row(s).transpose();
    }
    expected += (rec.transpose() - fm.data.row(p).head(d)).squaredNorm();
  }
  expected /= static_cast<Scalar>(fm.data.rows());
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("compactness loss hand values") {
  // Single pixel whose sole candidate center sits at its own position.
  const PixelFeatureMap fm = constant_features(1, 1, 0);
  const auto [q, sp] = init_grid(fm, grid_config(1, 1));
  CHECK(compactness_loss(fm, q, sp) == 0);

  // Pixel at (0,0), sole candidate center at (3,4): distance 5 over 1*1*9.
  SuperpixelMap moved = sp;
  moved.centers_r(0, 0) = 3;
  moved.centers_r(0, 1) = 4;
  CHECK(compactness_loss(fm, q, moved) == doctest::Approx(5.0 / 9).epsilon(1e-15));
}

TEST_CASE("compactness loss is translation invariant") {
  Rng rng(46);
  PixelFeatureMap fm = random_feature_map(rng, 5, 4, 2, 1);
  const SoftAssociation q = random_association(rng, 5, 4, 2, 2);
  SuperpixelMap sp = compute_centers(fm, q);
  const Scalar base = compactness_loss(fm, q, sp);

  fm.data.col(fm.dim - 2).array() += 11;
  fm.data.col(fm.dim - 1).array() -= 4;
  sp.centers_r.col(0).array() += 11;
  sp.centers_r.col(1).array() -= 4;
  CHECK(compactness_loss(fm, q, sp) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("cluster on a constant image has zero reconstruction loss throughout") {
  const PixelFeatureMap fm = constant_features(8, 8, 1.5, 0.3);
  const ClusterResult res = cluster(fm, grid_config(2, 2, 4, 0.3));
  CHECK(res.trace.size() == 4);
  for (const LossPoint& p : res.trace) CHECK(p.rec <= 1e-18);
}

TEST_CASE("cluster trace length equals the iteration count") {
  Rng rng(47);
  const PixelFeatureMap fm = random_feature_map(rng, 10, 8, 2, 0.5);
  const ClusterResult res = cluster(fm, grid_config(3, 2, 7, 0.5));
  CHECK(res.trace.size() == 7);
  CHECK(res.sp.n_superpixels >= 1);
  std::int64_t total = 0;
  for (auto s : res.sp.sizes) total += s;
  CHECK(total == 80);
}

TEST_CASE("cluster compacts labels and reports the cell mapping") {
  Rng rng(48);
  const PixelFeatureMap fm = random_feature_map(rng, 12, 9, 3, 0.4);
  const ClusterResult res = cluster(fm, grid_config(4, 3, 4, 0.4));
  CHECK(static_cast<int>(res.cell_to_label.size()) == 12);
  for (int s = 0; s < 12; ++s) {
    if (res.cell_to_label[s] >= 0) CHECK(res.cell_to_label[s] < res.sp.n_superpixels);
  }
  for (int l : res.sp.labels) {
    CHECK(l >= 0);
    CHECK(l < res.sp.n_superpixels);
  }
}

TEST_CASE("enforce_connectivity absorbs a stray pixel") {
  const PixelFeatureMap fm = constant_features(3, 3, 0);
  SuperpixelMap sp;
  sp.width = 3;
  sp.height = 3;
  sp.n_superpixels = 2;
  sp.labels.assign(9, 0);
  sp.labels[4] = 1;  // stray single pixel of label 1 inside label 0
  sp.sizes = {8, 1};
  sp.centers_u = Mat::Zero(2, 1);
  sp.centers_r = Mat::Zero(2, 2);
  sp.soft_mass = Vec::Ones(2);
  const SuperpixelMap fixed = enforce_connectivity(fm, sp);
  CHECK(fixed.n_superpixels == 1);
  for (int l : fixed.labels) CHECK(l == 0);
  CHECK(fixed.sizes[0] == 9);
}

TEST_CASE("enforce_connectivity keeps a connected map unchanged") {
  const PixelFeatureMap fm = constant_features(6, 6, 0);
  const auto [q, sp] = init_grid(fm, grid_config(2, 2));
  const SuperpixelMap fixed = enforce_connectivity(fm, sp);
  CHECK(fixed.labels == sp.labels);
  CHECK(fixed.n_superpixels == sp.n_superpixels);
}

TEST_CASE("enforce_connectivity recomputes centers as hard means") {
  Rng rng(49);
  const PixelFeatureMap fm = random_feature_map(rng, 6, 4, 2, 1);
  const auto [q, sp] = init_grid(fm, grid_config(3, 2));
  const SuperpixelMap fixed = enforce_connectivity(fm, sp);
  for (int s = 0; s < fixed.n_superpixels; ++s) {
    Vec acc = Vec::Zero(2);
    std::int64_t count = 0;
    for (Index p = 0; p < fm.data.rows(); ++p)
      if (fixed.labels[p] == s) {
        acc += fm.data.row(p).head(2).transpose();
        ++count;
      }
    CHECK(fixed.sizes[s] == count);
    CHECK(fixed.centers_u(s, 0) ==
          doctest::Approx(acc[0] / static_cast<Scalar>(count)).epsilon(1e-12));
  }
}
