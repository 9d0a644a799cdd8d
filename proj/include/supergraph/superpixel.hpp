#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "supergraph/features.hpp"
#include "supergraph/types.hpp"

namespace supergraph {

struct ClusterConfig {
  int grid_w = 0;
  int grid_h = 0;
  int iterations = 5;
  Scalar pos_scale = 1;
  Scalar temperature = 1;
  std::uint64_t seed = 0;
};

/// Soft pixel-superpixel association over the 9 grid cells surrounding each
/// pixel's home cell. Rows of probs sum to 1; candidates falling outside the
/// grid carry exactly 0. Candidate c in [0,9) addresses home cell offset
/// (dy, dx) = (c/3 - 1, c%3 - 1).
struct SoftAssociation {
  int width = 0;
  int height = 0;
  int grid_w = 0;
  int grid_h = 0;
  Mat probs;                 // (height * width) x 9
  std::vector<int> cell_of;  // per pixel home cell id (gy * grid_w + gx)

  int n_cells() const { return grid_w * grid_h; }
  Index pixel_index(int y, int x) const { return static_cast<Index>(y) * width + x; }

  /// Grid cell addressed by candidate c of the given pixel; -1 out of bounds.
  int candidate_cell(Index pixel, int c) const {
    const int home = cell_of[pixel];
    const int gy = home / grid_w + c / 3 - 1;
    const int gx = home % grid_w + c % 3 - 1;
    if (gy < 0 || gy >= grid_h || gx < 0 || gx >= grid_w) return -1;
    return gy * grid_w + gx;
  }

  /// Per-pixel argmax candidate cell, ties toward the lower cell id.
  int argmax_cell(Index pixel) const;
};

/// Hard label field plus per-superpixel soft centers: centers_u over the D
/// appearance dims, centers_r over the two scaled positional dims.
struct SuperpixelMap {
  int width = 0;
  int height = 0;
  int n_superpixels = 0;
  std::vector<int> labels;  // per pixel, in [0, n_superpixels)
  Mat centers_u;            // n x D
  Mat centers_r;            // n x 2
  std::vector<std::int64_t> sizes;
  Vec soft_mass;  // total association mass per superpixel
};

struct LossPoint {
  Scalar rec = 0;
  Scalar compact = 0;
};

struct ClusterResult {
  SoftAssociation q;
  SuperpixelMap sp;
  std::vector<LossPoint> trace;
  /// Grid cell id -> final compacted label; -1 for cells dropped as empty.
  std::vector<int> cell_to_label;
};

/// Regular grid partition: each pixel's home cell is its enclosing grid
/// rectangle, Q is one-hot on it, centers follow from that hard Q.
std::pair<SoftAssociation, SuperpixelMap> init_grid(const PixelFeatureMap& fm,
                                                    const ClusterConfig& cfg);

/// Soft centers u_s = sum(x q) / sum(q), r_s = sum(y q) / sum(q) over every
/// pixel whose candidate window contains s (the column-normalized matrix
/// form applied cell by cell). Labels and sizes come from the per-pixel
/// argmax. Zero-mass cells are flagged via soft_mass and given a placeholder
/// center at their grid rectangle centroid.
SuperpixelMap compute_centers(const PixelFeatureMap& fm, const SoftAssociation& q);

/// Per-pixel softmax over -||delta - center||^2 / temperature across the 9
/// candidates; out-of-bounds and massless candidates are masked to exactly 0.
SoftAssociation update_association(const PixelFeatureMap& fm, const SuperpixelMap& sp,
                                   const SoftAssociation& q, Scalar temperature);

/// Mean squared L2 distance between the reconstructed appearance of each
/// pixel (candidate centers u weighted by the row-normalized association)
/// and its original appearance features.
Scalar reconstruction_loss(const PixelFeatureMap& fm, const SoftAssociation& q,
                           const SuperpixelMap& sp);

/// Sum over pixels and their valid candidates of ||r_s - y|| / (H * W * 9).
Scalar compactness_loss(const PixelFeatureMap& fm, const SoftAssociation& q,
                        const SuperpixelMap& sp);

/// Reconstructed full feature rows (appearance and position) per pixel:
/// the row-normalized association applied to candidate centers.
Mat smooth_pixel_features(const PixelFeatureMap& fm, const SoftAssociation& q,
                          const SuperpixelMap& sp);

/// Alternates association and center updates for cfg.iterations rounds,
/// recording the loss pair per round. Empty cells are reseeded between
/// rounds and dropped (with label compaction) at the end.
ClusterResult cluster(const PixelFeatureMap& fm, const ClusterConfig& cfg);

/// Splits labels into 4-connected components; fragments below a quarter of
/// the mean superpixel size merge into their largest adjacent region, larger
/// ones become regions of their own. Centers and sizes are recomputed as
/// hard means. Connected inputs come back unchanged.
SuperpixelMap enforce_connectivity(const PixelFeatureMap& fm, const SuperpixelMap& sp);

}  // namespace supergraph
