#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "supergraph/hierarchy.hpp"
#include "supergraph/rng.hpp"
#include "supergraph/sparse.hpp"
#include "supergraph/types.hpp"

namespace supergraph {

/// Neighborhood subsets: self / equal radius (d0), centripetal (d1),
/// centrifugal (d2), by distance to the gravity center of the graph.
enum class Subset : std::uint8_t { d0 = 0, d1 = 1, d2 = 2 };

inline constexpr Scalar kRadiusTol = 1e-9;

struct PartitionMap {
  Vec2 gravity = Vec2::Zero();
  Vec radii;  // per node, Euclidean distance of centroid to gravity
  /// Per node: neighbors (j, subset), ascending j. Self pairs are d0 and
  /// implicit.
  std::vector<std::vector<std::pair<int, Subset>>> nbr;
  /// Neighbor counts per subset, the Z factor for neighbor pairs; the self
  /// pair always normalizes by 1.
  std::vector<std::array<int, 3>> subset_size;
};

/// Gravity center = mean node centroid; neighbor j of i is d0/d1/d2 by
/// comparing radii within kRadiusTol.
PartitionMap partition(const SpGraph& g);

struct CdgcLayer {
  Mat w_d0, w_d1, w_d2;  // D_in x D_out each
  Scalar alpha = 0;
  bool tied = true;
  enum class Activation { none, rectifier };
  Activation activation = Activation::none;
};

/// Fan-scaled random init; tied layers share one weight matrix across the
/// three subsets.
CdgcLayer make_layer(Index d_in, Index d_out, Scalar alpha, bool tied, CdgcLayer::Activation act,
                     Rng& rng);

/// Normalized adjacency with self-connections plus its row sums, computed
/// once per scale.
struct NormalizedGraph {
  SparseAdj anorm;
  Vec anorm_row_sums;
};
NormalizedGraph normalize_graph(const SpGraph& g);

/// Forward intermediates needed by the backward pass.
struct CdgcCache {
  bool valid = false;
  Mat h;                   // layer input
  Mat pre;                 // pre-activation output
  std::array<Mat, 3> x;    // per subset: B_d h - alpha * rowsum(B_d) .* h
  Mat diff_minus_vanilla;  // difference term minus vanilla term, pre-activation
};

/// Verification hook: lets the self-check suite demonstrate that a defect in
/// the matrix path is caught by the path-equivalence property.
struct CdgcDebug {
  bool flip_difference_sign = false;
};

/// Vanilla subset-partitioned convolution: per node, each neighborhood
/// subset is averaged by its cardinality and mapped through its own weight.
Mat gcn_forward(const NormalizedGraph& ng, const PartitionMap& pm, const CdgcLayer& layer,
                const Mat& h);

/// Node-wise combined form: alpha-weighted center-difference term plus
/// vanilla term, activation applied to the sum. Works tied or untied.
Mat cdgc_forward_nodewise(const NormalizedGraph& ng, const PartitionMap& pm,
                          const CdgcLayer& layer, const Mat& h, CdgcCache* cache = nullptr);

/// Matrix form over the subset-scaled operator B: sigma((B h - alpha *
/// rowsum(B) .* h) W). Tied weights only.
Mat cdgc_forward_matrix(const NormalizedGraph& ng, const PartitionMap& pm, const CdgcLayer& layer,
                        const Mat& h, CdgcCache* cache = nullptr,
                        const CdgcDebug* debug = nullptr);

/// Dispatch: matrix fast path when tied, node-wise otherwise.
Mat cdgc_forward(const NormalizedGraph& ng, const PartitionMap& pm, const CdgcLayer& layer,
                 const Mat& h, CdgcCache* cache = nullptr);

struct CdgcGrads {
  std::array<Mat, 3> w;  // per subset
  Scalar alpha = 0;
  Mat h;
};

/// Exact gradients given upstream sensitivities; requires a filled cache.
CdgcGrads layer_gradients(const NormalizedGraph& ng, const PartitionMap& pm,
                          const CdgcLayer& layer, const CdgcCache& cache, const Mat& upstream);

/// Column-normalized aggregation of pixel appearance features onto graph
/// nodes: node v = sum(q x) / sum(q) over pixel candidates mapping to v.
Mat project_pixels_to_nodes(const PixelFeatureMap& fm, const NodeAssociation& assoc);

/// Per-scale stacks of gamma layers plus the per-scale graph operators.
struct MdgcnStack {
  int gamma = 2;
  Scalar alpha = 0.4;
  std::vector<std::vector<CdgcLayer>> scale_layers;
  std::vector<NormalizedGraph> scale_graphs;
  std::vector<PartitionMap> scale_partitions;
  std::vector<Index> dims;  // gamma + 1 entries, dims[0] = input D
  std::uint64_t seed = 0;
};

MdgcnStack make_stack(const ScaleHierarchy& hier, Index d_in, Index d_hidden, int gamma,
                      Scalar alpha, std::uint64_t seed, bool tied = true);

/// Per scale: fold the scale-0 association through the parent maps, project
/// pixels to nodes, then run the scale's layers (rectifier between layers,
/// none after the last). Returns node embeddings per scale.
std::vector<Mat> stack_forward(const ScaleHierarchy& hier, const PixelFeatureMap& fm,
                               const NodeAssociation& scale0_assoc, const MdgcnStack& stack);

}  // namespace supergraph
