#pragma once

#include <array>
#include <span>
#include <vector>

#include "supergraph/sparse.hpp"
#include "supergraph/superpixel.hpp"
#include "supergraph/types.hpp"

namespace supergraph {

/// Superpixel graph at one scale: node features are the region centers u_s,
/// centroids the location centers r_s, adjacency the raw boundary-sharing
/// relation (binary, symmetric, no self-loops).
struct SpGraph {
  int n = 0;
  Mat feats;      // n x D
  Mat centroids;  // n x 2
  std::vector<std::int64_t> sizes;
  SparseAdj adj;
  int scale_id = 0;
};

struct MergeStep {
  int i = 0;  // finest-scale node ids of the accepted edge
  int j = 0;
  Scalar w = 0;
  int step = 0;
};

struct MergeRecord {
  std::vector<MergeStep> steps;
  /// parent_maps[0] maps finest-graph ids onto scales[0]; parent_maps[k]
  /// maps scales[k-1] onto scales[k].
  std::vector<std::vector<int>> parent_maps;
};

/// Snapshots from fine to coarse; node counts strictly decreasing.
struct ScaleHierarchy {
  std::vector<SpGraph> scales;
  MergeRecord record;
  int K() const { return static_cast<int>(scales.size()); }
};

/// Region adjacency graph: regions are adjacent iff some pixel of one is
/// 4-adjacent to a pixel of the other.
SpGraph build_rag(const SuperpixelMap& sp);

/// L1 feature distance per adjacent pair, over the same sparsity as g.adj.
SparseAdj edge_weights(const SpGraph& g);

/// Boruvka MST merging over the L1-weighted RAG, edge order fixed by
/// (weight, min id, max id) on finest-scale ids. Accepted edges apply one at
/// a time so every intermediate tree count is realized; a SpGraph snapshot is
/// taken whenever the count hits a target. Merged node features and
/// centroids are pixel-size-weighted means of their finest constituents.
/// Targets must be strictly decreasing, each in [1, g.n]; empty targets
/// yield the input graph as the only scale.
ScaleHierarchy boruvka_merge(const SpGraph& g, const std::vector<int>& targets);

/// Per-pixel soft assignment onto the nodes of one graph; rows sum to 1.
/// Slots hold (node, prob) with node = -1 padding, nodes ascending.
struct NodeAssociation {
  int width = 0;
  int height = 0;
  int n_nodes = 0;
  std::vector<std::array<int, 9>> nodes;  // per pixel
  Mat probs;                              // (height * width) x 9
};

/// Folds the 9 grid-cell candidates of each pixel through a total cell->node
/// map, summing probabilities that land on the same node.
NodeAssociation project_association(const SoftAssociation& q, std::span<const int> cell_to_node,
                                    int n_nodes);

/// Regroups a node association through a parent map (scale k-1 -> scale k).
NodeAssociation coarsen_association(const NodeAssociation& a, std::span<const int> parent_map,
                                    int n_coarse);

/// Spec-level convenience: identity cell->node at the finest graph, then
/// parent maps folded up to (and including) scale index k of the hierarchy.
NodeAssociation coarsen_association(const SoftAssociation& q, const MergeRecord& record, int k);

/// Total cell->final-label map: majority final label among the cell's argmax
/// pixels; cells without argmax pixels take the label of the pixel nearest
/// their center.
std::vector<int> cell_to_node_map(const SoftAssociation& q, const SuperpixelMap& final_sp);

}  // namespace supergraph
