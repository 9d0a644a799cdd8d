#pragma once

#include <string>
#include <vector>

#include "supergraph/hierarchy.hpp"
#include "supergraph/rng.hpp"
#include "supergraph/types.hpp"

namespace supergraph {

/// Three-level tree: fine-scale leaves, coarse-scale branches, one root.
/// Leaf parents come from the hierarchy's parent map.
struct LevelTree {
  Mat leaf_feats;    // n_leaves x dim
  Mat branch_feats;  // n_branches x dim
  Vec root_feat;     // set by root_fusion
  std::vector<int> leaf_parent;
};

/// Requires exactly two hierarchy scales (leaf = scales[0], branch =
/// scales[1]); root feature starts empty.
LevelTree build_tree(const ScaleHierarchy& hier, const std::vector<Mat>& embeddings);

struct FusionWeights {
  Mat w_branch;  // root_dim x branch_dim
  Mat w_leaf;    // root_dim x leaf_dim
};

/// Y1 = W_a * mean(branch feats) + W_b * mean(leaf feats).
Vec root_fusion(const LevelTree& tree, const FusionWeights& w);

/// Child-sum Tree-LSTM cell. W_* map inputs, U_* map summed child hidden
/// states (per-child for the forget gate).
struct TreeLstmCell {
  Mat w_i, u_i, w_f, u_f, w_o, u_o, w_u, u_u;  // hidden x in / hidden x hidden
  Vec b_i, b_f, b_o, b_u;

  Index hidden() const { return w_i.rows(); }
  Index input_dim() const { return w_i.cols(); }
};

TreeLstmCell make_cell(Index input_dim, Index hidden, Rng& rng);

struct TreeStates {
  Mat leaf_h, leaf_c;
  Mat branch_h, branch_c;
  Vec root_h, root_c;
};

/// Bottom-up pass: leaves with zero child state, branches over summed leaf
/// children, root over summed branches. Children are summed in ascending id
/// order. Requires root_feat to be set.
TreeStates tree_lstm_up(const LevelTree& tree, const TreeLstmCell& cell);

/// Parameter blocks addressable by the gradient check and its fault hook.
enum class CellBlock {
  none,
  input_gate_w,
  input_gate_u,
  input_gate_b,
  forget_gate_w,
  forget_gate_u,
  forget_gate_b,
  output_gate_w,
  output_gate_u,
  output_gate_b,
  update_w,
  update_u,
  update_b,
};

std::string cell_block_name(CellBlock block);

struct GradcheckReport {
  bool pass = true;
  Scalar worst_deviation = 0;  // max |analytic - numeric| / max(1, |a|, |n|)
  CellBlock worst_block = CellBlock::none;
  std::string message;
};

/// Analytic gradients of sum(root hidden) against central finite
/// differences, block by block. `corrupt` perturbs that block's analytic
/// gradient to prove the check catches it.
GradcheckReport cell_gradcheck(const TreeLstmCell& cell, const LevelTree& tree, Scalar tol = 1e-5,
                               CellBlock corrupt = CellBlock::none);

}  // namespace supergraph
