#include "supergraph/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace supergraph {

namespace {

Vec sigmoid(const Vec& v) { return ((-v.array()).exp() + 1).inverse().matrix(); }

struct NodeFwd {
  Vec x, child_h_sum;
  Vec gate_i, gate_o, gate_u;  // u is the tanh update
  std::vector<Vec> gate_f;     // per child
  Vec c, h;
};

NodeFwd step(const TreeLstmCell& cell, const Vec& x, const std::vector<const NodeFwd*>& children) {
  NodeFwd f;
  f.x = x;
  f.child_h_sum = Vec::Zero(cell.hidden());
  for (const NodeFwd* ch : children) f.child_h_sum += ch->h;
  f.gate_i = sigmoid(cell.w_i * x + cell.u_i * f.child_h_sum + cell.b_i);
  f.gate_o = sigmoid(cell.w_o * x + cell.u_o * f.child_h_sum + cell.b_o);
  f.gate_u = (cell.w_u * x + cell.u_u * f.child_h_sum + cell.b_u).array().tanh().matrix();
  f.c = f.gate_i.cwiseProduct(f.gate_u);
  for (const NodeFwd* ch : children) {
    f.gate_f.push_back(sigmoid(cell.w_f * x + cell.u_f * ch->h + cell.b_f));
    f.c += f.gate_f.back().cwiseProduct(ch->c);
  }
  f.h = f.gate_o.cwiseProduct(f.c.array().tanh().matrix());
  return f;
}

}  // namespace

LevelTree build_tree(const ScaleHierarchy& hier, const std::vector<Mat>& embeddings) {
  if (hier.K() != 2)
    throw std::invalid_argument("build_tree: exactly 2 superpixel scales required, got " +
                                std::to_string(hier.K()));
  if (embeddings.size() != 2)
    throw std::invalid_argument("build_tree: one embedding matrix per scale required");
  if (embeddings[0].rows() != hier.scales[0].n || embeddings[1].rows() != hier.scales[1].n)
    throw std::invalid_argument("build_tree: embedding rows do not match scale node counts");

  LevelTree tree;
  tree.leaf_feats = embeddings[0];
  tree.branch_feats = embeddings[1];
  tree.leaf_parent = hier.record.parent_maps[1];
  return tree;
}

Vec root_fusion(const LevelTree& tree, const FusionWeights& w) {
  if (tree.branch_feats.rows() == 0 || tree.leaf_feats.rows() == 0)
    throw std::invalid_argument("root_fusion: empty branch or leaf level");
  if (w.w_branch.cols() != tree.branch_feats.cols() || w.w_leaf.cols() != tree.leaf_feats.cols() ||
      w.w_branch.rows() != w.w_leaf.rows())
    throw std::invalid_argument("root_fusion: weight shapes do not match level dims");
  const Vec branch_mean = tree.branch_feats.colwise().mean().transpose();
  const Vec leaf_mean = tree.leaf_feats.colwise().mean().transpose();
  return w.w_branch * branch_mean + w.w_leaf * leaf_mean;
}

TreeLstmCell make_cell(Index input_dim, Index hidden, Rng& rng) {
  TreeLstmCell cell;
  cell.w_i = fan_scaled_matrix(rng, hidden, input_dim);
  cell.u_i = fan_scaled_matrix(rng, hidden, hidden);
  cell.w_f = fan_scaled_matrix(rng, hidden, input_dim);
  cell.u_f = fan_scaled_matrix(rng, hidden, hidden);
  cell.w_o = fan_scaled_matrix(rng, hidden, input_dim);
  cell.u_o = fan_scaled_matrix(rng, hidden, hidden);
  cell.w_u = fan_scaled_matrix(rng, hidden, input_dim);
  cell.u_u = fan_scaled_matrix(rng, hidden, hidden);
  cell.b_i = Vec::Zero(hidden);
  cell.b_f = Vec::Zero(hidden);
  cell.b_o = Vec::Zero(hidden);
  cell.b_u = Vec::Zero(hidden);
  return cell;
}

namespace {

struct TreeFwd {
  std::vector<NodeFwd> leaves, branches;
  NodeFwd root;
  std::vector<std::vector<int>> branch_children;
};

TreeFwd forward_tree(const LevelTree& tree, const TreeLstmCell& cell) {
  const Index n_leaves = tree.leaf_feats.rows();
  const Index n_branches = tree.branch_feats.rows();
  if (tree.root_feat.size() == 0)
    throw std::invalid_argument("tree_lstm_up: root feature not set (run root_fusion first)");
  if (tree.leaf_feats.cols() != cell.input_dim() || tree.branch_feats.cols() != cell.input_dim() ||
      tree.root_feat.size() != cell.input_dim())
    throw std::invalid_argument("tree_lstm_up: level dims do not match cell input dim");
  if (static_cast<Index>(tree.leaf_parent.size()) != n_leaves)
    throw std::invalid_argument("tree_lstm_up: leaf parent map size mismatch");

  TreeFwd fwd;
  fwd.branch_children.resize(n_branches);
  for (Index l = 0; l < n_leaves; ++l) {
    const int b = tree.leaf_parent[l];
    if (b < 0 || b >= n_branches) throw std::invalid_argument("tree_lstm_up: bad leaf parent");
    fwd.branch_children[b].push_back(static_cast<int>(l));
  }

  for (Index l = 0; l < n_leaves; ++l)
    fwd.leaves.push_back(step(cell, tree.leaf_feats.row(l).transpose(), {}));
  for (Index b = 0; b < n_branches; ++b) {
    std::vector<const NodeFwd*> children;
    for (int l : fwd.branch_children[b]) children.push_back(&fwd.leaves[l]);
    fwd.branches.push_back(step(cell, tree.branch_feats.row(b).transpose(), children));
  }
  std::vector<const NodeFwd*> branches;
  for (Index b = 0; b < n_branches; ++b) branches.push_back(&fwd.branches[b]);
  fwd.root = step(cell, tree.root_feat, branches);
  return fwd;
}

struct CellGrads {
  Mat w_i, u_i, w_f, u_f, w_o, u_o, w_u, u_u;
  Vec b_i, b_f, b_o, b_u;

  explicit CellGrads(const TreeLstmCell& cell)
      : w_i(Mat::Zero(cell.w_i.rows(), cell.w_i.cols())),
        u_i(Mat::Zero(cell.u_i.rows(), cell.u_i.cols())),
        w_f(Mat::Zero(cell.w_f.rows(), cell.w_f.cols())),
        u_f(Mat::Zero(cell.u_f.rows(), cell.u_f.cols())),
        w_o(Mat::Zero(cell.w_o.rows(), cell.w_o.cols())),
        u_o(Mat::Zero(cell.u_o.rows(), cell.u_o.cols())),
        w_u(Mat::Zero(cell.w_u.rows(), cell.w_u.cols())),
        u_u(Mat::Zero(cell.u_u.rows(), cell.u_u.cols())),
        b_i(Vec::Zero(cell.b_i.size())),
        b_f(Vec::Zero(cell.b_f.size())),
        b_o(Vec::Zero(cell.b_o.size())),
        b_u(Vec::Zero(cell.b_u.size())) {}
};

// Backward through one node; children receive their dh/dc contributions.
void step_backward(const TreeLstmCell& cell, const NodeFwd& f,
                   const std::vector<const NodeFwd*>& children, const Vec& dh_in, const Vec& dc_in,
                   CellGrads& g, std::vector<Vec>& child_dh, std::vector<Vec>& child_dc) {
  const Vec t = f.c.array().tanh().matrix();
  const Vec d_o = dh_in.cwiseProduct(t);
  Vec dc = dc_in + dh_in.cwiseProduct(f.gate_o).cwiseProduct(
                       (1 - t.array().square()).matrix());
  const Vec d_i = dc.cwiseProduct(f.gate_u);
  const Vec d_u = dc.cwiseProduct(f.gate_i);

  const Vec da_i = d_i.cwiseProduct(f.gate_i).cwiseProduct((1 - f.gate_i.array()).matrix());
  const Vec da_o = d_o.cwiseProduct(f.gate_o).cwiseProduct((1 - f.gate_o.array()).matrix());
  const Vec da_u = d_u.cwiseProduct((1 - f.gate_u.array().square()).matrix());

  g.w_i += da_i * f.x.transpose();
  g.u_i += da_i * f.child_h_sum.transpose();
  g.b_i += da_i;
  g.w_o += da_o * f.x.transpose();
  g.u_o += da_o * f.child_h_sum.transpose();
  g.b_o += da_o;
  g.w_u += da_u * f.x.transpose();
  g.u_u += da_u * f.child_h_sum.transpose();
  g.b_u += da_u;

  const Vec shared_dh = cell.u_i.transpose() * da_i + cell.u_o.transpose() * da_o +
                        cell.u_u.transpose() * da_u;
  for (std::size_t k = 0; k < children.size(); ++k) {
    const Vec df = dc.cwiseProduct(children[k]->c);
    const Vec da_f =
        df.cwiseProduct(f.gate_f[k]).cwiseProduct((1 - f.gate_f[k].array()).matrix());
    g.w_f += da_f * f.x.transpose();
    g.u_f += da_f * children[k]->h.transpose();
    g.b_f += da_f;
    child_dh[k] = shared_dh + cell.u_f.transpose() * da_f;
    child_dc[k] = dc.cwiseProduct(f.gate_f[k]);
  }
}

CellGrads backward_tree(const TreeLstmCell& cell, const LevelTree& tree, const TreeFwd& fwd) {
  CellGrads g(cell);
  const Index n_branches = tree.branch_feats.rows();

  // Loss = sum of root hidden components.
  std::vector<const NodeFwd*> branch_ptrs;
  for (Index b = 0; b < n_branches; ++b) branch_ptrs.push_back(&fwd.branches[b]);
  std::vector<Vec> branch_dh(n_branches), branch_dc(n_branches);
  step_backward(cell, fwd.root, branch_ptrs, Vec::Ones(cell.hidden()), Vec::Zero(cell.hidden()),
                g, branch_dh, branch_dc);

  for (Index b = 0; b < n_branches; ++b) {
    std::vector<const NodeFwd*> children;
    for (int l : fwd.branch_children[b]) children.push_back(&fwd.leaves[l]);
    std::vector<Vec> leaf_dh(children.size()), leaf_dc(children.size());
    step_backward(cell, fwd.branches[b], children, branch_dh[b], branch_dc[b], g, leaf_dh,
                  leaf_dc);
    std::vector<Vec> none_dh, none_dc;
    for (std::size_t k = 0; k < children.size(); ++k)
      step_backward(cell, fwd.leaves[fwd.branch_children[b][k]], {}, leaf_dh[k], leaf_dc[k], g,
                    none_dh, none_dc);
  }
  return g;
}

}  // namespace

TreeStates tree_lstm_up(const LevelTree& tree, const TreeLstmCell& cell) {
  const TreeFwd fwd = forward_tree(tree, cell);
  TreeStates states;
  const Index hid = cell.hidden();
  states.leaf_h.resize(tree.leaf_feats.rows(), hid);
  states.leaf_c.resize(tree.leaf_feats.rows(), hid);
  for (Index l = 0; l < tree.leaf_feats.rows(); ++l) {
    states.leaf_h.row(l) = fwd.leaves[l].h.transpose();
    states.leaf_c.row(l) = fwd.leaves[l].c.transpose();
  }
  states.branch_h.resize(tree.branch_feats.rows(), hid);
  states.branch_c.resize(tree.branch_feats.rows(), hid);
  for (Index b = 0; b < tree.branch_feats.rows(); ++b) {
    states.branch_h.row(b) = fwd.branches[b].h.transpose();
    states.branch_c.row(b) = fwd.branches[b].c.transpose();
  }
  states.root_h = fwd.root.h;
  states.root_c = fwd.root.c;
  return states;
}

std::string cell_block_name(CellBlock block) {
  switch (block) {
    case CellBlock::none: return "none";
    case CellBlock::input_gate_w: return "input-gate W";
    case CellBlock::input_gate_u: return "input-gate U";
    case CellBlock::input_gate_b: return "input-gate b";
    case CellBlock::forget_gate_w: return "forget-gate W";
    case CellBlock::forget_gate_u: return "forget-gate U";
    case CellBlock::forget_gate_b: return "forget-gate b";
    case CellBlock::output_gate_w: return "output-gate W";
    case CellBlock::output_gate_u: return "output-gate U";
    case CellBlock::output_gate_b: return "output-gate b";
    case CellBlock::update_w: return "update W";
    case CellBlock::update_u: return "update U";
    case CellBlock::update_b: return "update b";
  }
  return "?";
}

GradcheckReport cell_gradcheck(const TreeLstmCell& cell, const LevelTree& tree, Scalar tol,
                               CellBlock corrupt) {
  CellGrads analytic = backward_tree(cell, tree, forward_tree(tree, cell));

  auto block_ref = [](TreeLstmCell& c, CellBlock b) -> Mat* {
    switch (b) {
      case CellBlock::input_gate_w: return &c.w_i;
      case CellBlock::input_gate_u: return &c.u_i;
      case CellBlock::forget_gate_w: return &c.w_f;
      case CellBlock::forget_gate_u: return &c.u_f;
      case CellBlock::output_gate_w: return &c.w_o;
      case CellBlock::output_gate_u: return &c.u_o;
      case CellBlock::update_w: return &c.w_u;
      case CellBlock::update_u: return &c.u_u;
      default: return nullptr;
    }
  };
  auto bias_ref = [](TreeLstmCell& c, CellBlock b) -> Vec* {
    switch (b) {
      case CellBlock::input_gate_b: return &c.b_i;
      case CellBlock::forget_gate_b: return &c.b_f;
      case CellBlock::output_gate_b: return &c.b_o;
      case CellBlock::update_b: return &c.b_u;
      default: return nullptr;
    }
  };
  auto analytic_mat = [&](CellBlock b) -> Mat* {
    switch (b) {
      case CellBlock::input_gate_w: return &analytic.w_i;
      case CellBlock::input_gate_u: return &analytic.u_i;
      case CellBlock::forget_gate_w: return &analytic.w_f;
      case CellBlock::forget_gate_u: return &analytic.u_f;
      case CellBlock::output_gate_w: return &analytic.w_o;
      case CellBlock::output_gate_u: return &analytic.u_o;
      case CellBlock::update_w: return &analytic.w_u;
      case CellBlock::update_u: return &analytic.u_u;
      default: return nullptr;
    }
  };
  auto analytic_bias = [&](CellBlock b) -> Vec* {
    switch (b) {
      case CellBlock::input_gate_b: return &analytic.b_i;
      case CellBlock::forget_gate_b: return &analytic.b_f;
      case CellBlock::output_gate_b: return &analytic.b_o;
      case CellBlock::update_b: return &analytic.b_u;
      default: return nullptr;
    }
  };

  if (corrupt != CellBlock::none) {
    if (Mat* m = analytic_mat(corrupt)) m->array() += 1;
    if (Vec* v = analytic_bias(corrupt)) v->array() += 1;
  }

  auto loss = [&](const TreeLstmCell& c) {
    return forward_tree(tree, c).root.h.sum();
  };

  GradcheckReport report;
  const Scalar eps = 1e-5;
  const CellBlock blocks[] = {
      CellBlock::input_gate_w,  CellBlock::input_gate_u,  CellBlock::input_gate_b,
      CellBlock::forget_gate_w, CellBlock::forget_gate_u, CellBlock::forget_gate_b,
      CellBlock::output_gate_w, CellBlock::output_gate_u, CellBlock::output_gate_b,
      CellBlock::update_w,      CellBlock::update_u,      CellBlock::update_b,
  };
  for (CellBlock b : blocks) {
    TreeLstmCell probe = cell;
    Mat* pm = block_ref(probe, b);
    Vec* pv = bias_ref(probe, b);
    const Index count = pm ? pm->size() : pv->size();
    for (Index k = 0; k < count; ++k) {
      Scalar* slot = pm ? pm->data() + k : pv->data() + k;
      const Scalar saved = *slot;
      *slot = saved + eps;
      const Scalar fp = loss(probe);
      *slot = saved - eps;
      const Scalar fm = loss(probe);
      *slot = saved;
      const Scalar numeric = (fp - fm) / (2 * eps);
      const Scalar a = pm ? *(analytic_mat(b)->data() + k) : (*analytic_bias(b))[k];
      const Scalar dev =
          std::abs(a - numeric) / std::max({Scalar(1), std::abs(a), std::abs(numeric)});
      if (dev > report.worst_deviation) {
        report.worst_deviation = dev;
        report.worst_block = b;
      }
      if (dev > tol && report.pass) {
        report.pass = false;
        report.message = "gradient mismatch in block " + cell_block_name(b);
      }
    }
  }
  if (report.pass) report.message = "all parameter blocks within tolerance";
  return report;
}

}  // namespace supergraph
