#include "supergraph/pipeline.hpp"

#include <stdexcept>

namespace supergraph {

Scalar effective_pos_scale(const PipelineConfig& cfg, int width, int height) {
  if (cfg.pos_scale > 0) return cfg.pos_scale;
  return default_pos_scale(width, height, cfg.grid_w * cfg.grid_h);
}

SegmentStage run_segment(const PipelineConfig& cfg) {
  validate_config(cfg);
  const Image img = load_ppm(cfg.input);
  const Scalar pos_scale = effective_pos_scale(cfg, img.width, img.height);

  SegmentStage seg;
  seg.fm = filter_bank_features(img, sobel_kernels(), pos_scale);

  ClusterConfig ccfg;
  ccfg.grid_w = cfg.grid_w;
  ccfg.grid_h = cfg.grid_h;
  ccfg.iterations = cfg.iterations;
  ccfg.pos_scale = pos_scale;
  ccfg.temperature = cfg.temperature;
  ccfg.seed = cfg.seed;
  seg.clus = cluster(seg.fm, ccfg);
  seg.sp = enforce_connectivity(seg.fm, seg.clus.sp);
  return seg;
}

HierarchyStage run_hierarchy(const SegmentStage& seg, const PipelineConfig& cfg) {
  HierarchyStage hs;
  hs.rag = build_rag(seg.sp);
  hs.hier = boruvka_merge(hs.rag, cfg.targets);
  hs.cell_to_node = cell_to_node_map(seg.clus.q, seg.sp);
  NodeAssociation base = project_association(seg.clus.q, hs.cell_to_node, hs.rag.n);
  hs.scale0_assoc =
      coarsen_association(base, hs.hier.record.parent_maps[0], hs.hier.scales[0].n);
  return hs;
}

EmbedStage run_embed(const SegmentStage& seg, const HierarchyStage& hs,
                     const PipelineConfig& cfg, const std::string& weights_path) {
  EmbedStage es;
  es.stack = make_stack(hs.hier, seg.fm.feature_dim(), cfg.hidden_dim, cfg.gamma, cfg.alpha,
                        cfg.seed);
  if (!weights_path.empty()) load_stack_weights(es.stack, weights_path);
  es.embeddings = stack_forward(hs.hier, seg.fm, hs.scale0_assoc, es.stack);

  if (hs.hier.K() != 2) return es;

  LevelTree tree = build_tree(hs.hier, es.embeddings);
  Rng rng(cfg.seed ^ 0x66757365ULL);  // independent stream for fusion weights
  FusionWeights fw;
  fw.w_branch = fan_scaled_matrix(rng, cfg.hidden_dim, cfg.hidden_dim);
  fw.w_leaf = fan_scaled_matrix(rng, cfg.hidden_dim, cfg.hidden_dim);
  es.fusion_root_input = root_fusion(tree, fw);
  tree.root_feat = es.fusion_root_input;

  Index in_dim = cfg.hidden_dim;
  if (cfg.root_global_mean) {
    // Concatenate the global appearance mean onto the root input; leaves and
    // branches are zero-padded to the shared width.
    const Vec global_mean =
        seg.fm.data.leftCols(seg.fm.feature_dim()).colwise().mean().transpose();
    in_dim += global_mean.size();
    Vec root(in_dim);
    root << tree.root_feat, global_mean;
    tree.root_feat = root;
    Mat leaves = Mat::Zero(tree.leaf_feats.rows(), in_dim);
    leaves.leftCols(cfg.hidden_dim) = tree.leaf_feats;
    tree.leaf_feats = leaves;
    Mat branches = Mat::Zero(tree.branch_feats.rows(), in_dim);
    branches.leftCols(cfg.hidden_dim) = tree.branch_feats;
    tree.branch_feats = branches;
  }

  const TreeLstmCell cell = make_cell(in_dim, cfg.hidden_dim, rng);
  const TreeStates states = tree_lstm_up(tree, cell);
  es.fused = true;
  es.root_h = states.root_h;
  es.branch_h = states.branch_h;
  es.leaf_h = states.leaf_h;
  return es;
}

std::vector<int> scale_pixel_labels(const SegmentStage& seg, const HierarchyStage& hs, int k) {
  if (k < 0 || k >= hs.hier.K()) throw std::invalid_argument("scale_pixel_labels: bad scale");
  std::vector<int> labels = seg.sp.labels;
  for (int s = 0; s <= k; ++s)
    for (int& l : labels) l = hs.hier.record.parent_maps[s][l];
  return labels;
}

}  // namespace supergraph
