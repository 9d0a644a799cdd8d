#pragma once

#include <vector>

#include "supergraph/cdgc.hpp"
#include "supergraph/fusion.hpp"
#include "supergraph/hierarchy.hpp"
#include "supergraph/serialize.hpp"
#include "supergraph/superpixel.hpp"

namespace supergraph {

struct SegmentStage {
  PixelFeatureMap fm;
  ClusterResult clus;
  SuperpixelMap sp;  // connectivity-enforced
};

struct HierarchyStage {
  SpGraph rag;
  ScaleHierarchy hier;
  std::vector<int> cell_to_node;
  NodeAssociation scale0_assoc;
};

struct EmbedStage {
  MdgcnStack stack;
  std::vector<Mat> embeddings;
  bool fused = false;
  Vec fusion_root_input;  // Y1 from root_fusion
  Vec root_h;
  Mat branch_h;
  Mat leaf_h;
};

Scalar effective_pos_scale(const PipelineConfig& cfg, int width, int height);

SegmentStage run_segment(const PipelineConfig& cfg);
HierarchyStage run_hierarchy(const SegmentStage& seg, const PipelineConfig& cfg);
/// Embeds every scale; fusion runs only when the hierarchy has exactly two
/// scales (fused flag reports it). A nonempty weights_path substitutes stored
/// layer weights for the seeded initialization.
EmbedStage run_embed(const SegmentStage& seg, const HierarchyStage& hs, const PipelineConfig& cfg,
                     const std::string& weights_path = "");

/// Pixel labels at hierarchy scale k (final labels folded through the
/// parent maps).
std::vector<int> scale_pixel_labels(const SegmentStage& seg, const HierarchyStage& hs, int k);

}  // namespace supergraph
