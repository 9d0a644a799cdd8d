#pragma once

#include <string>
#include <vector>

#include "supergraph/cdgc.hpp"
#include "supergraph/fusion.hpp"
#include "supergraph/hierarchy.hpp"
#include "supergraph/superpixel.hpp"

namespace supergraph {

struct PipelineConfig {
  std::string input;
  int grid_w = 128;
  int grid_h = 128;
  int iterations = 5;
  Scalar pos_scale = 0;  // <= 0 derives the SLIC-style default
  Scalar lambda_compact = 0.1;
  Scalar temperature = 1;
  std::vector<int> targets = {256, 64};
  Scalar alpha = 0.4;
  int gamma = 2;
  int hidden_dim = 64;
  bool root_global_mean = false;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::string& path);

/// Throws std::invalid_argument describing the first violated field.
void validate_config(const PipelineConfig& cfg);

void write_segment_json(const SuperpixelMap& sp, const PipelineConfig& cfg,
                        const std::vector<LossPoint>& trace, const std::string& path);
void write_losses_csv(const std::vector<LossPoint>& trace, const std::string& path);
void write_hierarchy_json(const ScaleHierarchy& hier, const std::string& path);
void write_embeddings_csv(const std::vector<Mat>& per_scale, const std::string& path);
void write_fusion_json(const Vec& root, const Mat& branches, const Mat& leaves,
                       const std::string& path);

/// Weight blob: one-line JSON header {dims, alpha, gamma, seed} followed by
/// the raw little-endian doubles of every layer in scale/layer/subset order.
void save_stack_weights(const MdgcnStack& stack, const std::string& path);
/// Loads weights into a stack already shaped by make_stack; header must match.
void load_stack_weights(MdgcnStack& stack, const std::string& path);

/// Schema self-checks for the written artifacts; throw on violation.
void check_segment_json(const std::string& path);
void check_hierarchy_json(const std::string& path);
void check_fusion_json(const std::string& path);

}  // namespace supergraph
