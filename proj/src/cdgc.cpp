#include "supergraph/cdgc.hpp"

#include <cmath>
#include <stdexcept>

namespace supergraph {

namespace {

void check_alpha(Scalar alpha) {
  if (!(alpha >= 0 && alpha <= 1))
    throw std::invalid_argument("cdgc: alpha must lie in [0, 1]");
}

Mat apply_activation(const Mat& pre, CdgcLayer::Activation act) {
  if (act == CdgcLayer::Activation::none) return pre;
  return pre.cwiseMax(Scalar(0));
}

// Walks the anorm row of node i, yielding (j, subset-scaled weight, subset).
// The self pair normalizes by 1; neighbor pairs by their subset cardinality.
template <class Fn>
void for_each_scaled(const NormalizedGraph& ng, const PartitionMap& pm, int i, Fn&& fn) {
  std::size_t k = 0;
  const auto& nbr = pm.nbr[i];
  for (const AdjEntry& e : ng.anorm.row(i)) {
    if (e.j == i) {
      fn(e.j, e.w, Subset::d0);
      continue;
    }
    while (k < nbr.size() && nbr[k].first < e.j) ++k;
    if (k >= nbr.size() || nbr[k].first != e.j)
      throw std::logic_error("cdgc: partition does not match adjacency");
    const Subset s = nbr[k].second;
    ++k;
    const Scalar z = static_cast<Scalar>(pm.subset_size[i][static_cast<int>(s)]);
    fn(e.j, e.w / z, s);
  }
}

const Mat& subset_weight(const CdgcLayer& layer, Subset s) {
  switch (s) {
    case Subset::d0: return layer.w_d0;
    case Subset::d1: return layer.w_d1;
    default: return layer.w_d2;
  }
}

void check_dims(const CdgcLayer& layer, const Mat& h) {
  if (layer.w_d0.rows() != h.cols() || layer.w_d1.rows() != h.cols() ||
      layer.w_d2.rows() != h.cols())
    throw std::invalid_argument("cdgc: weight rows must match feature columns");
  if (layer.w_d0.cols() != layer.w_d1.cols() || layer.w_d0.cols() != layer.w_d2.cols())
    throw std::invalid_argument("cdgc: subset weight shapes differ");
}

}  // namespace

PartitionMap partition(const SpGraph& g) {
  PartitionMap pm;
  pm.gravity = Vec2::Zero();
  if (g.n > 0) pm.gravity = g.centroids.colwise().mean().transpose();
  pm.radii.resize(g.n);
  for (int i = 0; i < g.n; ++i)
    pm.radii[i] = (g.centroids.row(i).transpose() - pm.gravity).norm();

  pm.nbr.resize(g.n);
  pm.subset_size.assign(g.n, {0, 0, 0});
  for (int i = 0; i < g.n; ++i) {
    for (const AdjEntry& e : g.adj.row(i)) {
      if (e.i == e.j) continue;
      Subset s;
      if (std::abs(pm.radii[e.j] - pm.radii[i]) <= kRadiusTol)
        s = Subset::d0;
      else if (pm.radii[e.j] < pm.radii[i])
        s = Subset::d1;
      else
        s = Subset::d2;
      pm.nbr[i].emplace_back(e.j, s);
      ++pm.subset_size[i][static_cast<int>(s)];
    }
  }
  return pm;
}

CdgcLayer make_layer(Index d_in, Index d_out, Scalar alpha, bool tied,
                     CdgcLayer::Activation act, Rng& rng) {
  check_alpha(alpha);
  CdgcLayer layer;
  layer.alpha = alpha;
  layer.tied = tied;
  layer.activation = act;
  layer.w_d0 = fan_scaled_matrix(rng, d_in, d_out);
  if (tied) {
    layer.w_d1 = layer.w_d0;
    layer.w_d2 = layer.w_d0;
  } else {
    layer.w_d1 = fan_scaled_matrix(rng, d_in, d_out);
    layer.w_d2 = fan_scaled_matrix(rng, d_in, d_out);
  }
  return layer;
}

NormalizedGraph normalize_graph(const SpGraph& g) {
  NormalizedGraph ng;
  ng.anorm = normalize_adjacency(g.adj);
  ng.anorm_row_sums = row_sums(ng.anorm);
  return ng;
}

Mat gcn_forward(const NormalizedGraph& ng, const PartitionMap& pm, const CdgcLayer& layer,
                const Mat& h) {
  check_dims(layer, h);
  const int n = ng.anorm.n();
  Mat pre = Mat::Zero(n, layer.w_d0.cols());
  for (int i = 0; i < n; ++i) {
    std::array<Vec, 3> acc = {Vec::Zero(h.cols()), Vec::Zero(h.cols()), Vec::Zero(h.cols())};
    for_each_scaled(ng, pm, i, [&](int j, Scalar b, Subset s) {
      acc[static_cast<int>(s)] += b * h.row(j).transpose();
    });
    for (int s = 0; s < 3; ++s)
      pre.row(i) += acc[s].transpose() * subset_weight(layer, static_cast<Subset>(s));
  }
  return apply_activation(pre, layer.activation);
}

Mat cdgc_forward_nodewise(const NormalizedGraph& ng, const PartitionMap& pm,
                          const CdgcLayer& layer, const Mat& h, CdgcCache* cache) {
  check_alpha(layer.alpha);
  check_dims(layer, h);
  const int n = ng.anorm.n();
  const Index d_out = layer.w_d0.cols();
  const Scalar alpha = layer.alpha;

  Mat pre = Mat::Zero(n, d_out);
  Mat dmv;
  std::array<Mat, 3> x;
  if (cache) {
    dmv = Mat::Zero(n, d_out);
    for (auto& m : x) m = Mat::Zero(n, h.cols());
  }
  for (int i = 0; i < n; ++i) {
    std::array<Vec, 3> acc = {Vec::Zero(h.cols()), Vec::Zero(h.cols()), Vec::Zero(h.cols())};
    std::array<Scalar, 3> bsum = {0, 0, 0};
    for_each_scaled(ng, pm, i, [&](int j, Scalar b, Subset s) {
      acc[static_cast<int>(s)] += b * h.row(j).transpose();
      bsum[static_cast<int>(s)] += b;
    });
    for (int s = 0; s < 3; ++s) {
      const Mat& w = subset_weight(layer, static_cast<Subset>(s));
      const Vec vanilla = acc[s];
      const Vec difference = acc[s] - bsum[s] * h.row(i).transpose();
      const Vec combined = alpha * difference + (1 - alpha) * vanilla;
      pre.row(i) += combined.transpose() * w;
      if (cache) {
        dmv.row(i) += (difference - vanilla).transpose() * w;
        x[s].row(i) = combined.transpose();
      }
    }
  }
  if (cache) {
    cache->valid = true;
    cache->h = h;
    cache->pre = pre;
    cache->x = std::move(x);
    cache->diff_minus_vanilla = std::move(dmv);
  }
  return apply_activation(pre, layer.activation);
}

Mat cdgc_forward_matrix(const NormalizedGraph& ng, const PartitionMap& pm,
                        const CdgcLayer& layer, const Mat& h, CdgcCache* cache,
                        const CdgcDebug* debug) {
  check_alpha(layer.alpha);
  check_dims(layer, h);
  if (!layer.tied) throw std::invalid_argument("cdgc matrix form requires tied weights");
  const int n = ng.anorm.n();

  // Materialize the subset-scaled operator B once.
  std::vector<AdjEntry> scaled;
  scaled.reserve(ng.anorm.nnz());
  for (int i = 0; i < n; ++i)
    for_each_scaled(ng, pm, i,
                    [&](int j, Scalar b, Subset) { scaled.push_back({i, j, b}); });
  const CsrMatrix b(n, n, std::move(scaled));

  const Scalar sign = (debug && debug->flip_difference_sign) ? -1 : 1;
  const Vec bbar = b.row_sums();
  const Mat bh = b.multiply(h);
  const Mat centered = bh - sign * layer.alpha * bbar.asDiagonal() * h;
  Mat pre = centered * layer.w_d0;

  if (cache) {
    cache->valid = true;
    cache->h = h;
    cache->pre = pre;
    // With tied weights the per-subset split of the combined operand is not
    // needed; store it all under d0 so dW sums correctly.
    cache->x = {centered, Mat::Zero(n, h.cols()), Mat::Zero(n, h.cols())};
    cache->diff_minus_vanilla = -(bbar.asDiagonal() * h) * layer.w_d0;
  }
  return apply_activation(pre, layer.activation);
}

Mat cdgc_forward(const NormalizedGraph& ng, const PartitionMap& pm, const CdgcLayer& layer,
                 const Mat& h, CdgcCache* cache) {
  return layer.tied ? cdgc_forward_matrix(ng, pm, layer, h, cache)
                    : cdgc_forward_nodewise(ng, pm, layer, h, cache);
}

CdgcGrads layer_gradients(const NormalizedGraph& ng, const PartitionMap& pm,
                          const CdgcLayer& layer, const CdgcCache& cache, const Mat& upstream) {
  if (!cache.valid) throw std::invalid_argument("layer_gradients: missing forward cache");
  if (upstream.rows() != cache.pre.rows() || upstream.cols() != cache.pre.cols())
    throw std::invalid_argument("layer_gradients: upstream shape mismatch");

  // G = upstream .* sigma'(pre)
  Mat g = upstream;
  if (layer.activation == CdgcLayer::Activation::rectifier)
    g = g.cwiseProduct((cache.pre.array() > 0).cast<Scalar>().matrix());

  CdgcGrads grads;
  for (int s = 0; s < 3; ++s) grads.w[s] = cache.x[s].transpose() * g;
  grads.alpha = (g.cwiseProduct(cache.diff_minus_vanilla)).sum();

  const int n = ng.anorm.n();
  grads.h = Mat::Zero(n, cache.h.cols());
  std::array<Mat, 3> m;  // G W_d^T per subset
  for (int s = 0; s < 3; ++s)
    m[s] = g * subset_weight(layer, static_cast<Subset>(s)).transpose();
  for (int i = 0; i < n; ++i) {
    std::array<Scalar, 3> bsum = {0, 0, 0};
    for_each_scaled(ng, pm, i, [&](int j, Scalar b, Subset s) {
      grads.h.row(j) += b * m[static_cast<int>(s)].row(i);
      bsum[static_cast<int>(s)] += b;
    });
    for (int s = 0; s < 3; ++s)
      grads.h.row(i) -= layer.alpha * bsum[s] * m[s].row(i);
  }
  return grads;
}

namespace {

Mat project_with_fallback(const PixelFeatureMap& fm, const NodeAssociation& assoc,
                          const Mat* fallback) {
  if (assoc.width != fm.width || assoc.height != fm.height)
    throw std::invalid_argument("project_pixels_to_nodes: shape mismatch");
  const int d = fm.feature_dim();
  Mat acc = Mat::Zero(assoc.n_nodes, d);
  Vec mass = Vec::Zero(assoc.n_nodes);
  for (Index p = 0; p < assoc.probs.rows(); ++p)
    for (int c = 0; c < 9 && assoc.nodes[p][c] >= 0; ++c) {
      const Scalar w = assoc.probs(p, c);
      acc.row(assoc.nodes[p][c]) += w * fm.data.row(p).head(d);
      mass[assoc.nodes[p][c]] += w;
    }
  for (int v = 0; v < assoc.n_nodes; ++v) {
    if (mass[v] > 0) {
      acc.row(v) /= mass[v];
    } else if (fallback) {
      acc.row(v) = fallback->row(v).head(d);
    } else {
      throw std::runtime_error("project_pixels_to_nodes: node " + std::to_string(v) +
                               " received no mass");
    }
  }
  return acc;
}

}  // namespace

Mat project_pixels_to_nodes(const PixelFeatureMap& fm, const NodeAssociation& assoc) {
  return project_with_fallback(fm, assoc, nullptr);
}

MdgcnStack make_stack(const ScaleHierarchy& hier, Index d_in, Index d_hidden, int gamma,
                      Scalar alpha, std::uint64_t seed, bool tied) {
  if (gamma < 1) throw std::invalid_argument("make_stack: gamma must be >= 1");
  check_alpha(alpha);
  MdgcnStack stack;
  stack.gamma = gamma;
  stack.alpha = alpha;
  stack.seed = seed;
  stack.dims.push_back(d_in);
  for (int l = 0; l < gamma; ++l) stack.dims.push_back(d_hidden);

  Rng rng(seed);
  for (int k = 0; k < hier.K(); ++k) {
    std::vector<CdgcLayer> layers;
    for (int l = 0; l < gamma; ++l) {
      const auto act = l + 1 < gamma ? CdgcLayer::Activation::rectifier
                                     : CdgcLayer::Activation::none;
      layers.push_back(make_layer(stack.dims[l], stack.dims[l + 1], alpha, tied, act, rng));
    }
    stack.scale_layers.push_back(std::move(layers));
    stack.scale_graphs.push_back(normalize_graph(hier.scales[k]));
    stack.scale_partitions.push_back(partition(hier.scales[k]));
  }
  return stack;
}

std::vector<Mat> stack_forward(const ScaleHierarchy& hier, const PixelFeatureMap& fm,
                               const NodeAssociation& scale0_assoc, const MdgcnStack& stack) {
  if (static_cast<int>(stack.scale_layers.size()) != hier.K())
    throw std::invalid_argument("stack_forward: stack scales do not match hierarchy");
  if (scale0_assoc.n_nodes != hier.scales[0].n)
    throw std::invalid_argument("stack_forward: association does not match finest scale");

  std::vector<Mat> embeddings;
  NodeAssociation assoc = scale0_assoc;
  for (int k = 0; k < hier.K(); ++k) {
    if (k > 0)
      assoc = coarsen_association(assoc, hier.record.parent_maps[k], hier.scales[k].n);
    // A node whose cells all vote elsewhere carries no soft mass; it falls
    // back to the stored region mean of its scale.
    Mat h = project_with_fallback(fm, assoc, &hier.scales[k].feats);
    for (const CdgcLayer& layer : stack.scale_layers[k])
      h = cdgc_forward(stack.scale_graphs[k], stack.scale_partitions[k], layer, h);
    embeddings.push_back(std::move(h));
  }
  return embeddings;
}

}  // namespace supergraph
