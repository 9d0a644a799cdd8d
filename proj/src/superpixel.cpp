#include "supergraph/superpixel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "supergraph/parallel.hpp"

namespace supergraph {

namespace {

// First pixel row covered by grid row g (ceil division); cell g spans
// [row_start(g), row_start(g+1)).
inline int span_start(int g, int pixels, int cells) {
  return static_cast<int>((static_cast<std::int64_t>(g) * pixels + cells - 1) / cells);
}

inline int home_coord(int p, int pixels, int cells) {
  return static_cast<int>(static_cast<std::int64_t>(p) * cells / pixels);
}

void validate_grid(const PixelFeatureMap& fm, const ClusterConfig& cfg) {
  if (cfg.grid_w < 1 || cfg.grid_h < 1 || cfg.grid_w > fm.width || cfg.grid_h > fm.height)
    throw std::invalid_argument("cluster grid must be at least 1x1 and no larger than the image");
  if (cfg.iterations < 1) throw std::invalid_argument("cluster iterations must be >= 1");
}

}  // namespace

int SoftAssociation::argmax_cell(Index pixel) const {
  int best_cell = -1;
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  for (int c = 0; c < 9; ++c) {
    const int cell = candidate_cell(pixel, c);
    if (cell < 0) continue;
    const Scalar p = probs(pixel, c);
    if (p > best) {  // candidate cells ascend with c, so ties keep the lower id
      best = p;
      best_cell = cell;
    }
  }
  return best_cell;
}

std::pair<SoftAssociation, SuperpixelMap> init_grid(const PixelFeatureMap& fm,
                                                    const ClusterConfig& cfg) {
  validate_grid(fm, cfg);
  SoftAssociation q;
  q.width = fm.width;
  q.height = fm.height;
  q.grid_w = cfg.grid_w;
  q.grid_h = cfg.grid_h;
  q.probs = Mat::Zero(static_cast<Index>(fm.width) * fm.height, 9);
  q.cell_of.resize(static_cast<std::size_t>(fm.width) * fm.height);
  for (int y = 0; y < fm.height; ++y) {
    const int gy = home_coord(y, fm.height, cfg.grid_h);
    for (int x = 0; x < fm.width; ++x) {
      const Index p = q.pixel_index(y, x);
      q.cell_of[p] = gy * cfg.grid_w + home_coord(x, fm.width, cfg.grid_w);
      q.probs(p, 4) = 1;  // candidate 4 is the home cell itself
    }
  }
  return {q, compute_centers(fm, q)};
}

SuperpixelMap compute_centers(const PixelFeatureMap& fm, const SoftAssociation& q) {
  if (q.width != fm.width || q.height != fm.height)
    throw std::invalid_argument("compute_centers: association does not match feature map");
  const int d = fm.feature_dim();
  const int n = q.n_cells();

  SuperpixelMap sp;
  sp.width = fm.width;
  sp.height = fm.height;
  sp.n_superpixels = n;
  sp.centers_u = Mat::Zero(n, d);
  sp.centers_r = Mat::Zero(n, 2);
  sp.sizes.assign(n, 0);
  sp.soft_mass = Vec::Zero(n);

  // Per-cell accumulation over the cell's 3x3 candidate window, pixels in
  // row-major order: deterministic for any worker count.
  parallel_for(n, [&](std::int64_t s0, std::int64_t s1) {
    for (int s = static_cast<int>(s0); s < s1; ++s) {
      const int sgy = s / q.grid_w, sgx = s % q.grid_w;
      const int y_begin = span_start(std::max(0, sgy - 1), fm.height, q.grid_h);
      const int y_end = span_start(std::min(q.grid_h, sgy + 2), fm.height, q.grid_h);
      const int x_begin = span_start(std::max(0, sgx - 1), fm.width, q.grid_w);
      const int x_end = span_start(std::min(q.grid_w, sgx + 2), fm.width, q.grid_w);
      Vec acc_u = Vec::Zero(d);
      Vec2 acc_r = Vec2::Zero();
      Scalar mass = 0;
      for (int y = y_begin; y < y_end; ++y)
        for (int x = x_begin; x < x_end; ++x) {
          const Index p = q.pixel_index(y, x);
          const int home = q.cell_of[p];
          const int dgy = sgy - home / q.grid_w, dgx = sgx - home % q.grid_w;
          const Scalar w = q.probs(p, (dgy + 1) * 3 + (dgx + 1));
          if (w == 0) continue;
          mass += w;
          acc_u += w * fm.data.row(p).head(d).transpose();
          acc_r += w * fm.data.row(p).tail(2).transpose();
        }
      sp.soft_mass[s] = mass;
      if (mass > 0) {
        sp.centers_u.row(s) = acc_u.transpose() / mass;
        sp.centers_r.row(s) = acc_r.transpose() / mass;
      } else {
        // Placeholder at the grid rectangle centroid; masked until reseeded.
        const int ys = span_start(sgy, fm.height, q.grid_h);
        const int ye = span_start(sgy + 1, fm.height, q.grid_h);
        const int xs = span_start(sgx, fm.width, q.grid_w);
        const int xe = span_start(sgx + 1, fm.width, q.grid_w);
        sp.centers_r(s, 0) = fm.pos_scale * (ys + ye - 1) / 2.0;
        sp.centers_r(s, 1) = fm.pos_scale * (xs + xe - 1) / 2.0;
      }
    }
  });

  sp.labels.resize(static_cast<std::size_t>(fm.width) * fm.height);
  for (Index p = 0; p < q.probs.rows(); ++p) {
    const int cell = q.argmax_cell(p);
    sp.labels[p] = cell;
    ++sp.sizes[cell];
  }
  return sp;
}

SoftAssociation update_association(const PixelFeatureMap& fm, const SuperpixelMap& sp,
                                   const SoftAssociation& q, Scalar temperature) {
  if (!(temperature > 0)) throw std::invalid_argument("update_association: temperature must be > 0");
  const int d = fm.feature_dim();
  SoftAssociation out = q;
  parallel_for(q.probs.rows(), [&](std::int64_t p0, std::int64_t p1) {
    for (Index p = p0; p < p1; ++p) {
      Scalar logits[9];
      Scalar max_logit = -std::numeric_limits<Scalar>::infinity();
      for (int c = 0; c < 9; ++c) {
        const int s = q.candidate_cell(p, c);
        if (s < 0 || !(sp.soft_mass[s] > 0)) {
          logits[c] = -std::numeric_limits<Scalar>::infinity();
          continue;
        }
        const Scalar du = (fm.data.row(p).head(d) - sp.centers_u.row(s)).squaredNorm();
        const Scalar dr = (fm.data.row(p).tail(2) - sp.centers_r.row(s)).squaredNorm();
        logits[c] = -(du + dr) / temperature;
        max_logit = std::max(max_logit, logits[c]);
      }
      if (max_logit == -std::numeric_limits<Scalar>::infinity()) {
        out.probs.row(p).setZero();
        out.probs(p, 4) = 1;
        continue;
      }
      Scalar total = 0;
      for (int c = 0; c < 9; ++c) {
        const Scalar e = std::isinf(logits[c]) ? 0 : std::exp(logits[c] - max_logit);
        out.probs(p, c) = e;
        total += e;
      }
      out.probs.row(p) /= total;
    }
  });
  return out;
}

Scalar reconstruction_loss(const PixelFeatureMap& fm, const SoftAssociation& q,
                           const SuperpixelMap& sp) {
  const int d = fm.feature_dim();
  const std::int64_t n_pixels = q.probs.rows();
  std::vector<Scalar> partial(static_cast<std::size_t>(n_pixels));
  parallel_for(n_pixels, [&](std::int64_t p0, std::int64_t p1) {
    for (Index p = p0; p < p1; ++p) {
      Vec rec = Vec::Zero(d);
      for (int c = 0; c < 9; ++c) {
        const Scalar w = q.probs(p, c);
        if (w == 0) continue;
        rec += w * sp.centers_u.row(q.candidate_cell(p, c)).transpose();
      }
      partial[p] = (rec.transpose() - fm.data.row(p).head(d)).squaredNorm();
    }
  });
  Scalar total = 0;
  for (Scalar v : partial) total += v;  // fixed order
  return total / static_cast<Scalar>(n_pixels);
}

Scalar compactness_loss(const PixelFeatureMap& fm, const SoftAssociation& q,
                        const SuperpixelMap& sp) {
  const std::int64_t n_pixels = q.probs.rows();
  std::vector<Scalar> partial(static_cast<std::size_t>(n_pixels));
  parallel_for(n_pixels, [&](std::int64_t p0, std::int64_t p1) {
    for (Index p = p0; p < p1; ++p) {
      Scalar acc = 0;
      for (int c = 0; c < 9; ++c) {
        const int s = q.candidate_cell(p, c);
        if (s < 0 || !(sp.soft_mass[s] > 0)) continue;
        acc += (sp.centers_r.row(s) - fm.data.row(p).tail(2)).norm();
      }
      partial[p] = acc;
    }
  });
  Scalar total = 0;
  for (Scalar v : partial) total += v;
  return total / (static_cast<Scalar>(n_pixels) * 9);
}

Mat smooth_pixel_features(const PixelFeatureMap& fm, const SoftAssociation& q,
                          const SuperpixelMap& sp) {
  const int d = fm.feature_dim();
  Mat rec = Mat::Zero(q.probs.rows(), fm.dim);
  parallel_for(q.probs.rows(), [&](std::int64_t p0, std::int64_t p1) {
    for (Index p = p0; p < p1; ++p)
      for (int c = 0; c < 9; ++c) {
        const Scalar w = q.probs(p, c);
        if (w == 0) continue;
        const int s = q.candidate_cell(p, c);
        rec.row(p).head(d) += w * sp.centers_u.row(s);
        rec.row(p).tail(2) += w * sp.centers_r.row(s);
      }
  });
  return rec;
}

namespace {

// Reseeds empty cells (no soft mass or no argmax pixels) at the farthest
// pixels of the currently largest region; the k-th empty cell takes the k-th
// farthest pixel so simultaneous reseeds do not stack.
void reseed_empty_cells(const PixelFeatureMap& fm, SuperpixelMap& sp) {
  std::vector<int> empties;
  for (int s = 0; s < sp.n_superpixels; ++s)
    if (!(sp.soft_mass[s] > 0) || sp.sizes[s] == 0) empties.push_back(s);
  if (empties.empty()) return;

  int largest = 0;
  for (int s = 1; s < sp.n_superpixels; ++s)
    if (sp.sizes[s] > sp.sizes[largest]) largest = s;
  if (sp.sizes[largest] == 0) return;

  std::vector<Index> members;
  members.reserve(static_cast<std::size_t>(sp.sizes[largest]));
  for (Index p = 0; p < static_cast<Index>(sp.labels.size()); ++p)
    if (sp.labels[p] == largest) members.push_back(p);
  std::stable_sort(members.begin(), members.end(), [&](Index a, Index b) {
    const Scalar da = (fm.data.row(a).tail(2) - sp.centers_r.row(largest)).squaredNorm();
    const Scalar db = (fm.data.row(b).tail(2) - sp.centers_r.row(largest)).squaredNorm();
    return da > db;
  });

  const int d = fm.feature_dim();
  for (std::size_t k = 0; k < empties.size(); ++k) {
    const Index p = members[k % members.size()];
    const int s = empties[k];
    sp.centers_u.row(s) = fm.data.row(p).head(d);
    sp.centers_r.row(s) = fm.data.row(p).tail(2);
    sp.soft_mass[s] = 1;
  }
}

}  // namespace

ClusterResult cluster(const PixelFeatureMap& fm, const ClusterConfig& cfg) {
  validate_grid(fm, cfg);
  auto [q, sp] = init_grid(fm, cfg);

  ClusterResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  // Each round records the state it starts from, so trace[0] is the grid
  // initialization and later entries show the refinement.
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    result.trace.push_back({reconstruction_loss(fm, q, sp), compactness_loss(fm, q, sp)});
    q = update_association(fm, sp, q, cfg.temperature);
    sp = compute_centers(fm, q);
    if (iter + 1 < cfg.iterations) reseed_empty_cells(fm, sp);
  }

  // Drop argmax-empty cells and compact the label range.
  result.cell_to_label.assign(static_cast<std::size_t>(sp.n_superpixels), -1);
  int next = 0;
  for (int s = 0; s < sp.n_superpixels; ++s)
    if (sp.sizes[s] > 0) result.cell_to_label[s] = next++;

  SuperpixelMap compact;
  compact.width = sp.width;
  compact.height = sp.height;
  compact.n_superpixels = next;
  compact.centers_u.resize(next, sp.centers_u.cols());
  compact.centers_r.resize(next, 2);
  compact.sizes.assign(static_cast<std::size_t>(next), 0);
  compact.soft_mass = Vec::Zero(next);
  for (int s = 0; s < sp.n_superpixels; ++s) {
    const int t = result.cell_to_label[s];
    if (t < 0) continue;
    compact.centers_u.row(t) = sp.centers_u.row(s);
    compact.centers_r.row(t) = sp.centers_r.row(s);
    compact.sizes[t] = sp.sizes[s];
    compact.soft_mass[t] = sp.soft_mass[s];
  }
  compact.labels.resize(sp.labels.size());
  for (std::size_t p = 0; p < sp.labels.size(); ++p)
    compact.labels[p] = result.cell_to_label[sp.labels[p]];

  result.q = std::move(q);
  result.sp = std::move(compact);
  return result;
}

SuperpixelMap enforce_connectivity(const PixelFeatureMap& fm, const SuperpixelMap& sp) {
  const int w = sp.width, h = sp.height;
  const Index n_pixels = static_cast<Index>(w) * h;

  // 4-connected components of the label field, discovered in row-major order.
  std::vector<int> comp(static_cast<std::size_t>(n_pixels), -1);
  struct Component {
    int label;
    Index first_pixel;
    std::int64_t size;
  };
  std::vector<Component> comps;
  std::vector<Index> stack;
  for (Index seed = 0; seed < n_pixels; ++seed) {
    if (comp[seed] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    const int label = sp.labels[seed];
    comps.push_back({label, seed, 0});
    stack.assign(1, seed);
    comp[seed] = id;
    while (!stack.empty()) {
      const Index p = stack.back();
      stack.pop_back();
      ++comps[id].size;
      const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
      const std::array<Index, 4> nbrs = {y > 0 ? p - w : -1, y + 1 < h ? p + w : -1,
                                         x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1};
      for (Index nb : nbrs) {
        if (nb < 0 || comp[nb] >= 0 || sp.labels[nb] != label) continue;
        comp[nb] = id;
        stack.push_back(nb);
      }
    }
  }

  // Largest component of each label; used for stable id assignment below.
  std::vector<int> main_comp(static_cast<std::size_t>(sp.n_superpixels), -1);
  for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
    int& m = main_comp[comps[c].label];
    if (m < 0 || comps[c].size > comps[m].size) m = c;
  }

  // Union-find over components; every component below a quarter of the mean
  // superpixel size merges into its largest 4-adjacent region at processing
  // time.
  std::vector<int> parent(comps.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<std::int64_t> region_size(comps.size());
  for (std::size_t c = 0; c < comps.size(); ++c) region_size[c] = comps[c].size;
  auto find = [&](int c) {
    while (parent[c] != c) c = parent[c] = parent[parent[c]];
    return c;
  };

  const Scalar mean_size = static_cast<Scalar>(n_pixels) / sp.n_superpixels;
  for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
    if (static_cast<Scalar>(comps[c].size) >= mean_size / 4) continue;
    // Scan the fragment for its adjacent regions.
    int target = -1;
    for (Index p = 0; p < n_pixels; ++p) {
      if (find(comp[p]) != find(c)) continue;
      const int y = static_cast<int>(p / w), x = static_cast<int>(p % w);
      const std::array<Index, 4> nbrs = {y > 0 ? p - w : -1, y + 1 < h ? p + w : -1,
                                         x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1};
      for (Index nb : nbrs) {
        if (nb < 0) continue;
        const int r = find(comp[nb]);
        if (r == find(c)) continue;
        if (target < 0 || region_size[r] > region_size[target] ||
            (region_size[r] == region_size[target] && r < target))
          target = r;
      }
    }
    if (target < 0) continue;  // isolated fragment, keep as region
    region_size[target] += region_size[find(c)];
    parent[find(c)] = target;
  }

  // Final region ids: regions holding a surviving label's main component
  // first (in label order), then standalone fragments by first pixel.
  struct Key {
    int group;
    std::int64_t order;
    int root;
  };
  std::vector<Key> keys;
  for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
    if (find(c) != c) continue;
    keys.push_back({1, comps[c].first_pixel, c});
  }
  for (int label = sp.n_superpixels - 1; label >= 0; --label) {
    if (main_comp[label] < 0) continue;
    if (find(main_comp[label]) != main_comp[label]) continue;  // main was absorbed
    const int root = main_comp[label];
    for (Key& k : keys)
      if (k.root == root) {
        k.group = 0;
        k.order = label;
        break;
      }
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return a.group != b.group ? a.group < b.group : a.order < b.order;
  });
  std::vector<int> region_id(comps.size(), -1);
  for (int id = 0; id < static_cast<int>(keys.size()); ++id) region_id[keys[id].root] = id;

  SuperpixelMap out;
  out.width = w;
  out.height = h;
  out.n_superpixels = static_cast<int>(keys.size());
  out.labels.resize(static_cast<std::size_t>(n_pixels));
  out.sizes.assign(static_cast<std::size_t>(keys.size()), 0);
  const int d = fm.feature_dim();
  out.centers_u = Mat::Zero(out.n_superpixels, d);
  out.centers_r = Mat::Zero(out.n_superpixels, 2);
  for (Index p = 0; p < n_pixels; ++p) {
    const int id = region_id[find(comp[p])];
    out.labels[p] = id;
    ++out.sizes[id];
    out.centers_u.row(id) += fm.data.row(p).head(d);
    out.centers_r.row(id) += fm.data.row(p).tail(2);
  }
  out.soft_mass = Vec::Zero(out.n_superpixels);
  for (int s = 0; s < out.n_superpixels; ++s) {
    out.centers_u.row(s) /= static_cast<Scalar>(out.sizes[s]);
    out.centers_r.row(s) /= static_cast<Scalar>(out.sizes[s]);
    out.soft_mass[s] = static_cast<Scalar>(out.sizes[s]);
  }
  return out;
}

}  // namespace supergraph
