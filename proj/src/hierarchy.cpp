#include "supergraph/hierarchy.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace supergraph {

namespace {

struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

struct UniqueEdge {
  int i, j;  // i < j, finest-scale ids
  Scalar w;
};

bool edge_order(const UniqueEdge& a, const UniqueEdge& b) {
  if (a.w != b.w) return a.w < b.w;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

}  // namespace

SpGraph build_rag(const SuperpixelMap& sp) {
  SpGraph g;
  g.n = sp.n_superpixels;
  g.feats = sp.centers_u;
  g.centroids = sp.centers_r;
  g.sizes = sp.sizes;
  g.scale_id = 0;

  std::vector<std::pair<int, int>> pairs;
  const int w = sp.width, h = sp.height;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int a = sp.labels[static_cast<std::size_t>(y) * w + x];
      if (x + 1 < w) {
        const int b = sp.labels[static_cast<std::size_t>(y) * w + x + 1];
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < h) {
        const int b = sp.labels[static_cast<std::size_t>(y + 1) * w + x];
        if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<AdjEntry> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) edges.push_back({a, b, 1});
  g.adj = SparseAdj::from_undirected(g.n, edges);
  return g;
}

SparseAdj edge_weights(const SpGraph& g) {
  std::vector<AdjEntry> entries;
  entries.reserve(g.adj.nnz());
  for (const AdjEntry& e : g.adj.entries())
    entries.push_back({e.i, e.j, (g.feats.row(e.i) - g.feats.row(e.j)).lpNorm<1>()});
  return SparseAdj::from_entries(g.n, std::move(entries));
}

namespace {

// Snapshot of the current forest as a SpGraph; components are numbered by
// ascending minimum finest-scale member id.
SpGraph snapshot_scale(const SpGraph& fine, const std::vector<UniqueEdge>& fine_edges, Dsu& dsu,
                       int scale_id, std::vector<int>& comp_of) {
  comp_of.assign(fine.n, -1);
  int next = 0;
  for (int v = 0; v < fine.n; ++v) {
    const int root = dsu.find(v);
    if (comp_of[root] < 0) comp_of[root] = next++;
  }
  for (int v = 0; v < fine.n; ++v) comp_of[v] = comp_of[dsu.find(v)];

  SpGraph coarse;
  coarse.n = next;
  coarse.scale_id = scale_id;
  coarse.feats = Mat::Zero(next, fine.feats.cols());
  coarse.centroids = Mat::Zero(next, 2);
  coarse.sizes.assign(next, 0);
  for (int v = 0; v < fine.n; ++v) {
    const Scalar w = static_cast<Scalar>(fine.sizes[v]);
    coarse.feats.row(comp_of[v]) += w * fine.feats.row(v);
    coarse.centroids.row(comp_of[v]) += w * fine.centroids.row(v);
    coarse.sizes[comp_of[v]] += fine.sizes[v];
  }
  for (int c = 0; c < next; ++c) {
    coarse.feats.row(c) /= static_cast<Scalar>(coarse.sizes[c]);
    coarse.centroids.row(c) /= static_cast<Scalar>(coarse.sizes[c]);
  }

  std::vector<std::pair<int, int>> pairs;
  for (const UniqueEdge& e : fine_edges) {
    const int a = comp_of[e.i], b = comp_of[e.j];
    if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<AdjEntry> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) edges.push_back({a, b, 1});
  coarse.adj = SparseAdj::from_undirected(next, edges);
  return coarse;
}

}  // namespace

ScaleHierarchy boruvka_merge(const SpGraph& g, const std::vector<int>& targets) {
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] < 1 || targets[k] > g.n)
      throw std::invalid_argument("boruvka_merge: target " + std::to_string(targets[k]) +
                                  " outside [1, " + std::to_string(g.n) + "]");
    if (k > 0 && targets[k] >= targets[k - 1])
      throw std::invalid_argument("boruvka_merge: targets must be strictly decreasing");
  }

  const SparseAdj weighted = edge_weights(g);
  std::vector<UniqueEdge> edges;
  edges.reserve(weighted.nnz() / 2);
  for (const AdjEntry& e : weighted.entries())
    if (e.i < e.j) edges.push_back({e.i, e.j, e.w});
  std::sort(edges.begin(), edges.end(), edge_order);

  ScaleHierarchy hier;
  Dsu dsu(g.n);
  std::vector<int> comp_of;

  if (targets.empty()) {
    hier.scales.push_back(g);
    hier.scales.back().scale_id = 1;
    std::vector<int> identity(g.n);
    std::iota(identity.begin(), identity.end(), 0);
    hier.record.parent_maps.push_back(std::move(identity));
    return hier;
  }

  {
    Dsu probe(g.n);
    for (const UniqueEdge& e : edges) probe.unite(e.i, e.j);
    int components = 0;
    for (int v = 0; v < g.n; ++v)
      if (probe.find(v) == v) ++components;
    if (targets.back() < components)
      throw std::runtime_error("boruvka_merge: graph has " + std::to_string(components) +
                               " components, cannot merge to " + std::to_string(targets.back()));
  }

  std::vector<int> prev_assign;  // finest id -> previous scale id
  auto take_snapshot = [&]() {
    const int scale_id = static_cast<int>(hier.scales.size()) + 1;
    hier.scales.push_back(snapshot_scale(g, edges, dsu, scale_id, comp_of));
    if (prev_assign.empty()) {
      hier.record.parent_maps.push_back(comp_of);
    } else {
      std::vector<int> pmap(hier.scales[hier.scales.size() - 2].n, -1);
      for (int v = 0; v < g.n; ++v) pmap[prev_assign[v]] = comp_of[v];
      hier.record.parent_maps.push_back(std::move(pmap));
    }
    prev_assign = comp_of;
  };

  int count = g.n;
  std::size_t target_idx = 0;
  if (targets[0] == count) {
    take_snapshot();
    ++target_idx;
  }

  std::vector<int> best(g.n);  // per root: index into edges, -1 unset
  while (target_idx < targets.size()) {
    // One Boruvka round: each tree picks its least outgoing edge (edges are
    // pre-sorted, so the first hit per root is the least).
    std::fill(best.begin(), best.end(), -1);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const int ri = dsu.find(edges[k].i), rj = dsu.find(edges[k].j);
      if (ri == rj) continue;
      if (best[ri] < 0) best[ri] = static_cast<int>(k);
      if (best[rj] < 0) best[rj] = static_cast<int>(k);
    }
    std::vector<int> chosen;
    for (int v = 0; v < g.n; ++v)
      if (dsu.find(v) == v && best[v] >= 0) chosen.push_back(best[v]);
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    if (chosen.empty())
      throw std::runtime_error("boruvka_merge: no joinable edges left at " +
                               std::to_string(count) + " trees");

    // Accepted edges apply one at a time in the strict order, so every
    // intermediate tree count is realized and snapshots land on targets.
    for (int k : chosen) {
      if (!dsu.unite(edges[k].i, edges[k].j)) continue;
      --count;
      hier.record.steps.push_back({edges[k].i, edges[k].j, edges[k].w,
                                   static_cast<int>(hier.record.steps.size())});
      if (count == targets[target_idx]) {
        take_snapshot();
        ++target_idx;
        if (target_idx == targets.size()) break;
      }
    }
  }
  return hier;
}

NodeAssociation project_association(const SoftAssociation& q, std::span<const int> cell_to_node,
                                    int n_nodes) {
  if (static_cast<int>(cell_to_node.size()) != q.n_cells())
    throw std::invalid_argument("project_association: cell map size mismatch");
  NodeAssociation a;
  a.width = q.width;
  a.height = q.height;
  a.n_nodes = n_nodes;
  a.nodes.assign(static_cast<std::size_t>(q.probs.rows()), {-1, -1, -1, -1, -1, -1, -1, -1, -1});
  a.probs = Mat::Zero(q.probs.rows(), 9);
  for (Index p = 0; p < q.probs.rows(); ++p) {
    int used = 0;
    for (int c = 0; c < 9; ++c) {
      const Scalar w = q.probs(p, c);
      if (w == 0) continue;
      const int cell = q.candidate_cell(p, c);
      const int node = cell_to_node[cell];
      if (node < 0 || node >= n_nodes)
        throw std::invalid_argument("project_association: cell map is not total");
      // Insert keeping nodes ascending, merging duplicates.
      int pos = 0;
      while (pos < used && a.nodes[p][pos] < node) ++pos;
      if (pos < used && a.nodes[p][pos] == node) {
        a.probs(p, pos) += w;
      } else {
        for (int m = used; m > pos; --m) {
          a.nodes[p][m] = a.nodes[p][m - 1];
          a.probs(p, m) = a.probs(p, m - 1);
        }
        a.nodes[p][pos] = node;
        a.probs(p, pos) = w;
        ++used;
      }
    }
    for (int m = used; m < 9; ++m) {
      a.nodes[p][m] = -1;
      a.probs(p, m) = 0;
    }
  }
  return a;
}

NodeAssociation coarsen_association(const NodeAssociation& a, std::span<const int> parent_map,
                                    int n_coarse) {
  if (static_cast<int>(parent_map.size()) != a.n_nodes)
    throw std::invalid_argument("coarsen_association: parent map size mismatch");
  NodeAssociation out;
  out.width = a.width;
  out.height = a.height;
  out.n_nodes = n_coarse;
  out.nodes.assign(a.nodes.size(), {-1, -1, -1, -1, -1, -1, -1, -1, -1});
  out.probs = Mat::Zero(a.probs.rows(), 9);
  for (Index p = 0; p < a.probs.rows(); ++p) {
    int used = 0;
    for (int c = 0; c < 9 && a.nodes[p][c] >= 0; ++c) {
      const int node = parent_map[a.nodes[p][c]];
      if (node < 0 || node >= n_coarse)
        throw std::invalid_argument("coarsen_association: parent map is not total");
      const Scalar w = a.probs(p, c);
      int pos = 0;
      while (pos < used && out.nodes[p][pos] < node) ++pos;
      if (pos < used && out.nodes[p][pos] == node) {
        out.probs(p, pos) += w;
      } else {
        for (int m = used; m > pos; --m) {
          out.nodes[p][m] = out.nodes[p][m - 1];
          out.probs(p, m) = out.probs(p, m - 1);
        }
        out.nodes[p][pos] = node;
        out.probs(p, pos) = w;
        ++used;
      }
    }
  }
  return out;
}

NodeAssociation coarsen_association(const SoftAssociation& q, const MergeRecord& record, int k) {
  if (k < 0 || k >= static_cast<int>(record.parent_maps.size()))
    throw std::invalid_argument("coarsen_association: scale out of range");
  if (static_cast<int>(record.parent_maps[0].size()) != q.n_cells())
    throw std::invalid_argument("coarsen_association: association does not match finest scale");
  std::vector<int> identity(q.n_cells());
  std::iota(identity.begin(), identity.end(), 0);
  NodeAssociation a = project_association(q, identity, q.n_cells());
  for (int s = 0; s <= k; ++s) {
    const auto& pmap = record.parent_maps[s];
    const int n_coarse = 1 + *std::max_element(pmap.begin(), pmap.end());
    a = coarsen_association(a, pmap, n_coarse);
  }
  return a;
}

std::vector<int> cell_to_node_map(const SoftAssociation& q, const SuperpixelMap& final_sp) {
  const int n_cells = q.n_cells();
  std::vector<std::map<int, std::int64_t>> votes(static_cast<std::size_t>(n_cells));
  for (Index p = 0; p < q.probs.rows(); ++p)
    ++votes[q.argmax_cell(p)][final_sp.labels[p]];

  std::vector<int> map(static_cast<std::size_t>(n_cells), -1);
  for (int s = 0; s < n_cells; ++s) {
    std::int64_t best = 0;
    for (const auto& [label, count] : votes[s])
      if (count > best) {  // ordered map: ties keep the smaller label
        best = count;
        map[s] = label;
      }
    if (map[s] < 0) {
      // No argmax pixels: take the label at the cell rectangle centroid.
      const int gy = s / q.grid_w, gx = s % q.grid_w;
      auto mid = [](int g, int pixels, int cells) {
        const std::int64_t lo = (static_cast<std::int64_t>(g) * pixels + cells - 1) / cells;
        const std::int64_t hi = (static_cast<std::int64_t>(g + 1) * pixels + cells - 1) / cells;
        return static_cast<int>((lo + hi - 1) / 2);
      };
      map[s] = final_sp.labels[q.pixel_index(mid(gy, q.height, q.grid_h), mid(gx, q.width, q.grid_w))];
    }
  }
  return map;
}

}  // namespace supergraph
