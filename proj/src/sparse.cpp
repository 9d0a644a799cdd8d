#include "supergraph/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "supergraph/parallel.hpp"

namespace supergraph {

namespace {

bool entry_less(const AdjEntry& a, const AdjEntry& b) {
  return a.i != b.i ? a.i < b.i : a.j < b.j;
}

std::vector<std::int64_t> build_row_ptr(int n, const std::vector<AdjEntry>& sorted) {
  std::vector<std::int64_t> ptr(static_cast<std::size_t>(n) + 1, 0);
  for (const AdjEntry& e : sorted) ++ptr[e.i + 1];
  for (int i = 0; i < n; ++i) ptr[i + 1] += ptr[i];
  return ptr;
}

}  // namespace

SparseAdj SparseAdj::from_entries(int n, std::vector<AdjEntry> entries) {
  if (n < 0) throw std::invalid_argument("adjacency: negative node count");
  std::sort(entries.begin(), entries.end(), entry_less);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const AdjEntry& e = entries[k];
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n)
      throw std::invalid_argument("adjacency: index out of range");
    if (!std::isfinite(e.w) || e.w < 0)
      throw std::invalid_argument("adjacency: weight must be finite and >= 0");
    if (k > 0 && entries[k - 1].i == e.i && entries[k - 1].j == e.j)
      throw std::invalid_argument("adjacency: duplicate entry (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ")");
  }
  SparseAdj a;
  a.n_ = n;
  a.entries_ = std::move(entries);
  a.row_ptr_ = build_row_ptr(n, a.entries_);
  for (const AdjEntry& e : a.entries_) {
    if (e.i == e.j) continue;
    if (a.at(e.j, e.i) != e.w)
      throw std::invalid_argument("adjacency: asymmetric entry (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ")");
  }
  return a;
}

SparseAdj SparseAdj::from_undirected(int n, const std::vector<AdjEntry>& edges) {
  std::vector<AdjEntry> both;
  both.reserve(edges.size() * 2);
  for (const AdjEntry& e : edges) {
    both.push_back(e);
    if (e.i != e.j) both.push_back({e.j, e.i, e.w});
  }
  return from_entries(n, std::move(both));
}

bool SparseAdj::has_entry(int i, int j) const {
  const auto r = row(i);
  const auto it = std::lower_bound(r.begin(), r.end(), j,
                                   [](const AdjEntry& e, int col) { return e.j < col; });
  return it != r.end() && it->j == j;
}

Scalar SparseAdj::at(int i, int j) const {
  const auto r = row(i);
  const auto it = std::lower_bound(r.begin(), r.end(), j,
                                   [](const AdjEntry& e, int col) { return e.j < col; });
  return (it != r.end() && it->j == j) ? it->w : Scalar(0);
}

SparseAdj normalize_adjacency(const SparseAdj& a) {
  const int n = a.n();
  for (const AdjEntry& e : a.entries())
    if (e.w < 0) throw std::invalid_argument("normalize_adjacency: negative weight");

  // A + I, merging any existing diagonal.
  std::vector<AdjEntry> hat;
  hat.reserve(a.nnz() + static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    bool has_diag = false;
    for (const AdjEntry& e : a.row(i)) {
      if (e.j == i) {
        hat.push_back({i, i, e.w + 1});
        has_diag = true;
      } else {
        hat.push_back(e);
      }
    }
    if (!has_diag) hat.push_back({i, i, 1});
  }

  Vec degree = Vec::Zero(n);
  for (const AdjEntry& e : hat) degree[e.i] += e.w;
  Vec inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = Scalar(1) / std::sqrt(degree[i]);

  // w / (s_i * s_j) commutes bitwise, keeping the output exactly symmetric.
  for (AdjEntry& e : hat) e.w *= inv_sqrt[e.i] * inv_sqrt[e.j];
  return SparseAdj::from_entries(n, std::move(hat));
}

Vec row_sums(const SparseAdj& a) {
  Vec s = Vec::Zero(a.n());
  for (const AdjEntry& e : a.entries()) s[e.i] += e.w;
  return s;
}

Mat spmm(const SparseAdj& a, const Mat& h) {
  if (a.n() != h.rows()) throw std::invalid_argument("spmm: dimension mismatch");
  Mat out = Mat::Zero(a.n(), h.cols());
  parallel_for(a.n(), [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i)
      for (const AdjEntry& e : a.row(static_cast<int>(i))) out.row(i) += e.w * h.row(e.j);
  });
  return out;
}

CsrMatrix::CsrMatrix(int rows, int cols, std::vector<AdjEntry> sorted_entries)
    : rows_(rows), cols_(cols), entries_(std::move(sorted_entries)) {
  row_ptr_ = build_row_ptr(rows, entries_);
}

Mat CsrMatrix::multiply(const Mat& h) const {
  if (cols_ != h.rows()) throw std::invalid_argument("csr multiply: dimension mismatch");
  Mat out = Mat::Zero(rows_, h.cols());
  for (int i = 0; i < rows_; ++i)
    for (const AdjEntry& e : row(i)) out.row(i) += e.w * h.row(e.j);
  return out;
}

Vec CsrMatrix::row_sums() const {
  Vec s = Vec::Zero(rows_);
  for (const AdjEntry& e : entries_) s[e.i] += e.w;
  return s;
}

}  // namespace supergraph
