#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "supergraph/types.hpp"

namespace supergraph {

struct AdjEntry {
  int i = 0;
  int j = 0;
  Scalar w = 0;
};

/// Symmetric sparse adjacency stored as a coordinate list sorted by (i, j),
/// with a compressed row index. Every off-diagonal entry appears in both
/// orientations with the same weight; weights are finite and >= 0.
class SparseAdj {
 public:
  SparseAdj() = default;
  explicit SparseAdj(int n) : n_(n) { row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0); }

  /// Builds from directed entries. Validates symmetry, duplicates, weight
  /// range and index bounds; throws std::invalid_argument on violation.
  static SparseAdj from_entries(int n, std::vector<AdjEntry> entries);

  /// Builds from undirected edges (i != j), mirroring each into both
  /// orientations. Diagonal entries may be given once.
  static SparseAdj from_undirected(int n, const std::vector<AdjEntry>& edges);

  int n() const { return n_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<AdjEntry>& entries() const { return entries_; }

  /// Entries of row i, ascending column.
  std::span<const AdjEntry> row(int i) const {
    return {entries_.data() + row_ptr_[i], entries_.data() + row_ptr_[i + 1]};
  }
  const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }

  bool has_entry(int i, int j) const;
  /// Value at (i, j); 0 when the entry is absent.
  Scalar at(int i, int j) const;

 private:
  int n_ = 0;
  std::vector<AdjEntry> entries_;      // sorted by (i, j)
  std::vector<std::int64_t> row_ptr_;  // size n + 1
};

/// D^{-1/2} (A + I) D^{-1/2} with D the degree of A + I. Output is symmetric
/// and every node carries a self-loop. Rejects negative weights.
SparseAdj normalize_adjacency(const SparseAdj& a);

/// Component i is the sum of row i.
Vec row_sums(const SparseAdj& a);

/// Sparse-dense product: row i of the result is sum_j A_ij * h.row(j).
/// Summation order per row is fixed (ascending column), so the result is
/// independent of the worker count.
Mat spmm(const SparseAdj& a, const Mat& h);

/// General (possibly asymmetric) CSR matrix. Internal operand for the
/// subset-scaled graph operators; carries no symmetry invariant.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(int rows, int cols, std::vector<AdjEntry> sorted_entries);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::span<const AdjEntry> row(int i) const {
    return {entries_.data() + row_ptr_[i], entries_.data() + row_ptr_[i + 1]};
  }

  Mat multiply(const Mat& h) const;
  Vec row_sums() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<AdjEntry> entries_;
  std::vector<std::int64_t> row_ptr_;
};

}  // namespace supergraph
