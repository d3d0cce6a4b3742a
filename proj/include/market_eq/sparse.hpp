#pragma once

// Row-compressed nonnegative sparse matrix and the few kernels the market
// solvers need. Column access goes through a transpose index (entry ids
// grouped by column, ascending row order inside each column) built once at
// construction; column reductions walk that index in a fixed order.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "market_eq/errors.hpp"
#include "market_eq/parallel.hpp"

namespace market_eq {

using Index = std::int32_t;   // row / column ids
using Offset = std::int64_t;  // entry ids

struct Triplet {
  Index row;
  Index col;
  double value;
};

struct RowView {
  std::span<const Index> cols;
  std::span<const double> values;

  std::size_t size() const { return cols.size(); }
  bool empty() const { return cols.empty(); }
};

class SparseMatrix {
 public:
  SparseMatrix() = default;

  // Takes ownership of CSR arrays. Entries whose value is exactly zero are
  // dropped; negative values are rejected.
  SparseMatrix(Index n_rows, Index n_cols, std::vector<Offset> row_offsets,
               std::vector<Index> col_indices, std::vector<double> values)
      : n_rows_(n_rows), n_cols_(n_cols) {
    check_structure(row_offsets, col_indices, values);
    drop_zeros(row_offsets, col_indices, values);
    row_offsets_ = std::move(row_offsets);
    col_indices_ = std::move(col_indices);
    values_ = std::move(values);
    build_transpose();
  }

  // Triplets may come in any order; duplicates are a structural error.
  static SparseMatrix from_triplets(Index n_rows, Index n_cols, std::vector<Triplet> entries) {
    if (n_rows < 0 || n_cols < 0) throw StructuralError("negative matrix dimension");
    for (const auto& e : entries) {
      if (e.row < 0 || e.row >= n_rows || e.col < 0 || e.col >= n_cols) {
        throw StructuralError("triplet (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                              ") outside " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Offset> offsets(static_cast<std::size_t>(n_rows) + 1, 0);
    std::vector<Index> cols;
    std::vector<double> vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k > 0 && entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col) {
        throw StructuralError("duplicate entry (" + std::to_string(entries[k].row) + "," +
                              std::to_string(entries[k].col) + ")");
      }
      ++offsets[static_cast<std::size_t>(entries[k].row) + 1];
      cols.push_back(entries[k].col);
      vals.push_back(entries[k].value);
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_rows); ++i) offsets[i + 1] += offsets[i];
    return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
  }

  static SparseMatrix from_dense(const std::vector<std::vector<double>>& rows) {
    const auto n = static_cast<Index>(rows.size());
    const Index m = n == 0 ? 0 : static_cast<Index>(rows.front().size());
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) {
      if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != m) {
        throw StructuralError("ragged dense matrix");
      }
      for (Index j = 0; j < m; ++j) {
        const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (v != 0.0) t.push_back({i, j, v});
      }
    }
    return from_triplets(n, m, std::move(t));
  }

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  Offset nnz() const { return static_cast<Offset>(values_.size()); }

  RowView row(Index i) const {
    const auto b = static_cast<std::size_t>(row_offsets_[static_cast<std::size_t>(i)]);
    const auto e = static_cast<std::size_t>(row_offsets_[static_cast<std::size_t>(i) + 1]);
    return {std::span<const Index>(col_indices_).subspan(b, e - b),
            std::span<const double>(values_).subspan(b, e - b)};
  }
  Offset row_begin(Index i) const { return row_offsets_[static_cast<std::size_t>(i)]; }
  Offset row_end(Index i) const { return row_offsets_[static_cast<std::size_t>(i) + 1]; }
  Offset row_nnz(Index i) const { return row_end(i) - row_begin(i); }

  // Entry ids of column j in ascending row order.
  std::span<const Offset> column_entries(Index j) const {
    const auto b = static_cast<std::size_t>(col_offsets_[static_cast<std::size_t>(j)]);
    const auto e = static_cast<std::size_t>(col_offsets_[static_cast<std::size_t>(j) + 1]);
    return std::span<const Offset>(col_entries_).subspan(b, e - b);
  }
  Offset column_nnz(Index j) const {
    return col_offsets_[static_cast<std::size_t>(j) + 1] - col_offsets_[static_cast<std::size_t>(j)];
  }

  std::span<const Offset> row_offsets() const { return row_offsets_; }
  std::span<const Index> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }

  // Same pattern, new values (used by normalization). Values must stay > 0.
  SparseMatrix with_values(std::vector<double> values) const {
    if (values.size() != values_.size()) throw StructuralError("value array length mismatch");
    for (double v : values) {
      if (!(v > 0.0)) throw ValidationError("pattern-preserving update produced a nonpositive value");
    }
    SparseMatrix out = *this;
    out.values_ = std::move(values);
    return out;
  }

  // Row index of every entry, aligned with values().
  std::span<const Index> entry_rows() const { return entry_rows_; }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.n_rows_ == b.n_rows_ && a.n_cols_ == b.n_cols_ && a.row_offsets_ == b.row_offsets_ &&
           a.col_indices_ == b.col_indices_ && a.values_ == b.values_;
  }

 private:
  void check_structure(const std::vector<Offset>& offsets, const std::vector<Index>& cols,
                       const std::vector<double>& vals) const {
    if (n_rows_ < 0 || n_cols_ < 0) throw StructuralError("negative matrix dimension");
    if (offsets.size() != static_cast<std::size_t>(n_rows_) + 1) {
      throw StructuralError("row_offsets must have n_rows+1 entries");
    }
    if (cols.size() != vals.size()) throw StructuralError("col_indices and values differ in length");
    if (offsets.front() != 0 || offsets.back() != static_cast<Offset>(vals.size())) {
      throw StructuralError("row_offsets must start at 0 and end at nnz");
    }
    for (Index i = 0; i < n_rows_; ++i) {
      const Offset b = offsets[static_cast<std::size_t>(i)];
      const Offset e = offsets[static_cast<std::size_t>(i) + 1];
      if (e < b) throw StructuralError("row_offsets decreasing at row " + std::to_string(i));
      for (Offset k = b; k < e; ++k) {
        const Index c = cols[static_cast<std::size_t>(k)];
        if (c < 0 || c >= n_cols_) {
          throw StructuralError("column index " + std::to_string(c) + " out of range in row " +
                                std::to_string(i));
        }
        if (k > b && c <= cols[static_cast<std::size_t>(k) - 1]) {
          throw StructuralError("column indices not strictly increasing in row " + std::to_string(i));
        }
        const double v = vals[static_cast<std::size_t>(k)];
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw ValidationError("entry (" + std::to_string(i) + "," + std::to_string(c) +
                                ") is negative or not finite");
        }
      }
    }
  }

  static void drop_zeros(std::vector<Offset>& offsets, std::vector<Index>& cols,
                         std::vector<double>& vals) {
    if (std::find(vals.begin(), vals.end(), 0.0) == vals.end()) return;
    std::size_t out = 0;
    Offset row_start = 0;
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
      const Offset b = row_start;
      const Offset e = offsets[i + 1];
      row_start = e;
      for (Offset k = b; k < e; ++k) {
        if (vals[static_cast<std::size_t>(k)] != 0.0) {
          cols[out] = cols[static_cast<std::size_t>(k)];
          vals[out] = vals[static_cast<std::size_t>(k)];
          ++out;
        }
      }
      offsets[i + 1] = static_cast<Offset>(out);
    }
    cols.resize(out);
    vals.resize(out);
  }

  void build_transpose() {
    col_offsets_.assign(static_cast<std::size_t>(n_cols_) + 1, 0);
    for (Index c : col_indices_) ++col_offsets_[static_cast<std::size_t>(c) + 1];
    for (std::size_t j = 0; j < static_cast<std::size_t>(n_cols_); ++j) {
      col_offsets_[j + 1] += col_offsets_[j];
    }
    col_entries_.resize(values_.size());
    entry_rows_.resize(values_.size());
    std::vector<Offset> fill(col_offsets_.begin(), col_offsets_.end() - 1);
    for (Index i = 0; i < n_rows_; ++i) {
      for (Offset k = row_begin(i); k < row_end(i); ++k) {
        entry_rows_[static_cast<std::size_t>(k)] = i;
        const auto c = static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)]);
        col_entries_[static_cast<std::size_t>(fill[c]++)] = k;
      }
    }
  }

  Index n_rows_ = 0;
  Index n_cols_ = 0;
  std::vector<Offset> row_offsets_{0};
  std::vector<Index> col_indices_;
  std::vector<double> values_;
  std::vector<Offset> col_offsets_{0};
  std::vector<Offset> col_entries_;
  std::vector<Index> entry_rows_;
};

inline double row_dot(const RowView& row, std::span<const double> dense) {
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    const auto c = static_cast<std::size_t>(row.cols[k]);
    if (c >= dense.size()) {
      throw StructuralError("row_dot: column " + std::to_string(c) + " outside dense vector of length " +
                            std::to_string(dense.size()));
    }
    s += row.values[k] * dense[c];
  }
  return s;
}

// out[j] = sum of entry_values over the stored entries of column j.
inline void column_sums_into(const SparseMatrix& M, std::span<const double> entry_values,
                             std::span<double> out) {
  if (static_cast<Offset>(entry_values.size()) != M.nnz()) {
    throw StructuralError("column_sums: expected " + std::to_string(M.nnz()) + " entry values, got " +
                          std::to_string(entry_values.size()));
  }
  if (static_cast<Index>(out.size()) != M.cols()) throw StructuralError("column_sums: output length");
  parallel::for_each(M.cols(), [&](std::int64_t j) {
    double s = 0.0;
    for (Offset e : M.column_entries(static_cast<Index>(j))) s += entry_values[static_cast<std::size_t>(e)];
    out[static_cast<std::size_t>(j)] = s;
  });
}

inline std::vector<double> column_sums(const SparseMatrix& M, std::span<const double> entry_values) {
  std::vector<double> out(static_cast<std::size_t>(M.cols()));
  column_sums_into(M, entry_values, out);
  return out;
}

// y = M x
inline void multiply(const SparseMatrix& M, std::span<const double> x, std::span<double> y) {
  const auto cols = M.col_indices();
  const auto vals = M.values();
  parallel::for_each(M.rows(), [&](std::int64_t i) {
    double s = 0.0;
    for (Offset k = M.row_begin(static_cast<Index>(i)); k < M.row_end(static_cast<Index>(i)); ++k) {
      s += vals[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(cols[static_cast<std::size_t>(k)])];
    }
    y[static_cast<std::size_t>(i)] = s;
  });
}

// y = M^T x, accumulated column by column through the transpose index.
inline void multiply_transpose(const SparseMatrix& M, std::span<const double> x, std::span<double> y) {
  const auto vals = M.values();
  const auto rows_of = M.entry_rows();
  parallel::for_each(M.cols(), [&](std::int64_t j) {
    double s = 0.0;
    for (Offset e : M.column_entries(static_cast<Index>(j))) {
      s += vals[static_cast<std::size_t>(e)] * x[static_cast<std::size_t>(rows_of[static_cast<std::size_t>(e)])];
    }
    y[static_cast<std::size_t>(j)] = s;
  });
}

inline double norm2(std::span<const double> v) {
  return std::sqrt(parallel::sum(static_cast<std::int64_t>(v.size()),
                                 [&](std::int64_t i) { return v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)]; }));
}

// Anything with input/output dimensions, a forward apply and an adjoint.
template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const double> in, std::span<double> out) {
  { op.input_dim() } -> std::convertible_to<std::int64_t>;
  { op.output_dim() } -> std::convertible_to<std::int64_t>;
  op.apply(in, out);
  op.apply_adjoint(in, out);
};

struct MatrixOperator {
  const SparseMatrix& matrix;
  std::int64_t input_dim() const { return matrix.cols(); }
  std::int64_t output_dim() const { return matrix.rows(); }
  void apply(std::span<const double> in, std::span<double> out) const { multiply(matrix, in, out); }
  void apply_adjoint(std::span<const double> in, std::span<double> out) const {
    multiply_transpose(matrix, in, out);
  }
};

// Power iteration on A^T A started from the all-ones vector; returns ||A v||
// for the final unit vector v, which approaches the largest singular value
// from below.
template <LinearOperator Op>
double op_norm_estimate(const Op& op, int iters = 50) {
  const auto n_in = static_cast<std::size_t>(op.input_dim());
  const auto n_out = static_cast<std::size_t>(op.output_dim());
  if (n_in == 0 || n_out == 0) return 0.0;
  std::vector<double> v(n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
  std::vector<double> av(n_out);
  std::vector<double> atav(n_in);
  double estimate = 0.0;
  for (int it = 0; it < std::max(iters, 1); ++it) {
    op.apply(v, av);
    estimate = norm2(av);
    if (estimate == 0.0) return 0.0;
    op.apply_adjoint(av, atav);
    const double nrm = norm2(atav);
    if (nrm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n_in; ++i) v[i] = atav[i] / nrm;
  }
  op.apply(v, av);
  return norm2(av);
}

inline double op_norm_estimate(const SparseMatrix& M, int iters = 50) {
  if (M.rows() == 0 || M.cols() == 0) {
    throw StructuralError("op_norm_estimate: empty matrix");
  }
  return op_norm_estimate(MatrixOperator{M}, iters);
}

}  // namespace market_eq
