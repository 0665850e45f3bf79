#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bigcf/errors.hpp"

namespace bigcf {

// Row-major dense matrix. double in tests and the training engine; the float
// instantiation shares the same code paths for reduced-precision deployments.
template <class Scalar>
struct DenseMatT {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<Scalar> v;

  DenseMatT() = default;
  DenseMatT(std::int64_t r, std::int64_t c, Scalar fill = Scalar(0))
      : rows(r), cols(c), v(static_cast<std::size_t>(r * c), fill) {
    if (r < 0 || c < 0) throw ConfigError("DenseMat: negative dimension");
  }

  std::int64_t size() const { return rows * cols; }

  Scalar& operator()(std::int64_t r, std::int64_t c) {
    return v[static_cast<std::size_t>(r * cols + c)];
  }
  Scalar operator()(std::int64_t r, std::int64_t c) const {
    return v[static_cast<std::size_t>(r * cols + c)];
  }

  Scalar* row(std::int64_t r) { return v.data() + r * cols; }
  const Scalar* row(std::int64_t r) const { return v.data() + r * cols; }

  bool same_shape(const DenseMatT& o) const {
    return rows == o.rows && cols == o.cols;
  }

  void fill(Scalar x) { std::fill(v.begin(), v.end(), x); }

  bool all_finite() const {
    for (Scalar x : v) {
      if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
  }
};

// Compressed sparse row matrix. Used for the normalized interaction
// adjacency, whose nonzero weights are strictly positive by construction.
template <class Scalar>
struct SparseMatT {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> offsets;  // size rows+1, nondecreasing
  std::vector<std::int64_t> col_idx;  // strictly increasing within each row
  std::vector<Scalar> values;         // positive, finite

  SparseMatT() = default;
  SparseMatT(std::int64_t r, std::int64_t c)
      : rows(r), cols(c), offsets(static_cast<std::size_t>(r) + 1, 0) {}

  std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }

  void validate() const {
    if (offsets.size() != static_cast<std::size_t>(rows) + 1)
      throw ConfigError("SparseMat: offsets size mismatch");
    if (offsets.front() != 0 || offsets.back() != nnz())
      throw ConfigError("SparseMat: offsets range mismatch");
    for (std::int64_t r = 0; r < rows; ++r) {
      if (offsets[r] > offsets[r + 1])
        throw ConfigError("SparseMat: offsets must be nondecreasing");
      for (std::int64_t k = offsets[r]; k < offsets[r + 1]; ++k) {
        if (col_idx[k] < 0 || col_idx[k] >= cols)
          throw ConfigError("SparseMat: column index out of range");
        if (k > offsets[r] && col_idx[k] <= col_idx[k - 1])
          throw ConfigError("SparseMat: columns must be strictly increasing");
        if (!(values[k] > Scalar(0)) ||
            !std::isfinite(static_cast<double>(values[k])))
          throw ConfigError("SparseMat: values must be positive and finite");
      }
    }
  }
};

using DenseMat = DenseMatT<double>;
using SparseMat = SparseMatT<double>;

namespace detail {

// y = A * b for CSR A and dense b.
template <class Scalar>
void sp_dense_multiply(const SparseMatT<Scalar>& a, const DenseMatT<Scalar>& b,
                       DenseMatT<Scalar>& y) {
  const std::int64_t d = b.cols;
  for (std::int64_t r = 0; r < a.rows; ++r) {
    Scalar* out = y.row(r);
    for (std::int64_t c = 0; c < d; ++c) out[c] = Scalar(0);
    for (std::int64_t k = a.offsets[r]; k < a.offsets[r + 1]; ++k) {
      const Scalar w = a.values[k];
      const Scalar* src = b.row(a.col_idx[k]);
      for (std::int64_t c = 0; c < d; ++c) out[c] += w * src[c];
    }
  }
}

// y += A^T * g, scatter form (no explicit transpose is materialized).
template <class Scalar>
void sp_dense_multiply_transpose_add(const SparseMatT<Scalar>& a,
                                     const DenseMatT<Scalar>& g,
                                     DenseMatT<Scalar>& y) {
  const std::int64_t d = g.cols;
  for (std::int64_t r = 0; r < a.rows; ++r) {
    const Scalar* src = g.row(r);
    for (std::int64_t k = a.offsets[r]; k < a.offsets[r + 1]; ++k) {
      const Scalar w = a.values[k];
      Scalar* out = y.row(a.col_idx[k]);
      for (std::int64_t c = 0; c < d; ++c) out[c] += w * src[c];
    }
  }
}

// y (+)= a * b
template <class Scalar>
void matmul_nn(const DenseMatT<Scalar>& a, const DenseMatT<Scalar>& b,
               DenseMatT<Scalar>& y, bool accumulate) {
  if (!accumulate) y.fill(Scalar(0));
  for (std::int64_t i = 0; i < a.rows; ++i) {
    const Scalar* arow = a.row(i);
    Scalar* yrow = y.row(i);
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const Scalar aik = arow[k];
      if (aik == Scalar(0)) continue;
      const Scalar* brow = b.row(k);
      for (std::int64_t j = 0; j < b.cols; ++j) yrow[j] += aik * brow[j];
    }
  }
}

// y (+)= a * b^T
template <class Scalar>
void matmul_nt(const DenseMatT<Scalar>& a, const DenseMatT<Scalar>& b,
               DenseMatT<Scalar>& y, bool accumulate) {
  const std::int64_t d = a.cols;
  for (std::int64_t i = 0; i < a.rows; ++i) {
    const Scalar* arow = a.row(i);
    Scalar* yrow = y.row(i);
    for (std::int64_t j = 0; j < b.rows; ++j) {
      const Scalar* brow = b.row(j);
      Scalar acc = Scalar(0);
      for (std::int64_t k = 0; k < d; ++k) acc += arow[k] * brow[k];
      if (accumulate)
        yrow[j] += acc;
      else
        yrow[j] = acc;
    }
  }
}

// y (+)= a^T * b
template <class Scalar>
void matmul_tn(const DenseMatT<Scalar>& a, const DenseMatT<Scalar>& b,
               DenseMatT<Scalar>& y, bool accumulate) {
  if (!accumulate) y.fill(Scalar(0));
  for (std::int64_t i = 0; i < a.rows; ++i) {
    const Scalar* arow = a.row(i);
    const Scalar* brow = b.row(i);
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const Scalar aik = arow[k];
      if (aik == Scalar(0)) continue;
      Scalar* yrow = y.row(k);
      for (std::int64_t j = 0; j < b.cols; ++j) yrow[j] += aik * brow[j];
    }
  }
}

}  // namespace detail
}  // namespace bigcf
