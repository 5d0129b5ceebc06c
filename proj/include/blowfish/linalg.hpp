#pragma once

#include <cstddef>
#include <vector>

namespace blowfish {

// Dense vector of finite reals.
using DenseVector = std::vector<double>;

bool all_finite(const DenseVector& v);

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

// Coordinate-format sparse matrix.  Entries are kept sorted row-major with
// unique (row, col) pairs; magnitudes below kDropTolerance are dropped when a
// matrix is assembled, so exact zeros never take up storage.
class SparseMatrix {
 public:
  static constexpr double kDropTolerance = 1e-12;

  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    row_offsets_.assign(rows + 1, 0);
  }

  // Duplicate (row, col) pairs are accumulated by summation.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> entries);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix from_dense(std::size_t rows, std::size_t cols,
                                 const std::vector<double>& row_major);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<Triplet>& entries() const { return entries_; }

  // Offsets into entries() delimiting each row; size rows() + 1.
  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }

  std::vector<double> to_dense_row_major() const;
  SparseMatrix transposed() const;
  DenseVector row_as_dense(std::size_t row) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Triplet> entries_;
  std::vector<std::size_t> row_offsets_;
};

// a * b; throws std::invalid_argument naming both shapes on a mismatch.
SparseMatrix matmul(const SparseMatrix& a, const SparseMatrix& b);
DenseVector matmul(const SparseMatrix& a, const DenseVector& x);

// Kronecker product, row-major block convention.
SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b);

// Right inverse r with m * r = I; for square m this is the two-sided inverse.
// Throws std::runtime_error if m is rank deficient (pivot below 1e-10).
SparseMatrix right_inverse(const SparseMatrix& m);

// All min(rows, cols) singular values, nonincreasing and nonnegative.
DenseVector singular_values(const SparseMatrix& m);

double max_column_l1(const SparseMatrix& m);

}  // namespace blowfish
