#include "blowfish/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace blowfish {
namespace {

std::string shape_of(const SparseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Eigen::MatrixXd to_eigen(const SparseMatrix& m) {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()),
                                                static_cast<Eigen::Index>(m.cols()));
  for (const Triplet& t : m.entries()) {
    dense(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
  }
  return dense;
}

SparseMatrix from_eigen(const Eigen::MatrixXd& dense) {
  std::vector<Triplet> entries;
  for (Eigen::Index r = 0; r < dense.rows(); ++r) {
    for (Eigen::Index c = 0; c < dense.cols(); ++c) {
      const double v = dense(r, c);
      if (std::abs(v) >= SparseMatrix::kDropTolerance) {
        entries.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c), v});
      }
    }
  }
  return SparseMatrix::from_triplets(static_cast<std::size_t>(dense.rows()),
                                     static_cast<std::size_t>(dense.cols()),
                                     std::move(entries));
}

}  // namespace

bool all_finite(const DenseVector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> entries) {
  for (const Triplet& t : entries) {
    if (t.row >= rows || t.col >= cols) {
      throw std::invalid_argument("sparse entry (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ") out of bounds for " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!std::isfinite(t.value)) {
      throw std::invalid_argument("sparse entry (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ") is not finite");
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });

  SparseMatrix m(rows, cols);
  m.entries_.reserve(entries.size());
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < entries.size() && entries[j].row == entries[i].row &&
           entries[j].col == entries[i].col) {
      sum += entries[j].value;
      ++j;
    }
    if (std::abs(sum) >= kDropTolerance) {
      m.entries_.push_back({entries[i].row, entries[i].col, sum});
    }
    i = j;
  }

  m.row_offsets_.assign(rows + 1, 0);
  for (const Triplet& t : m.entries_) m.row_offsets_[t.row + 1]++;
  for (std::size_t r = 0; r < rows; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(entries));
}

SparseMatrix SparseMatrix::from_dense(std::size_t rows, std::size_t cols,
                                      const std::vector<double>& row_major) {
  if (row_major.size() != rows * cols) {
    throw std::invalid_argument("dense buffer size " + std::to_string(row_major.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  std::vector<Triplet> entries;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = row_major[r * cols + c];
      if (std::abs(v) >= kDropTolerance) entries.push_back({r, c, v});
    }
  }
  return from_triplets(rows, cols, std::move(entries));
}

std::vector<double> SparseMatrix::to_dense_row_major() const {
  std::vector<double> dense(rows_ * cols_, 0.0);
  for (const Triplet& t : entries_) dense[t.row * cols_ + t.col] = t.value;
  return dense;
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<Triplet> entries;
  entries.reserve(entries_.size());
  for (const Triplet& t : entries_) entries.push_back({t.col, t.row, t.value});
  return from_triplets(cols_, rows_, std::move(entries));
}

DenseVector SparseMatrix::row_as_dense(std::size_t row) const {
  if (row >= rows_) throw std::invalid_argument("row index out of bounds");
  DenseVector out(cols_, 0.0);
  for (std::size_t i = row_offsets_[row]; i < row_offsets_[row + 1]; ++i) {
    out[entries_[i].col] = entries_[i].value;
  }
  return out;
}

SparseMatrix matmul(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " + shape_of(a) + " * " +
                                shape_of(b));
  }
  // Row-by-row accumulation into a dense scratch over b's columns.
  std::vector<double> accum(b.cols(), 0.0);
  std::vector<std::size_t> touched;
  std::vector<Triplet> out;
  const auto& ae = a.entries();
  const auto& be = b.entries();
  const auto& aoff = a.row_offsets();
  const auto& boff = b.row_offsets();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    touched.clear();
    for (std::size_t i = aoff[r]; i < aoff[r + 1]; ++i) {
      const std::size_t mid = ae[i].col;
      const double av = ae[i].value;
      for (std::size_t j = boff[mid]; j < boff[mid + 1]; ++j) {
        const std::size_t c = be[j].col;
        if (accum[c] == 0.0) touched.push_back(c);
        accum[c] += av * be[j].value;
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t c : touched) {
      if (std::abs(accum[c]) >= SparseMatrix::kDropTolerance) {
        out.push_back({r, c, accum[c]});
      }
      accum[c] = 0.0;
    }
  }
  return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(out));
}

DenseVector matmul(const SparseMatrix& a, const DenseVector& x) {
  if (a.cols() != x.size()) {
    throw std::invalid_argument("matmul: dimension mismatch " + shape_of(a) +
                                " * vector of length " + std::to_string(x.size()));
  }
  DenseVector out(a.rows(), 0.0);
  for (const Triplet& t : a.entries()) out[t.row] += t.value * x[t.col];
  return out;
}

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> out;
  out.reserve(a.nnz() * b.nnz());
  for (const Triplet& ta : a.entries()) {
    for (const Triplet& tb : b.entries()) {
      out.push_back({ta.row * b.rows() + tb.row, ta.col * b.cols() + tb.col,
                     ta.value * tb.value});
    }
  }
  return SparseMatrix::from_triplets(a.rows() * b.rows(), a.cols() * b.cols(),
                                     std::move(out));
}

SparseMatrix right_inverse(const SparseMatrix& m) {
  constexpr double kPivotTolerance = 1e-10;
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument("right_inverse: empty matrix " + shape_of(m));
  }
  if (m.rows() > m.cols()) {
    throw std::runtime_error("right_inverse: " + shape_of(m) +
                             " has more rows than columns, no full row rank");
  }
  const Eigen::MatrixXd dense = to_eigen(m);
  if (m.rows() == m.cols()) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
    lu.setThreshold(kPivotTolerance);
    if (!lu.isInvertible()) {
      throw std::runtime_error("right_inverse: rank-deficient " + shape_of(m) +
                               " matrix (pivot below 1e-10)");
    }
    return from_eigen(lu.inverse());
  }
  // m^T (m m^T)^{-1} via an LU of the Gram matrix.
  const Eigen::MatrixXd gram = dense * dense.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  lu.setThreshold(kPivotTolerance);
  if (!lu.isInvertible()) {
    throw std::runtime_error("right_inverse: rank-deficient " + shape_of(m) +
                             " matrix (Gram pivot below 1e-10)");
  }
  const Eigen::MatrixXd inv = dense.transpose() * lu.inverse();
  return from_eigen(inv);
}

DenseVector singular_values(const SparseMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument("singular_values: empty matrix " + shape_of(m));
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(m));
  const Eigen::VectorXd& sv = svd.singularValues();
  DenseVector out(sv.data(), sv.data() + sv.size());
  return out;
}

double max_column_l1(const SparseMatrix& m) {
  std::vector<double> col_sums(m.cols(), 0.0);
  for (const Triplet& t : m.entries()) col_sums[t.col] += std::abs(t.value);
  double best = 0.0;
  for (double s : col_sums) best = std::max(best, s);
  return best;
}

}  // namespace blowfish
