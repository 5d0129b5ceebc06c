#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "blowfish/linalg.hpp"

using namespace blowfish;

namespace {

SparseMatrix dense3(std::size_t rows, std::size_t cols,
                    const std::vector<double>& values) {
  std::vector<Triplet> entries;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      entries.push_back({r, c, values[r * cols + c]});
    }
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(entries));
}

double max_abs(const std::vector<double>& v) {
  double worst = 0.0;
  for (double x : v) worst = std::max(worst, std::abs(x));
  return worst;
}

}  // namespace

TEST_CASE("triplet assembly sums duplicates and drops zeros") {
  const SparseMatrix m = SparseMatrix::from_triplets(
      2, 2, {{0, 0, 1.0}, {0, 0, 2.0}, {1, 1, 0.5}, {1, 1, -0.5}, {1, 0, 4.0}});
  CHECK(m.nnz() == 2);
  const std::vector<double> dense = m.to_dense_row_major();
  CHECK(dense[0] == 3.0);
  CHECK(dense[1] == 0.0);
  CHECK(dense[2] == 4.0);
  CHECK(dense[3] == 0.0);
}

TEST_CASE("row offsets index the sorted entries") {
  const SparseMatrix m =
      SparseMatrix::from_triplets(3, 3, {{2, 1, 5.0}, {0, 2, 1.0}, {2, 0, 3.0}});
  REQUIRE(m.row_offsets().size() == 4);
  CHECK(m.row_offsets()[0] == 0);
  CHECK(m.row_offsets()[1] == 1);
  CHECK(m.row_offsets()[2] == 1);
  CHECK(m.row_offsets()[3] == 3);
  CHECK(m.entries()[1].col == 0);
  CHECK(m.entries()[2].col == 1);
  const DenseVector row = m.row_as_dense(2);
  CHECK(row[0] == 3.0);
  CHECK(row[1] == 5.0);
  CHECK(row[2] == 0.0);
}

TEST_CASE("identity and transpose") {
  const SparseMatrix id = SparseMatrix::identity(3);
  CHECK(id.nnz() == 3);
  const SparseMatrix m = dense3(2, 3, {1, 2, 0, 0, 3, 4});
  const SparseMatrix mt = m.transposed();
  CHECK(mt.rows() == 3);
  CHECK(mt.cols() == 2);
  const std::vector<double> d = mt.to_dense_row_major();
  CHECK(d[0] == 1.0);
  CHECK(d[1] == 0.0);
  CHECK(d[2] == 2.0);
  CHECK(d[3] == 3.0);
  CHECK(d[4] == 0.0);
  CHECK(d[5] == 4.0);
}

TEST_CASE("sparse-sparse product") {
  const SparseMatrix a = dense3(2, 3, {1, 2, 0, 0, 3, 4});
  const SparseMatrix b = dense3(3, 2, {1, 0, 2, 1, 0, 5});
  const SparseMatrix ab = matmul(a, b);
  const std::vector<double> d = ab.to_dense_row_major();
  CHECK(d[0] == 5.0);
  CHECK(d[1] == 2.0);
  CHECK(d[2] == 6.0);
  CHECK(d[3] == 23.0);
  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}

TEST_CASE("sparse-vector product") {
  const SparseMatrix a = dense3(2, 3, {1, 2, 0, 0, 3, 4});
  const DenseVector y = matmul(a, DenseVector{1.0, -1.0, 2.0});
  CHECK(y[0] == -1.0);
  CHECK(y[1] == 5.0);
}

TEST_CASE("kron uses row-major blocks") {
  const SparseMatrix a = dense3(1, 2, {1, 2});
  const SparseMatrix b = dense3(2, 2, {1, 0, 0, 1});
  const SparseMatrix k = kron(a, b);
  REQUIRE(k.rows() == 2);
  REQUIRE(k.cols() == 4);
  const std::vector<double> d = k.to_dense_row_major();
  CHECK(d == std::vector<double>{1, 0, 2, 0, 0, 1, 0, 2});
}

TEST_CASE("kron of products matches product of krons") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  auto rand_mat = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (double& x : v) x = dist(rng);
    return dense3(r, c, v);
  };
  const SparseMatrix a = rand_mat(2, 3);
  const SparseMatrix b = rand_mat(3, 2);
  const SparseMatrix c = rand_mat(2, 2);
  const SparseMatrix d = rand_mat(2, 3);
  const SparseMatrix lhs = matmul(kron(a, c), kron(b, d));
  const SparseMatrix rhs = kron(matmul(a, b), matmul(c, d));
  const std::vector<double> dl = lhs.to_dense_row_major();
  const std::vector<double> dr = rhs.to_dense_row_major();
  REQUIRE(dl.size() == dr.size());
  for (std::size_t i = 0; i < dl.size(); ++i) CHECK(dl[i] == doctest::Approx(dr[i]).epsilon(1e-12));
}

TEST_CASE("square right inverse is the LU inverse") {
  const SparseMatrix m = dense3(2, 2, {2, 0, 1, 4});
  const std::vector<double> inv = right_inverse(m).to_dense_row_major();
  CHECK(inv[0] == doctest::Approx(0.5));
  CHECK(inv[1] == doctest::Approx(0.0));
  CHECK(inv[2] == doctest::Approx(-0.125));
  CHECK(inv[3] == doctest::Approx(0.25));
}

TEST_CASE("wide right inverse satisfies M Minv = I") {
  const SparseMatrix m = dense3(2, 3, {2, 1, 0, 1, 3, 1});
  const SparseMatrix minv = right_inverse(m);
  REQUIRE(minv.rows() == 3);
  REQUIRE(minv.cols() == 2);
  std::vector<double> prod = matmul(m, minv).to_dense_row_major();
  prod[0] -= 1.0;
  prod[3] -= 1.0;
  CHECK(max_abs(prod) < 1e-12);
}

TEST_CASE("right inverse rejects tall and rank-deficient input") {
  CHECK_THROWS_AS(right_inverse(dense3(3, 2, {1, 0, 0, 1, 1, 1})), std::runtime_error);
  CHECK_THROWS_AS(right_inverse(dense3(2, 3, {1, 1, 0, 2, 2, 0})), std::runtime_error);
  CHECK_THROWS_AS(right_inverse(dense3(2, 2, {1, 2, 2, 4})), std::runtime_error);
}

TEST_CASE("singular values of the 3-cell prefix matrix") {
  const SparseMatrix c3 = dense3(3, 3, {1, 0, 0, 1, 1, 0, 1, 1, 1});
  const std::vector<double> s = singular_values(c3);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == doctest::Approx(2.246979603717467).epsilon(1e-10));
  CHECK(s[1] == doctest::Approx(0.8019377358048383).epsilon(1e-10));
  CHECK(s[2] == doctest::Approx(0.5549581320873713).epsilon(1e-10));
}

TEST_CASE("singular values: identity, ordering, homogeneity") {
  const std::vector<double> id = singular_values(SparseMatrix::identity(4));
  for (double s : id) CHECK(s == doctest::Approx(1.0));

  const SparseMatrix a = dense3(2, 3, {2, 1, 0, 1, 3, 1});
  const std::vector<double> s = singular_values(a);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(3.7189987758596126).epsilon(1e-10));
  CHECK(s[1] == doctest::Approx(1.472768856662409).epsilon(1e-10));
  CHECK(s[0] >= s[1]);

  const SparseMatrix a3 = dense3(2, 3, {6, 3, 0, 3, 9, 3});
  const std::vector<double> s3 = singular_values(a3);
  CHECK(s3[0] == doctest::Approx(3.0 * s[0]).epsilon(1e-10));
  CHECK(s3[1] == doctest::Approx(3.0 * s[1]).epsilon(1e-10));
}

TEST_CASE("max column l1") {
  const SparseMatrix m = dense3(2, 3, {1, -2, 0, 3, 1, -4});
  CHECK(max_column_l1(m) == 4.0);
  CHECK(max_column_l1(SparseMatrix(3, 2)) == 0.0);
}

TEST_CASE("all finite check") {
  CHECK(all_finite({1.0, -2.0, 0.0}));
  CHECK(!all_finite({1.0, std::nan("")}));
  CHECK(!all_finite({std::numeric_limits<double>::infinity()}));
}
