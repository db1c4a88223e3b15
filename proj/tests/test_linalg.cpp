#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "support/oracles.hpp"
#include "ttmmk/error.hpp"
#include "ttmmk/linalg.hpp"

using namespace ttmmk;

namespace {

double reconstruction_error(const Matrix& z, const TruncatedSVD& f) {
  return (z - f.u * f.s.asDiagonal() * f.vt).norm();
}

void check_factor_shape(const TruncatedSVD& f) {
  const auto r = static_cast<Eigen::Index>(f.rank);
  REQUIRE(f.u.cols() == r);
  REQUIRE(f.s.size() == r);
  REQUIRE(f.vt.rows() == r);
  CHECK((f.u.transpose() * f.u - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((f.vt * f.vt.transpose() - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() <= 1e-10);
  for (Eigen::Index i = 0; i < r; ++i) {
    CHECK(f.s[i] >= 0.0);
    if (i > 0) CHECK(f.s[i] <= f.s[i - 1]);
  }
}

}  // namespace

TEST_CASE("diag(3,1) with delta 2 keeps one value") {
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 3;
  z(1, 1) = 1;
  const auto f = svd_truncated(z, 2.0);
  CHECK(f.rank == 1);
  CHECK(f.s[0] == doctest::Approx(3.0).epsilon(1e-15));
  check_factor_shape(f);
}

TEST_CASE("orthogonal matrix keeps full rank with unit values") {
  oracle::Rng rng(2);
  const Matrix q = Eigen::HouseholderQR<Matrix>(oracle::random_matrix(5, 5, rng)).householderQ();
  const auto f = svd_truncated(q, 0.0);
  CHECK(f.rank == 5);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(f.s[i] == doctest::Approx(1.0).epsilon(1e-13));
  check_factor_shape(f);
}

TEST_CASE("rank one plus tiny noise") {
  oracle::Rng rng(4);
  const Vector a = oracle::random_matrix(6, 1, rng).col(0);
  const Vector b = oracle::random_matrix(4, 1, rng).col(0);
  Matrix noise = oracle::random_matrix(6, 4, rng);
  noise *= 1e-14 / noise.norm();
  const Matrix z = a * b.transpose() + noise;
  const auto f = svd_truncated(z, 1e-10);
  CHECK(f.rank == 1);
  CHECK(f.s[0] == doctest::Approx(a.norm() * b.norm()).epsilon(1e-12));
}

TEST_CASE("zero matrix gets the rank floor") {
  const auto f = svd_truncated(Matrix::Zero(3, 4), 0.0);
  CHECK(f.rank == 1);
  CHECK(f.u.col(0) == Vector::Unit(3, 0));
  CHECK(f.s[0] == 0.0);
  CHECK(f.vt.isZero(0.0));
}

TEST_CASE("reconstruction contract and minimality on random matrices") {
  oracle::Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = oracle::uniform_int(rng, 1, 12);
    const auto k = oracle::uniform_int(rng, 1, 12);
    const Matrix z = oracle::random_matrix(n, k, rng);
    const double delta = std::uniform_real_distribution<double>(0.0, 1.2)(rng) * z.norm();
    const auto f = svd_truncated(z, delta);
    check_factor_shape(f);
    CHECK(reconstruction_error(z, f) <= delta + 1e-12 * z.norm());
    if (f.rank > 1) {
      // one fewer value would break the bound
      const auto g = svd_truncated(z, 0.0, f.rank - 1);
      CHECK(reconstruction_error(z, g) > delta - 1e-12 * z.norm());
    }
  }
}

TEST_CASE("rank cap wins over the threshold") {
  oracle::Rng rng(8);
  const Matrix z = oracle::random_matrix(7, 6, rng);
  const auto f = svd_truncated(z, 0.0, 3);
  CHECK(f.rank == 3);
  const auto g = svd_truncated(z, 0.0);
  CHECK(g.rank == 6);
}

TEST_CASE("rank is monotone in delta") {
  oracle::Rng rng(10);
  const Matrix z = oracle::random_matrix(9, 8, rng);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double d = 0.0; d <= 1.05 * z.norm(); d += 0.05 * z.norm()) {
    const auto r = svd_truncated(z, d).rank;
    CHECK(r <= previous);
    previous = r;
  }
}

TEST_CASE("bit-identical output on repeated calls") {
  oracle::Rng rng(12);
  const Matrix z = oracle::random_matrix(10, 7, rng);
  const auto a = svd_truncated(z, 0.3);
  const auto b = svd_truncated(z, 0.3);
  CHECK(a.rank == b.rank);
  CHECK(a.u == b.u);
  CHECK(a.s == b.s);
  CHECK(a.vt == b.vt);
}

TEST_CASE("svd input errors") {
  Matrix z = Matrix::Ones(2, 2);
  z(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)svd_truncated(z, 0.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
  CHECK_THROWS_AS((void)svd_truncated(Matrix::Ones(2, 2), -1.0), Error);
}

TEST_CASE("symmetric eigen examples") {
  const auto id = sym_eig_descending(Matrix::Identity(4, 4));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(id.values[i] == doctest::Approx(1.0));

  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1, 4, 9;
  const auto e = sym_eig_descending(d);
  CHECK(e.values[0] == doctest::Approx(9.0));
  CHECK(e.values[1] == doctest::Approx(4.0));
  CHECK(e.values[2] == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(2, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(0, 2)) == doctest::Approx(1.0));
}

TEST_CASE("symmetric eigen residual on random matrices") {
  oracle::Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(5, 5, rng);
    const Matrix g = a + a.transpose();
    const auto e = sym_eig_descending(g);
    CHECK((g * e.vectors - e.vectors * e.values.asDiagonal()).norm() <= 1e-8 * g.norm());
    CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(5, 5)).norm() <= 1e-10);
    for (Eigen::Index i = 1; i < 5; ++i) CHECK(e.values[i] <= e.values[i - 1]);
  }
}

TEST_CASE("asymmetric input is rejected") {
  Matrix g = Matrix::Identity(3, 3);
  g(0, 1) = 1e-3;
  try {
    (void)sym_eig_descending(g);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSymmetric);
  }
}
