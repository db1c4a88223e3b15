#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "ttmmk/cp.hpp"
#include "ttmmk/error.hpp"
#include "ttmmk/tt.hpp"

using namespace ttmmk;

namespace {

Vector fiber_vec(const DenseTensor& core, std::size_t left, std::size_t right) {
  const auto f = oracle::fiber(core, left, right);
  return Eigen::Map<const Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
}

}  // namespace

TEST_CASE("tt_to_cp of a rank-one train squeezes the cores") {
  oracle::Rng rng(1);
  const auto t = oracle::random_tt({3, 4, 2}, {1, 1, 1, 1}, rng);
  const auto c = tt_to_cp(t);
  CHECK(c.rank() == 1);
  for (std::size_t m = 0; m < 3; ++m) CHECK(c.factors[m].col(0) == fiber_vec(t.cores[m], 0, 0));
}

TEST_CASE("tt_to_cp merges ranks (1,2,3,1) with r1 fastest") {
  oracle::Rng rng(2);
  const auto t = oracle::random_tt({3, 4, 5}, {1, 2, 3, 1}, rng);
  const auto c = tt_to_cp(t);
  REQUIRE(c.rank() == 6);
  for (std::size_t r2 = 0; r2 < 3; ++r2) {
    for (std::size_t r1 = 0; r1 < 2; ++r1) {
      const auto r = static_cast<Eigen::Index>(r1 + 2 * r2);
      CHECK(c.factors[0].col(r) == fiber_vec(t.cores[0], 0, r1));
      CHECK(c.factors[1].col(r) == fiber_vec(t.cores[1], r1, r2));
      CHECK(c.factors[2].col(r) == fiber_vec(t.cores[2], r2, 0));
    }
  }
  CHECK(oracle::rel_diff(oracle::cp_full(c), oracle::tt_full(t)) <= 1e-14);
}

TEST_CASE("tt_to_cp rank is the product of internal ranks") {
  oracle::Rng rng(3);
  CHECK(tt_to_cp(oracle::random_tt({2, 3, 2, 3}, {1, 2, 2, 2, 1}, rng)).rank() == 8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t order = oracle::uniform_int(rng, 3, 4);
    const auto dims = oracle::random_dims(rng, order, 1, 5);
    std::vector<std::size_t> ranks(order + 1, 1);
    std::size_t product = 1;
    for (std::size_t m = 1; m < order; ++m) {
      ranks[m] = oracle::uniform_int(rng, 1, 4);
      product *= ranks[m];
    }
    const auto t = oracle::random_tt(dims, ranks, rng);
    const auto c = tt_to_cp(t);
    CHECK(c.rank() == product);
    const auto full = tt_reconstruct(t);
    CHECK(oracle::rel_diff(cp_reconstruct(c), full) <= 1e-13);
  }
}

TEST_CASE("fixed-rank order-3 pipeline has CP rank R1 R2") {
  oracle::Rng rng(4);
  const auto x = oracle::random_tensor({5, 6, 4}, rng);
  for (std::size_t r = 1; r <= 4; ++r) {
    const auto t = tt_svd_unique(x, TTRankPolicy::fixed_rank(r));
    const auto c = tt_to_cp(t);
    CHECK(c.rank() == t.ranks[1] * t.ranks[2]);
    CHECK(c.rank() <= r * r);
  }
}

TEST_CASE("equilibration of the hand example") {
  CPDecomposition c;
  c.factors = {(Matrix(2, 1) << 2, 0).finished(), (Matrix(2, 1) << 0, 3).finished(),
               (Matrix(2, 1) << 1, 0).finished()};
  const auto e = equilibrate_norms(c);
  for (const auto& f : e.factors) CHECK(f.col(0).norm() == doctest::Approx(1.817121).epsilon(1e-6));
  for (const auto& f : e.factors) CHECK(f.col(0).norm() == doctest::Approx(std::cbrt(6.0)).epsilon(1e-14));
  CHECK(oracle::rel_diff(cp_reconstruct(e), cp_reconstruct(c)) <= 1e-15);
}

TEST_CASE("equilibration invariants on random CPs") {
  oracle::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto dims = oracle::random_dims(rng, oracle::uniform_int(rng, 2, 4), 1, 6);
    auto c = oracle::random_cp(dims, oracle::uniform_int(rng, 1, 5), rng);
    // scale columns wildly apart across modes
    for (auto& f : c.factors)
      for (Eigen::Index r = 0; r < f.cols(); ++r) f.col(r) *= std::pow(10.0, oracle::uniform_int(rng, 0, 6) - 3.0);
    if (trial % 4 == 0) c.factors[oracle::uniform_int(rng, 0, dims.size() - 1)].col(0).setZero();

    const auto e = equilibrate_norms(c);
    CHECK(oracle::rel_diff(cp_reconstruct(e), cp_reconstruct(c)) <= 1e-12);
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(c.rank()); ++r) {
      double n_r = 1.0, lo = INFINITY, hi = 0.0;
      for (const auto& f : c.factors) n_r *= f.col(r).norm();
      for (const auto& f : e.factors) {
        lo = std::min(lo, f.col(r).norm());
        hi = std::max(hi, f.col(r).norm());
      }
      const double target = std::pow(n_r, 1.0 / static_cast<double>(dims.size()));
      CHECK(hi - lo <= 1e-10 * target);
      if (n_r == 0.0) {
        for (const auto& f : e.factors) CHECK(f.col(r).isZero(0.0));
      }
    }
    const auto twice = equilibrate_norms(e);
    for (std::size_t m = 0; m < dims.size(); ++m) {
      CHECK((twice.factors[m] - e.factors[m]).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, e.factors[m].cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("cp_reconstruct examples") {
  CPDecomposition c;
  c.factors = {(Matrix(2, 1) << 1, 2).finished(), (Matrix(1, 1) << 3).finished(),
               (Matrix(1, 1) << 4).finished()};
  CHECK(cp_reconstruct(c) == DenseTensor({2, 1, 1}, {12, 24}));

  CPDecomposition empty;
  empty.factors = {Matrix(2, 0), Matrix(3, 0)};
  CHECK(cp_reconstruct(empty) == DenseTensor({2, 3}));

  oracle::Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto dims = oracle::random_dims(rng, oracle::uniform_int(rng, 1, 4), 1, 5);
    const auto r = oracle::random_cp(dims, oracle::uniform_int(rng, 1, 3), rng);
    CHECK(oracle::rel_diff(cp_reconstruct(r), oracle::cp_full(r)) <= 1e-13);
  }
}

TEST_CASE("mismatched factor widths are rejected") {
  CPDecomposition c;
  c.factors = {Matrix::Ones(2, 2), Matrix::Ones(2, 3)};
  CHECK_THROWS_AS((void)cp_reconstruct(c), Error);
}

TEST_CASE("cp_als fits an exact rank-one tensor") {
  oracle::Rng rng(7);
  const auto x = cp_reconstruct(oracle::random_cp({4, 5, 3}, 1, rng));
  CpAlsOptions opts;
  opts.rank = 1;
  opts.max_sweeps = 20;
  opts.tol = 1e-12;
  const auto res = cp_als(x, opts);
  REQUIRE(!res.residuals.empty());
  CHECK(res.residuals.size() <= 20);
  CHECK(res.residuals.back() <= 1e-8);
}

TEST_CASE("cp_als is deterministic per seed") {
  oracle::Rng rng(8);
  const auto x = oracle::random_tensor({4, 4, 4}, rng);
  CpAlsOptions opts;
  opts.rank = 2;
  opts.seed = 42;
  const auto a = cp_als(x, opts);
  const auto b = cp_als(x, opts);
  for (std::size_t m = 0; m < 3; ++m) CHECK(a.cp.factors[m] == b.cp.factors[m]);
  CHECK(a.residuals == b.residuals);
}

TEST_CASE("cp_als residuals are non-increasing") {
  oracle::Rng rng(9);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = oracle::random_tensor({5, 5, 5}, rng);
    CpAlsOptions opts;
    opts.rank = 3;
    opts.seed = seed;
    opts.max_sweeps = 50;
    const auto res = cp_als(x, opts);
    for (std::size_t i = 1; i < res.residuals.size(); ++i) CHECK(res.residuals[i] <= res.residuals[i - 1] + 1e-10);
    CHECK(res.residuals.back() < 1.0);
  }
}

TEST_CASE("cp_als survives singular normal equations") {
  // a constant tensor with rank 3 forces collinear factor columns
  const DenseTensor x({3, 3, 3}, std::vector<double>(27, 1.0));
  CpAlsOptions opts;
  opts.rank = 3;
  opts.max_sweeps = 30;
  const auto res = cp_als(x, opts);
  for (const auto& f : res.cp.factors) CHECK(f.allFinite());
  CHECK(res.residuals.back() <= 1e-6);
}
