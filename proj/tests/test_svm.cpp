#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support/oracles.hpp"
#include "ttmmk/error.hpp"
#include "ttmmk/svm.hpp"
#include "ttmmk/synthetic.hpp"

using namespace ttmmk;

namespace {

// Gaussian Gram of random points in R^d; positive semidefinite by construction.
Matrix random_gram(std::size_t n, oracle::Rng& rng, double sigma) {
  const Matrix pts = oracle::random_matrix(n, 3, rng);
  Matrix k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j)
      k(i, j) = std::exp(-(pts.row(i) - pts.row(j)).squaredNorm() / (2 * sigma * sigma));
  return k;
}

std::vector<int> random_labels(std::size_t n, oracle::Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = oracle::uniform_int(rng, 0, 1) ? 1 : -1;
  y[0] = 1;
  y[1] = -1;
  return y;
}

LabeledDataset small_dataset(std::size_t per_class, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dims = {3, 3, 3};
  spec.rank = 1;
  spec.noise = 0.3;
  spec.per_class = per_class;
  spec.seed = seed;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("two points, identity Gram, C >= 1") {
  const Matrix k = Matrix::Identity(2, 2);
  const std::vector<int> y{1, -1};
  for (double c : {1.0, 1.5, 10.0, 256.0}) {
    const auto m = smo_solve(k, y, c);
    CHECK(m.converged);
    CHECK(std::abs(m.alpha[0] - 1.0) <= 1e-9);
    CHECK(std::abs(m.alpha[1] - 1.0) <= 1e-9);
    CHECK(std::abs(m.bias) <= 1e-9);
    CHECK(m.support == std::vector<std::size_t>{0, 1});
  }
}

TEST_CASE("two points, identity Gram, C = 0.5") {
  const auto m = smo_solve(Matrix::Identity(2, 2), std::vector<int>{1, -1}, 0.5);
  CHECK(std::abs(m.alpha[0] - 0.5) <= 1e-9);
  CHECK(std::abs(m.alpha[1] - 0.5) <= 1e-9);
  CHECK(std::abs(m.bias) <= 1e-9);
}

TEST_CASE("single class gives zero duals and a constant predictor") {
  oracle::Rng rng(1);
  const Matrix k = random_gram(5, rng, 1.0);
  const auto pos = smo_solve(k, std::vector<int>(5, 1), 1.0);
  CHECK(pos.alpha.isZero(0.0));
  CHECK(pos.bias == 1.0);
  CHECK(pos.support.empty());
  const auto neg = smo_solve(k, std::vector<int>(5, -1), 1.0);
  CHECK(neg.bias == -1.0);
  const std::vector<double> row(5, 0.3);
  CHECK(predict(neg, row).label == -1);
}

TEST_CASE("predict on the two-point model") {
  const auto m = smo_solve(Matrix::Identity(2, 2), std::vector<int>{1, -1}, 1.0);
  const auto a = predict(m, std::vector<double>{1.0, 0.0});
  CHECK(a.decision == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a.label == 1);
  const auto b = predict(m, std::vector<double>{0.0, 1.0});
  CHECK(b.decision == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(b.label == -1);
  CHECK_THROWS_AS((void)predict(m, std::vector<double>{1.0}), Error);
}

TEST_CASE("zero duals predict the sign of the bias, zero counts as +1") {
  SVMModel m;
  m.alpha = Vector::Zero(3);
  m.labels = {1, -1, 1};
  const std::vector<double> row{0.2, 0.9, 0.4};
  for (double beta : {-2.5, -1e-9, 0.0, 1e-9, 3.0}) {
    m.bias = beta;
    const auto p = predict(m, row);
    CHECK(p.decision == beta);
    CHECK(p.label == (beta >= 0.0 ? 1 : -1));
  }
}

TEST_CASE("KKT certificate and dual feasibility on random instances") {
  oracle::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = oracle::uniform_int(rng, 2, 60);
    const Matrix k = random_gram(n, rng, std::pow(2.0, oracle::uniform_int(rng, 0, 4) - 2.0));
    const auto y = random_labels(n, rng);
    const double c = std::pow(2.0, oracle::uniform_int(rng, 0, 8) - 4.0);
    const auto m = smo_solve(k, y, c);
    REQUIRE(m.converged);
    CHECK(kkt_violation(k, m) <= 1e-3);
    double balance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = m.alpha[static_cast<Eigen::Index>(i)];
      CHECK(a >= 0.0);
      CHECK(a <= c);
      balance += a * y[i];
    }
    CHECK(std::abs(balance) <= 1e-9 * c * static_cast<double>(n));
  }
}

TEST_CASE("dual objective never decreases") {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = oracle::uniform_int(rng, 5, 40);
    const Matrix k = random_gram(n, rng, 1.0);
    const auto y = random_labels(n, rng);
    SmoOptions opts;
    opts.record_objective = true;
    const auto m = smo_solve(k, y, 4.0, opts);
    REQUIRE(m.objective_history.size() == m.iterations + 1);
    for (std::size_t i = 1; i < m.objective_history.size(); ++i)
      CHECK(m.objective_history[i] >= m.objective_history[i - 1] - 1e-12);
    CHECK(m.objective_history.back() == doctest::Approx(dual_objective(k, y, m.alpha)).epsilon(1e-10));
  }
}

TEST_CASE("separable data is fit perfectly") {
  // two tight clusters far apart
  oracle::Rng rng(4);
  const std::size_t n = 30;
  Matrix pts(static_cast<Eigen::Index>(n), 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 2 ? -1 : 1;
    pts(static_cast<Eigen::Index>(i), 0) = 3.0 * y[i] + 0.3 * oracle::gauss(rng);
    pts(static_cast<Eigen::Index>(i), 1) = 0.3 * oracle::gauss(rng);
  }
  Matrix k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j) k(i, j) = std::exp(-(pts.row(i) - pts.row(j)).squaredNorm() / 2.0);
  const auto m = smo_solve(k, y, 1000.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    CHECK(predict(m, row).label == y[i]);
  }
}

TEST_CASE("iteration cap returns a flagged model") {
  oracle::Rng rng(5);
  const Matrix k = random_gram(40, rng, 0.5);
  const auto y = random_labels(40, rng);
  SmoOptions opts;
  opts.max_iter = 3;
  const auto m = smo_solve(k, y, 10.0, opts);
  CHECK_FALSE(m.converged);
  CHECK(m.iterations == 3);
  CHECK(std::isfinite(m.bias));
}

TEST_CASE("solver input errors") {
  const std::vector<int> y{1, -1};
  CHECK_THROWS_AS((void)smo_solve(Matrix::Identity(3, 3), y, 1.0), Error);
  CHECK_THROWS_AS((void)smo_solve(Matrix::Identity(2, 2), y, 0.0), Error);
  CHECK_THROWS_AS((void)smo_solve(Matrix::Identity(2, 2), std::vector<int>{1, 0}, 1.0), Error);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  try {
    (void)smo_solve(asym, y, 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSymmetric);
  }
}

TEST_CASE("stratified folds of 100 balanced items") {
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = i % 2 ? -1 : 1;
  const auto folds = stratified_folds(y, 5, 7);
  REQUIRE(folds.size() == 5);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK(f.size() == 20);
    CHECK(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i] == 1; }) == 10);
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen.size() == 100);
  CHECK(stratified_folds(y, 5, 7) == folds);
  CHECK(stratified_folds(y, 5, 8) != folds);
}

TEST_CASE("stratified folds keep class counts within one item") {
  oracle::Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = oracle::uniform_int(rng, 10, 70);
    const auto y = random_labels(n, rng);
    const std::size_t k = oracle::uniform_int(rng, 2, std::min<std::size_t>(n, 10));
    const auto folds = stratified_folds(y, k, static_cast<std::uint64_t>(trial));
    for (int cls : {1, -1}) {
      std::size_t lo = n, hi = 0;
      for (const auto& f : folds) {
        const auto c = static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i] == cls; }));
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("cross validation errors") {
  CHECK_THROWS_AS((void)stratified_folds(std::vector<int>{1, -1, 1}, 1, 0), Error);
  CHECK_THROWS_AS((void)stratified_folds(std::vector<int>{1, -1, 1}, 4, 0), Error);
  try {
    (void)stratified_folds(std::vector<int>(10, 1), 5, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingClass);
  }
}

TEST_CASE("duplicated separable data cross-validates perfectly") {
  auto data = small_dataset(5, 3);
  const auto copy = data;
  for (std::size_t i = 0; i < copy.size(); ++i) {
    data.items.push_back(copy.items[i]);
    data.labels.push_back(copy.labels[i]);
    data.ids.push_back(copy.ids[i] + "_dup");
  }
  const auto cfg = make_kernel_config(KernelKind::TtMmk, 1.0, 1);
  const auto res = cross_validate(data, cfg, 100.0, 5, 11);
  CHECK(res.mean_accuracy == 1.0);
  CHECK(res.fold_accuracies.size() == 5);
}

TEST_CASE("cross validation is deterministic per seed") {
  const auto data = small_dataset(10, 4);
  const auto cfg = make_kernel_config(KernelKind::TtMmk, 2.0, 2);
  const auto a = cross_validate(data, cfg, 1.0, 5, 99);
  const auto b = cross_validate(data, cfg, 1.0, 5, 99);
  CHECK(a.fold_accuracies == b.fold_accuracies);
  CHECK(a.mean_accuracy >= 0.0);
  CHECK(a.mean_accuracy <= 1.0);
}

TEST_CASE("default grids") {
  CHECK(default_power_grid().size() == 17);
  CHECK(default_power_grid().front() == 1.0 / 256.0);
  CHECK(default_power_grid().back() == 256.0);
  CHECK(default_rank_grid() == std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
}

TEST_CASE("full default grid evaluates 2890 cells") {
  const auto data = small_dataset(6, 5);
  GridSpec spec;
  spec.repeats = 1;
  spec.folds = 3;
  const auto result = grid_search(data, spec);
  CHECK(result.table.size() == 2890);
  CHECK(rank_curve(result).size() == 10);
}

TEST_CASE("single-cell grid reduces to cross validation") {
  const auto data = small_dataset(10, 6);
  GridSpec spec;
  spec.ranks = {2};
  spec.sigmas = {2.0};
  spec.cs = {4.0};
  spec.repeats = 3;
  spec.seed = 21;
  const auto result = grid_search(data, spec);
  REQUIRE(result.table.size() == 1);
  KernelConfig cfg = spec.base;
  cfg.rank = 2;
  cfg.sigma = 2.0;
  std::vector<double> all;
  for (std::size_t r = 0; r < 3; ++r) {
    const auto cv = cross_validate(data, cfg, 4.0, 5, repeat_seed(21, r));
    all.insert(all.end(), cv.fold_accuracies.begin(), cv.fold_accuracies.end());
  }
  double mean = 0.0;
  for (double a : all) mean += a;
  mean /= static_cast<double>(all.size());
  double var = 0.0;
  for (double a : all) var += (a - mean) * (a - mean);
  CHECK(result.best.mean_accuracy == doctest::Approx(mean).epsilon(1e-15));
  CHECK(result.best.std_accuracy == doctest::Approx(std::sqrt(var / static_cast<double>(all.size()))).epsilon(1e-12));
  CHECK(result.best.rank == 2);
  CHECK(result.best.sigma == 2.0);
  CHECK(result.best.c == 4.0);
}

TEST_CASE("grid ordering") {
  GridCell perfect{3, 4.0, 8.0, 1.0, 0.0};
  GridCell miss{1, 0.5, 0.5, 0.98, 0.02};
  CHECK(better_cell(perfect, miss));
  CHECK_FALSE(better_cell(miss, perfect));
  // ties: smaller R, then smaller C, then smaller sigma
  CHECK(better_cell({1, 8.0, 8.0, 0.9, 0}, {2, 1.0, 1.0, 0.9, 0}));
  CHECK(better_cell({2, 8.0, 1.0, 0.9, 0}, {2, 1.0, 2.0, 0.9, 0}));
  CHECK(better_cell({2, 1.0, 1.0, 0.9, 0}, {2, 2.0, 1.0, 0.9, 0}));
}

TEST_CASE("grid winner obeys the tie order") {
  const auto data = small_dataset(10, 7);
  GridSpec spec;
  spec.ranks = {1, 2};
  spec.sigmas = {0.5, 4.0};
  spec.cs = {1.0, 64.0};
  spec.repeats = 2;
  const auto result = grid_search(data, spec);
  CHECK(result.table.size() == 8);
  for (const auto& cell : result.table) CHECK_FALSE(better_cell(cell, result.best));
  const auto curve = rank_curve(result);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].rank == 1);
  CHECK(curve[1].rank == 2);
}

TEST_CASE("vector rbf grid ignores the rank axis") {
  const auto data = small_dataset(8, 8);
  GridSpec spec;
  spec.base = make_kernel_config(KernelKind::VectorRbf, 1.0, 1);
  spec.ranks = {1, 2, 3};
  spec.sigmas = {1.0, 2.0};
  spec.cs = {1.0};
  spec.repeats = 1;
  CHECK(grid_search(data, spec).table.size() == 2);
}

TEST_CASE("grid errors surface from worker threads") {
  auto data = small_dataset(5, 9);
  for (auto& y : data.labels) y = 1;
  GridSpec spec;
  spec.ranks = {1};
  spec.sigmas = {1.0};
  spec.cs = {1.0, 2.0};
  spec.repeats = 2;
  try {
    (void)grid_search(data, spec);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingClass);
  }
}
