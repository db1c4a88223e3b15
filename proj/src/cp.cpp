#include "ttmmk/cp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "ttmmk/error.hpp"

namespace ttmmk {

std::vector<std::size_t> CPDecomposition::dims() const {
  std::vector<std::size_t> out;
  out.reserve(factors.size());
  for (const auto& f : factors) out.push_back(static_cast<std::size_t>(f.rows()));
  return out;
}

void CPDecomposition::validate() const {
  if (factors.empty()) fail(ErrorCode::InvalidArgument, "CP decomposition has no factors");
  for (const auto& f : factors) {
    if (f.cols() != factors.front().cols()) {
      fail(ErrorCode::DimensionMismatch, "CP factors must share the same column count");
    }
    if (f.rows() < 1) fail(ErrorCode::InvalidArgument, "CP factor with zero rows");
  }
}

CPDecomposition tt_to_cp(const TTDecomposition& t) {
  t.validate();
  const std::size_t order = t.order();
  std::size_t rank = 1;
  for (std::size_t m = 1; m < order; ++m) rank *= t.ranks[m];

  CPDecomposition c;
  c.factors.reserve(order);
  for (std::size_t m = 0; m < order; ++m) {
    c.factors.emplace_back(static_cast<Eigen::Index>(t.cores[m].dim(1)),
                           static_cast<Eigen::Index>(rank));
  }

  // Internal indices r_1..r_{M-1}; r_0 = r_M = 0 throughout.
  std::vector<std::size_t> idx(order + 1, 0);
  for (std::size_t r = 0; r < rank; ++r) {
    std::size_t rest = r;
    for (std::size_t m = 1; m < order; ++m) {
      idx[m] = rest % t.ranks[m];
      rest /= t.ranks[m];
    }
    for (std::size_t m = 0; m < order; ++m) {
      const auto& core = t.cores[m];
      const std::size_t r_prev = core.dim(0);
      const std::size_t extent = core.dim(1);
      const auto data = core.data();
      auto col = c.factors[m].col(static_cast<Eigen::Index>(r));
      for (std::size_t i = 0; i < extent; ++i) {
        col[static_cast<Eigen::Index>(i)] = data[idx[m] + r_prev * (i + extent * idx[m + 1])];
      }
    }
  }
  return c;
}

CPDecomposition equilibrate_norms(const CPDecomposition& c) {
  c.validate();
  CPDecomposition out = c;
  const double inv_order = 1.0 / static_cast<double>(c.order());
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(c.rank()); ++r) {
    double total = 1.0;
    bool zero = false;
    for (const auto& f : c.factors) {
      const double n = f.col(r).norm();
      zero = zero || n == 0.0;
      total *= n;
    }
    if (zero) {
      for (auto& f : out.factors) f.col(r).setZero();
      continue;
    }
    const double target = std::pow(total, inv_order);
    for (auto& f : out.factors) f.col(r) *= target / f.col(r).norm();
  }
  return out;
}

DenseTensor cp_reconstruct(const CPDecomposition& c) {
  c.validate();
  const auto dims = c.dims();
  // Build the rank-one terms as a Khatri-Rao chain, lowest mode fastest.
  Matrix kr = c.factors.back();
  for (std::size_t m = c.order() - 1; m-- > 0;) kr = khatri_rao(kr, c.factors[m]);
  const Vector flat = kr.rowwise().sum();
  return DenseTensor(dims, std::vector<double>(flat.data(), flat.data() + flat.size()));
}

namespace {

Matrix khatri_rao_except(const std::vector<Matrix>& factors, std::size_t skip) {
  Matrix kr;
  bool first = true;
  for (std::size_t m = factors.size(); m-- > 0;) {
    if (m == skip) continue;
    kr = first ? factors[m] : khatri_rao(kr, factors[m]);
    first = false;
  }
  return kr;
}

double relative_residual(const DenseTensor& x, const CPDecomposition& c, double x_norm) {
  const DenseTensor approx = cp_reconstruct(c);
  const double err = (x.as_vector() - approx.as_vector()).norm();
  return x_norm > 0.0 ? err / x_norm : err;
}

}  // namespace

CpAlsResult cp_als(const DenseTensor& x, const CpAlsOptions& options) {
  if (options.rank < 1) fail(ErrorCode::InvalidArgument, "cp_als: rank must be >= 1");
  if (!x.as_vector().allFinite()) fail(ErrorCode::NonFinite, "cp_als: non-finite input");
  const std::size_t order = x.order();
  const auto rank = static_cast<Eigen::Index>(options.rank);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  CpAlsResult result;
  for (std::size_t m = 0; m < order; ++m) {
    Matrix f(static_cast<Eigen::Index>(x.dim(m)), rank);
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      for (Eigen::Index i = 0; i < f.rows(); ++i) f(i, j) = uniform(rng);
    }
    result.cp.factors.push_back(std::move(f));
  }
  if (order == 1) {
    // Single mode: the best rank-R fit puts x in the first column.
    result.cp.factors[0].setZero();
    result.cp.factors[0].col(0) = x.as_vector();
    result.residuals.push_back(0.0);
    return result;
  }

  std::vector<Matrix> unfoldings;
  unfoldings.reserve(order);
  for (std::size_t m = 0; m < order; ++m) unfoldings.push_back(matricize(x, m));
  const double x_norm = frobenius_norm(x);

  auto& factors = result.cp.factors;
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (std::size_t m = 0; m < order; ++m) {
      Matrix gram = Matrix::Ones(rank, rank);
      for (std::size_t k = 0; k < order; ++k) {
        if (k != m) gram.array() *= (factors[k].transpose() * factors[k]).array();
      }
      const Matrix rhs = unfoldings[m] * khatri_rao_except(factors, m);
      // H_m gram = rhs; gram is symmetric positive semidefinite.
      Eigen::LLT<Matrix> llt(gram);
      if (llt.info() != Eigen::Success) {
        const double ridge = 1e-12 * std::max(1.0, gram.trace() / static_cast<double>(rank));
        gram.diagonal().array() += ridge;
        factors[m] = gram.ldlt().solve(rhs.transpose()).transpose();
      } else {
        factors[m] = llt.solve(rhs.transpose()).transpose();
      }
    }
    const double res = relative_residual(x, result.cp, x_norm);
    const bool stalled = !result.residuals.empty() &&
                         std::abs(result.residuals.back() - res) < options.tol;
    result.residuals.push_back(res);
    if (stalled || res < options.tol) break;
  }
  return result;
}

}  // namespace ttmmk
