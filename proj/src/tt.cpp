#include "ttmmk/tt.hpp"

#include <cmath>
#include <string>
#include <tuple>

#include "ttmmk/error.hpp"
#include "ttmmk/linalg.hpp"

namespace ttmmk {

namespace {

DenseTensor core_from_matrix(const Matrix& m, std::size_t r_prev, std::size_t extent,
                             std::size_t r_next) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return DenseTensor({r_prev, extent, r_next}, std::move(data));
}

}  // namespace

std::vector<std::size_t> TTDecomposition::dims() const {
  std::vector<std::size_t> out;
  out.reserve(cores.size());
  for (const auto& c : cores) out.push_back(c.dim(1));
  return out;
}

void TTDecomposition::validate() const {
  if (cores.empty()) fail(ErrorCode::ShapeChain, "tensor train has no cores");
  if (ranks.size() != cores.size() + 1) fail(ErrorCode::ShapeChain, "rank vector length must be M+1");
  if (ranks.front() != 1 || ranks.back() != 1) fail(ErrorCode::ShapeChain, "boundary ranks must equal 1");
  for (std::size_t m = 0; m < cores.size(); ++m) {
    const auto& c = cores[m];
    if (c.order() != 3 || c.dim(0) != ranks[m] || c.dim(2) != ranks[m + 1]) {
      fail(ErrorCode::ShapeChain, "core " + std::to_string(m + 1) + " does not match the rank chain");
    }
  }
}

std::pair<Matrix, Matrix> canonicalize_signs(Matrix u, Matrix vt) {
  if (u.cols() != vt.rows()) fail(ErrorCode::DimensionMismatch, "canonicalize_signs: u columns must match vt rows");
  for (Eigen::Index r = 0; r < u.cols(); ++r) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const double a = std::abs(u(i, r));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (!(best_abs > 0.0)) fail(ErrorCode::ZeroColumn, "canonicalize_signs: zero left singular vector");
    if (u(best, r) < 0.0) {
      u.col(r) = -u.col(r);
      vt.row(r) = -vt.row(r);
    }
  }
  return {std::move(u), std::move(vt)};
}

TTDecomposition tt_svd_unique(const DenseTensor& x, const TTRankPolicy& policy,
                              bool enforce_uniqueness) {
  const std::size_t order = x.order();
  if (order == 0) fail(ErrorCode::InvalidArgument, "tt_svd_unique: empty tensor");
  if (order > kMaxOrder) fail(ErrorCode::UnsupportedOrder, "tt_svd_unique: order exceeds limit");
  if (!x.as_vector().allFinite()) fail(ErrorCode::NonFinite, "tt_svd_unique: non-finite input");

  double delta = 0.0;
  std::size_t rmax = kUnboundedRank;
  if (policy.kind == TTRankPolicy::Kind::FixedRank) {
    if (policy.rank < 1) fail(ErrorCode::InvalidArgument, "tt_svd_unique: rank must be >= 1");
    rmax = policy.rank;
  } else {
    if (!(policy.epsilon >= 0.0) || !std::isfinite(policy.epsilon)) {
      fail(ErrorCode::InvalidArgument, "tt_svd_unique: epsilon must be finite and >= 0");
    }
    if (order > 1) {
      delta = policy.epsilon * frobenius_norm(x) / std::sqrt(static_cast<double>(order - 1));
    }
  }

  const auto& dims = x.dims();
  TTDecomposition t;
  t.ranks.assign(order + 1, 1);

  // Current remainder, stored column-major as R_{m-1} x (I_m ... I_M).
  Matrix remainder = Eigen::Map<const Matrix>(x.data().data(), 1,
                                              static_cast<Eigen::Index>(x.size()));
  std::size_t cols = x.size();
  for (std::size_t m = 0; m + 1 < order; ++m) {
    const std::size_t rows = t.ranks[m] * dims[m];
    cols /= dims[m];
    const Eigen::Map<const Matrix> z(remainder.data(), static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(cols));
    TruncatedSVD svd = svd_truncated(z, delta, rmax);
    if (enforce_uniqueness) {
      std::tie(svd.u, svd.vt) = canonicalize_signs(std::move(svd.u), std::move(svd.vt));
    }
    t.ranks[m + 1] = svd.rank;
    t.cores.push_back(core_from_matrix(svd.u, t.ranks[m], dims[m], svd.rank));
    remainder = svd.s.asDiagonal() * svd.vt;
  }
  t.cores.push_back(core_from_matrix(remainder, t.ranks[order - 1], dims[order - 1], 1));
  return t;
}

DenseTensor tt_reconstruct(const TTDecomposition& t) {
  t.validate();
  // Left-to-right contraction; `acc` holds (I_1..I_m) x R_m column-major.
  const auto& first = t.cores.front();
  Matrix acc = Eigen::Map<const Matrix>(first.data().data(),
                                        static_cast<Eigen::Index>(first.dim(1)),
                                        static_cast<Eigen::Index>(first.dim(2)));
  for (std::size_t m = 1; m < t.cores.size(); ++m) {
    const auto& core = t.cores[m];
    const auto r_prev = static_cast<Eigen::Index>(core.dim(0));
    const auto extent = static_cast<Eigen::Index>(core.dim(1));
    const auto r_next = static_cast<Eigen::Index>(core.dim(2));
    const Eigen::Map<const Matrix> g(core.data().data(), r_prev, extent * r_next);
    // prod: (I_1..I_{m-1}) x (I_m R_m), column index i_m + I_m r_m.
    const Matrix prod = acc * g;
    Matrix next(acc.rows() * extent, r_next);
    for (Eigen::Index r = 0; r < r_next; ++r) {
      for (Eigen::Index i = 0; i < extent; ++i) {
        next.col(r).segment(i * acc.rows(), acc.rows()) = prod.col(i + extent * r);
      }
    }
    acc = std::move(next);
  }
  return DenseTensor(t.dims(), std::vector<double>(acc.data(), acc.data() + acc.size()));
}

}  // namespace ttmmk
