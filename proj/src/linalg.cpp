#include "ttmmk/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ttmmk/error.hpp"

namespace ttmmk {

TruncatedSVD svd_truncated(const Matrix& z, double delta, std::size_t rmax) {
  if (z.rows() < 1 || z.cols() < 1) fail(ErrorCode::InvalidArgument, "svd_truncated: empty matrix");
  if (!(delta >= 0.0)) fail(ErrorCode::InvalidArgument, "svd_truncated: delta must be >= 0");
  if (rmax < 1) fail(ErrorCode::InvalidArgument, "svd_truncated: rmax must be >= 1");
  if (!z.allFinite()) fail(ErrorCode::NonFinite, "svd_truncated: non-finite entries");

  TruncatedSVD out;
  if ((z.array() == 0.0).all()) {
    out.rank = 1;
    out.u = Matrix::Zero(z.rows(), 1);
    out.u(0, 0) = 1.0;
    out.s = Vector::Zero(1);
    out.vt = Matrix::Zero(1, z.cols());
    return out;
  }

  // One-sided Jacobi is deterministic and accurate for small singular values.
  Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(
      z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const auto full = static_cast<std::size_t>(s.size());

  // tail[r] = sum_{i >= r} s_i^2, accumulated from the smallest value up.
  std::vector<double> tail(full + 1, 0.0);
  for (std::size_t i = full; i-- > 0;) tail[i] = tail[i + 1] + s[static_cast<Eigen::Index>(i)] * s[static_cast<Eigen::Index>(i)];

  const double delta_sq = delta * delta;
  std::size_t r = full;
  for (std::size_t cand = 1; cand <= full; ++cand) {
    if (tail[cand] <= delta_sq) {
      r = cand;
      break;
    }
  }
  r = std::min(r, rmax);

  const auto rr = static_cast<Eigen::Index>(r);
  out.rank = r;
  out.u = svd.matrixU().leftCols(rr);
  out.s = s.head(rr);
  out.vt = svd.matrixV().leftCols(rr).transpose();
  return out;
}

SymmetricEigen sym_eig_descending(const Matrix& g) {
  if (g.rows() != g.cols()) fail(ErrorCode::DimensionMismatch, "sym_eig_descending: matrix not square");
  if (!g.allFinite()) fail(ErrorCode::NonFinite, "sym_eig_descending: non-finite entries");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    fail(ErrorCode::NotSymmetric, "sym_eig_descending: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  SymmetricEigen out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace ttmmk
