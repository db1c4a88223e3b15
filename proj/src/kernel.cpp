#include "ttmmk/kernel.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <string>

#include "ttmmk/error.hpp"

namespace ttmmk {

namespace {

// Keeps the exception of the lowest failing loop index so that parallel
// loops report the same error as their serial counterparts.
class FirstError {
 public:
  void record(std::ptrdiff_t index, std::exception_ptr e) {
    std::lock_guard lock(mutex_);
    if (!error_ || index < index_) {
      index_ = index;
      error_ = std::move(e);
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::ptrdiff_t index_ = 0;
  std::exception_ptr error_;
};

double squared_distance(const double* a, const double* b, Eigen::Index n) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::InvalidArgument, "kernel width sigma must be positive and finite");
  }
}

std::vector<std::size_t> features_dims(const Features& f) {
  return std::visit([](const auto& v) { return std::vector<std::size_t>(v.dims()); }, f);
}

std::size_t expected_alternative(KernelKind kind) {
  switch (kind) {
    case KernelKind::VectorRbf: return 0;
    case KernelKind::TtNaive: return 1;
    case KernelKind::TtMmk:
    case KernelKind::CpDusk: return 2;
  }
  return 0;
}

void check_items(std::span<const Features> items, const KernelConfig& config,
                 const std::vector<std::size_t>* dims) {
  const std::size_t alt = expected_alternative(config.kind);
  for (const auto& item : items) {
    if (item.index() != alt) {
      fail(ErrorCode::InvalidArgument, "item representation does not match kernel kind " +
                                           std::string(to_string(config.kind)));
    }
    if (dims != nullptr && features_dims(item) != *dims) {
      fail(ErrorCode::DimensionMismatch, "items have heterogeneous shapes");
    }
  }
}

Vector self_kernels(std::span<const Features> items, const KernelConfig& config) {
  Vector d(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    d[static_cast<Eigen::Index>(i)] = kernel_value(items[i], items[i], config);
  }
  return d;
}

void normalize_in_place(Matrix& k, const Vector& row_diag, const Vector& col_diag) {
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      k(i, j) /= std::sqrt(row_diag[i] * col_diag[j]);
    }
  }
}

GramMatrix gram_shell(std::span<const Features> items, const KernelConfig& config) {
  config.validate();
  GramMatrix g;
  g.config = config;
  g.values.resize(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(items.size()));
  g.item_ids.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) g.item_ids[i] = i;
  if (!items.empty()) {
    const auto dims = features_dims(items.front());
    check_items(items, config, &dims);
  }
  return g;
}

void finish_gram(GramMatrix& g) {
  if (g.config.normalize) {
    const Vector d = g.values.diagonal();
    normalize_in_place(g.values, d, d);
  }
}

void check_cross(std::span<const Features> rows, std::span<const Features> cols,
                 const KernelConfig& config) {
  config.validate();
  if (rows.empty() && cols.empty()) return;
  const auto dims = features_dims(rows.empty() ? cols.front() : rows.front());
  check_items(rows, config, &dims);
  check_items(cols, config, &dims);
}

void finish_cross(Matrix& k, std::span<const Features> rows, std::span<const Features> cols,
                  const KernelConfig& config) {
  if (config.normalize) normalize_in_place(k, self_kernels(rows, config), self_kernels(cols, config));
}

}  // namespace

std::string_view to_string(KernelKind kind) noexcept {
  switch (kind) {
    case KernelKind::TtMmk: return "ttmmk";
    case KernelKind::TtNaive: return "tt-naive";
    case KernelKind::CpDusk: return "cp-dusk";
    case KernelKind::VectorRbf: return "vector-rbf";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
  for (auto kind : {KernelKind::TtMmk, KernelKind::TtNaive, KernelKind::CpDusk, KernelKind::VectorRbf}) {
    if (name == to_string(kind)) return kind;
  }
  if (name == "tt_naive") return KernelKind::TtNaive;
  if (name == "cp_dusk") return KernelKind::CpDusk;
  if (name == "vector_rbf") return KernelKind::VectorRbf;
  fail(ErrorCode::InvalidArgument, "unknown kernel kind '" + std::string(name) + "'");
}

void KernelConfig::validate() const {
  check_sigma(sigma);
  if (kind != KernelKind::VectorRbf && rank < 1 && !epsilon) {
    fail(ErrorCode::InvalidArgument, "kernel rank must be >= 1");
  }
  if (kind == KernelKind::CpDusk && rank < 1) fail(ErrorCode::InvalidArgument, "CP rank must be >= 1");
}

KernelConfig make_kernel_config(KernelKind kind, double sigma, std::size_t rank) {
  KernelConfig c;
  c.kind = kind;
  c.sigma = sigma;
  c.rank = rank;
  c.equilibrate = kind != KernelKind::CpDusk;
  return c;
}

double gaussian_rbf(std::span<const double> h, std::span<const double> p, double sigma) {
  check_sigma(sigma);
  if (h.size() != p.size()) fail(ErrorCode::DimensionMismatch, "gaussian_rbf: length mismatch");
  const double d2 = squared_distance(h.data(), p.data(), static_cast<Eigen::Index>(h.size()));
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

double dusk_cp_kernel(const CPDecomposition& cx, const CPDecomposition& cy, double sigma) {
  check_sigma(sigma);
  cx.validate();
  cy.validate();
  if (cx.dims() != cy.dims()) fail(ErrorCode::DimensionMismatch, "dusk_cp_kernel: mode sizes differ");
  const Eigen::Index rx = static_cast<Eigen::Index>(cx.rank());
  const Eigen::Index ry = static_cast<Eigen::Index>(cy.rank());

  // Accumulated squared distances over modes; the product of per-mode
  // Gaussians is the Gaussian of the summed distances.
  Matrix dist = Matrix::Zero(rx, ry);
  for (std::size_t m = 0; m < cx.order(); ++m) {
    const Matrix& h = cx.factors[m];
    const Matrix& p = cy.factors[m];
    for (Eigen::Index j = 0; j < ry; ++j) {
      for (Eigen::Index i = 0; i < rx; ++i) {
        dist(i, j) += squared_distance(h.col(i).data(), p.col(j).data(), h.rows());
      }
    }
  }
  const double scale = -1.0 / (2.0 * sigma * sigma);
  return (dist.array() * scale).exp().sum();
}

double tt_naive_kernel(const TTDecomposition& tx, const TTDecomposition& ty, double sigma) {
  check_sigma(sigma);
  tx.validate();
  ty.validate();
  if (tx.order() != 3 || ty.order() != 3) {
    fail(ErrorCode::UnsupportedOrder, "tt_naive_kernel is defined for order-3 tensors only");
  }
  if (tx.dims() != ty.dims()) fail(ErrorCode::DimensionMismatch, "tt_naive_kernel: mode sizes differ");
  if (tx.ranks != ty.ranks) fail(ErrorCode::RankMismatch, "tt_naive_kernel: TT ranks differ");

  const std::size_t r1 = tx.ranks[1];
  const std::size_t r2 = tx.ranks[2];
  const auto i1 = static_cast<Eigen::Index>(tx.cores[0].dim(1));
  const std::size_t i2 = tx.cores[1].dim(1);
  const auto i3 = static_cast<Eigen::Index>(tx.cores[2].dim(1));

  // Core 1 is 1 x I1 x R1: column r1 is contiguous.
  Matrix d1(r1, r1);
  for (std::size_t t = 0; t < r1; ++t) {
    for (std::size_t r = 0; r < r1; ++r) {
      d1(r, t) = squared_distance(tx.cores[0].data().data() + r * i1,
                                  ty.cores[0].data().data() + t * i1, i1);
    }
  }
  // Core 3 is R2 x I3 x 1: row r2 is strided by R2.
  Matrix d3 = Matrix::Zero(r2, r2);
  const auto g3x = tx.cores[2].data();
  const auto g3y = ty.cores[2].data();
  for (std::size_t t = 0; t < r2; ++t) {
    for (std::size_t r = 0; r < r2; ++r) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < i3; ++i) {
        const double d = g3x[r + r2 * i] - g3y[t + r2 * i];
        sum += d * d;
      }
      d3(r, t) = sum;
    }
  }
  // Core 2 fibers G2(r1, :, r2) have stride R1.
  const auto g2x = tx.cores[1].data();
  const auto g2y = ty.cores[1].data();
  const double scale = -1.0 / (2.0 * sigma * sigma);
  double total = 0.0;
  for (std::size_t b = 0; b < r2; ++b) {
    for (std::size_t a = 0; a < r1; ++a) {
      for (std::size_t tb = 0; tb < r2; ++tb) {
        for (std::size_t ta = 0; ta < r1; ++ta) {
          double d2 = 0.0;
          for (std::size_t i = 0; i < i2; ++i) {
            const double d = g2x[a + r1 * (i + i2 * b)] - g2y[ta + r1 * (i + i2 * tb)];
            d2 += d * d;
          }
          total += std::exp(scale * (d1(a, ta) + d2 + d3(b, tb)));
        }
      }
    }
  }
  return total;
}

double vector_rbf_kernel(const DenseTensor& x, const DenseTensor& y, double sigma) {
  check_sigma(sigma);
  if (x.dims() != y.dims()) fail(ErrorCode::DimensionMismatch, "vector_rbf_kernel: dimension mismatch");
  return gaussian_rbf(x.data(), y.data(), sigma);
}

Features decompose_item(const DenseTensor& x, const KernelConfig& config) {
  config.validate();
  const auto tt_policy = [&] {
    return config.epsilon ? TTRankPolicy::threshold(*config.epsilon)
                          : TTRankPolicy::fixed_rank(config.rank);
  };
  switch (config.kind) {
    case KernelKind::VectorRbf:
      return x;
    case KernelKind::TtNaive:
      if (x.order() != 3) {
        fail(ErrorCode::UnsupportedOrder, "tt-naive kernel requires order-3 tensors, got order " +
                                              std::to_string(x.order()));
      }
      return tt_svd_unique(x, tt_policy(), config.enforce_uniqueness);
    case KernelKind::TtMmk: {
      CPDecomposition cp = tt_to_cp(tt_svd_unique(x, tt_policy(), config.enforce_uniqueness));
      return config.equilibrate ? equilibrate_norms(cp) : cp;
    }
    case KernelKind::CpDusk: {
      CpAlsOptions opts;
      opts.rank = config.rank;
      opts.max_sweeps = config.als_sweeps;
      opts.tol = config.als_tol;
      opts.seed = config.als_seed;
      CPDecomposition cp = cp_als(x, opts).cp;
      return config.equilibrate ? equilibrate_norms(cp) : cp;
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown kernel kind");
}

double kernel_value(const Features& a, const Features& b, const KernelConfig& config) {
  const std::size_t alt = expected_alternative(config.kind);
  if (a.index() != alt || b.index() != alt) {
    fail(ErrorCode::InvalidArgument, "item representation does not match kernel kind");
  }
  switch (config.kind) {
    case KernelKind::VectorRbf:
      return vector_rbf_kernel(std::get<DenseTensor>(a), std::get<DenseTensor>(b), config.sigma);
    case KernelKind::TtNaive:
      return tt_naive_kernel(std::get<TTDecomposition>(a), std::get<TTDecomposition>(b), config.sigma);
    case KernelKind::TtMmk:
    case KernelKind::CpDusk:
      return dusk_cp_kernel(std::get<CPDecomposition>(a), std::get<CPDecomposition>(b), config.sigma);
  }
  fail(ErrorCode::InvalidArgument, "unknown kernel kind");
}

std::vector<Features> decompose_batch_serial(std::span<const DenseTensor> items,
                                             const KernelConfig& config) {
  std::vector<Features> out;
  out.reserve(items.size());
  for (const auto& x : items) out.push_back(decompose_item(x, config));
  return out;
}

std::vector<Features> decompose_batch(std::span<const DenseTensor> items,
                                      const KernelConfig& config) {
  config.validate();
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  std::vector<std::optional<Features>> slots(items.size());
  FirstError error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      slots[static_cast<std::size_t>(i)] = decompose_item(items[static_cast<std::size_t>(i)], config);
    } catch (...) {
      error.record(i, std::current_exception());
    }
  }
  error.rethrow();
  std::vector<Features> out;
  out.reserve(items.size());
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

GramMatrix assemble_gram_serial(std::span<const Features> items, const KernelConfig& config) {
  GramMatrix g = gram_shell(items, config);
  const auto n = static_cast<Eigen::Index>(items.size());
  for (Eigen::Index u = 0; u < n; ++u) {
    for (Eigen::Index v = u; v < n; ++v) {
      const double k = kernel_value(items[static_cast<std::size_t>(u)],
                                    items[static_cast<std::size_t>(v)], config);
      g.values(u, v) = k;
      g.values(v, u) = k;
    }
  }
  finish_gram(g);
  return g;
}

GramMatrix assemble_gram(std::span<const Features> items, const KernelConfig& config) {
  GramMatrix g = gram_shell(items, config);
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  FirstError error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t u = 0; u < n; ++u) {
    try {
      for (std::ptrdiff_t v = u; v < n; ++v) {
        const double k = kernel_value(items[static_cast<std::size_t>(u)],
                                      items[static_cast<std::size_t>(v)], config);
        g.values(u, v) = k;
        g.values(v, u) = k;
      }
    } catch (...) {
      error.record(u, std::current_exception());
    }
  }
  error.rethrow();
  finish_gram(g);
  return g;
}

Matrix cross_kernel_serial(std::span<const Features> rows, std::span<const Features> cols,
                           const KernelConfig& config) {
  check_cross(rows, cols, config);
  Matrix k(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      k(i, j) = kernel_value(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)], config);
    }
  }
  finish_cross(k, rows, cols, config);
  return k;
}

Matrix cross_kernel(std::span<const Features> rows, std::span<const Features> cols,
                    const KernelConfig& config) {
  check_cross(rows, cols, config);
  const auto nr = static_cast<std::ptrdiff_t>(rows.size());
  const auto nc = static_cast<std::ptrdiff_t>(cols.size());
  Matrix k(nr, nc);
  FirstError error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < nc; ++j) {
    try {
      for (std::ptrdiff_t i = 0; i < nr; ++i) {
        k(i, j) = kernel_value(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)], config);
      }
    } catch (...) {
      error.record(j, std::current_exception());
    }
  }
  error.rethrow();
  finish_cross(k, rows, cols, config);
  return k;
}

}  // namespace ttmmk
