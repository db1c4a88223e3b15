#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ttmmk/cp.hpp"
#include "ttmmk/tensor.hpp"
#include "ttmmk/tt.hpp"

namespace ttmmk {

enum class KernelKind : std::uint8_t {
  TtMmk = 0,      // TT-SVD -> TT-CP expansion -> (equilibration) -> product Gaussian
  TtNaive = 1,    // product Gaussian directly on order-3 TT cores
  CpDusk = 2,     // CP-ALS -> (equilibration) -> product Gaussian
  VectorRbf = 3,  // Gaussian on vectorized tensors
};

std::string_view to_string(KernelKind kind) noexcept;
/// Accepts the CLI spellings ("ttmmk", "tt-naive", "cp-dusk", "vector-rbf").
KernelKind parse_kernel_kind(std::string_view name);

struct KernelConfig {
  KernelKind kind = KernelKind::TtMmk;
  double sigma = 1.0;
  std::size_t rank = 1;
  /// Threshold-mode TT-SVD instead of fixed rank (TT-based kinds only).
  std::optional<double> epsilon;
  bool equilibrate = true;
  bool enforce_uniqueness = true;
  /// K(x,y) / sqrt(K(x,x) K(y,y)); off by default.
  bool normalize = false;
  std::size_t als_sweeps = 100;
  double als_tol = 1e-8;
  std::uint64_t als_seed = 0;

  void validate() const;
};

/// Default configuration for a kind; equilibration is off for the CP-ALS baseline.
KernelConfig make_kernel_config(KernelKind kind, double sigma, std::size_t rank);

/// Per-item representation consumed by the kernels.
using Features = std::variant<DenseTensor, TTDecomposition, CPDecomposition>;

struct GramMatrix {
  Matrix values;
  KernelConfig config;
  std::vector<std::size_t> item_ids;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

double gaussian_rbf(std::span<const double> h, std::span<const double> p, double sigma);

/// sum_{i,j} prod_m k(H^(m)_i, P^(m)_j); ranks of the two inputs may differ.
double dusk_cp_kernel(const CPDecomposition& cx, const CPDecomposition& cy, double sigma);

/// Separable kernel on order-3 TT cores, summed over (r1, t1, r2, t2).
double tt_naive_kernel(const TTDecomposition& tx, const TTDecomposition& ty, double sigma);

double vector_rbf_kernel(const DenseTensor& x, const DenseTensor& y, double sigma);

/// Decomposes one raw tensor into the representation `config.kind` needs.
Features decompose_item(const DenseTensor& x, const KernelConfig& config);

/// Kernel value between two items prepared by `decompose_item` (no normalization).
double kernel_value(const Features& a, const Features& b, const KernelConfig& config);

// Batch kernels. The *_serial variants are the reference implementations;
// the default variants parallelize with OpenMP and produce bitwise-identical
// results independent of thread count.

std::vector<Features> decompose_batch_serial(std::span<const DenseTensor> items,
                                             const KernelConfig& config);
std::vector<Features> decompose_batch(std::span<const DenseTensor> items,
                                      const KernelConfig& config);

GramMatrix assemble_gram_serial(std::span<const Features> items, const KernelConfig& config);
GramMatrix assemble_gram(std::span<const Features> items, const KernelConfig& config);

/// rows.size() x cols.size() matrix of kernel values, e.g. test x train.
Matrix cross_kernel_serial(std::span<const Features> rows, std::span<const Features> cols,
                           const KernelConfig& config);
Matrix cross_kernel(std::span<const Features> rows, std::span<const Features> cols,
                    const KernelConfig& config);

}  // namespace ttmmk
