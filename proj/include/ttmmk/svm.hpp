#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ttmmk/kernel.hpp"
#include "ttmmk/tensor.hpp"

namespace ttmmk {

/// Tensor data points with binary labels in {-1, +1}.
struct LabeledDataset {
  std::vector<DenseTensor> items;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const noexcept { return items.size(); }
  void validate() const;
};

struct SmoOptions {
  double tol = 1e-3;
  std::size_t max_iter = 10'000'000;
  /// Stores the dual objective after every pair update (diagnostics only).
  bool record_objective = false;
};

/// Dual solution of the kernel SVM.
struct SVMModel {
  Vector alpha;
  double bias = 0.0;
  std::vector<int> labels;
  std::vector<std::size_t> support;  // indices with alpha_i > 0
  double c = 1.0;
  KernelConfig config;  // kernel that produced the training Gram matrix
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<double> objective_history;

  std::size_t size() const noexcept { return labels.size(); }
};

/// SMO with maximal-violating-pair working set selection on a precomputed Gram matrix.
SVMModel smo_solve(const Matrix& gram, std::span<const int> labels, double c,
                   const SmoOptions& options = {});
SVMModel smo_solve(const GramMatrix& gram, std::span<const int> labels, double c,
                   const SmoOptions& options = {});

/// max_alpha (sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij)
double dual_objective(const Matrix& gram, std::span<const int> labels, const Vector& alpha);

/// Largest violation of the KKT conditions of `model` on its training Gram matrix.
double kkt_violation(const Matrix& gram, const SVMModel& model);

struct Prediction {
  int label = 1;
  double decision = 0.0;
};

/// f = sum_i alpha_i y_i K(x_i, x) + b; label = sign(f) with sign(0) = +1.
Prediction predict(const SVMModel& model, std::span<const double> kernel_row);

struct CrossValidationResult {
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

/// Stratified fold assignment: each class is shuffled by `seed` and dealt round-robin.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed);

CrossValidationResult cross_validate_gram(const Matrix& gram, std::span<const int> labels,
                                          double c, std::size_t k, std::uint64_t seed,
                                          const SmoOptions& options = {});

/// Decomposes every item once, assembles the Gram matrix and runs k-fold CV.
CrossValidationResult cross_validate(const LabeledDataset& data, const KernelConfig& config,
                                     double c, std::size_t k, std::uint64_t seed,
                                     const SmoOptions& options = {});

/// Seed used for repeat `repeat` of a CV experiment started from `seed`.
std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat);

/// {2^-8, 2^-7, ..., 2^8}
std::vector<double> default_power_grid();
/// {1, 2, ..., 10}
std::vector<std::size_t> default_rank_grid();

struct GridSpec {
  std::vector<std::size_t> ranks = default_rank_grid();
  std::vector<double> sigmas = default_power_grid();
  std::vector<double> cs = default_power_grid();
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t repeats = 5;
  /// Kind and flags of the kernel; sigma and rank are overridden per cell.
  KernelConfig base;
  SmoOptions smo;
};

struct GridCell {
  std::size_t rank = 0;
  double sigma = 0.0;
  double c = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // over all repeats x folds accuracies
};

struct GridResult {
  GridCell best;
  std::vector<GridCell> table;  // rank-major, then sigma, then C
};

/// Exhaustive CV over ranks x sigmas x cs. Ties go to smaller R, then C, then sigma.
/// Vector RBF ignores the rank, so only the first rank is evaluated for it.
GridResult grid_search(const LabeledDataset& data, const GridSpec& spec);

/// True when `a` beats `b` under the grid ordering.
bool better_cell(const GridCell& a, const GridCell& b);

/// Best cell per rank, in rank order.
std::vector<GridCell> rank_curve(const GridResult& result);

}  // namespace ttmmk
