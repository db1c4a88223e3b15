#include "ttmmk/svm.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "ttmmk/error.hpp"

namespace ttmmk {

namespace {

constexpr double kTau = 1e-12;

void check_labels(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 1 && y != -1) fail(ErrorCode::InvalidArgument, "labels must be -1 or +1");
  }
}

bool in_up(int y, double a, double c) { return (y == 1 && a < c) || (y == -1 && a > 0.0); }
bool in_low(int y, double a, double c) { return (y == -1 && a < c) || (y == 1 && a > 0.0); }

Matrix submatrix(const Matrix& k, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          k(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
    }
  }
  return out;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void LabeledDataset::validate() const {
  if (labels.size() != items.size()) fail(ErrorCode::DimensionMismatch, "dataset: one label per item required");
  if (!ids.empty() && ids.size() != items.size()) fail(ErrorCode::DimensionMismatch, "dataset: one id per item required");
  check_labels(labels);
  for (const auto& x : items) {
    if (x.dims() != items.front().dims()) fail(ErrorCode::DimensionMismatch, "dataset: items have different shapes");
  }
}

double dual_objective(const Matrix& gram, std::span<const int> labels, const Vector& alpha) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Vector ya(n);
  for (Eigen::Index i = 0; i < n; ++i) ya[i] = labels[static_cast<std::size_t>(i)] * alpha[i];
  return alpha.sum() - 0.5 * ya.dot(gram * ya);
}

SVMModel smo_solve(const Matrix& gram, std::span<const int> labels, double c,
                   const SmoOptions& options) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (gram.rows() != n || gram.cols() != n) fail(ErrorCode::DimensionMismatch, "smo_solve: Gram size must match labels");
  if (n < 1) fail(ErrorCode::InvalidArgument, "smo_solve: empty training set");
  if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::InvalidArgument, "smo_solve: C must be positive");
  if (!(options.tol > 0.0)) fail(ErrorCode::InvalidArgument, "smo_solve: tol must be positive");
  if (!gram.allFinite()) fail(ErrorCode::NonFinite, "smo_solve: non-finite Gram entries");
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, gram.cwiseAbs().maxCoeff())) {
    fail(ErrorCode::NotSymmetric, "smo_solve: Gram matrix is not symmetric");
  }
  check_labels(labels);

  SVMModel model;
  model.labels.assign(labels.begin(), labels.end());
  model.c = c;
  model.alpha = Vector::Zero(n);

  const bool single_class = std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels[0]; });
  if (single_class) {
    model.bias = labels[0];
    model.converged = true;
    return model;
  }

  auto y = [&](Eigen::Index i) { return static_cast<double>(labels[static_cast<std::size_t>(i)]); };
  Vector& alpha = model.alpha;
  Vector grad = Vector::Constant(n, -1.0);  // G = Q alpha - 1, Q_ij = y_i y_j K_ij

  auto objective = [&] { return 0.5 * (alpha.sum() - alpha.dot(grad)); };
  if (options.record_objective) model.objective_history.push_back(objective());

  double m_up = 0.0;
  double m_low = 0.0;
  for (;;) {
    Eigen::Index i = -1;
    Eigen::Index j = -1;
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad[t];
      if (in_up(labels[static_cast<std::size_t>(t)], alpha[t], c) && v > m_up) {
        m_up = v;
        i = t;
      }
      if (in_low(labels[static_cast<std::size_t>(t)], alpha[t], c) && v < m_low) {
        m_low = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || m_up - m_low <= options.tol) {
      model.converged = true;
      break;
    }
    if (model.iterations >= options.max_iter) break;
    ++model.iterations;

    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    const double qij = y(i) * y(j) * gram(i, j);
    if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)]) {
      double quad = gram(i, i) + gram(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = gram(i, i) + gram(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = sum;
        }
        if (alpha[i] < 0.0) {
          alpha[i] = 0.0;
          alpha[j] = sum;
        }
      }
    }

    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (Eigen::Index t = 0; t < n; ++t) {
      grad[t] += y(t) * (y(i) * gram(t, i) * dai + y(j) * gram(t, j) * daj);
    }
    if (options.record_objective) model.objective_history.push_back(objective());
  }

  // b from free vectors; otherwise the midpoint of the feasible interval.
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < c) {
      free_sum += -y(t) * grad[t];
      ++free_count;
    }
  }
  if (free_count > 0) {
    model.bias = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(m_up) && std::isfinite(m_low)) {
    model.bias = 0.5 * (m_up + m_low);
  } else {
    model.bias = std::isfinite(m_up) ? m_up : m_low;
  }

  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) model.support.push_back(static_cast<std::size_t>(t));
  }
  return model;
}

SVMModel smo_solve(const GramMatrix& gram, std::span<const int> labels, double c,
                   const SmoOptions& options) {
  SVMModel model = smo_solve(gram.values, labels, c, options);
  model.config = gram.config;
  return model;
}

double kkt_violation(const Matrix& gram, const SVMModel& model) {
  const auto n = static_cast<Eigen::Index>(model.size());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = model.labels[static_cast<std::size_t>(i)];
    double f = model.bias;
    for (Eigen::Index j = 0; j < n; ++j) f += model.alpha[j] * model.labels[static_cast<std::size_t>(j)] * gram(j, i);
    const double margin = yi * f;
    const double a = model.alpha[i];
    double v = 0.0;
    if (a <= 0.0) v = std::max(0.0, 1.0 - margin);
    else if (a >= model.c) v = std::max(0.0, margin - 1.0);
    else v = std::abs(margin - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

Prediction predict(const SVMModel& model, std::span<const double> kernel_row) {
  if (kernel_row.size() != model.size()) fail(ErrorCode::DimensionMismatch, "predict: kernel row length must equal training size");
  double f = model.bias;
  for (std::size_t i = 0; i < kernel_row.size(); ++i) {
    const double a = model.alpha[static_cast<Eigen::Index>(i)];
    if (a != 0.0) f += a * model.labels[i] * kernel_row[i];
  }
  return {f >= 0.0 ? 1 : -1, f};
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed) {
  check_labels(labels);
  if (k < 2) fail(ErrorCode::InvalidArgument, "cross validation needs k >= 2");
  if (labels.size() < k) fail(ErrorCode::InvalidArgument, "cross validation needs at least k items");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) fail(ErrorCode::MissingClass, "cross validation needs both classes present");

  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t slot = 0;
  for (std::size_t i : pos) folds[slot++ % k].push_back(i);
  for (std::size_t i : neg) folds[slot++ % k].push_back(i);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CrossValidationResult cross_validate_gram(const Matrix& gram, std::span<const int> labels,
                                          double c, std::size_t k, std::uint64_t seed,
                                          const SmoOptions& options) {
  if (gram.rows() != static_cast<Eigen::Index>(labels.size()) || gram.cols() != gram.rows()) {
    fail(ErrorCode::DimensionMismatch, "cross_validate: Gram size must match labels");
  }
  const auto folds = stratified_folds(labels, k, seed);
  CrossValidationResult result;
  std::vector<char> in_test(labels.size());
  for (const auto& test : folds) {
    std::fill(in_test.begin(), in_test.end(), 0);
    for (std::size_t i : test) in_test[i] = 1;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!in_test[i]) train.push_back(i);
    }
    std::vector<int> train_labels;
    for (std::size_t i : train) train_labels.push_back(labels[i]);

    const SVMModel model = smo_solve(submatrix(gram, train, train), train_labels, c, options);
    const Matrix rows = submatrix(gram, test, train);
    std::size_t correct = 0;
    std::vector<double> row(train.size());
    for (std::size_t t = 0; t < test.size(); ++t) {
      for (std::size_t j = 0; j < train.size(); ++j) row[j] = rows(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j));
      if (predict(model, row).label == labels[test[t]]) ++correct;
    }
    result.fold_accuracies.push_back(test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  result.mean_accuracy = mean_of(result.fold_accuracies);
  return result;
}

CrossValidationResult cross_validate(const LabeledDataset& data, const KernelConfig& config,
                                     double c, std::size_t k, std::uint64_t seed,
                                     const SmoOptions& options) {
  data.validate();
  const auto features = decompose_batch(data.items, config);
  const GramMatrix gram = assemble_gram(features, config);
  return cross_validate_gram(gram.values, data.labels, c, k, seed, options);
}

std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat) {
  return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(repeat);
}

std::vector<double> default_power_grid() {
  std::vector<double> g;
  for (int e = -8; e <= 8; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

std::vector<std::size_t> default_rank_grid() {
  std::vector<std::size_t> g(10);
  std::iota(g.begin(), g.end(), std::size_t{1});
  return g;
}

bool better_cell(const GridCell& a, const GridCell& b) {
  if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
  if (a.rank != b.rank) return a.rank < b.rank;
  if (a.c != b.c) return a.c < b.c;
  return a.sigma < b.sigma;
}

GridResult grid_search(const LabeledDataset& data, const GridSpec& spec) {
  data.validate();
  if (spec.ranks.empty() || spec.sigmas.empty() || spec.cs.empty()) {
    fail(ErrorCode::InvalidArgument, "grid_search: grids must be nonempty");
  }
  if (spec.repeats < 1) fail(ErrorCode::InvalidArgument, "grid_search: repeats must be >= 1");

  std::vector<std::size_t> ranks = spec.ranks;
  if (spec.base.kind == KernelKind::VectorRbf) ranks.resize(1);

  // Folds depend only on the repeat, so every cell sees the same splits.
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < spec.repeats; ++r) seeds.push_back(repeat_seed(spec.seed, r));

  GridResult result;
  for (std::size_t rank : ranks) {
    KernelConfig config = spec.base;
    config.rank = rank;
    config.sigma = spec.sigmas.front();
    const auto features = decompose_batch(data.items, config);
    for (double sigma : spec.sigmas) {
      config.sigma = sigma;
      const GramMatrix gram = assemble_gram(features, config);

      const auto jobs = static_cast<std::ptrdiff_t>(spec.cs.size() * spec.repeats);
      std::vector<std::vector<double>> accuracies(static_cast<std::size_t>(jobs));
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t job = 0; job < jobs; ++job) {
        const std::size_t ci = static_cast<std::size_t>(job) / spec.repeats;
        const std::size_t rep = static_cast<std::size_t>(job) % spec.repeats;
        try {
          accuracies[static_cast<std::size_t>(job)] =
              cross_validate_gram(gram.values, data.labels, spec.cs[ci], spec.folds, seeds[rep], spec.smo)
                  .fold_accuracies;
        } catch (...) {
          errors[static_cast<std::size_t>(job)] = std::current_exception();
        }
      }
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }

      for (std::size_t ci = 0; ci < spec.cs.size(); ++ci) {
        std::vector<double> all;
        for (std::size_t rep = 0; rep < spec.repeats; ++rep) {
          const auto& acc = accuracies[ci * spec.repeats + rep];
          all.insert(all.end(), acc.begin(), acc.end());
        }
        GridCell cell;
        cell.rank = rank;
        cell.sigma = sigma;
        cell.c = spec.cs[ci];
        cell.mean_accuracy = mean_of(all);
        double var = 0.0;
        for (double a : all) var += (a - cell.mean_accuracy) * (a - cell.mean_accuracy);
        cell.std_accuracy = all.empty() ? 0.0 : std::sqrt(var / static_cast<double>(all.size()));
        result.table.push_back(cell);
      }
    }
  }
  result.best = result.table.front();
  for (const auto& cell : result.table) {
    if (better_cell(cell, result.best)) result.best = cell;
  }
  return result;
}

std::vector<GridCell> rank_curve(const GridResult& result) {
  std::vector<GridCell> curve;
  for (const auto& cell : result.table) {
    auto it = std::find_if(curve.begin(), curve.end(), [&](const GridCell& c) { return c.rank == cell.rank; });
    if (it == curve.end()) curve.push_back(cell);
    else if (better_cell(cell, *it)) *it = cell;
  }
  std::sort(curve.begin(), curve.end(), [](const GridCell& a, const GridCell& b) { return a.rank < b.rank; });
  return curve;
}

}  // namespace ttmmk
