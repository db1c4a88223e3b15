#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ttmmk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest tensor order accepted anywhere in the library.
inline constexpr std::size_t kMaxOrder = 8;

/**
 * Dense M-way real array.
 *
 * Storage is column-major with the first index fastest, so the mode-1
 * unfolding is a reinterpretation of the flat buffer. Indices passed to
 * `operator()` are zero-based.
 */
class DenseTensor {
 public:
  DenseTensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit DenseTensor(std::vector<std::size_t> dims);
  DenseTensor(std::vector<std::size_t> dims, std::vector<double> data);

  std::size_t order() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double& operator[](std::size_t flat) noexcept { return data_[flat]; }
  double operator[](std::size_t flat) const noexcept { return data_[flat]; }

  double& operator()(std::span<const std::size_t> index);
  double operator()(std::span<const std::size_t> index) const;
  double& operator()(std::initializer_list<std::size_t> index) {
    return (*this)(std::span<const std::size_t>(index.begin(), index.size()));
  }
  double operator()(std::initializer_list<std::size_t> index) const {
    return (*this)(std::span<const std::size_t>(index.begin(), index.size()));
  }

  std::size_t flat_index(std::span<const std::size_t> index) const;

  /// View of the flat buffer as an Eigen column vector (vec(x)).
  Eigen::Map<const Vector> as_vector() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

/// Product of a dimension vector; rejects empty or zero-extent shapes.
std::size_t element_count(std::span<const std::size_t> dims);

/// Mode-`mode` unfolding (zero-based mode), shape I_m x prod_{k != m} I_k.
Matrix matricize(const DenseTensor& x, std::size_t mode);

/// Inverse of `matricize` for a tensor of shape `dims`.
DenseTensor fold(const Matrix& unfolded, std::size_t mode,
                 std::vector<std::size_t> dims);

double inner(const DenseTensor& x, const DenseTensor& y);

double frobenius_norm(const DenseTensor& x);

/// Column-wise Kronecker product; column r is a_r (x) b_r with b's index fastest.
Matrix khatri_rao(const Matrix& a, const Matrix& b);

/// x times_m a: replaces dimension I_m by the row count of `a`.
DenseTensor mode_product(const DenseTensor& x, std::size_t mode,
                         const Matrix& a);

}  // namespace ttmmk
