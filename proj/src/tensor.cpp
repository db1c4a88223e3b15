#include "ttmmk/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ttmmk/error.hpp"

namespace ttmmk {

namespace {

// A tensor seen as left x I_m x right; the mode-m unfolding column is a + left*b.
struct ModeSplit {
  std::size_t left = 1;
  std::size_t extent = 1;
  std::size_t right = 1;
};

ModeSplit split_at(std::span<const std::size_t> dims, std::size_t mode) {
  ModeSplit s;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k < mode) s.left *= dims[k];
    else if (k > mode) s.right *= dims[k];
  }
  s.extent = dims[mode];
  return s;
}

void check_mode(std::size_t order, std::size_t mode) {
  if (mode >= order) {
    fail(ErrorCode::ModeOutOfRange, "mode " + std::to_string(mode + 1) +
                                        " out of range for order " +
                                        std::to_string(order));
  }
}

}  // namespace

std::size_t element_count(std::span<const std::size_t> dims) {
  if (dims.empty()) fail(ErrorCode::InvalidArgument, "tensor order must be >= 1");
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) fail(ErrorCode::InvalidArgument, "tensor dimensions must be >= 1");
    n *= d;
  }
  return n;
}

DenseTensor::DenseTensor(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), data_(element_count(dims_), 0.0) {}

DenseTensor::DenseTensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (element_count(dims_) != data_.size()) {
    fail(ErrorCode::PayloadMismatch,
         "tensor data length " + std::to_string(data_.size()) +
             " does not match the product of its dimensions");
  }
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) {
    fail(ErrorCode::DimensionMismatch, "index arity does not match tensor order");
  }
  std::size_t flat = 0;
  std::size_t stride = 1;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (index[k] >= dims_[k]) fail(ErrorCode::InvalidArgument, "tensor index out of range");
    flat += index[k] * stride;
    stride *= dims_[k];
  }
  return flat;
}

double& DenseTensor::operator()(std::span<const std::size_t> index) {
  return data_[flat_index(index)];
}

double DenseTensor::operator()(std::span<const std::size_t> index) const {
  return data_[flat_index(index)];
}

Matrix matricize(const DenseTensor& x, std::size_t mode) {
  check_mode(x.order(), mode);
  const ModeSplit s = split_at(x.dims(), mode);
  Matrix out(static_cast<Eigen::Index>(s.extent),
             static_cast<Eigen::Index>(s.left * s.right));
  const auto data = x.data();
  for (std::size_t b = 0; b < s.right; ++b) {
    for (std::size_t i = 0; i < s.extent; ++i) {
      const std::size_t base = s.left * (i + s.extent * b);
      for (std::size_t a = 0; a < s.left; ++a) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a + s.left * b)) =
            data[base + a];
      }
    }
  }
  return out;
}

DenseTensor fold(const Matrix& unfolded, std::size_t mode,
                 std::vector<std::size_t> dims) {
  check_mode(dims.size(), mode);
  const ModeSplit s = split_at(dims, mode);
  if (static_cast<std::size_t>(unfolded.rows()) != s.extent ||
      static_cast<std::size_t>(unfolded.cols()) != s.left * s.right) {
    fail(ErrorCode::DimensionMismatch, "unfolding shape does not match target dimensions");
  }
  DenseTensor out(std::move(dims));
  auto data = out.data();
  for (std::size_t b = 0; b < s.right; ++b) {
    for (std::size_t i = 0; i < s.extent; ++i) {
      const std::size_t base = s.left * (i + s.extent * b);
      for (std::size_t a = 0; a < s.left; ++a) {
        data[base + a] = unfolded(static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(a + s.left * b));
      }
    }
  }
  return out;
}

double inner(const DenseTensor& x, const DenseTensor& y) {
  if (x.dims() != y.dims()) fail(ErrorCode::DimensionMismatch, "inner: dimension mismatch");
  return x.as_vector().dot(y.as_vector());
}

double frobenius_norm(const DenseTensor& x) {
  return std::sqrt(inner(x, x));
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::DimensionMismatch, "khatri_rao: column counts differ");
  }
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.cols(); ++r) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.col(r).segment(i * b.rows(), b.rows()) = a(i, r) * b.col(r);
    }
  }
  return out;
}

DenseTensor mode_product(const DenseTensor& x, std::size_t mode, const Matrix& a) {
  check_mode(x.order(), mode);
  if (static_cast<std::size_t>(a.cols()) != x.dim(mode)) {
    fail(ErrorCode::DimensionMismatch, "mode_product: matrix columns must equal I_m");
  }
  std::vector<std::size_t> dims = x.dims();
  dims[mode] = static_cast<std::size_t>(a.rows());
  if (a.rows() == 0) fail(ErrorCode::InvalidArgument, "mode_product: empty matrix");
  return fold(a * matricize(x, mode), mode, std::move(dims));
}

}  // namespace ttmmk
