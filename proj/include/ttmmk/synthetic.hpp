#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ttmmk/svm.hpp"

namespace ttmmk {

/// Two-class generator: each class is a fixed random rank-`rank` CP tensor,
/// and every sample adds fresh Gaussian noise of Frobenius norm
/// `noise * ||signal||_F`.
struct SyntheticSpec {
  std::vector<std::size_t> dims{8, 8, 8};
  std::size_t rank = 2;
  double noise = 0.5;
  std::size_t per_class = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Samples alternate +1, -1, +1, ...; ids are "pos_###" / "neg_###".
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace ttmmk
