#include "ttmmk/synthetic.hpp"

#include <iomanip>
#include <random>
#include <sstream>

#include "ttmmk/cp.hpp"
#include "ttmmk/error.hpp"

namespace ttmmk {

namespace {

DenseTensor random_cp_tensor(const std::vector<std::size_t>& dims, std::size_t rank,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CPDecomposition c;
  for (auto d : dims) {
    Matrix f(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(rank));
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      for (Eigen::Index i = 0; i < f.rows(); ++i) f(i, j) = normal(rng);
    }
    c.factors.push_back(std::move(f));
  }
  return cp_reconstruct(c);
}

std::string sample_id(const char* prefix, std::size_t i) {
  std::ostringstream s;
  s << prefix << std::setw(3) << std::setfill('0') << i;
  return s.str();
}

}  // namespace

void SyntheticSpec::validate() const {
  if (dims.empty() || dims.size() > kMaxOrder) fail(ErrorCode::InvalidArgument, "synthetic: order must be in 1..8");
  element_count(dims);
  if (rank < 1) fail(ErrorCode::InvalidArgument, "synthetic: rank must be >= 1");
  if (!(noise >= 0.0)) fail(ErrorCode::InvalidArgument, "synthetic: noise must be >= 0");
  if (per_class < 1) fail(ErrorCode::InvalidArgument, "synthetic: need at least one sample per class");
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const DenseTensor positive = random_cp_tensor(spec.dims, spec.rank, rng);
  const DenseTensor negative = random_cp_tensor(spec.dims, spec.rank, rng);

  std::normal_distribution<double> normal;
  auto sample = [&](const DenseTensor& signal) {
    DenseTensor x = signal;
    Vector e(static_cast<Eigen::Index>(x.size()));
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = normal(rng);
    const double e_norm = e.norm();
    const double scale = e_norm > 0.0 ? spec.noise * frobenius_norm(signal) / e_norm : 0.0;
    auto data = x.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += scale * e[static_cast<Eigen::Index>(i)];
    return x;
  };

  LabeledDataset out;
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    out.items.push_back(sample(positive));
    out.labels.push_back(1);
    out.ids.push_back(sample_id("pos_", i));
    out.items.push_back(sample(negative));
    out.labels.push_back(-1);
    out.ids.push_back(sample_id("neg_", i));
  }
  return out;
}

}  // namespace ttmmk
