// Serial vs OpenMP timings for decomposition and Gram assembly, plus a kernel ablation table.
#include <chrono>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "ttmmk/kernel.hpp"
#include "ttmmk/parallel.hpp"
#include "ttmmk/svm.hpp"
#include "ttmmk/synthetic.hpp"

using namespace ttmmk;

namespace {

template <class Fn>
double seconds(Fn&& fn, int reps = 3) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void timings(const LabeledDataset& data) {
  fmt::print("{:<10} {:>4} {:>12} {:>12} {:>12} {:>12}\n", "kind", "R", "dec serial", "dec omp", "gram serial",
             "gram omp");
  for (auto kind : {KernelKind::TtMmk, KernelKind::TtNaive, KernelKind::CpDusk, KernelKind::VectorRbf}) {
    for (std::size_t r : {2, 4, 6}) {
      if (kind == KernelKind::VectorRbf && r != 2) continue;
      const auto cfg = make_kernel_config(kind, 2.0, r);
      std::vector<Features> feats;
      const double ds = seconds([&] { feats = decompose_batch_serial(data.items, cfg); }, 1);
      const double dp = seconds([&] { feats = decompose_batch(data.items, cfg); }, 1);
      const double gs = seconds([&] { (void)assemble_gram_serial(feats, cfg); });
      const double gp = seconds([&] { (void)assemble_gram(feats, cfg); });
      fmt::print("{:<10} {:>4} {:>11.4f}s {:>11.4f}s {:>11.4f}s {:>11.4f}s\n", to_string(kind), r, ds, dp, gs, gp);
    }
  }
}

void ablation(const LabeledDataset& data) {
  std::vector<std::pair<std::string, KernelConfig>> rows;
  auto tt = make_kernel_config(KernelKind::TtMmk, 1.0, 2);
  rows.emplace_back("ttmmk", tt);
  auto no_eq = tt;
  no_eq.equilibrate = false;
  rows.emplace_back("ttmmk -equilibrate", no_eq);
  auto no_unique = tt;
  no_unique.enforce_uniqueness = false;
  rows.emplace_back("ttmmk -unique", no_unique);
  rows.emplace_back("tt-naive", make_kernel_config(KernelKind::TtNaive, 1.0, 2));
  rows.emplace_back("cp-dusk", make_kernel_config(KernelKind::CpDusk, 1.0, 2));
  rows.emplace_back("vector-rbf", make_kernel_config(KernelKind::VectorRbf, 1.0, 1));

  fmt::print("\n{:<20} {:>6} {:>9} {:>9} {:>10} {:>9} {:>9}\n", "kernel", "R", "sigma", "C", "mean acc", "std",
             "time");
  for (const auto& [name, cfg] : rows) {
    GridSpec g;
    g.ranks = {cfg.rank};
    g.base = cfg;
    GridResult res;
    const double t = seconds([&] { res = grid_search(data, g); }, 1);
    fmt::print("{:<20} {:>6} {:>9g} {:>9g} {:>10.4f} {:>9.4f} {:>8.1f}s\n", name, res.best.rank, res.best.sigma,
               res.best.c, res.best.mean_accuracy, res.best.std_accuracy, t);
  }
}

}  // namespace

int main(int argc, char** argv) {
  bool skip_ablation = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--timings-only") == 0) skip_ablation = true;
  configure_threads_from_env();

  const auto data = generate_synthetic(SyntheticSpec{});
  fmt::print("dataset: {} items of 8x8x8, rank 2, noise 0.5; {} worker threads\n\n", data.size(), max_threads());
  timings(data);
  if (!skip_ablation) ablation(data);
  return 0;
}
