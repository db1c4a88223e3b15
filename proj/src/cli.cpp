#include "ttmmk/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ttmmk/error.hpp"
#include "ttmmk/io.hpp"
#include "ttmmk/kernel.hpp"
#include "ttmmk/parallel.hpp"
#include "ttmmk/svm.hpp"
#include "ttmmk/synthetic.hpp"

namespace ttmmk {

namespace fs = std::filesystem;

std::string format_percent(double fraction) {
  const double pct = 100.0 * fraction;
  const int int_digits = std::abs(pct) < 1.0 ? 1 : static_cast<int>(std::floor(std::log10(std::abs(pct)))) + 1;
  const int decimals = std::max(0, 4 - int_digits);
  return fmt::format("{:.{}f}", pct, decimals);
}

namespace {

// Kernel options shared by several subcommands.
struct KernelArgs {
  std::string kind = "ttmmk";
  double sigma = 1.0;
  std::size_t rank = 2;
  std::optional<double> eps;
  bool no_equilibrate = false;
  bool equilibrate = false;
  bool no_unique = false;
  bool normalize = false;
  std::size_t als_sweeps = 100;
  std::uint64_t als_seed = 0;

  void add_to(CLI::App& app, bool with_sigma) {
    app.add_option("--kind", kind, "ttmmk | tt-naive | cp-dusk | vector-rbf")->capture_default_str();
    if (with_sigma) app.add_option("--sigma", sigma, "Gaussian width")->capture_default_str();
    auto* r = app.add_option("--rank", rank, "uniform TT rank (CP rank for cp-dusk)")->capture_default_str();
    app.add_option("--eps", eps, "relative TT-SVD threshold instead of a fixed rank")->excludes(r);
    app.add_flag("--no-equilibrate", no_equilibrate, "skip CP norm equilibration");
    app.add_flag("--equilibrate", equilibrate, "equilibrate the CP-ALS baseline factors");
    app.add_flag("--no-unique", no_unique, "keep raw SVD signs");
    app.add_flag("--normalize", normalize, "normalize K(x,y) by sqrt(K(x,x)K(y,y))");
    app.add_option("--als-sweeps", als_sweeps, "CP-ALS sweep cap")->capture_default_str();
    app.add_option("--als-seed", als_seed, "CP-ALS initialization seed")->capture_default_str();
  }

  KernelConfig config() const {
    KernelConfig c = make_kernel_config(parse_kernel_kind(kind), sigma, rank);
    c.epsilon = eps;
    if (no_equilibrate) c.equilibrate = false;
    if (equilibrate) c.equilibrate = true;
    c.enforce_uniqueness = !no_unique;
    c.normalize = normalize;
    c.als_sweeps = als_sweeps;
    c.als_seed = als_seed;
    return c;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

// ---- decomposition index (decomp.tsv) ----

struct DecompIndex {
  std::vector<std::size_t> dims;
  std::string method;  // "tt" or "als"
  KernelConfig config;
  struct Entry {
    std::string id;
    int label = 1;
    std::string tt;  // "-" when absent
    std::string cp;
  };
  std::vector<Entry> entries;
};

void write_decomp_index(const fs::path& path, const DecompIndex& index) {
  auto out = open_out(path);
  out << "# dims";
  for (auto d : index.dims) out << ' ' << d;
  out << "\n# method " << index.method << '\n';
  if (index.config.epsilon) out << fmt::format("# eps {:.17g}\n", *index.config.epsilon);
  else out << "# rank " << index.config.rank << '\n';
  out << "# equilibrate " << index.config.equilibrate << '\n';
  out << "# unique " << index.config.enforce_uniqueness << '\n';
  out << "# als_sweeps " << index.config.als_sweeps << '\n';
  out << fmt::format("# als_tol {:.17g}\n", index.config.als_tol);
  out << "# als_seed " << index.config.als_seed << '\n';
  for (const auto& e : index.entries) {
    out << e.id << '\t' << (e.label > 0 ? "+1" : "-1") << '\t' << e.tt << '\t' << e.cp << '\n';
  }
}

DecompIndex read_decomp_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  DecompIndex index;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream h(line.substr(1));
      std::string key;
      h >> key;
      if (key == "dims") {
        std::size_t d = 0;
        while (h >> d) index.dims.push_back(d);
      } else if (key == "method") {
        h >> index.method;
      } else if (key == "eps") {
        double e = 0.0;
        h >> e;
        index.config.epsilon = e;
      } else if (key == "rank") {
        h >> index.config.rank;
      } else if (key == "equilibrate") {
        h >> index.config.equilibrate;
      } else if (key == "unique") {
        h >> index.config.enforce_uniqueness;
      } else if (key == "als_sweeps") {
        h >> index.config.als_sweeps;
      } else if (key == "als_tol") {
        h >> index.config.als_tol;
      } else if (key == "als_seed") {
        h >> index.config.als_seed;
      }
      continue;
    }
    std::istringstream row(line);
    DecompIndex::Entry e;
    std::string label;
    if (!std::getline(row, e.id, '\t') || !std::getline(row, label, '\t') ||
        !std::getline(row, e.tt, '\t') || !std::getline(row, e.cp)) {
      fail(ErrorCode::Parse, path.string() + ": malformed decomposition row");
    }
    e.label = label == "-1" ? -1 : 1;
    index.entries.push_back(std::move(e));
  }
  if (index.method != "tt" && index.method != "als") fail(ErrorCode::Parse, path.string() + ": unknown method");
  return index;
}

// ---- subcommands ----

int cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir, std::ostream& out) {
  const auto data = generate_synthetic(spec);
  const auto manifest = io::write_dataset(out_dir, data);
  fmt::print(out, "wrote {} tensors, manifest {}\n", data.size(), manifest.string());
  return 0;
}

int cmd_decompose(const fs::path& manifest_path, const fs::path& out_dir, const std::string& method,
                  KernelArgs kargs, std::ostream& out) {
  if (method != "tt" && method != "als") fail(ErrorCode::InvalidArgument, "--method must be tt or als");
  kargs.kind = method == "tt" ? "ttmmk" : "cp-dusk";
  const KernelConfig config = kargs.config();
  const auto manifest = io::read_manifest(manifest_path);
  const auto data = io::load_dataset(manifest);
  fs::create_directories(out_dir);

  DecompIndex index;
  index.dims = manifest.dims;
  index.method = method;
  index.config = config;
  const auto n = static_cast<std::ptrdiff_t>(data.size());
  index.entries.resize(data.size());
  std::vector<std::exception_ptr> errors(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      auto& e = index.entries[k];
      e.id = data.ids[k];
      e.label = data.labels[k];
      const std::string stem = fmt::format("item_{:04d}", k);
      if (method == "tt") {
        const auto policy = config.epsilon ? TTRankPolicy::threshold(*config.epsilon)
                                           : TTRankPolicy::fixed_rank(config.rank);
        const TTDecomposition tt = tt_svd_unique(data.items[k], policy, config.enforce_uniqueness);
        CPDecomposition cp = tt_to_cp(tt);
        if (config.equilibrate) cp = equilibrate_norms(cp);
        e.tt = stem + ".tnst";
        e.cp = stem + ".tnsc";
        io::write_tt(out_dir / e.tt, tt);
        io::write_cp(out_dir / e.cp, cp);
      } else {
        const auto cp = std::get<CPDecomposition>(decompose_item(data.items[k], config));
        e.tt = "-";
        e.cp = stem + ".tnsc";
        io::write_cp(out_dir / e.cp, cp);
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  write_decomp_index(out_dir / "decomp.tsv", index);
  fmt::print(out, "decomposed {} tensors into {}\n", data.size(), (out_dir / "decomp.tsv").string());
  return 0;
}

struct LoadedFeatures {
  std::vector<Features> items;
  std::vector<int> labels;
  KernelConfig config;
};

LoadedFeatures features_from_decomp(const fs::path& index_path, const KernelArgs& kargs) {
  const auto index = read_decomp_index(index_path);
  const fs::path base = index_path.parent_path();
  LoadedFeatures f;
  f.config = index.config;
  f.config.kind = parse_kernel_kind(kargs.kind);
  f.config.sigma = kargs.sigma;
  f.config.normalize = kargs.normalize;
  const bool need_tt = f.config.kind == KernelKind::TtNaive;
  if (f.config.kind == KernelKind::VectorRbf) {
    fail(ErrorCode::InvalidArgument, "vector-rbf works on raw tensors; pass --manifest");
  }
  if ((f.config.kind == KernelKind::CpDusk) != (index.method == "als")) {
    fail(ErrorCode::InvalidArgument, "kernel kind " + kargs.kind + " does not match decomposition method " + index.method);
  }
  if (need_tt && index.dims.size() != 3) {
    fail(ErrorCode::UnsupportedOrder, "tt-naive kernel requires order-3 tensors, got order " +
                                          std::to_string(index.dims.size()));
  }
  for (const auto& e : index.entries) {
    if (need_tt) f.items.emplace_back(io::read_tt(base / e.tt));
    else f.items.emplace_back(io::read_cp(base / e.cp));
    f.labels.push_back(e.label);
  }
  return f;
}

LoadedFeatures features_from_manifest(const fs::path& manifest, const KernelConfig& config) {
  const auto data = io::load_dataset(manifest);
  return {decompose_batch(data.items, config), data.labels, config};
}

int cmd_kernel(const std::string& decomp, const std::string& manifest, const KernelArgs& kargs,
               const fs::path& out_path, std::ostream& out) {
  if (decomp.empty() == manifest.empty()) fail(ErrorCode::InvalidArgument, "pass exactly one of --decomp or --manifest");
  const LoadedFeatures f = decomp.empty() ? features_from_manifest(manifest, kargs.config())
                                          : features_from_decomp(decomp, kargs);
  const GramMatrix gram = assemble_gram(f.items, f.config);
  io::write_gram(out_path, gram, f.labels);
  fmt::print(out, "wrote {}x{} {} Gram matrix to {}\n", gram.size(), gram.size(),
             to_string(f.config.kind), out_path.string());
  return 0;
}

int cmd_train(const std::string& gram_path, const std::string& manifest, const KernelArgs& kargs,
              double c, const SmoOptions& smo, const fs::path& out_path, std::ostream& out) {
  if (gram_path.empty() == manifest.empty()) fail(ErrorCode::InvalidArgument, "pass exactly one of --gram or --manifest");
  io::GramFile g;
  if (!gram_path.empty()) {
    g = io::read_gram(gram_path);
  } else {
    const auto f = features_from_manifest(manifest, kargs.config());
    g.gram = assemble_gram(f.items, f.config);
    g.labels = f.labels;
  }
  const SVMModel model = smo_solve(g.gram, g.labels, c, smo);
  io::write_model(out_path, model);
  fmt::print(out, "trained on {} items: {} support vectors, bias {:.6g}, {}\n", model.size(),
             model.support.size(), model.bias, model.converged ? "converged" : "iteration cap reached");
  return 0;
}

int cmd_predict(const fs::path& model_path, const fs::path& train_manifest, const fs::path& test_manifest,
                const fs::path& out_path, std::ostream& out) {
  const SVMModel model = io::read_model(model_path);
  const auto train = io::load_dataset(train_manifest);
  if (train.size() != model.size()) fail(ErrorCode::DimensionMismatch, "training manifest size differs from the model");
  const auto test = io::load_dataset(test_manifest);
  const auto train_f = decompose_batch(train.items, model.config);
  const auto test_f = decompose_batch(test.items, model.config);
  const Matrix rows = cross_kernel(test_f, train_f, model.config);

  auto csv = open_out(out_path);
  csv << "id,label,decision,true_label\n";
  std::size_t correct = 0;
  std::vector<double> row(train.size());
  for (std::size_t t = 0; t < test.size(); ++t) {
    for (std::size_t j = 0; j < train.size(); ++j) row[j] = rows(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j));
    const Prediction p = predict(model, row);
    if (p.label == test.labels[t]) ++correct;
    fmt::print(csv, "{},{},{:.17g},{}\n", test.ids[t], p.label, p.decision, test.labels[t]);
  }
  fmt::print(out, "predicted {} items, accuracy {}%\n", test.size(),
             format_percent(test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0));
  return 0;
}

int cmd_cv(const fs::path& manifest, const KernelArgs& kargs, double c, std::size_t k, std::uint64_t seed,
           std::size_t repeats, const SmoOptions& smo, const std::string& csv_path, std::ostream& out) {
  if (repeats < 1) fail(ErrorCode::InvalidArgument, "--repeats must be >= 1");
  const auto data = io::load_dataset(manifest);
  const KernelConfig config = kargs.config();
  const auto features = decompose_batch(data.items, config);
  const GramMatrix gram = assemble_gram(features, config);

  std::optional<std::ofstream> csv;
  if (!csv_path.empty()) {
    csv = open_out(csv_path);
    *csv << "repeat,fold,accuracy\n";
  }
  std::vector<double> all;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto res = cross_validate_gram(gram.values, data.labels, c, k, repeat_seed(seed, r), smo);
    for (std::size_t f = 0; f < res.fold_accuracies.size(); ++f) {
      fmt::print(out, "repeat {} fold {}: {}%\n", r + 1, f + 1, format_percent(res.fold_accuracies[f]));
      if (csv) fmt::print(*csv, "{},{},{:.17g}\n", r + 1, f + 1, res.fold_accuracies[f]);
    }
    all.insert(all.end(), res.fold_accuracies.begin(), res.fold_accuracies.end());
  }
  double mean = 0.0;
  for (double a : all) mean += a;
  mean /= static_cast<double>(all.size());
  fmt::print(out, "mean accuracy: {}%\n", format_percent(mean));
  return 0;
}

struct GridArgs {
  std::vector<std::size_t> ranks = default_rank_grid();
  std::vector<double> sigmas = default_power_grid();
  std::vector<double> cs = default_power_grid();
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::size_t repeats = 5;
  std::string table = "grid.csv";
  std::string curve = "rank_curve.csv";
};

int cmd_grid(const fs::path& manifest, const KernelArgs& kargs, const GridArgs& g, const SmoOptions& smo,
             std::ostream& out) {
  const auto data = io::load_dataset(manifest);
  GridSpec spec;
  spec.ranks = g.ranks;
  spec.sigmas = g.sigmas;
  spec.cs = g.cs;
  spec.folds = g.k;
  spec.seed = g.seed;
  spec.repeats = g.repeats;
  spec.base = kargs.config();
  spec.smo = smo;
  const GridResult result = grid_search(data, spec);

  auto table = open_out(g.table);
  table << "rank,sigma,C,mean_accuracy,std_accuracy\n";
  for (const auto& cell : result.table) {
    fmt::print(table, "{},{:.17g},{:.17g},{:.17g},{:.17g}\n", cell.rank, cell.sigma, cell.c,
               cell.mean_accuracy, cell.std_accuracy);
  }
  auto curve = open_out(g.curve);
  curve << "rank,sigma,C,mean_accuracy,std_accuracy\n";
  for (const auto& cell : rank_curve(result)) {
    fmt::print(curve, "{},{:.17g},{:.17g},{:.17g},{:.17g}\n", cell.rank, cell.sigma, cell.c,
               cell.mean_accuracy, cell.std_accuracy);
  }
  fmt::print(out, "evaluated {} cells\n", result.table.size());
  fmt::print(out, "best: rank {} sigma {:g} C {:g} mean accuracy {}%\n", result.best.rank, result.best.sigma,
             result.best.c, format_percent(result.best.mean_accuracy));
  return 0;
}

void add_smo_options(CLI::App& app, SmoOptions& smo) {
  app.add_option("--tol", smo.tol, "SMO KKT tolerance")->capture_default_str();
  app.add_option("--max-iter", smo.max_iter, "SMO pair-update cap")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TT-MMK tensor classification pipeline", "ttmmk"};
  app.require_subcommand(1);

  // synth
  SyntheticSpec synth;
  std::string synth_out;
  auto* s = app.add_subcommand("synth", "generate a two-class synthetic tensor dataset");
  s->add_option("--dims", synth.dims, "mode sizes, e.g. 8,8,8")->delimiter(',')->capture_default_str();
  s->add_option("--rank", synth.rank, "latent CP rank per class")->capture_default_str();
  s->add_option("--noise", synth.noise, "relative Frobenius noise level")->capture_default_str();
  s->add_option("--per-class", synth.per_class, "samples per class")->capture_default_str();
  s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  s->add_option("--out", synth_out, "output directory")->required();

  // decompose
  std::string dec_manifest, dec_out, dec_method = "tt";
  KernelArgs dec_k;
  auto* d = app.add_subcommand("decompose", "compute per-item TT and CP decompositions");
  d->add_option("--manifest", dec_manifest, "dataset manifest")->required();
  d->add_option("--out", dec_out, "output directory")->required();
  d->add_option("--method", dec_method, "tt (TT-SVD + TT-CP) or als (CP-ALS)")->capture_default_str();
  dec_k.add_to(*d, false);
  d->remove_option(d->get_option("--kind"));

  // kernel
  std::string ker_decomp, ker_manifest, ker_out;
  KernelArgs ker_k;
  auto* k = app.add_subcommand("kernel", "assemble a Gram matrix");
  k->add_option("--decomp", ker_decomp, "decomp.tsv written by 'decompose'");
  k->add_option("--manifest", ker_manifest, "dataset manifest (decomposes in memory)");
  k->add_option("--out", ker_out, "Gram matrix file")->required();
  ker_k.add_to(*k, true);

  // train
  std::string tr_gram, tr_manifest, tr_out;
  double tr_c = 1.0;
  KernelArgs tr_k;
  SmoOptions tr_smo;
  auto* t = app.add_subcommand("train", "train the SVM dual with SMO");
  t->add_option("--gram", tr_gram, "Gram matrix file");
  t->add_option("--manifest", tr_manifest, "dataset manifest (kernel computed in memory)");
  t->add_option("--C", tr_c, "box constraint")->capture_default_str();
  t->add_option("--out", tr_out, "model file")->required();
  tr_k.add_to(*t, true);
  add_smo_options(*t, tr_smo);

  // predict
  std::string pr_model, pr_train, pr_test, pr_out;
  auto* p = app.add_subcommand("predict", "label tensors with a trained model");
  p->add_option("--model", pr_model, "model file")->required();
  p->add_option("--train", pr_train, "manifest of the training items, in training order")->required();
  p->add_option("--test", pr_test, "manifest of the items to label")->required();
  p->add_option("--out", pr_out, "output CSV")->required();

  // cv
  std::string cv_manifest, cv_csv;
  double cv_c = 1.0;
  std::size_t cv_k = 5, cv_repeats = 5;
  std::uint64_t cv_seed = 0;
  KernelArgs cv_kargs;
  SmoOptions cv_smo;
  auto* cv = app.add_subcommand("cv", "stratified k-fold cross validation");
  cv->add_option("--manifest", cv_manifest, "dataset manifest")->required();
  cv->add_option("--C", cv_c, "box constraint")->capture_default_str();
  cv->add_option("--k", cv_k, "fold count")->capture_default_str();
  cv->add_option("--seed", cv_seed, "fold shuffling seed")->capture_default_str();
  cv->add_option("--repeats", cv_repeats, "repetitions with reshuffled folds")->capture_default_str();
  cv->add_option("--csv", cv_csv, "per-fold accuracy CSV");
  cv_kargs.add_to(*cv, true);
  add_smo_options(*cv, cv_smo);

  // grid
  std::string gr_manifest;
  GridArgs gr;
  KernelArgs gr_k;
  SmoOptions gr_smo;
  auto* g = app.add_subcommand("grid", "exhaustive (R, sigma, C) search with cross validation");
  g->add_option("--manifest", gr_manifest, "dataset manifest")->required();
  g->add_option("--ranks", gr.ranks, "TT ranks")->delimiter(',');
  g->add_option("--sigmas", gr.sigmas, "Gaussian widths")->delimiter(',');
  g->add_option("--cs", gr.cs, "box constraints")->delimiter(',');
  g->add_option("--k", gr.k, "fold count")->capture_default_str();
  g->add_option("--seed", gr.seed, "fold shuffling seed")->capture_default_str();
  g->add_option("--repeats", gr.repeats, "repetitions with reshuffled folds")->capture_default_str();
  g->add_option("--out", gr.table, "full accuracy table CSV")->capture_default_str();
  g->add_option("--rank-curve", gr.curve, "best accuracy per rank CSV")->capture_default_str();
  gr_k.add_to(*g, false);
  add_smo_options(*g, gr_smo);

  std::vector<const char*> argv{"ttmmk"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "error: code=usage message={}\n", e.what());
    return 64;
  }

  try {
    configure_threads_from_env();
    if (s->parsed()) return cmd_synth(synth, synth_out, out);
    if (d->parsed()) return cmd_decompose(dec_manifest, dec_out, dec_method, dec_k, out);
    if (k->parsed()) return cmd_kernel(ker_decomp, ker_manifest, ker_k, ker_out, out);
    if (t->parsed()) return cmd_train(tr_gram, tr_manifest, tr_k, tr_c, tr_smo, tr_out, out);
    if (p->parsed()) return cmd_predict(pr_model, pr_train, pr_test, pr_out, out);
    if (cv->parsed()) return cmd_cv(cv_manifest, cv_kargs, cv_c, cv_k, cv_seed, cv_repeats, cv_smo, cv_csv, out);
    if (g->parsed()) return cmd_grid(gr_manifest, gr_k, gr, gr_smo, out);
  } catch (const Error& e) {
    fmt::print(err, "error: code={} message={}\n", to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(err, "error: code=internal message={}\n", e.what());
    return 3;
  }
  return 0;
}

}  // namespace ttmmk
