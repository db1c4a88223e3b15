#include "ttmmk/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <string_view>

#include "ttmmk/error.hpp"

namespace ttmmk::io {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kTensorMagic = "TNSB";
constexpr std::string_view kTTMagic = "TNST";
constexpr std::string_view kCPMagic = "TNSC";
constexpr std::string_view kGramMagic = "TNSG";
constexpr std::string_view kModelMagic = "TNSM";

class Writer {
 public:
  explicit Writer(std::string_view magic) {
    bytes_.insert(bytes_.end(), magic.begin(), magic.end());
    u16(kFormatVersion);
  }

  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { little(v, 2); }
  void u32(std::size_t v) {
    if (v > 0xFFFFFFFFu) fail(ErrorCode::LimitExceeded, "value does not fit a u32 field");
    little(v, 4);
  }
  void u64(std::uint64_t v) { little(v, 8); }
  void f64(double v) { little(std::bit_cast<std::uint64_t>(v), 8); }
  void reals(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  void little(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string_view magic) : bytes_(bytes) {
    if (bytes_.size() < magic.size() ||
        !std::equal(magic.begin(), magic.end(), bytes_.begin(),
                    [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
      fail(ErrorCode::BadMagic, "expected " + std::string(magic) + " file magic");
    }
    pos_ = magic.size();
    const auto version = u16();
    if (version != kFormatVersion) {
      fail(ErrorCode::BadVersion, "unsupported format version " + std::to_string(version));
    }
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(little(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(little(2)); }
  std::size_t u32() { return static_cast<std::size_t>(little(4)); }
  std::uint64_t u64() { return little(8); }
  double f64() { return std::bit_cast<double>(little(8)); }

  /// Reads exactly `n` reals that must make up the rest of the file.
  std::vector<double> trailing_reals(std::size_t n) {
    const std::size_t remaining = bytes_.size() - pos_;
    if (remaining % 8 != 0) fail(ErrorCode::Truncated, "payload ends inside a value");
    if (remaining / 8 != n) {
      fail(ErrorCode::PayloadMismatch, "payload holds " + std::to_string(remaining / 8) +
                                           " values, header declares " + std::to_string(n));
    }
    return reals(n);
  }

  std::vector<double> reals(std::size_t n) {
    if ((bytes_.size() - pos_) / 8 < n) fail(ErrorCode::Truncated, "payload shorter than declared");
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
  }

 private:
  std::uint64_t little(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::Truncated, "file ends inside the header");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

void write_dims(Writer& w, const std::vector<std::size_t>& dims) {
  w.u8(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) w.u32(d);
}

std::vector<std::size_t> read_dims(Reader& r) {
  const std::size_t order = r.u8();
  if (order == 0) fail(ErrorCode::PayloadMismatch, "declared tensor order is zero");
  if (order > kMaxOrder) fail(ErrorCode::LimitExceeded, "tensor order " + std::to_string(order) + " exceeds 8");
  std::vector<std::size_t> dims(order);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = r.u32();
    if (d == 0) fail(ErrorCode::PayloadMismatch, "declared dimension is zero");
    count *= d;
    if (count > kMaxElements) fail(ErrorCode::LimitExceeded, "tensor exceeds the element cap");
  }
  return dims;
}

constexpr std::uint8_t kFlagEquilibrate = 1;
constexpr std::uint8_t kFlagUnique = 2;
constexpr std::uint8_t kFlagNormalize = 4;
constexpr std::uint8_t kFlagEpsilon = 8;

void write_config(Writer& w, const KernelConfig& c) {
  w.u8(static_cast<std::uint8_t>(c.kind));
  std::uint8_t flags = 0;
  if (c.equilibrate) flags |= kFlagEquilibrate;
  if (c.enforce_uniqueness) flags |= kFlagUnique;
  if (c.normalize) flags |= kFlagNormalize;
  if (c.epsilon) flags |= kFlagEpsilon;
  w.u8(flags);
  w.f64(c.sigma);
  w.u32(c.rank);
  w.f64(c.epsilon.value_or(0.0));
  w.u32(c.als_sweeps);
  w.f64(c.als_tol);
  w.u64(c.als_seed);
}

KernelConfig read_config(Reader& r) {
  KernelConfig c;
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(KernelKind::VectorRbf)) fail(ErrorCode::Parse, "unknown kernel kind code");
  c.kind = static_cast<KernelKind>(kind);
  const auto flags = r.u8();
  c.equilibrate = (flags & kFlagEquilibrate) != 0;
  c.enforce_uniqueness = (flags & kFlagUnique) != 0;
  c.normalize = (flags & kFlagNormalize) != 0;
  c.sigma = r.f64();
  c.rank = r.u32();
  const double eps = r.f64();
  if (flags & kFlagEpsilon) c.epsilon = eps;
  c.als_sweeps = r.u32();
  c.als_tol = r.f64();
  c.als_seed = r.u64();
  return c;
}

void write_labels(Writer& w, const std::vector<int>& labels) {
  for (int y : labels) w.u8(static_cast<std::uint8_t>(static_cast<std::int8_t>(y)));
}

std::vector<int> read_labels(Reader& r, std::size_t n) {
  std::vector<int> labels(n);
  for (auto& y : labels) {
    y = static_cast<std::int8_t>(r.u8());
    if (y != 1 && y != -1) fail(ErrorCode::Parse, "stored label is not +-1");
  }
  return labels;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const DenseTensor& x) {
  Writer w(kTensorMagic);
  write_dims(w, x.dims());
  w.reals(x.data().data(), x.size());
  return w.bytes();
}

DenseTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes, kTensorMagic);
  auto dims = read_dims(r);
  const std::size_t n = element_count(dims);
  auto data = r.trailing_reals(n);
  return DenseTensor(std::move(dims), std::move(data));
}

void write_tensor(const fs::path& path, const DenseTensor& x) { dump(path, encode_tensor(x)); }

DenseTensor read_tensor(const fs::path& path) { return decode_tensor(slurp(path)); }

void write_tt(const fs::path& path, const TTDecomposition& t) {
  t.validate();
  Writer w(kTTMagic);
  write_dims(w, t.dims());
  for (auto r : t.ranks) w.u32(r);
  for (const auto& core : t.cores) w.reals(core.data().data(), core.size());
  dump(path, w.bytes());
}

TTDecomposition read_tt(const fs::path& path) {
  const auto bytes = slurp(path);
  Reader r(bytes, kTTMagic);
  const auto dims = read_dims(r);
  TTDecomposition t;
  t.ranks.resize(dims.size() + 1);
  for (auto& rank : t.ranks) {
    rank = r.u32();
    if (rank == 0) fail(ErrorCode::PayloadMismatch, "declared TT rank is zero");
  }
  std::size_t total = 0;
  for (std::size_t m = 0; m < dims.size(); ++m) total += t.ranks[m] * dims[m] * t.ranks[m + 1];
  if (total > kMaxElements) fail(ErrorCode::LimitExceeded, "TT exceeds the element cap");
  const auto payload = r.trailing_reals(total);
  std::size_t offset = 0;
  for (std::size_t m = 0; m < dims.size(); ++m) {
    const std::size_t n = t.ranks[m] * dims[m] * t.ranks[m + 1];
    t.cores.emplace_back(std::vector<std::size_t>{t.ranks[m], dims[m], t.ranks[m + 1]},
                         std::vector<double>(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                                             payload.begin() + static_cast<std::ptrdiff_t>(offset + n)));
    offset += n;
  }
  t.validate();
  return t;
}

void write_cp(const fs::path& path, const CPDecomposition& c) {
  c.validate();
  Writer w(kCPMagic);
  write_dims(w, c.dims());
  w.u32(c.rank());
  for (const auto& f : c.factors) w.reals(f.data(), static_cast<std::size_t>(f.size()));
  dump(path, w.bytes());
}

CPDecomposition read_cp(const fs::path& path) {
  const auto bytes = slurp(path);
  Reader r(bytes, kCPMagic);
  const auto dims = read_dims(r);
  const std::size_t rank = r.u32();
  std::size_t total = 0;
  for (auto d : dims) total += d * rank;
  if (total > kMaxElements) fail(ErrorCode::LimitExceeded, "CP exceeds the element cap");
  const auto payload = r.trailing_reals(total);
  CPDecomposition c;
  std::size_t offset = 0;
  for (auto d : dims) {
    c.factors.push_back(Eigen::Map<const Matrix>(payload.data() + offset, static_cast<Eigen::Index>(d),
                                                 static_cast<Eigen::Index>(rank)));
    offset += d * rank;
  }
  return c;
}

void write_gram(const fs::path& path, const GramMatrix& gram, const std::vector<int>& labels) {
  const std::size_t n = gram.size();
  if (labels.size() != n || gram.item_ids.size() != n) {
    fail(ErrorCode::DimensionMismatch, "write_gram: labels and item ids must match the Gram size");
  }
  Writer w(kGramMagic);
  write_config(w, gram.config);
  w.u32(n);
  for (auto id : gram.item_ids) w.u32(id);
  write_labels(w, labels);
  w.reals(gram.values.data(), n * n);
  dump(path, w.bytes());
}

GramFile read_gram(const fs::path& path) {
  const auto bytes = slurp(path);
  Reader r(bytes, kGramMagic);
  GramFile out;
  out.gram.config = read_config(r);
  const std::size_t n = r.u32();
  if (n * n > kMaxElements) fail(ErrorCode::LimitExceeded, "Gram matrix exceeds the element cap");
  out.gram.item_ids.resize(n);
  for (auto& id : out.gram.item_ids) id = r.u32();
  out.labels = read_labels(r, n);
  const auto values = r.trailing_reals(n * n);
  out.gram.values = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(n),
                                             static_cast<Eigen::Index>(n));
  return out;
}

void write_model(const fs::path& path, const SVMModel& model) {
  Writer w(kModelMagic);
  write_config(w, model.config);
  w.f64(model.c);
  w.f64(model.bias);
  w.u8(model.converged ? 1 : 0);
  w.u32(model.size());
  write_labels(w, model.labels);
  w.reals(model.alpha.data(), model.size());
  dump(path, w.bytes());
}

SVMModel read_model(const fs::path& path) {
  const auto bytes = slurp(path);
  Reader r(bytes, kModelMagic);
  SVMModel model;
  model.config = read_config(r);
  model.c = r.f64();
  model.bias = r.f64();
  model.converged = r.u8() != 0;
  const std::size_t n = r.u32();
  if (n > kMaxElements) fail(ErrorCode::LimitExceeded, "model exceeds the element cap");
  model.labels = read_labels(r, n);
  const auto alpha = r.trailing_reals(n);
  model.alpha = Eigen::Map<const Vector>(alpha.data(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] > 0.0) model.support.push_back(i);
  }
  return model;
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  bool have_dims = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (line.front() == '#') {
      std::istringstream header(line.substr(1));
      std::string key;
      header >> key;
      if (key == "dims") {
        std::size_t d = 0;
        while (header >> d) m.dims.push_back(d);
        if (m.dims.empty()) fail(ErrorCode::Parse, where + ": empty dims header");
        if (m.dims.size() > kMaxOrder) fail(ErrorCode::LimitExceeded, where + ": order exceeds 8");
        element_count(m.dims);
        have_dims = true;
      }
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) fail(ErrorCode::Parse, where + ": expected <path>\\t<label>\\t[id]");
    ManifestEntry e;
    e.path = fs::path(fields[0]);
    if (e.path.is_relative()) e.path = base / e.path;
    if (fields[1] == "1" || fields[1] == "+1") e.label = 1;
    else if (fields[1] == "-1") e.label = -1;
    else fail(ErrorCode::Parse, where + ": label must be +1 or -1");
    e.id = fields.size() == 3 ? fields[2] : fields[0];
    m.entries.push_back(std::move(e));
  }
  if (!have_dims) fail(ErrorCode::Parse, path.string() + ": missing '# dims' header");
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write manifest " + path.string());
  out << "# dims";
  for (auto d : manifest.dims) out << ' ' << d;
  out << '\n';
  const fs::path base = path.parent_path();
  for (const auto& e : manifest.entries) {
    fs::path p = e.path;
    if (!base.empty()) {
      const auto rel = p.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    out << p.generic_string() << '\t' << (e.label > 0 ? "+1" : "-1");
    if (!e.id.empty()) out << '\t' << e.id;
    out << '\n';
  }
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

LabeledDataset load_dataset(const DatasetManifest& manifest) {
  LabeledDataset data;
  for (const auto& e : manifest.entries) {
    DenseTensor x = read_tensor(e.path);
    if (x.dims() != manifest.dims) {
      fail(ErrorCode::DimensionMismatch, e.path.string() + ": dims differ from the manifest header");
    }
    data.items.push_back(std::move(x));
    data.labels.push_back(e.label);
    data.ids.push_back(e.id);
  }
  return data;
}

LabeledDataset load_dataset(const fs::path& manifest_path) {
  return load_dataset(read_manifest(manifest_path));
}

fs::path write_dataset(const fs::path& dir, const LabeledDataset& data) {
  data.validate();
  fs::create_directories(dir);
  DatasetManifest m;
  if (!data.items.empty()) m.dims = data.items.front().dims();
  const int width = std::max<int>(3, static_cast<int>(std::to_string(data.size()).size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream name;
    name << "item_" << std::setw(width) << std::setfill('0') << i << ".tnsb";
    const fs::path file = dir / name.str();
    write_tensor(file, data.items[i]);
    m.entries.push_back({file, data.labels[i], data.ids.empty() ? name.str() : data.ids[i]});
  }
  const fs::path manifest = dir / "manifest.tsv";
  write_manifest(manifest, m);
  return manifest;
}

}  // namespace ttmmk::io
