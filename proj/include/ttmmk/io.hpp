#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ttmmk/cp.hpp"
#include "ttmmk/kernel.hpp"
#include "ttmmk/svm.hpp"
#include "ttmmk/tensor.hpp"
#include "ttmmk/tt.hpp"

namespace ttmmk::io {

// Binary files share one layout discipline: 4-byte magic, u16 version,
// then little-endian fields; reals are IEEE-754 binary64.
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kMaxElements = 100'000'000;

std::vector<std::uint8_t> encode_tensor(const DenseTensor& x);
DenseTensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const DenseTensor& x);
DenseTensor read_tensor(const std::filesystem::path& path);

void write_tt(const std::filesystem::path& path, const TTDecomposition& t);
TTDecomposition read_tt(const std::filesystem::path& path);

void write_cp(const std::filesystem::path& path, const CPDecomposition& c);
CPDecomposition read_cp(const std::filesystem::path& path);

/// Gram matrix with the labels of its items, so training can run from the file alone.
struct GramFile {
  GramMatrix gram;
  std::vector<int> labels;
};

void write_gram(const std::filesystem::path& path, const GramMatrix& gram,
                const std::vector<int>& labels);
GramFile read_gram(const std::filesystem::path& path);

void write_model(const std::filesystem::path& path, const SVMModel& model);
SVMModel read_model(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest directory
  int label = 1;
  std::string id;
};

/// Text manifest: a "# dims I1 I2 ..." header, then "<path>\t<label>\t[id]" lines.
struct DatasetManifest {
  std::vector<std::size_t> dims;
  std::vector<ManifestEntry> entries;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
/// Entry paths are written relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Reads every tensor of a manifest and checks it against the declared dims.
LabeledDataset load_dataset(const DatasetManifest& manifest);
LabeledDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes one tensor file per item plus `manifest.tsv` into `dir`.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const LabeledDataset& data);

}  // namespace ttmmk::io
