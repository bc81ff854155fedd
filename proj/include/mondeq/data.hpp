#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mondeq/linalg.hpp"

namespace mondeq {

inline constexpr std::uint32_t kIdxImagesMagic = 2051;  // 0x00000803
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;  // 0x00000801

// Samples are stored column-wise: inputs.col(i) is sample i.
struct Dataset {
  DenseMatrix inputs;       // d x N, entries in [0, 1]
  std::vector<int> labels;  // N
  int num_classes = 0;

  Eigen::Index dim() const { return inputs.rows(); }
  std::size_t size() const { return labels.size(); }

  // Throws when the size, label range, or [0, 1] invariants fail.
  void validate() const;
  // First `count` samples (all of them when count >= size()).
  Dataset head(std::size_t count) const;
  Dataset select(const std::vector<std::size_t>& indices) const;
};

struct IdxImages {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::vector<std::uint8_t>> images;  // rows * cols bytes each
};

// Big-endian IDX files. Gzip-compressed files are detected and inflated
// transparently. Wrong magic -> FormatError; short payload -> FormatError.
IdxImages load_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

// Pixels / 255, flattened row-major per image.
DenseMatrix idx_to_inputs(const IdxImages& images);

enum class MnistSplit { kTrain, kTest };

// Looks for the standard file names (optionally with .gz) in `dir`.
Dataset load_mnist(const std::filesystem::path& dir, MnistSplit split);

// Dataset root from $MONDEQ_DATA_DIR, or empty when unset.
std::filesystem::path default_data_dir();

enum class SyntheticKind { kTwoGaussians, kXorLike };

SyntheticKind parse_synthetic_kind(const std::string& name);

// two-gaussians: unit-variance classes whose means are `separation` apart
// along the diagonal, min-max scaled per feature into [0, 1].
// xor-like: the four quadrant centroids of [0, 1]^2 (0.25 / 0.75) with
// alternating labels, jittered for n_samples > 4; extra dimensions are noise.
Dataset make_synthetic(SyntheticKind kind, std::size_t n_samples, Eigen::Index d,
                       std::uint64_t seed, double separation = 5.0);

struct Batch {
  DenseMatrix inputs;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

// A seeded permutation of all samples cut into consecutive batches; the last
// one may be short.
std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed);

// The index partition behind batches(), for callers that gather lazily.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n_samples, std::size_t batch_size,
                                                    std::uint64_t shuffle_seed);
Batch gather_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace mondeq
