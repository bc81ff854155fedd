#include "mondeq/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

namespace mondeq {

namespace {

// Whole-file read; gzread passes plain files through unchanged.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 20);
  for (;;) {
    const int got = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (got < 0) {
      int errnum = 0;
      const std::string msg = gzerror(f, &errnum);
      gzclose(f);
      throw FormatError("read error in " + path.string() + ": " + msg);
    }
    if (got == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + got);
  }
  gzclose(f);
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) throw FormatError("truncated IDX header in " + path.string());
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

std::filesystem::path find_file(const std::filesystem::path& dir, const std::string& name) {
  for (const auto& candidate : {dir / name, dir / (name + ".gz")}) {
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw FormatError("MNIST file " + name + " not found in " + dir.string());
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(inputs.cols()) != labels.size()) {
    throw DimensionError("Dataset: input count differs from label count");
  }
  for (int label : labels) {
    if (label < 0 || label >= num_classes) throw DomainError("Dataset: label out of range");
  }
  if (inputs.size() > 0 && (inputs.minCoeff() < 0.0 || inputs.maxCoeff() > 1.0)) {
    throw DomainError("Dataset: input entries must lie in [0, 1]");
  }
}

Dataset Dataset::head(std::size_t count) const {
  const std::size_t k = std::min(count, size());
  Dataset out;
  out.inputs = inputs.leftCols(static_cast<Eigen::Index>(k));
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k));
  out.num_classes = num_classes;
  return out;
}

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  out.num_classes = num_classes;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= size()) throw DimensionError("Dataset::select: index out of range");
    out.inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(indices[j]));
    out.labels.push_back(labels[indices[j]]);
  }
  return out;
}

IdxImages load_idx_images(const std::filesystem::path& path) {
  const auto buf = read_maybe_gzip(path);
  const std::uint32_t magic = read_be32(buf, 0, path);
  if (magic != kIdxImagesMagic) {
    throw FormatError("bad IDX image magic " + std::to_string(magic) + " in " + path.string());
  }
  const std::uint32_t count = read_be32(buf, 4, path);
  IdxImages out;
  out.rows = read_be32(buf, 8, path);
  out.cols = read_be32(buf, 12, path);
  const std::size_t pixels = std::size_t{out.rows} * out.cols;
  if (buf.size() < 16 + pixels * count) {
    throw FormatError("truncated IDX image payload in " + path.string());
  }
  out.images.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto begin = buf.begin() + static_cast<std::ptrdiff_t>(16 + i * pixels);
    out.images[i].assign(begin, begin + static_cast<std::ptrdiff_t>(pixels));
  }
  return out;
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
  const auto buf = read_maybe_gzip(path);
  const std::uint32_t magic = read_be32(buf, 0, path);
  if (magic != kIdxLabelsMagic) {
    throw FormatError("bad IDX label magic " + std::to_string(magic) + " in " + path.string());
  }
  const std::uint32_t count = read_be32(buf, 4, path);
  if (buf.size() < 8 + std::size_t{count}) {
    throw FormatError("truncated IDX label payload in " + path.string());
  }
  return {buf.begin() + 8, buf.begin() + 8 + count};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(images.images.size()));
  put_be32(out, images.rows);
  put_be32(out, images.cols);
  for (const auto& img : images.images) {
    if (img.size() != std::size_t{images.rows} * images.cols) {
      throw DimensionError("write_idx_images: image size mismatch");
    }
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  }
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

DenseMatrix idx_to_inputs(const IdxImages& images) {
  const auto d = static_cast<Eigen::Index>(images.rows) * images.cols;
  DenseMatrix x(d, static_cast<Eigen::Index>(images.images.size()));
  for (std::size_t i = 0; i < images.images.size(); ++i) {
    for (Eigen::Index p = 0; p < d; ++p) {
      x(p, static_cast<Eigen::Index>(i)) = images.images[i][static_cast<std::size_t>(p)] / 255.0;
    }
  }
  return x;
}

Dataset load_mnist(const std::filesystem::path& dir, MnistSplit split) {
  const std::string prefix = split == MnistSplit::kTrain ? "train" : "t10k";
  const auto images = load_idx_images(find_file(dir, prefix + "-images-idx3-ubyte"));
  const auto labels = load_idx_labels(find_file(dir, prefix + "-labels-idx1-ubyte"));
  if (labels.size() != images.images.size()) {
    throw FormatError("MNIST " + prefix + ": image and label counts differ");
  }
  Dataset ds;
  ds.inputs = idx_to_inputs(images);
  ds.labels.assign(labels.begin(), labels.end());
  ds.num_classes = 10;
  ds.validate();
  return ds;
}

std::filesystem::path default_data_dir() {
  const char* env = std::getenv("MONDEQ_DATA_DIR");
  return env ? std::filesystem::path(env) : std::filesystem::path();
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "two-gaussians") return SyntheticKind::kTwoGaussians;
  if (name == "xor-like") return SyntheticKind::kXorLike;
  throw DomainError("unknown synthetic dataset '" + name + "'");
}

Dataset make_synthetic(SyntheticKind kind, std::size_t n_samples, Eigen::Index d,
                       std::uint64_t seed, double separation) {
  if (n_samples < 2) throw DomainError("make_synthetic: need at least 2 samples");
  if (d < 1 || (kind == SyntheticKind::kXorLike && d < 2)) {
    throw DomainError("make_synthetic: dimension too small");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.num_classes = 2;
  ds.inputs.resize(d, static_cast<Eigen::Index>(n_samples));
  ds.labels.resize(n_samples);

  if (kind == SyntheticKind::kTwoGaussians) {
    const DenseVector direction = DenseVector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    for (std::size_t i = 0; i < n_samples; ++i) {
      const int label = static_cast<int>(i % 2);
      const double sign = label == 0 ? -1.0 : 1.0;
      auto col = ds.inputs.col(static_cast<Eigen::Index>(i));
      for (Eigen::Index k = 0; k < d; ++k) col(k) = normal(rng);
      col += sign * 0.5 * separation * direction;
      ds.labels[i] = label;
    }
    // Per-feature affine map into [0, 1]; affine maps keep linear separability.
    for (Eigen::Index k = 0; k < d; ++k) {
      auto row = ds.inputs.row(k);
      const double lo = row.minCoeff();
      const double hi = row.maxCoeff();
      if (hi > lo) {
        row = (row.array() - lo) / (hi - lo);
      } else {
        row.setConstant(0.5);
      }
    }
  } else {
    constexpr double kCentroids[4][2] = {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
    constexpr int kLabels[4] = {0, 1, 1, 0};
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const std::size_t q = i % 4;
      auto col = ds.inputs.col(static_cast<Eigen::Index>(i));
      const bool exact = n_samples <= 4;
      col(0) = kCentroids[q][0] + (exact ? 0.0 : jitter(rng));
      col(1) = kCentroids[q][1] + (exact ? 0.0 : jitter(rng));
      for (Eigen::Index k = 2; k < d; ++k) col(k) = unit(rng);
      ds.labels[i] = kLabels[q];
    }
  }
  ds.validate();
  return ds;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n_samples, std::size_t batch_size,
                                                    std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw DomainError("batches: batch_size must be at least 1");
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, order.size());
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Batch gather_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Batch b;
  b.indices = indices;
  b.inputs.resize(ds.dim(), static_cast<Eigen::Index>(indices.size()));
  b.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    b.inputs.col(static_cast<Eigen::Index>(j)) = ds.inputs.col(static_cast<Eigen::Index>(indices[j]));
    b.labels.push_back(ds.labels[indices[j]]);
  }
  return b;
}

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(ds.size(), batch_size, shuffle_seed)) {
    out.push_back(gather_batch(ds, idx));
  }
  return out;
}

}  // namespace mondeq
