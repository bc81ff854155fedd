#include "mondeq/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

namespace mondeq {

namespace {

constexpr std::string_view kModelMagic = "MONDEQ01";
constexpr std::string_view kWeightMagic = "MDQW0001";

class Writer {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void matrix(const DenseMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }

  void raw(const std::vector<std::uint8_t>& data) {
    bytes_.insert(bytes_.end(), data.begin(), data.end());
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0) {
      throw FormatError("bad magic, expected " + std::string(m));
    }
    pos_ += m.size();
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  DenseMatrix matrix(Eigen::Index rows, Eigen::Index cols) {
    DenseMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f64();
    }
    return m;
  }

  const std::uint8_t* take(std::size_t count) {
    need(count);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += count;
    return p;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t count) const {
    if (pos_ + count > bytes_.size()) throw FormatError("unexpected end of data");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const MonDEQParams& params) {
  params.validate();
  Writer w;
  w.magic(kModelMagic);
  w.u64(static_cast<std::uint64_t>(params.hidden()));
  w.u64(static_cast<std::uint64_t>(params.input_dim()));
  w.u64(static_cast<std::uint64_t>(params.classes()));
  w.matrix(params.A);
  w.matrix(params.B);
  w.f64(params.m_raw);
  w.matrix(params.U);
  w.matrix(params.b);
  w.matrix(params.head_weight);
  w.matrix(params.head_bias);
  return w.take();
}

MonDEQParams decode_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic(kModelMagic);
  const auto n = static_cast<Eigen::Index>(r.u64());
  const auto d = static_cast<Eigen::Index>(r.u64());
  const auto c = static_cast<Eigen::Index>(r.u64());
  constexpr Eigen::Index kLimit = Eigen::Index{1} << 24;
  if (n < 1 || d < 1 || c < 1 || n > kLimit || d > kLimit || c > kLimit) {
    throw FormatError("model header has implausible sizes");
  }
  MonDEQParams p;
  p.A = r.matrix(n, n);
  p.B = r.matrix(n, n);
  p.m_raw = r.f64();
  p.U = r.matrix(n, d);
  p.b = r.matrix(n, 1).col(0);
  p.head_weight = r.matrix(c, n);
  p.head_bias = r.matrix(c, 1).col(0);
  if (!r.at_end()) throw FormatError("trailing bytes after model payload");
  p.validate();
  return p;
}

void save_model(const std::filesystem::path& path, const MonDEQParams& params) {
  write_file(path, encode_model(params));
}

MonDEQParams load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

std::vector<std::uint8_t> pack_quantized_weight(const QuantizationReport& report) {
  const int bits = report.bits;
  if (bits < 2 || bits > 32) throw DomainError("pack_quantized_weight: bits must be in [2, 32]");
  const CodeMatrix& codes = report.codes;
  const std::int64_t top = std::int64_t{1} << (bits - 1);
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;

  std::vector<std::uint32_t> top_entries;
  std::vector<std::uint8_t> payload(
      (static_cast<std::size_t>(codes.size()) * static_cast<std::size_t>(bits) + 7) / 8, 0);
  std::size_t bit_pos = 0;
  for (Eigen::Index i = 0; i < codes.rows(); ++i) {
    for (Eigen::Index j = 0; j < codes.cols(); ++j) {
      std::int64_t k = codes(i, j);
      if (k < -top || k > top) throw DomainError("pack_quantized_weight: code out of range");
      if (k == top) {
        top_entries.push_back(static_cast<std::uint32_t>(i * codes.cols() + j));
        k = 0;
      }
      std::uint64_t u = static_cast<std::uint64_t>(k) & mask;
      for (int b = 0; b < bits; ++b, ++bit_pos) {
        if ((u >> b) & 1u) payload[bit_pos / 8] |= static_cast<std::uint8_t>(1u << (bit_pos % 8));
      }
    }
  }

  Writer w;
  w.magic(kWeightMagic);
  w.u32(static_cast<std::uint32_t>(codes.rows()));
  w.u32(static_cast<std::uint32_t>(codes.cols()));
  w.u32(static_cast<std::uint32_t>(bits));
  w.f64(report.scale);
  w.u32(static_cast<std::uint32_t>(top_entries.size()));
  for (std::uint32_t idx : top_entries) w.u32(idx);
  w.raw(payload);
  return w.take();
}

PackedWeight unpack_quantized_weight(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic(kWeightMagic);
  const auto rows = static_cast<Eigen::Index>(r.u32());
  const auto cols = static_cast<Eigen::Index>(r.u32());
  PackedWeight out;
  out.bits = static_cast<int>(r.u32());
  if (out.bits < 2 || out.bits > 32) throw FormatError("packed weight: bad bit-width");
  out.scale = r.f64();
  const std::uint32_t n_top = r.u32();
  if (n_top > static_cast<std::uint64_t>(rows * cols)) throw FormatError("packed weight: bad index count");
  std::vector<std::uint32_t> top_entries(n_top);
  for (auto& idx : top_entries) idx = r.u32();
  const std::size_t payload_bytes =
      (static_cast<std::size_t>(rows * cols) * static_cast<std::size_t>(out.bits) + 7) / 8;
  const std::uint8_t* payload = r.take(payload_bytes);
  if (!r.at_end()) throw FormatError("packed weight: trailing bytes");

  const int bits = out.bits;
  const std::int64_t top = std::int64_t{1} << (bits - 1);
  out.codes.resize(rows, cols);
  std::size_t bit_pos = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::uint64_t u = 0;
      for (int b = 0; b < bits; ++b, ++bit_pos) {
        if ((payload[bit_pos / 8] >> (bit_pos % 8)) & 1u) u |= std::uint64_t{1} << b;
      }
      std::int64_t k = static_cast<std::int64_t>(u);
      if (k >= top) k -= std::int64_t{1} << bits;  // sign-extend
      out.codes(i, j) = k;
    }
  }
  for (std::uint32_t idx : top_entries) {
    if (idx >= static_cast<std::uint64_t>(rows * cols)) throw FormatError("packed weight: bad index");
    out.codes(static_cast<Eigen::Index>(idx) / cols, static_cast<Eigen::Index>(idx) % cols) = top;
  }
  const double step = step_size(bits);
  out.W_q.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      out.W_q(i, j) = out.scale * (step * static_cast<double>(out.codes(i, j)));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace mondeq
