#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mondeq/model.hpp"
#include "mondeq/quant.hpp"

namespace mondeq {

// Model container, little-endian:
//   8 bytes  magic "MONDEQ01"
//   3 x u64  n, d, c
//   f64[]    A (n*n), B (n*n), m_raw, U (n*d), b (n), head_weight (c*n), head_bias (c)
// Matrices are row-major. Doubles are copied bit for bit.
std::vector<std::uint8_t> encode_model(const MonDEQParams& params);
MonDEQParams decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, const MonDEQParams& params);
MonDEQParams load_model(const std::filesystem::path& path);

// Deployable quantized weight, little-endian:
//   8 bytes  magic "MDQW0001"
//   u32      rows, cols, bits
//   f64      scale
//   u32      number of entries at the top level +2^(bits-1)
//   u32[]    their row-major indices
//   payload  codes packed as `bits`-bit two's complement, row-major, LSB first;
//            top-level entries are stored as 0 and restored from the list
// Decoding reproduces W_q = scale * (step * code) exactly.
std::vector<std::uint8_t> pack_quantized_weight(const QuantizationReport& report);

struct PackedWeight {
  DenseMatrix W_q;
  CodeMatrix codes;
  int bits = 0;
  double scale = 1.0;
};

PackedWeight unpack_quantized_weight(const std::vector<std::uint8_t>& bytes);

// Bytes of a dense float32 copy of a rows x cols matrix.
inline std::size_t float32_payload_bytes(Eigen::Index rows, Eigen::Index cols) {
  return static_cast<std::size_t>(rows * cols) * 4;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace mondeq
