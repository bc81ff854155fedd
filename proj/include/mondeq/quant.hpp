#pragma once

#include <cstdint>
#include <utility>

#include <nlohmann/json.hpp>

#include "mondeq/linalg.hpp"

namespace mondeq {

using CodeMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Step of the symmetric mid-tread grid on [-1, 1]: 2^(1 - bits). bits >= 2.
double step_size(int bits);

// Delta * round(w / Delta), ties away from zero.
double quantize_value(double w, double step);

// Symmetric uniform per-tensor quantizer. Levels are scale * step * k with
// |k| <= 2^(bits - 1).
struct QuantizerSpec {
  int bits = 8;
  double scale = 1.0;

  void validate() const;
  double step() const { return step_size(bits); }
  std::int64_t max_code() const { return std::int64_t{1} << (bits - 1); }
};

struct QuantizationReport {
  DenseMatrix W_q;
  DenseMatrix delta_W;   // W_q - W
  CodeMatrix codes;      // W_q = scale * (step * codes)
  double delta_W_norm = 0.0;   // |delta_W|_2
  double eps_W_apriori = 0.0;  // scale * n * step / 2
  int bits = 0;
  double scale = 1.0;
};

// Per-tensor scale s = max |W_ij|; each entry w -> s * Q(w / s). An all-zero
// W is returned unchanged with scale 1.
QuantizationReport quantize_matrix(const DenseMatrix& W, int bits);

// Same grid with an externally fixed scale. Entries beyond +-scale saturate
// at the extreme level.
QuantizationReport quantize_with_scale(const DenseMatrix& W, const QuantizerSpec& spec);

// scale * n * step_size(bits) / 2, the worst-case spectral norm of the
// rounding error for an n x n matrix.
double eps_w_apriori(Eigen::Index n, int bits, double scale);

// Backward rule of the straight-through estimator: the upstream gradient
// with respect to the quantized matrix is the gradient with respect to W.
struct GradientPassthrough {
  DenseMatrix backward(const DenseMatrix& upstream) const { return upstream; }
};

std::pair<DenseMatrix, GradientPassthrough> ste_quantize(const DenseMatrix& W, int bits);

// bits, scale, delta_W_norm, eps_W_apriori.
nlohmann::json to_json(const QuantizationReport& report);

}  // namespace mondeq
