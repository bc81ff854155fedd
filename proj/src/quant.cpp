#include "mondeq/quant.hpp"

#include <algorithm>
#include <cmath>

#include "mondeq/spectral.hpp"

namespace mondeq {

namespace {

void require_bits(int bits) {
  if (bits < 2) throw DomainError("quantizer: bit-width must be at least 2");
  if (bits > 52) throw DomainError("quantizer: bit-width above 52 exceeds float64 resolution");
}

double max_abs(const DenseMatrix& W) { return W.size() == 0 ? 0.0 : W.cwiseAbs().maxCoeff(); }

// Grid values and integer codes only; no error statistics.
QuantizationReport round_to_grid(const DenseMatrix& W, const QuantizerSpec& spec) {
  spec.validate();
  require_finite(W, "quantize");
  const double step = spec.step();
  const std::int64_t limit = spec.max_code();

  QuantizationReport r;
  r.bits = spec.bits;
  r.scale = spec.scale;
  r.codes.resize(W.rows(), W.cols());
  r.W_q.resize(W.rows(), W.cols());
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      // std::round breaks ties away from zero.
      auto k = static_cast<std::int64_t>(std::round(W(i, j) / spec.scale / step));
      k = std::clamp(k, -limit, limit);
      r.codes(i, j) = k;
      r.W_q(i, j) = spec.scale * (step * static_cast<double>(k));
    }
  }
  return r;
}

}  // namespace

double step_size(int bits) {
  require_bits(bits);
  return std::ldexp(1.0, 1 - bits);
}

double quantize_value(double w, double step) { return step * std::round(w / step); }

void QuantizerSpec::validate() const {
  require_bits(bits);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DomainError("QuantizerSpec: scale must be positive and finite");
  }
}

QuantizationReport quantize_with_scale(const DenseMatrix& W, const QuantizerSpec& spec) {
  QuantizationReport r = round_to_grid(W, spec);
  r.delta_W = r.W_q - W;
  r.delta_W_norm = spectral_norm(r.delta_W);
  r.eps_W_apriori = eps_w_apriori(std::max(W.rows(), W.cols()), spec.bits, spec.scale);
  return r;
}

QuantizationReport quantize_matrix(const DenseMatrix& W, int bits) {
  require_bits(bits);
  require_finite(W, "quantize_matrix");
  const double scale = max_abs(W);
  if (scale == 0.0) {
    QuantizationReport r;
    r.W_q = W;
    r.delta_W = DenseMatrix::Zero(W.rows(), W.cols());
    r.codes = CodeMatrix::Zero(W.rows(), W.cols());
    r.bits = bits;
    r.scale = 1.0;
    r.eps_W_apriori = eps_w_apriori(std::max<Eigen::Index>(W.rows(), 1), bits, 1.0);
    return r;
  }
  return quantize_with_scale(W, QuantizerSpec{bits, scale});
}

double eps_w_apriori(Eigen::Index n, int bits, double scale) {
  if (n < 1) throw DomainError("eps_w_apriori: n must be positive");
  if (!(scale > 0.0)) throw DomainError("eps_w_apriori: scale must be positive");
  return scale * static_cast<double>(n) * step_size(bits) / 2.0;
}

std::pair<DenseMatrix, GradientPassthrough> ste_quantize(const DenseMatrix& W, int bits) {
  require_bits(bits);
  require_finite(W, "ste_quantize");
  const double scale = max_abs(W);
  if (scale == 0.0) return {W, GradientPassthrough{}};
  return {round_to_grid(W, QuantizerSpec{bits, scale}).W_q, GradientPassthrough{}};
}

nlohmann::json to_json(const QuantizationReport& report) {
  return nlohmann::json{{"bits", report.bits},
                        {"scale", report.scale},
                        {"delta_W_norm", report.delta_W_norm},
                        {"eps_W_apriori", report.eps_W_apriori}};
}

}  // namespace mondeq
