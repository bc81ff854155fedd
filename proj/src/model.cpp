#include "mondeq/model.hpp"

#include <cmath>
#include <random>

#include "mondeq/spectral.hpp"

namespace mondeq {

double softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw DomainError("inverse_softplus: argument must be positive");
  // log(e^y - 1) = y + log(1 - e^{-y})
  return y + std::log(-std::expm1(-y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DenseMatrix MonDEQParams::weight() const { return build_weight(A, B, margin_param()); }

void MonDEQParams::validate() const {
  const Eigen::Index n = A.rows();
  require_square(A, "MonDEQParams.A");
  require_square(B, "MonDEQParams.B");
  require_dim(B.rows(), n, "MonDEQParams.B");
  require_dim(U.rows(), n, "MonDEQParams.U rows");
  require_dim(b.size(), n, "MonDEQParams.b");
  require_dim(head_weight.cols(), n, "MonDEQParams.head_weight cols");
  require_dim(head_bias.size(), head_weight.rows(), "MonDEQParams.head_bias");
  for (const DenseMatrix* m : {&A, &B, &U, &head_weight}) require_finite(*m, "MonDEQParams");
  require_finite(b, "MonDEQParams.b");
  require_finite(head_bias, "MonDEQParams.head_bias");
  if (!std::isfinite(m_raw)) throw DomainError("MonDEQParams.m_raw: non-finite");
}

MonDEQParams init_params(Eigen::Index n, Eigen::Index d, Eigen::Index c, std::uint64_t seed) {
  if (n < 1 || d < 1 || c < 1) throw DimensionError("init_params: sizes must be positive");
  std::mt19937_64 rng(seed);
  auto uniform_fill = [&rng](Eigen::Index rows, Eigen::Index cols, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseMatrix m(rows, cols);
    // Fill row-major so the draw order does not depend on Eigen's storage order.
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
  };
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(n));
  MonDEQParams p;
  p.A = uniform_fill(n, n, hidden_bound);
  p.B = uniform_fill(n, n, hidden_bound);
  p.U = uniform_fill(n, d, hidden_bound);
  p.b = DenseVector::Zero(n);
  p.m_raw = inverse_softplus(1.0);
  p.head_weight = uniform_fill(c, n, hidden_bound);
  p.head_bias = uniform_fill(c, 1, hidden_bound).col(0);
  return p;
}

DenseMatrix build_weight(const DenseMatrix& A, const DenseMatrix& B, double m) {
  require_square(A, "build_weight(A)");
  require_square(B, "build_weight(B)");
  require_dim(B.rows(), A.rows(), "build_weight(B)");
  if (!(m > 0.0)) throw DomainError("build_weight: margin must be positive");
  DenseMatrix W = -(A.transpose() * A);
  W.diagonal().array() += 1.0 - m;
  W += B - B.transpose();
  return W;
}

double margin(const DenseMatrix& W) {
  require_square(W, "margin");
  return min_eigenvalue_sym(sym(identity(W.rows()) - W));
}

double lipschitz(const DenseMatrix& W) {
  require_square(W, "lipschitz");
  return spectral_norm(identity(W.rows()) - W);
}

AffineOperator make_operator(const DenseMatrix& W, const MonDEQParams& params,
                             const DenseVector& x) {
  require_dim(x.size(), params.input_dim(), "make_operator(x)");
  require_dim(W.rows(), params.hidden(), "make_operator(W)");
  return AffineOperator{W, params.U * x + params.b};
}

DenseVector apply_F(const AffineOperator& op, const DenseVector& z) {
  require_dim(z.size(), op.dim(), "apply_F(z)");
  require_dim(op.c.size(), op.dim(), "apply_F(c)");
  return z - op.W * z - op.c;
}

DenseVector resolvent_relu(const DenseVector& v) { return v.cwiseMax(0.0); }

AffineResolvent::AffineResolvent(const DenseMatrix& W, double alpha) : alpha_(alpha) {
  require_square(W, "AffineResolvent");
  if (!(alpha > 0.0)) throw DomainError("AffineResolvent: alpha must be positive");
  const Eigen::Index n = W.rows();
  DenseMatrix system = identity(n) + alpha * (identity(n) - W);
  lu_.compute(system);
  if (!(lu_.rcond() > 1e-14)) {
    throw NumericalError("AffineResolvent: I + alpha (I - W) is numerically singular");
  }
}

DenseVector AffineResolvent::apply(const DenseVector& c, const DenseVector& v) const {
  require_dim(v.size(), lu_.rows(), "AffineResolvent(v)");
  require_dim(c.size(), lu_.rows(), "AffineResolvent(c)");
  return lu_.solve(v + alpha_ * c);
}

DenseVector resolvent_affine(const DenseMatrix& W, const DenseVector& c, double alpha,
                             const DenseVector& v) {
  return AffineResolvent(W, alpha).apply(c, v);
}

DenseVector predict(const MonDEQParams& params, const DenseVector& z_star) {
  require_dim(z_star.size(), params.hidden(), "predict(z)");
  return params.head_weight * z_star + params.head_bias;
}

}  // namespace mondeq
