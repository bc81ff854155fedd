#pragma once

#include <cstdint>

#include "mondeq/linalg.hpp"

namespace mondeq {

// Numerically stable log(1 + exp(x)).
double softplus(double x);
double inverse_softplus(double y);
// Logistic function; the derivative of softplus.
double sigmoid(double x);

// Trainable parameters of a single-layer monotone equilibrium network.
// W is never stored; it is assembled from (A, B, m) so that
// sym(I - W) = m I + A^T A holds by construction.
struct MonDEQParams {
  DenseMatrix A;            // n x n
  DenseMatrix B;            // n x n
  double m_raw = 0.0;       // margin = softplus(m_raw)
  DenseMatrix U;            // n x d
  DenseVector b;            // n
  DenseMatrix head_weight;  // c x n
  DenseVector head_bias;    // c

  Eigen::Index hidden() const { return A.rows(); }
  Eigen::Index input_dim() const { return U.cols(); }
  Eigen::Index classes() const { return head_weight.rows(); }

  double margin_param() const { return softplus(m_raw); }
  DenseMatrix weight() const;

  // Throws DimensionError / DomainError when shapes disagree or an entry is
  // non-finite.
  void validate() const;
};

// Uniform(-1/sqrt(n), 1/sqrt(n)) for A, B, U; Kaiming-uniform head;
// b = 0; softplus(m_raw) = 1.
MonDEQParams init_params(Eigen::Index n, Eigen::Index d, Eigen::Index c, std::uint64_t seed);

// W = (1 - m) I - A^T A + B - B^T. Requires m > 0.
DenseMatrix build_weight(const DenseMatrix& A, const DenseMatrix& B, double m);

// lambda_min(sym(I - W)).
double margin(const DenseMatrix& W);
// |I - W|_2.
double lipschitz(const DenseMatrix& W);

// F(z) = (I - W) z - c with c = U x + b for the current input.
struct AffineOperator {
  DenseMatrix W;
  DenseVector c;

  Eigen::Index dim() const { return W.rows(); }
};

AffineOperator make_operator(const DenseMatrix& W, const MonDEQParams& params,
                             const DenseVector& x);

DenseVector apply_F(const AffineOperator& op, const DenseVector& z);

// Projection onto the nonnegative orthant: the resolvent of the normal cone
// for every step size.
DenseVector resolvent_relu(const DenseVector& v);

// Resolvent of alpha * F: solves (I + alpha (I - W)) u = v + alpha c.
// The factorization is built once and reused across calls.
class AffineResolvent {
 public:
  AffineResolvent(const DenseMatrix& W, double alpha);

  DenseVector apply(const DenseVector& c, const DenseVector& v) const;
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  Eigen::PartialPivLU<DenseMatrix> lu_;
};

DenseVector resolvent_affine(const DenseMatrix& W, const DenseVector& c, double alpha,
                             const DenseVector& v);

// Logits: head_weight * z + head_bias.
DenseVector predict(const MonDEQParams& params, const DenseVector& z_star);

}  // namespace mondeq
