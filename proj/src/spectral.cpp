#include "mondeq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mondeq {

namespace {

constexpr int kMaxSweeps = 100;

double offdiag_frobenius(const std::vector<double>& a, Eigen::Index n) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) sum += a[i * n + j] * a[i * n + j];
    }
  }
  return std::sqrt(sum);
}

}  // namespace

DenseMatrix sym(const DenseMatrix& m) {
  require_square(m, "sym");
  const Eigen::Index n = m.rows();
  DenseMatrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = m(i, i);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

DenseMatrix skw(const DenseMatrix& m) {
  require_square(m, "skw");
  const Eigen::Index n = m.rows();
  DenseMatrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m(i, j) - m(j, i));
      k(i, j) = v;
      k(j, i) = -v;
    }
  }
  return k;
}

bool is_symmetric(const DenseMatrix& s, double threshold) {
  if (s.rows() != s.cols()) return false;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < s.cols(); ++j) {
      if (std::abs(s(i, j) - s(j, i)) > threshold) return false;
    }
  }
  return true;
}

SymmetricEigen jacobi_eigen(const DenseMatrix& s, double abs_tol, bool want_vectors) {
  require_square(s, "jacobi_eigen");
  require_finite(s, "jacobi_eigen");
  if (!(abs_tol > 0.0)) throw DomainError("jacobi_eigen: tolerance must be positive");
  if (!is_symmetric(s)) {
    throw ContractViolation("jacobi_eigen: input is not symmetric");
  }
  const Eigen::Index n = s.rows();
  SymmetricEigen out;
  if (n == 0) return out;

  // Row-major working copy; the lower triangle is mirrored from the upper one
  // so the tolerated asymmetry does not leak into the rotations.
  std::vector<double> a(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      a[i * n + j] = (j >= i) ? s(i, j) : s(j, i);
    }
  }
  std::vector<double> v;
  if (want_vectors) {
    v.assign(static_cast<std::size_t>(n * n), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) v[i * n + i] = 1.0;
  }

  const double frob = s.norm();
  const double scale = std::max(1.0, frob);
  const double floor_tol =
      8.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * frob;
  const double stop = std::max(std::min(abs_tol, 1e-12 * scale), floor_tol);

  int sweep = 0;
  for (;; ++sweep) {
    const double off = offdiag_frobenius(a, n);
    if (off <= stop) break;
    if (sweep >= kMaxSweeps) {
      throw NumericalError("jacobi_eigen: no convergence after " +
                           std::to_string(kMaxSweeps) + " sweeps (off-diagonal norm " +
                           std::to_string(off) + ")");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          const double new_kp = c * akp - sn * akq;
          const double new_kq = sn * akp + c * akq;
          a[k * n + p] = new_kp;
          a[p * n + k] = new_kp;
          a[k * n + q] = new_kq;
          a[q * n + k] = new_kq;
        }
        a[p * n + p] = app - t * apq;
        a[q * n + q] = aqq + t * apq;
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;

        if (want_vectors) {
          for (Eigen::Index k = 0; k < n; ++k) {
            const double vkp = v[k * n + p];
            const double vkq = v[k * n + q];
            v[k * n + p] = c * vkp - sn * vkq;
            v[k * n + q] = sn * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return a[i * n + i] < a[j * n + j];
  });
  out.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.values(i) = a[order[i] * n + order[i]];
  if (want_vectors) {
    out.vectors.resize(n, n);
    for (Eigen::Index col = 0; col < n; ++col) {
      for (Eigen::Index k = 0; k < n; ++k) out.vectors(k, col) = v[k * n + order[col]];
    }
  }
  out.sweeps = sweep;
  return out;
}

double min_eigenvalue_sym(const DenseMatrix& s, double tol) {
  if (s.rows() == 0) throw DimensionError("min_eigenvalue_sym: empty matrix");
  return jacobi_eigen(s, tol).values(0);
}

double max_eigenvalue_sym(const DenseMatrix& s, double tol) {
  if (s.rows() == 0) throw DimensionError("max_eigenvalue_sym: empty matrix");
  const auto eig = jacobi_eigen(s, tol);
  return eig.values(eig.values.size() - 1);
}

double spectral_norm(const DenseMatrix& m, double tol) {
  require_finite(m, "spectral_norm");
  if (!(tol > 0.0)) throw DomainError("spectral_norm: tolerance must be positive");
  if (m.size() == 0) return 0.0;
  DenseMatrix gram = (m.cols() <= m.rows()) ? DenseMatrix(m.transpose() * m)
                                            : DenseMatrix(m * m.transpose());
  gram = sym(gram);
  const double gram_frob = gram.norm();
  if (gram_frob == 0.0) return 0.0;
  // |G|_F / sqrt(k) <= lambda_max(G), so this absolute tolerance is at most
  // tol relative to the largest eigenvalue.
  const double lambda_floor = gram_frob / std::sqrt(static_cast<double>(gram.rows()));
  const double lambda_max = max_eigenvalue_sym(gram, tol * lambda_floor);
  return std::sqrt(std::max(lambda_max, 0.0));
}

}  // namespace mondeq
