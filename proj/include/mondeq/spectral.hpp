#pragma once

#include "mondeq/linalg.hpp"

namespace mondeq {

// Default absolute tolerance for symmetric eigenvalues and relative
// tolerance for spectral norms.
inline constexpr double kEigenTol = 1e-12;

// Maximum entrywise asymmetry accepted by the symmetric eigen routines.
inline constexpr double kSymmetryThreshold = 1e-12;

// (M + M^T) / 2. The result is exactly symmetric.
DenseMatrix sym(const DenseMatrix& m);

// (M - M^T) / 2. The result is exactly skew-symmetric.
DenseMatrix skw(const DenseMatrix& m);

bool is_symmetric(const DenseMatrix& s, double threshold = kSymmetryThreshold);

struct SymmetricEigen {
  DenseVector values;   // ascending
  DenseMatrix vectors;  // columns, present only when requested
  int sweeps = 0;
};

// Cyclic Jacobi rotations. Sweeps until the off-diagonal Frobenius norm is
// below min(abs_tol, 1e-12 * max(1, |S|_F)), floored at what rounding allows.
// Throws ContractViolation if S is not symmetric to kSymmetryThreshold and
// NumericalError if the sweep cap is reached.
SymmetricEigen jacobi_eigen(const DenseMatrix& s, double abs_tol = kEigenTol,
                            bool want_vectors = false);

double min_eigenvalue_sym(const DenseMatrix& s, double tol = kEigenTol);
double max_eigenvalue_sym(const DenseMatrix& s, double tol = kEigenTol);

// Largest singular value, as sqrt(lambda_max(M^T M)) using the smaller Gram
// matrix. `tol` is relative.
double spectral_norm(const DenseMatrix& m, double tol = kEigenTol);

}  // namespace mondeq
