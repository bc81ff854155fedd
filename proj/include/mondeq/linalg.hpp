#pragma once

#include <Eigen/Dense>
#include <string_view>

#include "mondeq/errors.hpp"

namespace mondeq {

// All model math is dense float64. Eigen owns storage; the helpers below
// enforce the value invariants (finite entries, matching shapes) at module
// boundaries.
using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

inline bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

inline void require_finite(const DenseMatrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite entry");
  }
}

inline void require_square(const DenseMatrix& m, std::string_view what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline void require_dim(Eigen::Index got, Eigen::Index want, std::string_view what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) +
                         ", expected " + std::to_string(want));
  }
}

inline DenseMatrix identity(Eigen::Index n) { return DenseMatrix::Identity(n, n); }

}  // namespace mondeq
