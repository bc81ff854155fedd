#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "mondeq/model.hpp"

namespace mondeq {

struct SolverConfig {
  // Unset: forward-backward picks m / L^2 from the operator, Peaceman-Rachford uses 1.
  std::optional<double> alpha;
  double tol = 1e-5;
  int max_iters = 2000;
  bool record_trace = false;

  void validate() const;
};

enum class SolveStatus { kConverged, kMaxIterations, kDiverged };

std::string_view to_string(SolveStatus status);

struct EquilibriumResult {
  DenseVector z_star;
  int iterations = 0;
  double final_residual = 0.0;
  bool converged = false;
  SolveStatus status = SolveStatus::kMaxIterations;
  double alpha = 0.0;
  std::vector<double> residual_trace;  // filled when SolverConfig::record_trace
};

// Called with (k, state_k) for k = 0 (initial point) and after every
// iteration. For forward-backward the state is z^k; for Peaceman-Rachford it
// is the governing sequence u^k.
using IterateObserver = std::function<void(int, const DenseVector&)>;

// sqrt(max(1 - 2 alpha m + alpha^2 L^2, 0))
double fb_modulus(double alpha, double m, double L);
// sqrt(max(1 - 4 alpha m / (1 + alpha L)^2, 0))
double pr_modulus(double alpha, double m, double L);
// m / L^2, the minimizer of fb_modulus over (0, 2m/L^2).
double select_alpha_fb(double m, double L);

// Relative change |z_next - z| / max(|z_next|, 1e-12).
double relative_residual(const DenseVector& z_next, const DenseVector& z);

// Iteration stops early once an iterate exceeds this norm or is non-finite.
inline constexpr double kDivergenceNorm = 1e12;

// z^{k+1} = relu((1 - alpha) z^k + alpha W z^k + alpha c).
EquilibriumResult solve_fb(const AffineOperator& op, const SolverConfig& cfg,
                           const DenseVector& z0, const IterateObserver& observer = {});

// u^{k+1} = (2 J_G - I)(2 J_F - I) u^k with z = J_F(u) reported.
EquilibriumResult solve_pr(const AffineOperator& op, const SolverConfig& cfg,
                           const DenseVector& z0, const IterateObserver& observer = {});

// Per-iteration perturbations delta_k for the inexact iteration. Directions
// are drawn uniformly on the sphere from `seed`; norms follow `kind`.
struct ErrorSchedule {
  enum class Kind { kNone, kConstant, kGeometric, kCustom };

  Kind kind = Kind::kNone;
  double magnitude = 0.0;
  double decay = 1.0;           // geometric: |delta_k| = magnitude * decay^k
  std::uint64_t seed = 0;
  std::vector<double> custom;   // custom: |delta_k| = custom[k], 0 past the end

  static ErrorSchedule none() { return {}; }
  static ErrorSchedule constant(double magnitude, std::uint64_t seed);
  static ErrorSchedule geometric(double magnitude, double decay, std::uint64_t seed);

  void validate() const;
  double norm_at(int k) const;
};

struct InexactOptions {
  // Fixed point of the exact map, used to measure iterate errors.
  std::optional<DenseVector> reference;
  // Number of trailing iterations over which sup errors are measured.
  int late_window = 200;
  // Ignore the tolerance and run exactly max_iters iterations.
  bool run_to_cap = false;
};

struct InexactResult {
  EquilibriumResult result;
  double sup_noise = 0.0;       // max |delta_k| over all iterations
  double sup_noise_late = 0.0;  // max |delta_k| over the late window
  std::optional<double> max_late_error;  // max |z^k - reference| over the late window
  std::optional<double> final_error;     // |z^K - reference|
};

// z^{k+1} = Phi(z^k) + delta_k with Phi the forward-backward map.
InexactResult solve_fb_inexact(const AffineOperator& op, const SolverConfig& cfg,
                               const DenseVector& z0, const ErrorSchedule& noise,
                               const InexactOptions& options = {});

// Column-wise forward-backward on a batch: column j of C is c for sample j.
// Columns are frozen once they converge, so each column follows the same
// trajectory as an individual solve.
struct BatchEquilibrium {
  DenseMatrix Z;
  std::vector<int> iterations;
  std::vector<double> final_residual;
  std::vector<SolveStatus> status;

  bool all_converged() const;
  int max_iterations() const;
  double mean_iterations() const;
};

BatchEquilibrium solve_fb_batch(const DenseMatrix& W, const DenseMatrix& C, double alpha,
                                const SolverConfig& cfg);

// Step size used for forward-backward on W: cfg.alpha if set, otherwise
// select_alpha_fb on the measured margin and Lipschitz constant. When the
// measured margin is not positive, `fallback` is returned if given and a
// DomainError is thrown otherwise.
double resolve_fb_alpha(const DenseMatrix& W, const SolverConfig& cfg,
                        std::optional<double> fallback = std::nullopt);

}  // namespace mondeq
