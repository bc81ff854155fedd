#include "mondeq/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mondeq {

namespace {

constexpr double kResidualFloor = 1e-12;

bool diverged(const DenseVector& z) {
  return !z.allFinite() || z.norm() > kDivergenceNorm;
}

// Shared exact/inexact forward-backward loop. `perturb` may add delta_k to the
// freshly computed iterate; it is empty for the exact solver.
EquilibriumResult run_fb(const AffineOperator& op, const SolverConfig& cfg,
                         const DenseVector& z0, bool run_to_cap,
                         const std::function<void(int, DenseVector&)>& perturb,
                         const IterateObserver& observer) {
  cfg.validate();
  require_dim(z0.size(), op.dim(), "solve_fb(z0)");
  require_dim(op.c.size(), op.dim(), "solve_fb(c)");
  const double alpha = resolve_fb_alpha(op.W, cfg);

  EquilibriumResult out;
  out.alpha = alpha;
  DenseVector z = z0;
  DenseVector next(z.size());
  if (observer) observer(0, z);
  for (int k = 0; k < cfg.max_iters; ++k) {
    next.noalias() = (1.0 - alpha) * z;
    next.noalias() += alpha * (op.W * z);
    next += alpha * op.c;
    next = next.cwiseMax(0.0);
    if (perturb) perturb(k, next);
    out.iterations = k + 1;
    if (diverged(next)) {
      out.status = SolveStatus::kDiverged;
      out.final_residual = std::numeric_limits<double>::infinity();
      if (cfg.record_trace) out.residual_trace.push_back(out.final_residual);
      z = std::move(next);
      if (observer) observer(k + 1, z);
      out.z_star = std::move(z);
      return out;
    }
    const double res = relative_residual(next, z);
    out.final_residual = res;
    if (cfg.record_trace) out.residual_trace.push_back(res);
    z.swap(next);
    if (observer) observer(k + 1, z);
    if (!run_to_cap && res < cfg.tol) {
      out.status = SolveStatus::kConverged;
      out.converged = true;
      break;
    }
  }
  if (run_to_cap && out.final_residual < cfg.tol) {
    out.status = SolveStatus::kConverged;
    out.converged = true;
  }
  out.z_star = std::move(z);
  return out;
}

DenseVector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseVector v(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace

void SolverConfig::validate() const {
  if (alpha && !(*alpha > 0.0)) throw DomainError("SolverConfig: alpha must be positive");
  if (!(tol > 0.0)) throw DomainError("SolverConfig: tol must be positive");
  if (max_iters < 1) throw DomainError("SolverConfig: max_iters must be at least 1");
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterations:
      return "max_iters";
    case SolveStatus::kDiverged:
      return "diverged";
  }
  return "unknown";
}

double fb_modulus(double alpha, double m, double L) {
  return std::sqrt(std::max(1.0 - 2.0 * alpha * m + alpha * alpha * L * L, 0.0));
}

double pr_modulus(double alpha, double m, double L) {
  const double denom = (1.0 + alpha * L) * (1.0 + alpha * L);
  return std::sqrt(std::max(1.0 - 4.0 * alpha * m / denom, 0.0));
}

double select_alpha_fb(double m, double L) {
  if (!(m > 0.0)) throw DomainError("select_alpha_fb: no admissible step size for m <= 0");
  if (!(L > 0.0)) throw DomainError("select_alpha_fb: L must be positive");
  return m / (L * L);
}

double relative_residual(const DenseVector& z_next, const DenseVector& z) {
  return (z_next - z).norm() / std::max(z_next.norm(), kResidualFloor);
}

double resolve_fb_alpha(const DenseMatrix& W, const SolverConfig& cfg,
                        std::optional<double> fallback) {
  if (cfg.alpha) return *cfg.alpha;
  const double m = margin(W);
  if (m > 0.0) return select_alpha_fb(m, lipschitz(W));
  if (fallback) return *fallback;
  throw DomainError("resolve_fb_alpha: margin " + std::to_string(m) +
                    " is not positive; an explicit step size is required");
}

EquilibriumResult solve_fb(const AffineOperator& op, const SolverConfig& cfg,
                           const DenseVector& z0, const IterateObserver& observer) {
  return run_fb(op, cfg, z0, false, {}, observer);
}

EquilibriumResult solve_pr(const AffineOperator& op, const SolverConfig& cfg,
                           const DenseVector& z0, const IterateObserver& observer) {
  cfg.validate();
  require_dim(z0.size(), op.dim(), "solve_pr(z0)");
  require_dim(op.c.size(), op.dim(), "solve_pr(c)");
  const double alpha = cfg.alpha.value_or(1.0);
  const AffineResolvent resolvent_F(op.W, alpha);

  EquilibriumResult out;
  out.alpha = alpha;
  DenseVector u = z0;
  DenseVector x = resolvent_F.apply(op.c, u);
  if (observer) observer(0, u);
  for (int k = 0; k < cfg.max_iters; ++k) {
    const DenseVector reflected = 2.0 * x - u;          // (2 J_F - I) u
    const DenseVector projected = resolvent_relu(reflected);
    u = 2.0 * projected - reflected;                     // (2 J_G - I)(...)
    DenseVector x_next = resolvent_F.apply(op.c, u);
    out.iterations = k + 1;
    if (observer) observer(k + 1, u);
    if (diverged(u) || diverged(x_next)) {
      out.status = SolveStatus::kDiverged;
      out.final_residual = std::numeric_limits<double>::infinity();
      if (cfg.record_trace) out.residual_trace.push_back(out.final_residual);
      out.z_star = std::move(x_next);
      return out;
    }
    const double res = relative_residual(x_next, x);
    out.final_residual = res;
    if (cfg.record_trace) out.residual_trace.push_back(res);
    x = std::move(x_next);
    if (res < cfg.tol) {
      out.status = SolveStatus::kConverged;
      out.converged = true;
      break;
    }
  }
  out.z_star = std::move(x);
  return out;
}

ErrorSchedule ErrorSchedule::constant(double magnitude, std::uint64_t seed) {
  ErrorSchedule s;
  s.kind = Kind::kConstant;
  s.magnitude = magnitude;
  s.seed = seed;
  return s;
}

ErrorSchedule ErrorSchedule::geometric(double magnitude, double decay, std::uint64_t seed) {
  ErrorSchedule s;
  s.kind = Kind::kGeometric;
  s.magnitude = magnitude;
  s.decay = decay;
  s.seed = seed;
  return s;
}

void ErrorSchedule::validate() const {
  if (!(magnitude >= 0.0)) throw DomainError("ErrorSchedule: magnitude must be >= 0");
  if (kind == Kind::kGeometric && !(decay > 0.0 && decay <= 1.0)) {
    throw DomainError("ErrorSchedule: geometric decay must lie in (0, 1]");
  }
  for (double v : custom) {
    if (!(v >= 0.0)) throw DomainError("ErrorSchedule: custom norms must be >= 0");
  }
}

double ErrorSchedule::norm_at(int k) const {
  switch (kind) {
    case Kind::kNone:
      return 0.0;
    case Kind::kConstant:
      return magnitude;
    case Kind::kGeometric:
      return magnitude * std::pow(decay, k);
    case Kind::kCustom:
      return k < static_cast<int>(custom.size()) ? custom[static_cast<std::size_t>(k)] : 0.0;
  }
  return 0.0;
}

InexactResult solve_fb_inexact(const AffineOperator& op, const SolverConfig& cfg,
                               const DenseVector& z0, const ErrorSchedule& noise,
                               const InexactOptions& options) {
  noise.validate();
  if (options.late_window < 1) throw DomainError("solve_fb_inexact: late_window must be >= 1");
  if (options.reference) require_dim(options.reference->size(), op.dim(), "reference");

  InexactResult out;
  std::mt19937_64 rng(noise.seed);
  std::vector<double> noise_norms;
  std::function<void(int, DenseVector&)> perturb;
  if (noise.kind != ErrorSchedule::Kind::kNone) {
    perturb = [&](int k, DenseVector& z) {
      const double norm = noise.norm_at(k);
      noise_norms.push_back(norm);
      if (norm > 0.0) z += norm * random_unit(rng, z.size());
    };
  }
  std::vector<double> errors;
  IterateObserver observer;
  if (options.reference) {
    observer = [&](int k, const DenseVector& z) {
      if (k > 0) errors.push_back((z - *options.reference).norm());
    };
  }
  out.result = run_fb(op, cfg, z0, options.run_to_cap, perturb, observer);

  const auto window_begin = [&](std::size_t size) {
    return size > static_cast<std::size_t>(options.late_window)
               ? size - static_cast<std::size_t>(options.late_window)
               : std::size_t{0};
  };
  if (!noise_norms.empty()) {
    out.sup_noise = *std::max_element(noise_norms.begin(), noise_norms.end());
    out.sup_noise_late = *std::max_element(
        noise_norms.begin() + static_cast<std::ptrdiff_t>(window_begin(noise_norms.size())),
        noise_norms.end());
  }
  if (!errors.empty()) {
    out.max_late_error = *std::max_element(
        errors.begin() + static_cast<std::ptrdiff_t>(window_begin(errors.size())), errors.end());
    out.final_error = errors.back();
  }
  return out;
}

bool BatchEquilibrium::all_converged() const {
  return std::all_of(status.begin(), status.end(),
                     [](SolveStatus s) { return s == SolveStatus::kConverged; });
}

int BatchEquilibrium::max_iterations() const {
  return iterations.empty() ? 0 : *std::max_element(iterations.begin(), iterations.end());
}

double BatchEquilibrium::mean_iterations() const {
  if (iterations.empty()) return 0.0;
  return std::accumulate(iterations.begin(), iterations.end(), 0.0) /
         static_cast<double>(iterations.size());
}

BatchEquilibrium solve_fb_batch(const DenseMatrix& W, const DenseMatrix& C, double alpha,
                                const SolverConfig& cfg) {
  cfg.validate();
  require_square(W, "solve_fb_batch(W)");
  require_dim(C.rows(), W.rows(), "solve_fb_batch(C)");
  if (!(alpha > 0.0)) throw DomainError("solve_fb_batch: alpha must be positive");
  const Eigen::Index n = W.rows();
  const Eigen::Index batch = C.cols();

  BatchEquilibrium out;
  out.Z = DenseMatrix::Zero(n, batch);
  out.iterations.assign(static_cast<std::size_t>(batch), 0);
  out.final_residual.assign(static_cast<std::size_t>(batch), 0.0);
  out.status.assign(static_cast<std::size_t>(batch), SolveStatus::kMaxIterations);

  // Active columns are compacted into a working block so converged samples
  // stop costing matrix products.
  std::vector<Eigen::Index> active(static_cast<std::size_t>(batch));
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  DenseMatrix Z = DenseMatrix::Zero(n, batch);
  DenseMatrix Cw = C;
  DenseMatrix next(n, batch);

  for (int k = 0; k < cfg.max_iters && !active.empty(); ++k) {
    const auto width = static_cast<Eigen::Index>(active.size());
    next.resize(n, width);
    next.noalias() = (1.0 - alpha) * Z;
    next.noalias() += alpha * (W * Z);
    next += alpha * Cw;
    next = next.cwiseMax(0.0);

    std::vector<Eigen::Index> keep;
    keep.reserve(active.size());
    for (Eigen::Index j = 0; j < width; ++j) {
      const auto sample = static_cast<std::size_t>(active[static_cast<std::size_t>(j)]);
      out.iterations[sample] = k + 1;
      const auto col = next.col(j);
      const double norm = col.norm();
      if (!col.allFinite() || norm > kDivergenceNorm) {
        out.status[sample] = SolveStatus::kDiverged;
        out.final_residual[sample] = std::numeric_limits<double>::infinity();
        out.Z.col(static_cast<Eigen::Index>(sample)) = col;
        continue;
      }
      const double res = (col - Z.col(j)).norm() / std::max(norm, kResidualFloor);
      out.final_residual[sample] = res;
      if (res < cfg.tol) {
        out.status[sample] = SolveStatus::kConverged;
        out.Z.col(static_cast<Eigen::Index>(sample)) = col;
      } else {
        keep.push_back(j);
      }
    }
    if (static_cast<Eigen::Index>(keep.size()) == width) {
      Z.swap(next);
      continue;
    }
    const auto kept = static_cast<Eigen::Index>(keep.size());
    DenseMatrix Zc(n, kept), Cc(n, kept);
    std::vector<Eigen::Index> next_active(keep.size());
    for (Eigen::Index j = 0; j < kept; ++j) {
      const Eigen::Index src = keep[static_cast<std::size_t>(j)];
      Zc.col(j) = next.col(src);
      Cc.col(j) = Cw.col(src);
      next_active[static_cast<std::size_t>(j)] = active[static_cast<std::size_t>(src)];
    }
    Z.swap(Zc);
    Cw.swap(Cc);
    active.swap(next_active);
  }
  for (std::size_t j = 0; j < active.size(); ++j) {
    out.Z.col(active[j]) = Z.col(static_cast<Eigen::Index>(j));
  }
  return out;
}

}  // namespace mondeq
