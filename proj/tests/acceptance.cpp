// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. Criteria 1-7 are property checks on random
// instances; 8-13 train on MNIST (models are cached in --cache-dir).

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mondeq/certify.hpp"
#include "mondeq/experiments.hpp"
#include "mondeq/serialize.hpp"
#include "mondeq/spectral.hpp"
#include "mondeq/solvers.hpp"
#include "mondeq/train.hpp"
#include "oracles.hpp"

using namespace mondeq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

SolverConfig solver_at(double tol, int max_iters, std::optional<double> alpha = std::nullopt) {
  SolverConfig cfg;
  cfg.tol = tol;
  cfg.max_iters = max_iters;
  cfg.alpha = alpha;
  return cfg;
}

DenseVector equilibrium(const DenseMatrix& W, const DenseVector& c, double tol = 1e-12) {
  return solve_fb(AffineOperator{W, c}, solver_at(tol, 1000000), DenseVector::Zero(W.rows())).z_star;
}

// ---------------------------------------------------------------- 1 --
Outcome margin_and_lipschitz_bounds() {
  std::mt19937_64 rng(1001);
  int margin_violations = 0, lipschitz_violations = 0, trials = 0;
  const int sizes[] = {5, 20, 100};
  for (int t = 0; t < 500; ++t) {
    const Eigen::Index n = sizes[t % 3];
    const double m = 0.02 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
    const DenseMatrix W = oracle::random_weight(n, m, rng);
    const double scale = std::uniform_real_distribution<double>(1e-4, 0.5)(rng);
    DenseMatrix dW = oracle::random_matrix(n, n, rng);
    dW *= scale / oracle::sigma_max(dW);
    const double dn = spectral_norm(dW);
    const double m_w = margin(W);
    const double L = lipschitz(W);
    const double m_tilde = margin(W + dW);
    const double L_tilde = lipschitz(W + dW);
    if (m_tilde < margin_perturbation_bound(m_w, dn) - 1e-9) ++margin_violations;
    const auto [lo, hi] = lipschitz_perturbation_interval(L, dn);
    if (L_tilde < lo - 1e-9 || L_tilde > hi + 1e-9) ++lipschitz_violations;
    ++trials;
  }
  std::ostringstream d;
  d << trials << " pairs, margin violations " << margin_violations << ", Lipschitz violations "
    << lipschitz_violations;
  return {margin_violations == 0 && lipschitz_violations == 0, d.str()};
}

// Shared instances for criteria 2 and 5.
struct DisplacementInstance {
  DenseMatrix W, dW;
  DenseVector c;
  double m = 0.0, dn = 0.0;
};

std::vector<DisplacementInstance> displacement_instances() {
  std::mt19937_64 rng(1002);
  std::vector<DisplacementInstance> out;
  for (int t = 0; t < 1000; ++t) {
    DisplacementInstance inst;
    const Eigen::Index n = 2 + t % 7;
    const double m = 0.05 + 0.45 * std::uniform_real_distribution<double>(0, 1)(rng);
    inst.W = oracle::random_weight(n, m, rng);
    inst.m = margin(inst.W);
    DenseMatrix dW = oracle::random_matrix(n, n, rng);
    const double frac = std::uniform_real_distribution<double>(0.01, 0.95)(rng);
    dW *= frac * inst.m / oracle::sigma_max(dW);
    inst.dW = dW;
    inst.dn = spectral_norm(dW);
    inst.c = oracle::random_vector(n, rng);
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------- 2 --
Outcome displacement_bound_check(const std::vector<DisplacementInstance>& instances) {
  int violations = 0, unconverged = 0;
  double worst_zero = 0.0;
  for (const auto& inst : instances) {
    const auto n = inst.W.rows();
    const SolverConfig cfg = solver_at(1e-12, 1000000);
    const EquilibriumResult z = solve_fb(AffineOperator{inst.W, inst.c}, cfg, DenseVector::Zero(n));
    const EquilibriumResult zq =
        solve_fb(AffineOperator{inst.W + inst.dW, inst.c}, cfg, DenseVector::Zero(n));
    if (!z.converged || !zq.converged) {
      ++unconverged;
      continue;
    }
    const double bound = *displacement_bound(inst.dn, inst.m, zq.z_star.norm());
    if ((z.z_star - zq.z_star).norm() > bound + 1e-10) ++violations;
    const EquilibriumResult same = solve_fb(AffineOperator{inst.W, inst.c}, cfg, DenseVector::Zero(n));
    worst_zero = std::max(worst_zero, (same.z_star - z.z_star).norm());
  }
  std::ostringstream d;
  d << instances.size() << " instances, violations " << violations << ", unconverged " << unconverged
    << ", zero-perturbation displacement " << worst_zero;
  return {violations == 0 && unconverged == 0 && worst_zero <= 1e-10, d.str()};
}

// ---------------------------------------------------------------- 3 --
Outcome contraction_moduli() {
  std::mt19937_64 rng(1003);
  int fb_checked = 0, pr_checked = 0, fb_viol = 0, pr_viol = 0;
  double worst_fb = -1.0, worst_pr = -1.0;
  for (int t = 0; t < 200 && (fb_checked < 60); ++t) {
    const Eigen::Index n = 5 + t % 16;
    const DenseMatrix W = oracle::random_weight(n, 0.1 + 0.3 * (t % 5) / 4.0, rng);
    const DenseMatrix Wq = quantize_matrix(W, 3 + t % 8).W_q;
    const double mq = margin(Wq), Lq = lipschitz(Wq);
    if (!(mq > 0.0)) continue;
    const DenseVector c = oracle::random_vector(n, rng);
    const AffineOperator op{Wq, c};

    const double alpha = select_alpha_fb(mq, Lq);
    const double r = fb_modulus(alpha, mq, Lq);
    const DenseVector z_star = solve_fb(op, solver_at(1e-15, 2000000, alpha), DenseVector::Zero(n)).z_star;
    std::vector<double> errs;
    solve_fb(op, solver_at(1e-15, 4000, alpha), DenseVector::Zero(n),
             [&](int, const DenseVector& z) { errs.push_back((z - z_star).norm()); });
    const double floor = 1e-9 * std::max(1.0, z_star.norm());
    for (std::size_t k = 0; k + 1 < errs.size() && errs[k] > floor; ++k) {
      const double ratio = errs[k + 1] / errs[k];
      worst_fb = std::max(worst_fb, ratio - r);
      if (ratio > r + 1e-6) ++fb_viol;
    }
    ++fb_checked;

    const double rho = pr_modulus(1.0, mq, Lq);
    std::vector<DenseVector> us;
    solve_pr(op, solver_at(1e-15, 200000), DenseVector::Zero(n),
             [&](int, const DenseVector& u) { us.push_back(u); });
    const DenseVector u_star = us.back();
    for (std::size_t k = 0; k + 1 < us.size(); ++k) {
      const double e = (us[k] - u_star).norm();
      if (e <= 1e-9 * std::max(1.0, u_star.norm())) break;
      const double ratio = (us[k + 1] - u_star).norm() / e;
      worst_pr = std::max(worst_pr, ratio - rho);
      if (ratio > rho + 1e-6) ++pr_viol;
    }
    ++pr_checked;
  }
  std::ostringstream d;
  d << fb_checked << " FB / " << pr_checked << " PR quantized instances, violations " << fb_viol << " / "
    << pr_viol << ", max(ratio - modulus) " << worst_fb << " / " << worst_pr;
  return {fb_viol == 0 && pr_viol == 0 && fb_checked >= 30, d.str()};
}

// ---------------------------------------------------------------- 4 --
Outcome inexact_iteration() {
  int constant_runs = 0, constant_viol = 0, geometric_runs = 0, geometric_viol = 0;
  double worst_geometric = 0.0;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const AffineOperator op = random_instance(40, 0.25, 2000 + s);
    InexactConfig cfg;
    cfg.samples = 1;
    cfg.seed = s;
    cfg.iterations = 6000;
    for (const InexactRow& row : inexact_experiment(op.W, {op.c}, cfg)) {
      if (row.schedule == "constant") {
        ++constant_runs;
        if (!row.satisfied) ++constant_viol;
      } else {
        ++geometric_runs;
        worst_geometric = std::max(worst_geometric, row.final_error);
        if (!(row.final_error <= 1e-8)) ++geometric_viol;
      }
    }
  }
  std::ostringstream d;
  d << constant_runs << " constant-noise runs with " << constant_viol << " bound violations, "
    << geometric_runs << " geometric runs, worst final error " << worst_geometric;
  return {constant_viol == 0 && geometric_viol == 0, d.str()};
}

// ---------------------------------------------------------------- 5 --
Outcome relative_bound_and_sensitivity(const std::vector<DisplacementInstance>& instances) {
  int violations = 0, evaluated = 0;
  for (const auto& inst : instances) {
    const DenseVector z = equilibrium(inst.W, inst.c);
    const DenseVector zq = equilibrium(inst.W + inst.dW, inst.c);
    if (z.norm() == 0.0) continue;
    ++evaluated;
    const RelativeBound rb = relative_error_bound(inst.dn, inst.m);
    if ((z - zq).norm() / z.norm() > rb.value + 1e-9) ++violations;
  }
  std::mt19937_64 rng(1005);
  int sens_viol = 0;
  double worst_excess = -1e300;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 2 + t % 7;
    const DenseMatrix W = oracle::random_weight(n, 0.1 + 0.004 * t, rng);
    const DenseVector c = oracle::random_vector(n, rng);
    DenseMatrix E = oracle::random_matrix(n, n, rng);
    E /= spectral_norm(E);
    const double h = 1e-6;
    const DenseVector z = equilibrium(W, c, 1e-14);
    const double sens =
        (equilibrium(W + h * E, c, 1e-14) - equilibrium(W - h * E, c, 1e-14)).norm() / (2 * h);
    const double bound = condition_numbers(margin(W), spectral_norm(W), z.norm())->kappa_abs_bound;
    worst_excess = std::max(worst_excess, sens - bound);
    if (sens > bound + 1e-3) ++sens_viol;
  }
  std::ostringstream d;
  d << evaluated << " relative-bound instances with " << violations << " violations; 100 sensitivity probes with "
    << sens_viol << " violations (max excess " << worst_excess << ")";
  return {violations == 0 && sens_viol == 0, d.str()};
}

// ---------------------------------------------------------------- 6 --
double oracle_loss(const MonDEQParams& p, const DenseVector& x, int label) {
  const DenseMatrix W = oracle::monotone_weight(p.A, p.B, std::log1p(std::exp(p.m_raw)));
  const DenseVector z = oracle::equilibrium_by_active_set(W, p.U * x + p.b);
  if (z.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const DenseVector logits = p.head_weight * z + p.head_bias;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) sum += std::exp(logits(k));
  return std::log(sum) - logits(label);
}

Outcome gradients_and_backward() {
  int instances = 0, bad_entries = 0, entries = 0, slow_backward = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; instances < 20; ++seed) {
    MonDEQParams p = init_params(10, 5, 3, seed);
    p.m_raw = 0.3;
    std::mt19937_64 rng(seed);
    p.b = oracle::random_vector(10, rng, 0.5);
    const DenseVector x = oracle::random_vector(5, rng).cwiseAbs();
    const int label = static_cast<int>(seed % 3);
    const DenseMatrix W = p.weight();
    const DenseVector z = oracle::equilibrium_by_active_set(W, p.U * x + p.b);
    if (z.size() == 0) continue;
    if ((W * z + p.U * x + p.b).cwiseAbs().minCoeff() < 1e-2) continue;  // active set not stable
    ++instances;

    const LossAndGrad r = loss_and_grad(p, x, label, solver_at(1e-14, 1000000));
    if (r.backward.iterations > 2 * std::max(r.forward.iterations, 1)) ++slow_backward;
    auto check = [&](auto& tensor, const auto& analytic) {
      for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
        for (Eigen::Index j = 0; j < tensor.cols(); ++j) {
          const double fd = oracle::central_difference([&] { return oracle_loss(p, x, label); }, tensor(i, j), 1e-5);
          const double a = analytic(i, j);
          const double rel = std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-6});
          worst = std::max(worst, rel);
          ++entries;
          if (!(rel < 1e-4)) ++bad_entries;
        }
      }
    };
    check(p.A, r.grads.A);
    check(p.B, r.grads.B);
    check(p.U, r.grads.U);
    check(p.b, r.grads.b);
    check(p.head_weight, r.grads.head_weight);
    check(p.head_bias, r.grads.head_bias);
    const double fd_m = oracle::central_difference([&] { return oracle_loss(p, x, label); }, p.m_raw, 1e-5);
    const double rel_m = std::abs(fd_m - r.grads.m_raw) / std::max({std::abs(fd_m), std::abs(r.grads.m_raw), 1e-6});
    worst = std::max(worst, rel_m);
    ++entries;
    if (!(rel_m < 1e-4)) ++bad_entries;
  }
  // Margin identity under transposition, exact.
  std::mt19937_64 rng(1006);
  int identity_fail = 0;
  for (int t = 0; t < 100; ++t) {
    const DenseMatrix W = oracle::random_matrix(1 + t % 30, 1 + t % 30, rng);
    if (margin(W) != margin(W.transpose())) ++identity_fail;
  }
  std::ostringstream d;
  d << instances << " instances, " << entries << " gradient entries, " << bad_entries
    << " above 1e-4 (worst " << worst << "), backward > 2x forward iterations: " << slow_backward
    << ", transpose margin mismatches: " << identity_fail;
  return {bad_entries == 0 && slow_backward == 0 && identity_fail == 0, d.str()};
}

// ---------------------------------------------------------------- 7 --
Outcome solver_equivalence() {
  std::mt19937_64 rng(1007);
  int disagree = 0, inclusion_fail = 0, unconverged = 0;
  double worst_gap = 0.0, worst_inclusion = 0.0;
  const double tol = 1e-10;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 3 + t % 30;
    const DenseMatrix W = oracle::random_weight(n, 0.05 + 0.005 * t, rng);
    const AffineOperator op{W, oracle::random_vector(n, rng)};
    const SolverConfig cfg = solver_at(tol, 1000000);
    const EquilibriumResult fb = solve_fb(op, cfg, DenseVector::Zero(n));
    const EquilibriumResult pr = solve_pr(op, cfg, DenseVector::Zero(n));
    if (!fb.converged || !pr.converged) {
      ++unconverged;
      continue;
    }
    const double gap = (fb.z_star - pr.z_star).norm();
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-6) ++disagree;
    // Complementarity form of 0 in F(z) + N(z): z >= 0, alpha F(z) >= 0,
    // z_i alpha F_i(z) = 0, measured as |min(z, alpha F(z))|.
    for (const EquilibriumResult* res : {&fb, &pr}) {
      const DenseVector z = res->z_star;
      const double alpha = select_alpha_fb(margin(W), lipschitz(W));
      const DenseVector scaledF = alpha * apply_F(op, z);
      const double natural = z.cwiseMin(scaledF).norm();
      const double limit = 10.0 * tol * std::max(z.norm(), 1.0);
      worst_inclusion = std::max(worst_inclusion, natural / std::max(z.norm(), 1.0));
      if (natural > limit || z.minCoeff() < -limit) ++inclusion_fail;
    }
  }
  std::ostringstream d;
  d << "100 instances, FB/PR disagreements " << disagree << " (max gap " << worst_gap
    << "), inclusion failures " << inclusion_fail << " (max scaled residual " << worst_inclusion
    << "), unconverged " << unconverged;
  return {disagree == 0 && inclusion_fail == 0 && unconverged == 0, d.str()};
}

// ------------------------------------------------------------ MNIST --
struct MnistContext {
  Dataset train_set, test_set;
  MonDEQParams float_model, qat4_model;
  TrainResult float_run, qat4_run;
  std::string qat4_error;
  bool subset = false;
};

MonDEQParams cached_training(const fs::path& file, const Dataset& train_set, const Dataset& test_set,
                             const TrainConfig& cfg, std::string* error) {
  if (fs::exists(file)) {
    std::cout << "  using cached model " << file << std::endl;
    return load_model(file);
  }
  std::cout << "  training " << file.filename() << " (" << cfg.to_json().dump() << ")" << std::endl;
  try {
    const TrainResult r = train(train_set, &test_set, cfg, [](const EpochLog& row) {
      std::cout << "    epoch " << row.epoch << " loss " << row.loss << " test "
                << (row.test_accuracy ? *row.test_accuracy : -1.0) << " m " << row.m << " L " << row.L
                << (row.m_tilde ? " m~ " + std::to_string(*row.m_tilde) : std::string()) << " fail "
                << row.failed_batches << " fwd " << row.mean_forward_iters << " " << row.seconds << "s"
                << std::endl;
    });
    save_model(file, r.params);
    return r.params;
  } catch (const TrainingError& e) {
    if (error) *error = e.what();
    throw;
  }
}

double float_accuracy(const MnistContext& ctx, const SolverConfig& solver) {
  return evaluate(ctx.float_model, ctx.float_model.weight(), ctx.test_set, solver).accuracy;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string data_dir = default_data_dir().string();
  std::string cache_dir = "acceptance_cache";
  std::size_t subset = 0;
  std::uint64_t seed = 0;
  app.add_option("--data-dir", data_dir, "MNIST directory");
  app.add_option("--cache-dir", cache_dir, "where trained models are cached");
  app.add_option("--subset", subset, "train on the first N training images with relaxed bands");
  app.add_option("--seed", seed, "training seed");
  CLI11_PARSE(app, argc, argv);

  std::vector<std::pair<int, Outcome>> results;
  auto run = [&](int id, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "CRITERION " << id << " " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail << " ["
              << fmt("%.1f", secs) << " s]" << std::endl;
    results.emplace_back(id, o);
  };

  run(1, margin_and_lipschitz_bounds);
  const auto instances = displacement_instances();
  run(2, [&] { return displacement_bound_check(instances); });
  run(3, contraction_moduli);
  run(4, inexact_iteration);
  run(5, [&] { return relative_bound_and_sensitivity(instances); });
  run(6, gradients_and_backward);
  run(7, solver_equivalence);

  MnistContext ctx;
  ctx.subset = subset > 0;
  std::string setup_error;
  try {
    ctx.train_set = load_mnist(data_dir, MnistSplit::kTrain);
    ctx.test_set = load_mnist(data_dir, MnistSplit::kTest);
    fs::create_directories(cache_dir);
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.train_subset = subset;
    const std::string tag = "s" + std::to_string(seed) + "_n" + std::to_string(subset);
    ctx.float_model = cached_training(fs::path(cache_dir) / ("float_" + tag + ".bin"), ctx.train_set,
                                      ctx.test_set, cfg, nullptr);
    TrainConfig qcfg = cfg;
    qcfg.bits = 4;
    try {
      ctx.qat4_model = cached_training(fs::path(cache_dir) / ("qat4_" + tag + ".bin"), ctx.train_set,
                                       ctx.test_set, qcfg, &ctx.qat4_error);
    } catch (const TrainingError&) {
    }
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  const double acc_band = ctx.subset ? 0.95 : 0.975;
  const double qat_band = ctx.subset ? 0.92 : 0.95;
  const SolverConfig default_solver = solver_at(1e-5, 2000);

  auto needs_data = [&](const std::function<Outcome()>& fn) {
    return [&, fn] {
      if (!setup_error.empty()) return Outcome{false, "MNIST setup failed: " + setup_error};
      return fn();
    };
  };

  run(8, needs_data([&] {
    const DenseMatrix W = ctx.float_model.weight();
    const double m = margin(W), L = lipschitz(W);
    const double acc = float_accuracy(ctx, default_solver);
    std::ostringstream d;
    d << "test accuracy " << fmt("%.4f", acc) << " (>= " << acc_band << "), " << kappa_summary(m, L);
    return Outcome{acc >= acc_band && m >= 0.05 && m <= 0.6 && L / m >= 3.0 && L / m <= 30.0, d.str()};
  }));

  SweepReport sweep;
  bool sweep_ok = false;
  run(9, needs_data([&] {
    SweepConfig cfg;
    cfg.samples = 64;
    cfg.seed = seed;
    cfg.solver = default_solver;
    sweep = certify_sweep(ctx.float_model, ctx.test_set, cfg);
    sweep_ok = true;
    const auto threshold = phase_threshold(sweep.rows);
    std::ostringstream d;
    d << "b* = " << (threshold ? std::to_string(*threshold) : std::string("none")) << "; converged:";
    for (const auto& r : sweep.rows) {
      if (r.bits <= 8) d << " " << r.bits << "b=" << (r.converged ? "y" : "n") << "(m~ " << fmt("%.3f", r.m_tilde) << ")";
    }
    bool halving = true;
    double lo = 1e9, hi = -1e9;
    for (const auto& r : sweep.rows) {
      if (r.bits < 6 || r.bits >= 16) continue;
      for (const auto& next : sweep.rows) {
        if (next.bits != r.bits + 1) continue;
        const double f = next.ratio / r.ratio;
        lo = std::min(lo, f);
        hi = std::max(hi, f);
        if (f < 0.4 || f > 0.6) halving = false;
      }
    }
    d << "; per-bit ratio factor over 6-16 in [" << fmt("%.3f", lo) << ", " << fmt("%.3f", hi) << "]";
    const bool in_band = threshold && *threshold >= 4 && *threshold <= 6;
    return Outcome{in_band && halving, d.str()};
  }));

  run(10, needs_data([&] {
    if (!sweep_ok) return Outcome{false, "sweep unavailable"};
    const auto threshold = phase_threshold(sweep.rows);
    const SweepRow* smallest = nullptr;
    const SweepRow* eight = nullptr;
    for (const auto& r : sweep.rows) {
      if (r.converged && (!smallest || r.bits < smallest->bits)) smallest = &r;
      if (r.bits == 8) eight = &r;
    }
    if (!smallest || !eight) return Outcome{false, "no converging bit-width"};
    std::ostringstream d;
    d << "mean iterations at " << smallest->bits << " bits " << fmt("%.1f", smallest->mean_iterations)
      << " vs 8 bits " << fmt("%.1f", eight->mean_iterations)
      << (threshold ? "" : " (no clean threshold)");
    return Outcome{smallest->mean_iterations >= 2.0 * eight->mean_iterations, d.str()};
  }));

  run(11, needs_data([&] {
    DisplaceConfig cfg;
    cfg.samples = 2560;
    cfg.seed = seed;
    cfg.solver = default_solver;
    const DisplaceReport main = displacement_experiment(ctx.float_model, ctx.test_set, cfg);
    DisplaceConfig tight = cfg;
    tight.samples = 1024;
    tight.solver = solver_at(1e-10, 200000);
    const DisplaceReport control = displacement_experiment(ctx.float_model, ctx.test_set, tight);
    bool ok = true;
    std::ostringstream d;
    for (std::size_t i = 0; i < main.summaries.size(); ++i) {
      const auto& s = main.summaries[i];
      const auto& c = control.summaries[i];
      const double slack = s.mean_slack.value_or(0.0);
      d << s.bits << "b: " << fmt("%.4f", s.satisfaction_rate) << " of " << s.evaluated << " (ctrl "
        << fmt("%.4f", c.satisfaction_rate) << " of " << c.evaluated << "), slack " << fmt("%.2f", slack)
        << "; ";
      ok = ok && s.evaluated >= 512 && s.satisfaction_rate >= 0.90 && c.satisfaction_rate >= 0.999 &&
           slack >= 2.0 && slack <= 8.0;
    }
    return Outcome{ok, d.str()};
  }));

  run(12, needs_data([&] {
    const QatCell ptq4 = evaluate_quantized(ctx.float_model, ctx.test_set, 4, default_solver, "ptq");
    const QatCell ptq8 = evaluate_quantized(ctx.float_model, ctx.test_set, 8, default_solver, "ptq");
    const double facc = float_accuracy(ctx, default_solver);
    std::ostringstream d;
    d << "PTQ4 m~ " << fmt("%.4f", ptq4.m_tilde) << " converged " << fmt("%.3f", ptq4.converged_fraction)
      << "; ";
    bool ok = ptq4.m_tilde < 0.0 && !ptq4.converged;
    if (!ctx.qat4_error.empty()) {
      d << "QAT4 training failed: " << ctx.qat4_error << "; ";
      ok = false;
    } else {
      const QatCell qat4 = evaluate_quantized(ctx.qat4_model, ctx.test_set, 4, default_solver, "qat");
      d << "QAT4 m~ " << fmt("%.4f", qat4.m_tilde) << " converged " << fmt("%.3f", qat4.converged_fraction)
        << " accuracy " << fmt("%.4f", qat4.accuracy.value_or(-1.0)) << " (>= " << qat_band << "); ";
      ok = ok && qat4.m_tilde > 0.0 && qat4.converged && qat4.accuracy.value_or(0.0) >= qat_band;
    }
    const double gap = ptq8.accuracy ? std::abs(*ptq8.accuracy - facc) : 1.0;
    d << "PTQ8 accuracy " << fmt("%.4f", ptq8.accuracy.value_or(-1.0)) << " vs float " << fmt("%.4f", facc);
    ok = ok && gap <= 0.005;
    return Outcome{ok, d.str()};
  }));

  run(13, needs_data([&] {
    const DenseMatrix W = ctx.float_model.weight();
    const auto bytes = pack_quantized_weight(quantize_matrix(W, 8));
    const double fraction = static_cast<double>(bytes.size()) / float32_payload_bytes(W.rows(), W.cols());
    const PackedWeight back = unpack_quantized_weight(bytes);
    const bool exact = back.W_q == quantize_matrix(W, 8).W_q;
    std::ostringstream d;
    d << bytes.size() << " bytes vs " << float32_payload_bytes(W.rows(), W.cols()) << " float32 bytes ("
      << fmt("%.2f", 100.0 * fraction) << "%), decode exact: " << (exact ? "yes" : "no");
    return Outcome{fraction <= 0.26 && exact, d.str()};
  }));

  int failed = 0;
  for (const auto& [id, o] : results) failed += o.pass ? 0 : 1;
  std::cout << (failed == 0 ? "ALL CRITERIA PASS" : std::to_string(failed) + " CRITERIA FAIL") << std::endl;
  return failed == 0 ? 0 : 1;
}
