#include <gtest/gtest.h>

#include "mondeq/quant.hpp"
#include "mondeq/spectral.hpp"
#include "mondeq/train.hpp"
#include "oracles.hpp"

using namespace mondeq;

namespace {

SolverConfig tight() {
  SolverConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iters = 200000;
  return cfg;
}

// Loss through an independent route: active-set dense solve of the
// equilibrium, then a plain log-sum-exp.
double oracle_loss_with_weight(const MonDEQParams& p, const DenseMatrix& W, const DenseVector& x,
                               int label) {
  const DenseVector c = p.U * x + p.b;
  const DenseVector z = oracle::equilibrium_by_active_set(W, c);
  EXPECT_EQ(z.size(), W.rows());
  const DenseVector logits = p.head_weight * z + p.head_bias;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) sum += std::exp(logits(k));
  return std::log(sum) - logits(label);
}

double oracle_loss(const MonDEQParams& p, const DenseVector& x, int label) {
  return oracle_loss_with_weight(p, oracle::monotone_weight(p.A, p.B, std::log1p(std::exp(p.m_raw))), x,
                                 label);
}

// Parameters and an input whose equilibrium has no coordinate near zero, so
// the active set is stable under the difference probe.
struct SmoothInstance {
  MonDEQParams params;
  DenseVector x;
  int label = 1;
};

SmoothInstance smooth_instance(std::uint64_t seed) {
  for (std::uint64_t s = seed;; s += 1000) {
    SmoothInstance inst;
    inst.params = init_params(10, 5, 3, s);
    inst.params.m_raw = 0.3;
    std::mt19937_64 rng(s);
    inst.params.b = oracle::random_vector(10, rng, 0.5);
    inst.x = oracle::random_vector(5, rng).cwiseAbs();
    const DenseMatrix W = inst.params.weight();
    const DenseVector z =
        oracle::equilibrium_by_active_set(W, inst.params.U * inst.x + inst.params.b);
    if (z.size() == 0) continue;
    const DenseVector pre = W * z + inst.params.U * inst.x + inst.params.b;
    if (pre.cwiseAbs().minCoeff() > 1e-2 && (z.array() > 0).count() >= 3) return inst;
  }
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

template <typename Tensor, typename Grad>
void check_tensor(const char* name, Tensor& tensor, const Grad& analytic,
                  const std::function<double()>& loss, double eps = 1e-5) {
  for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
    for (Eigen::Index j = 0; j < tensor.cols(); ++j) {
      const double fd = oracle::central_difference(loss, tensor(i, j), eps);
      EXPECT_LT(relative_error(fd, analytic(i, j)), 1e-4) << name << "(" << i << "," << j << ") fd=" << fd
                                                          << " analytic=" << analytic(i, j);
    }
  }
}

}  // namespace

TEST(ActiveMask, StrictThreshold) {
  DenseVector z(4);
  z << 0.0, 1e-300, -1.0, 2.0;
  DenseVector expected(4);
  expected << 0.0, 1.0, 0.0, 1.0;
  EXPECT_EQ(active_mask(z), expected);
}

TEST(BackwardSolve, ScalarExample) {
  const DenseMatrix W = DenseMatrix::Constant(1, 1, 0.0);
  const EquilibriumResult r = backward_solve(W, DenseVector::Ones(1), DenseVector::Constant(1, 0.7), tight());
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.z_star(0), 0.7, 1e-12);
}

TEST(BackwardSolve, InactiveMaskGivesZero) {
  std::mt19937_64 rng(70);
  const DenseMatrix W = oracle::random_weight(6, 0.3, rng);
  const EquilibriumResult r =
      backward_solve(W, DenseVector::Zero(6), oracle::random_vector(6, rng), SolverConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.z_star, DenseVector::Zero(6));
}

TEST(BackwardSolve, MatchesDenseAdjointSolve) {
  std::mt19937_64 rng(71);
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix W = oracle::random_weight(6, 0.2, rng);
    DenseVector mask(6);
    for (Eigen::Index i = 0; i < 6; ++i) mask(i) = (rng() % 3 == 0) ? 0.0 : 1.0;
    const DenseVector g = oracle::random_vector(6, rng);
    const DenseMatrix D = mask.asDiagonal();
    const DenseVector ref = oracle::solve(identity(6) - D * W.transpose(), D * g);
    const EquilibriumResult r = backward_solve(W, mask, g, tight());
    ASSERT_TRUE(r.converged);
    EXPECT_LE((r.z_star - ref).norm(), 1e-10 * std::max(1.0, ref.norm()));
  }
}

TEST(BackwardSolve, RejectsNonBinaryMask) {
  EXPECT_THROW(backward_solve(identity(2) * 0.1, DenseVector::Constant(2, 0.5), DenseVector::Ones(2),
                              SolverConfig{}),
               DomainError);
}

TEST(BackwardBatch, MatchesSingleSolves) {
  std::mt19937_64 rng(72);
  const DenseMatrix W = oracle::random_weight(8, 0.25, rng);
  const DenseMatrix G = oracle::random_matrix(8, 5, rng);
  DenseMatrix masks = DenseMatrix::Ones(8, 5);
  masks(2, 1) = masks(5, 3) = masks(0, 4) = 0.0;
  const double alpha = select_alpha_fb(oracle::margin(W), oracle::lipschitz(W));
  SolverConfig cfg;
  cfg.alpha = alpha;
  cfg.tol = 1e-12;
  cfg.max_iters = 100000;
  const BatchEquilibrium batch = backward_solve_batch(W, masks, G, alpha, cfg);
  ASSERT_TRUE(batch.all_converged());
  for (Eigen::Index j = 0; j < 5; ++j) {
    const EquilibriumResult one = backward_solve(W, masks.col(j), G.col(j), cfg);
    EXPECT_LE((batch.Z.col(j) - one.z_star).norm(), 1e-10);
  }
}

TEST(MarginIdentity, TransposeKeepsTheMargin) {
  std::mt19937_64 rng(73);
  for (int t = 0; t < 50; ++t) {
    const DenseMatrix W = oracle::random_matrix(9, 9, rng);
    EXPECT_EQ(sym(identity(9) - W), sym(identity(9) - W.transpose()));
    EXPECT_EQ(margin(W), margin(W.transpose()));
  }
}

TEST(ParamGradients, ZeroAdjointGivesZeroWeightGradients) {
  const MonDEQParams p = init_params(4, 3, 2, 1);
  BackwardContext ctx;
  ctx.z_star = DenseVector::Ones(4);
  ctx.mask = DenseVector::Ones(4);
  ctx.W_used = p.weight();
  ctx.x = DenseVector::Ones(3);
  ctx.logits_grad = DenseVector::Zero(2);
  const ParamGradients g = param_gradients(p, ctx, DenseVector::Zero(4));
  EXPECT_EQ(g.A, DenseMatrix::Zero(4, 4));
  EXPECT_EQ(g.B, DenseMatrix::Zero(4, 4));
  EXPECT_EQ(g.m_raw, 0.0);
  EXPECT_EQ(g.U, DenseMatrix::Zero(4, 3));
  EXPECT_EQ(g.b, DenseVector::Zero(4));
}

TEST(ParamGradients, ScalarCase) {
  MonDEQParams p = init_params(1, 1, 2, 2);
  p.A(0, 0) = 0.5;
  p.m_raw = 0.0;
  BackwardContext ctx;
  ctx.z_star = DenseVector::Constant(1, 2.0);
  ctx.mask = DenseVector::Ones(1);
  ctx.W_used = p.weight();
  ctx.x = DenseVector::Constant(1, 3.0);
  ctx.logits_grad = DenseVector::Zero(2);
  const ParamGradients g = param_gradients(p, ctx, DenseVector::Constant(1, 0.25));
  // dL/dW = v z = 0.5; W = (1 - m) - a^2 + b - b.
  EXPECT_DOUBLE_EQ(g.A(0, 0), -2.0 * 0.5 * 0.5);
  EXPECT_DOUBLE_EQ(g.B(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.m_raw, -0.5 * 0.5);
  EXPECT_DOUBLE_EQ(g.U(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(g.b(0), 0.25);
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
  DenseVector grad;
  EXPECT_NEAR(softmax_cross_entropy(DenseVector::Zero(10), 3, &grad), std::log(10.0), 1e-15);
  EXPECT_NEAR(grad(3), 0.1 - 1.0, 1e-15);
  EXPECT_NEAR(grad(0), 0.1, 1e-15);
  EXPECT_NEAR(grad.sum(), 0.0, 1e-15);
  EXPECT_THROW(softmax_cross_entropy(DenseVector::Zero(3), 3), DomainError);
}

TEST(SoftmaxCrossEntropy, MonotoneInCorrectLogit) {
  double prev = std::numeric_limits<double>::infinity();
  for (double ramp = -5.0; ramp <= 50.0; ramp += 1.0) {
    DenseVector logits = DenseVector::Zero(4);
    logits(2) = ramp;
    const double loss = softmax_cross_entropy(logits, 2);
    EXPECT_LE(loss, prev);
    EXPECT_GE(loss, 0.0);
    prev = loss;
  }
  EXPECT_LT(prev, 1e-20);
}

TEST(LossAndGrad, UniformLogitsGiveLogClasses) {
  MonDEQParams p = init_params(6, 4, 10, 3);
  p.head_weight.setZero();
  p.head_bias.setZero();
  p.b = DenseVector::Constant(6, -100.0);  // z* = 0
  const LossAndGrad r = loss_and_grad(p, DenseVector::Constant(4, 0.5), 7, SolverConfig{});
  EXPECT_NEAR(r.loss, std::log(10.0), 1e-12);
  EXPECT_EQ(r.forward.z_star, DenseVector::Zero(6));
}

TEST(LossAndGrad, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SmoothInstance inst = smooth_instance(seed);
    MonDEQParams& p = inst.params;
    const LossAndGrad r = loss_and_grad(p, inst.x, inst.label, tight());
    EXPECT_NEAR(r.loss, oracle_loss(p, inst.x, inst.label), 1e-10);
    const std::function<double()> loss = [&] { return oracle_loss(p, inst.x, inst.label); };
    check_tensor("A", p.A, r.grads.A, loss);
    check_tensor("B", p.B, r.grads.B, loss);
    check_tensor("U", p.U, r.grads.U, loss);
    check_tensor("b", p.b, r.grads.b, loss);
    check_tensor("head_weight", p.head_weight, r.grads.head_weight, loss);
    check_tensor("head_bias", p.head_bias, r.grads.head_bias, loss);
    const double fd_m = oracle::central_difference(loss, p.m_raw, 1e-5);
    EXPECT_LT(relative_error(fd_m, r.grads.m_raw), 1e-4);
  }
}

TEST(LossAndGrad, QatGradientIsTheQuantizedWeightGradientPassedThrough) {
  SmoothInstance inst = smooth_instance(5);
  MonDEQParams& p = inst.params;
  const int bits = 10;
  const LossAndGrad r = loss_and_grad(p, inst.x, inst.label, tight(), bits);
  DenseMatrix Wq = quantize_matrix(p.weight(), bits).W_q;
  EXPECT_NEAR(r.loss, oracle_loss_with_weight(p, Wq, inst.x, inst.label), 1e-10);

  // Finite differences with respect to the entries of the quantized weight.
  const std::function<double()> loss = [&] { return oracle_loss_with_weight(p, Wq, inst.x, inst.label); };
  DenseMatrix G(10, 10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) G(i, j) = oracle::central_difference(loss, Wq(i, j), 1e-6);
  }
  const DenseMatrix expect_B = G - G.transpose();
  const DenseMatrix expect_A = -p.A * (G + G.transpose());
  const double expect_m = -G.trace() / (1.0 + std::exp(-p.m_raw));
  EXPECT_LE((r.grads.B - expect_B).norm(), 1e-4 * expect_B.norm());
  EXPECT_LE((r.grads.A - expect_A).norm(), 1e-4 * expect_A.norm());
  EXPECT_LT(relative_error(r.grads.m_raw, expect_m), 1e-4);
}

TEST(LossAndGrad, ForwardFailureRaisesTrainingStepError) {
  MonDEQParams p = init_params(5, 3, 2, 4);
  SolverConfig cfg;
  cfg.max_iters = 1;
  cfg.tol = 1e-15;
  p.b.setOnes();
  try {
    loss_and_grad(p, DenseVector::Ones(3), 0, cfg, 4);
    FAIL() << "expected TrainingStepError";
  } catch (const TrainingStepError& e) {
    EXPECT_GE(e.ratio(), 0.0);
    EXPECT_TRUE(std::isfinite(e.ratio()));
  }
}

TEST(BatchLossAndGrad, MeanOfSingleSampleGradients) {
  const MonDEQParams p = init_params(8, 4, 3, 6);
  std::mt19937_64 rng(74);
  const DenseMatrix X = oracle::random_matrix(4, 6, rng).cwiseAbs();
  const std::vector<int> labels = {0, 1, 2, 2, 1, 0};
  SolverConfig cfg = tight();
  const DenseMatrix W = p.weight();
  const double alpha = select_alpha_fb(margin(W), lipschitz(W));
  cfg.alpha = alpha;
  const BatchLossAndGrad batch = batch_loss_and_grad(p, W, alpha, X, labels, cfg);
  ASSERT_TRUE(batch.forward_converged);
  ASSERT_TRUE(batch.backward_converged);
  ParamGradients sum = ParamGradients::zeros_like(p);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < 6; ++j) {
    const LossAndGrad one = loss_and_grad(p, X.col(j), labels[j], cfg);
    loss += one.loss / 6.0;
    sum.A += one.grads.A / 6.0;
    sum.B += one.grads.B / 6.0;
    sum.m_raw += one.grads.m_raw / 6.0;
    sum.U += one.grads.U / 6.0;
    sum.head_weight += one.grads.head_weight / 6.0;
  }
  EXPECT_NEAR(batch.mean_loss, loss, 1e-12);
  EXPECT_LE((batch.grads.A - sum.A).norm(), 1e-9);
  EXPECT_LE((batch.grads.B - sum.B).norm(), 1e-9);
  EXPECT_NEAR(batch.grads.m_raw, sum.m_raw, 1e-9);
  EXPECT_LE((batch.grads.U - sum.U).norm(), 1e-9);
  EXPECT_LE((batch.grads.head_weight - sum.head_weight).norm(), 1e-9);
}

TEST(GradientPerturbation, ScalesLinearlyWithQuantizationError) {
  // |grad_W(float) - grad_W(quantized)| against |dW| over bits 10..16.
  std::vector<double> log_dw, log_diff;
  for (int bits = 10; bits <= 16; ++bits) {
    double dw = 0.0, diff = 0.0;
    for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
      const SmoothInstance inst = smooth_instance(seed);
      const MonDEQParams& p = inst.params;
      const DenseMatrix W = p.weight();
      const DenseMatrix Wq = quantize_matrix(W, bits).W_q;
      auto grad_W = [&](const DenseMatrix& Wu) {
        SolverConfig cfg = tight();
        const EquilibriumResult fwd = solve_fb(make_operator(Wu, p, inst.x), cfg, DenseVector::Zero(10));
        DenseVector dlogits;
        softmax_cross_entropy(predict(p, fwd.z_star), inst.label, &dlogits);
        const EquilibriumResult bwd =
            backward_solve(Wu, active_mask(fwd.z_star), p.head_weight.transpose() * dlogits, cfg);
        return DenseMatrix(bwd.z_star * fwd.z_star.transpose());
      };
      dw += oracle::sigma_max(Wq - W);
      diff += oracle::sigma_max(grad_W(W) - grad_W(Wq));
    }
    log_dw.push_back(std::log(dw));
    log_diff.push_back(std::log(diff));
  }
  const auto n = static_cast<double>(log_dw.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_dw.size(); ++i) { mx += log_dw[i] / n; my += log_diff[i] / n; }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < log_dw.size(); ++i) {
    sxy += (log_dw[i] - mx) * (log_diff[i] - my);
    sxx += (log_dw[i] - mx) * (log_dw[i] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_NEAR(slope, 1.0, 0.2);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  MonDEQParams p = init_params(4, 3, 2, 7);
  const MonDEQParams before = p;
  AdamState state(p);
  for (int t = 0; t < 5; ++t) adam_step(state, p, ParamGradients::zeros_like(p));
  EXPECT_EQ(p.A, before.A);
  EXPECT_EQ(p.U, before.U);
  EXPECT_EQ(p.m_raw, before.m_raw);
  EXPECT_EQ(state.step_count(), 5);
}

TEST(Adam, FirstStepAndUnitStepLimit) {
  MonDEQParams p = init_params(2, 1, 2, 8);
  ParamGradients g = ParamGradients::zeros_like(p);
  g.m_raw = 1.0;
  AdamState state(p);
  const double start = p.m_raw;
  adam_step(state, p, g);
  EXPECT_NEAR(p.m_raw - start, -9.99999e-4, 1e-9);
  EXPECT_NEAR(p.m_raw - start, -1e-3 / (1.0 + 1e-8), 1e-15);
  for (int t = 0; t < 2000; ++t) {
    const double prev = p.m_raw;
    adam_step(state, p, g);
    EXPECT_NEAR(prev - p.m_raw, 1e-3, 1e-9);
  }
}

TEST(Schedule, DecayFromEpochTen) {
  TrainConfig cfg;
  EXPECT_EQ(scheduled_lr(cfg, 0), 1e-3);
  EXPECT_EQ(scheduled_lr(cfg, 9), 1e-3);
  EXPECT_NEAR(scheduled_lr(cfg, 10), 1e-4, 1e-18);
  EXPECT_NEAR(scheduled_lr(cfg, 14), 1e-4, 1e-18);
}

TEST(TrainConfigJson, RoundTripAndValidation) {
  TrainConfig cfg;
  cfg.bits = 4;
  cfg.seed = 9;
  const TrainConfig back = TrainConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_EQ(back.bits, 4);
  EXPECT_THROW(TrainConfig::from_json({{"epoch", 3}}), FormatError);
  EXPECT_THROW(TrainConfig::from_json({{"epochs", "three"}}), FormatError);
  EXPECT_THROW(TrainConfig::from_json({{"epochs", 0}}), DomainError);
  EXPECT_THROW(TrainConfig::from_json(nlohmann::json::array()), FormatError);
  const TrainConfig defaults = TrainConfig::from_json(nlohmann::json::object());
  EXPECT_EQ(defaults.epochs, 15);
  EXPECT_EQ(defaults.batch_size, 128u);
  EXPECT_EQ(defaults.hidden, 100);
  EXPECT_FALSE(defaults.bits.has_value());
}

TEST(Train, OneEpochOnSeparableData) {
  const Dataset ds = make_synthetic(SyntheticKind::kTwoGaussians, 2000, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.hidden = 8;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  const TrainResult r = train(ds, &ds, cfg, {});
  ASSERT_EQ(r.log.size(), 1u);
  // The log holds the running mean over the epoch; score the final weights.
  const EvalResult fit = evaluate(r.params, r.params.weight(), ds, cfg.solver());
  EXPECT_GE(fit.accuracy, 0.95);
  EXPECT_EQ(fit.converged_fraction, 1.0);
  ASSERT_TRUE(r.log[0].test_accuracy.has_value());
  EXPECT_GE(*r.log[0].test_accuracy, 0.95);
  EXPECT_GT(r.m, 0.0);
  EXPECT_NEAR(r.kappa, r.L / r.m, 1e-12);
  EXPECT_EQ(r.failed_batches, 0);
}

TEST(Train, DeterministicForFixedSeed) {
  const Dataset ds = make_synthetic(SyntheticKind::kXorLike, 300, 2, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = 6;
  cfg.batch_size = 32;
  const TrainResult a = train(ds, nullptr, cfg, {});
  const TrainResult b = train(ds, nullptr, cfg, {});
  EXPECT_EQ(a.params.A, b.params.A);
  EXPECT_EQ(a.params.head_weight, b.params.head_weight);
  EXPECT_EQ(a.log[1].loss, b.log[1].loss);
  EXPECT_FALSE(a.log[0].test_accuracy.has_value());
}

TEST(Train, QatBackwardNeverFailsAfterForwardSuccess) {
  const Dataset ds = make_synthetic(SyntheticKind::kTwoGaussians, 1000, 4, 3);
  for (int bits : {4, 6, 8}) {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.hidden = 12;
    cfg.batch_size = 32;
    cfg.lr = 1e-2;
    cfg.bits = bits;
    cfg.max_failure_fraction = 1.0;
    int epochs_seen = 0;
    const TrainResult r = train(ds, &ds, cfg, [&](const EpochLog&) { ++epochs_seen; });
    EXPECT_EQ(epochs_seen, 2);
    EXPECT_EQ(r.backward_failures_after_forward_success, 0) << bits;
    ASSERT_TRUE(r.m_tilde.has_value());
  }
}

TEST(Train, AbortsOnPersistentSolverFailure) {
  const Dataset ds = make_synthetic(SyntheticKind::kTwoGaussians, 200, 2, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.hidden = 6;
  cfg.max_iters = 1;
  cfg.tol = 1e-15;
  EXPECT_THROW(train(ds, nullptr, cfg, {}), TrainingError);
}

TEST(TrainLog, CsvShape) {
  EpochLog row;
  row.epoch = 3;
  row.m_tilde = 0.1;
  const std::string header = train_log_csv_header();
  const std::string line = to_csv_row(row);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(line.begin(), line.end(), ','));
  EXPECT_EQ(line.substr(0, 2), "3,");
  EXPECT_NE(line.find("NA"), std::string::npos);  // missing test accuracy
}
