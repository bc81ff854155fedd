#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "mondeq/data.hpp"
#include "mondeq/model.hpp"
#include "mondeq/solvers.hpp"

namespace mondeq {

// Same shapes as MonDEQParams; m_raw holds d(loss)/d(m_raw).
struct ParamGradients {
  DenseMatrix A;
  DenseMatrix B;
  double m_raw = 0.0;
  DenseMatrix U;
  DenseVector b;
  DenseMatrix head_weight;
  DenseVector head_bias;

  static ParamGradients zeros_like(const MonDEQParams& params);
};

// Everything the adjoint pass needs from one forward solve.
struct BackwardContext {
  DenseVector z_star;
  DenseVector mask;  // 1 where z*_i > 0, else 0
  DenseMatrix W_used;
  DenseVector x;
  DenseVector logits_grad;
};

DenseVector active_mask(const DenseVector& z_star);

// Solves v = D (W^T v + g) by the forward-backward iteration
//   v <- D ((1 - alpha) v + alpha W^T v + alpha g),
// which has the same margin as the forward problem.
EquilibriumResult backward_solve(const DenseMatrix& W, const DenseVector& mask,
                                 const DenseVector& g, const SolverConfig& cfg);

// Column-wise version of backward_solve with a fixed step.
BatchEquilibrium backward_solve_batch(const DenseMatrix& W, const DenseMatrix& masks,
                                      const DenseMatrix& G, double alpha, const SolverConfig& cfg);

// Gradients of the loss given the adjoint v*: dL/dW = v* z*^T, dL/dU = v* x^T,
// dL/db = v*, pulled back through W = (1 - m) I - A^T A + B - B^T.
ParamGradients param_gradients(const MonDEQParams& params, const BackwardContext& ctx,
                               const DenseVector& v_star);

// Softmax cross-entropy; writes d(loss)/d(logits) when `grad` is non-null.
double softmax_cross_entropy(const DenseVector& logits, int label, DenseVector* grad = nullptr);

// Forward solve failed during a training step. Carries |dW|_2 / m of the
// weights in use (0 for float training) for diagnostics.
class TrainingStepError : public NumericalError {
 public:
  TrainingStepError(const std::string& what, double ratio)
      : NumericalError(what), ratio_(ratio) {}
  double ratio() const { return ratio_; }

 private:
  double ratio_;
};

struct LossAndGrad {
  double loss = 0.0;
  DenseVector logits;
  ParamGradients grads;
  EquilibriumResult forward;
  EquilibriumResult backward;
};

// One-sample loss and gradients. With `qat_bits` the forward and backward
// passes use the quantized W and the straight-through estimator carries the
// gradient back to (A, B, m_raw).
LossAndGrad loss_and_grad(const MonDEQParams& params, const DenseVector& x, int label,
                          const SolverConfig& cfg, std::optional<int> qat_bits = std::nullopt);

// Mean loss and gradients over the columns of X with a fixed W_used and step.
// Gradients are filled only when every forward and backward solve converged.
struct BatchLossAndGrad {
  double mean_loss = 0.0;
  int correct = 0;
  bool forward_converged = false;
  bool backward_converged = false;
  ParamGradients grads;
  BatchEquilibrium forward;
  BatchEquilibrium backward;
};

BatchLossAndGrad batch_loss_and_grad(const MonDEQParams& params, const DenseMatrix& W_used,
                                     double alpha, const DenseMatrix& X,
                                     const std::vector<int>& labels, const SolverConfig& cfg);

// The W a model runs with: quantized when `bits` is set.
DenseMatrix deployed_weight(const MonDEQParams& params, std::optional<int> bits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(const MonDEQParams& params, AdamConfig config = {});

  AdamConfig& config() { return config_; }
  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }

  // One bias-corrected Adam update of every parameter tensor.
  void step(MonDEQParams& params, const ParamGradients& grads);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  ParamGradients first_;
  ParamGradients second_;
};

inline void adam_step(AdamState& state, MonDEQParams& params, const ParamGradients& grads) {
  state.step(params, grads);
}

struct TrainConfig {
  int epochs = 15;
  double lr = 1e-3;
  int decay_epoch = 10;  // zero-based epoch from which lr is multiplied by gamma
  double gamma = 0.1;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  Eigen::Index hidden = 100;
  double tol = 1e-5;
  int max_iters = 2000;
  std::optional<int> bits;  // QAT when set
  // Training aborts when more than this fraction of an epoch's batches fail.
  double max_failure_fraction = 0.25;
  std::size_t train_subset = 0;  // 0 = whole training set

  void validate() const;
  SolverConfig solver() const;
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

double scheduled_lr(const TrainConfig& cfg, int epoch);

struct EvalResult {
  double accuracy = 0.0;
  double converged_fraction = 0.0;
  double mean_iterations = 0.0;
  int max_iterations = 0;
  std::size_t samples = 0;
  double alpha = 0.0;
};

// Batched forward solves with W_used; predictions are taken from the final
// iterate whether or not it converged. When W_used has no positive margin
// the step falls back to `fallback_alpha` (required in that case).
EvalResult evaluate(const MonDEQParams& params, const DenseMatrix& W_used, const Dataset& ds,
                    const SolverConfig& cfg, std::optional<double> fallback_alpha = std::nullopt);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  double m = 0.0;
  double L = 0.0;
  std::optional<double> m_tilde;
  int failed_batches = 0;
  int batches = 0;
  double mean_forward_iters = 0.0;
  double mean_backward_iters = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  MonDEQParams params;
  std::vector<EpochLog> log;
  double m = 0.0;
  double L = 0.0;
  double kappa = 0.0;
  std::optional<double> m_tilde;
  int failed_batches = 0;
  // Steps whose forward solve converged but whose backward solve did not.
  int backward_failures_after_forward_success = 0;
};

class TrainingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Mini-batch Adam on mean cross-entropy. Deterministic for a fixed config.
TrainResult train(const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

std::string train_log_csv_header();
std::string to_csv_row(const EpochLog& row);

}  // namespace mondeq
