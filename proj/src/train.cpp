#include "mondeq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mondeq/format.hpp"
#include "mondeq/quant.hpp"
#include "mondeq/spectral.hpp"

namespace mondeq {

namespace {

constexpr double kResidualFloor = 1e-12;

// dL/d(A, B, m_raw) from dL/dW through W = (1 - m) I - A^T A + B - B^T.
void pull_back_weight(const MonDEQParams& params, const DenseMatrix& grad_W, ParamGradients& out) {
  const DenseMatrix sym2 = grad_W + grad_W.transpose();
  out.A.noalias() = -params.A * sym2;
  out.B = grad_W - grad_W.transpose();
  out.m_raw = -grad_W.trace() * sigmoid(params.m_raw);
}

int argmax(const DenseVector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

double weight_ratio(const MonDEQParams& params, const DenseMatrix& W_used) {
  const DenseMatrix W = params.weight();
  const double m = margin(W);
  if (!(m > 0.0)) return std::numeric_limits<double>::infinity();
  return spectral_norm(W_used - W) / m;
}

// A fresh shuffle seed per epoch, decorrelated from the init seed.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

ParamGradients ParamGradients::zeros_like(const MonDEQParams& params) {
  ParamGradients g;
  g.A = DenseMatrix::Zero(params.A.rows(), params.A.cols());
  g.B = DenseMatrix::Zero(params.B.rows(), params.B.cols());
  g.m_raw = 0.0;
  g.U = DenseMatrix::Zero(params.U.rows(), params.U.cols());
  g.b = DenseVector::Zero(params.b.size());
  g.head_weight = DenseMatrix::Zero(params.head_weight.rows(), params.head_weight.cols());
  g.head_bias = DenseVector::Zero(params.head_bias.size());
  return g;
}

DenseVector active_mask(const DenseVector& z_star) {
  return (z_star.array() > 0.0).cast<double>().matrix();
}

EquilibriumResult backward_solve(const DenseMatrix& W, const DenseVector& mask,
                                 const DenseVector& g, const SolverConfig& cfg) {
  cfg.validate();
  require_square(W, "backward_solve(W)");
  require_dim(mask.size(), W.rows(), "backward_solve(mask)");
  require_dim(g.size(), W.rows(), "backward_solve(g)");
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (mask(i) != 0.0 && mask(i) != 1.0) throw DomainError("backward_solve: mask must be 0/1");
  }
  const double alpha = resolve_fb_alpha(W, cfg);
  const DenseMatrix Wt = W.transpose();

  EquilibriumResult out;
  out.alpha = alpha;
  DenseVector v = DenseVector::Zero(W.rows());
  DenseVector next(v.size());
  for (int k = 0; k < cfg.max_iters; ++k) {
    next.noalias() = (1.0 - alpha) * v;
    next.noalias() += alpha * (Wt * v);
    next += alpha * g;
    next = next.cwiseProduct(mask);
    out.iterations = k + 1;
    const double norm = next.norm();
    if (!next.allFinite() || norm > kDivergenceNorm) {
      out.status = SolveStatus::kDiverged;
      out.final_residual = std::numeric_limits<double>::infinity();
      out.z_star = std::move(next);
      return out;
    }
    const double res = relative_residual(next, v);
    out.final_residual = res;
    if (cfg.record_trace) out.residual_trace.push_back(res);
    v.swap(next);
    if (res < cfg.tol) {
      out.converged = true;
      out.status = SolveStatus::kConverged;
      break;
    }
  }
  out.z_star = std::move(v);
  return out;
}

BatchEquilibrium backward_solve_batch(const DenseMatrix& W, const DenseMatrix& masks,
                                      const DenseMatrix& G, double alpha, const SolverConfig& cfg) {
  cfg.validate();
  require_square(W, "backward_solve_batch(W)");
  require_dim(masks.rows(), W.rows(), "backward_solve_batch(masks)");
  require_dim(G.rows(), W.rows(), "backward_solve_batch(G)");
  require_dim(G.cols(), masks.cols(), "backward_solve_batch(G cols)");
  if (!(alpha > 0.0)) throw DomainError("backward_solve_batch: alpha must be positive");
  const Eigen::Index n = W.rows();
  const Eigen::Index batch = G.cols();
  const DenseMatrix Wt = W.transpose();

  BatchEquilibrium out;
  out.Z = DenseMatrix::Zero(n, batch);
  out.iterations.assign(static_cast<std::size_t>(batch), 0);
  out.final_residual.assign(static_cast<std::size_t>(batch), 0.0);
  out.status.assign(static_cast<std::size_t>(batch), SolveStatus::kMaxIterations);

  std::vector<Eigen::Index> active(static_cast<std::size_t>(batch));
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  DenseMatrix V = DenseMatrix::Zero(n, batch);
  DenseMatrix Gw = G;
  DenseMatrix Mw = masks;
  DenseMatrix next(n, batch);

  for (int k = 0; k < cfg.max_iters && !active.empty(); ++k) {
    const auto width = static_cast<Eigen::Index>(active.size());
    next.resize(n, width);
    next.noalias() = (1.0 - alpha) * V;
    next.noalias() += alpha * (Wt * V);
    next += alpha * Gw;
    next = next.cwiseProduct(Mw);

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
      const double res = (col - V.col(j)).norm() / std::max(norm, kResidualFloor);
      out.final_residual[sample] = res;
      if (res < cfg.tol) {
        out.status[sample] = SolveStatus::kConverged;
        out.Z.col(static_cast<Eigen::Index>(sample)) = col;
      } else {
        keep.push_back(j);
      }
    }
    if (static_cast<Eigen::Index>(keep.size()) == width) {
      V.swap(next);
      continue;
    }
    const auto kept = static_cast<Eigen::Index>(keep.size());
    DenseMatrix Vc(n, kept), Gc(n, kept), Mc(n, kept);
    std::vector<Eigen::Index> next_active(keep.size());
    for (Eigen::Index j = 0; j < kept; ++j) {
      const Eigen::Index src = keep[static_cast<std::size_t>(j)];
      Vc.col(j) = next.col(src);
      Gc.col(j) = Gw.col(src);
      Mc.col(j) = Mw.col(src);
      next_active[static_cast<std::size_t>(j)] = active[static_cast<std::size_t>(src)];
    }
    V.swap(Vc);
    Gw.swap(Gc);
    Mw.swap(Mc);
    active.swap(next_active);
  }
  for (std::size_t j = 0; j < active.size(); ++j) {
    out.Z.col(active[j]) = V.col(static_cast<Eigen::Index>(j));
  }
  return out;
}

ParamGradients param_gradients(const MonDEQParams& params, const BackwardContext& ctx,
                               const DenseVector& v_star) {
  const Eigen::Index n = params.hidden();
  require_dim(ctx.z_star.size(), n, "param_gradients(z_star)");
  require_dim(v_star.size(), n, "param_gradients(v_star)");
  require_dim(ctx.x.size(), params.input_dim(), "param_gradients(x)");
  require_dim(ctx.logits_grad.size(), params.classes(), "param_gradients(logits_grad)");

  ParamGradients g;
  const DenseMatrix grad_W = v_star * ctx.z_star.transpose();
  pull_back_weight(params, grad_W, g);
  g.U = v_star * ctx.x.transpose();
  g.b = v_star;
  g.head_weight = ctx.logits_grad * ctx.z_star.transpose();
  g.head_bias = ctx.logits_grad;
  return g;
}

double softmax_cross_entropy(const DenseVector& logits, int label, DenseVector* grad) {
  if (label < 0 || label >= logits.size()) throw DomainError("softmax_cross_entropy: bad label");
  const double top = logits.maxCoeff();
  const DenseVector shifted = logits.array() - top;
  const DenseVector e = shifted.array().exp();
  const double sum = e.sum();
  if (grad != nullptr) {
    *grad = e / sum;
    (*grad)(label) -= 1.0;
  }
  return std::log(sum) - shifted(label);
}

DenseMatrix deployed_weight(const MonDEQParams& params, std::optional<int> bits) {
  DenseMatrix W = params.weight();
  if (!bits) return W;
  return ste_quantize(W, *bits).first;
}

LossAndGrad loss_and_grad(const MonDEQParams& params, const DenseVector& x, int label,
                          const SolverConfig& cfg, std::optional<int> qat_bits) {
  params.validate();
  require_dim(x.size(), params.input_dim(), "loss_and_grad(x)");
  const DenseMatrix W = params.weight();
  const DenseMatrix W_used = qat_bits ? ste_quantize(W, *qat_bits).first : W;

  std::optional<double> fallback;
  if (qat_bits && !cfg.alpha && !(margin(W_used) > 0.0)) {
    fallback = select_alpha_fb(margin(W), lipschitz(W));
  }
  SolverConfig fwd_cfg = cfg;
  fwd_cfg.alpha = resolve_fb_alpha(W_used, cfg, fallback);

  LossAndGrad out;
  const AffineOperator op = make_operator(W_used, params, x);
  out.forward = solve_fb(op, fwd_cfg, DenseVector::Zero(params.hidden()));
  if (!out.forward.converged) {
    const double ratio = qat_bits ? weight_ratio(params, W_used) : 0.0;
    throw TrainingStepError("forward solve did not converge (" +
                                std::string(to_string(out.forward.status)) + ")",
                            ratio);
  }

  BackwardContext ctx;
  ctx.z_star = out.forward.z_star;
  ctx.mask = active_mask(ctx.z_star);
  ctx.W_used = W_used;
  ctx.x = x;
  out.logits = predict(params, ctx.z_star);
  out.loss = softmax_cross_entropy(out.logits, label, &ctx.logits_grad);

  const DenseVector g = params.head_weight.transpose() * ctx.logits_grad;
  out.backward = backward_solve(W_used, ctx.mask, g, fwd_cfg);
  // Straight-through: the gradient w.r.t. W_used is used as the gradient w.r.t. W.
  out.grads = param_gradients(params, ctx, out.backward.z_star);
  return out;
}

BatchLossAndGrad batch_loss_and_grad(const MonDEQParams& params, const DenseMatrix& W_used,
                                     double alpha, const DenseMatrix& X,
                                     const std::vector<int>& labels, const SolverConfig& cfg) {
  require_dim(X.rows(), params.input_dim(), "batch_loss_and_grad(X)");
  require_dim(static_cast<Eigen::Index>(labels.size()), X.cols(), "batch_loss_and_grad(labels)");
  const Eigen::Index batch = X.cols();
  if (batch == 0) throw DimensionError("batch_loss_and_grad: empty batch");

  BatchLossAndGrad out;
  DenseMatrix C = params.U * X;
  C.colwise() += params.b;
  out.forward = solve_fb_batch(W_used, C, alpha, cfg);
  out.forward_converged = out.forward.all_converged();
  if (!out.forward_converged) return out;

  const DenseMatrix& Z = out.forward.Z;
  DenseMatrix logits = params.head_weight * Z;
  logits.colwise() += params.head_bias;
  DenseMatrix dlogits(logits.rows(), batch);
  double total = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    DenseVector grad;
    const int label = labels[static_cast<std::size_t>(j)];
    total += softmax_cross_entropy(logits.col(j), label, &grad);
    dlogits.col(j) = grad / static_cast<double>(batch);
    if (argmax(logits.col(j)) == label) ++out.correct;
  }
  out.mean_loss = total / static_cast<double>(batch);

  const DenseMatrix masks = (Z.array() > 0.0).cast<double>().matrix();
  const DenseMatrix G = params.head_weight.transpose() * dlogits;
  out.backward = backward_solve_batch(W_used, masks, G, alpha, cfg);
  out.backward_converged = out.backward.all_converged();
  if (!out.backward_converged) return out;

  const DenseMatrix& V = out.backward.Z;
  pull_back_weight(params, V * Z.transpose(), out.grads);
  out.grads.U = V * X.transpose();
  out.grads.b = V.rowwise().sum();
  out.grads.head_weight = dlogits * Z.transpose();
  out.grads.head_bias = dlogits.rowwise().sum();
  return out;
}

AdamState::AdamState(const MonDEQParams& params, AdamConfig config)
    : config_(config),
      first_(ParamGradients::zeros_like(params)),
      second_(ParamGradients::zeros_like(params)) {}

void AdamState::step(MonDEQParams& params, const ParamGradients& grads) {
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.lr;
  const double eps = config_.eps;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    require_dim(g.rows(), p.rows(), "adam_step");
    require_dim(g.cols(), p.cols(), "adam_step");
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  update(params.A, first_.A, second_.A, grads.A);
  update(params.B, first_.B, second_.B, grads.B);
  update(params.U, first_.U, second_.U, grads.U);
  update(params.b, first_.b, second_.b, grads.b);
  update(params.head_weight, first_.head_weight, second_.head_weight, grads.head_weight);
  update(params.head_bias, first_.head_bias, second_.head_bias, grads.head_bias);

  first_.m_raw = b1 * first_.m_raw + (1.0 - b1) * grads.m_raw;
  second_.m_raw = b2 * second_.m_raw + (1.0 - b2) * grads.m_raw * grads.m_raw;
  params.m_raw -= lr * (first_.m_raw / c1) / (std::sqrt(second_.m_raw / c2) + eps);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DomainError("TrainConfig: epochs must be >= 1");
  if (!(lr > 0.0)) throw DomainError("TrainConfig: lr must be positive");
  if (decay_epoch < 0) throw DomainError("TrainConfig: decay_epoch must be >= 0");
  if (!(gamma > 0.0)) throw DomainError("TrainConfig: gamma must be positive");
  if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
  if (hidden < 1) throw DomainError("TrainConfig: hidden must be >= 1");
  if (!(tol > 0.0)) throw DomainError("TrainConfig: tol must be positive");
  if (max_iters < 1) throw DomainError("TrainConfig: max_iters must be >= 1");
  if (bits && (*bits < 2 || *bits > 52)) throw DomainError("TrainConfig: bits must be in [2, 52]");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw DomainError("TrainConfig: max_failure_fraction must be in [0, 1]");
  }
}

SolverConfig TrainConfig::solver() const {
  SolverConfig s;
  s.tol = tol;
  s.max_iters = max_iters;
  return s;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("train config must be a JSON object");
  static const char* const kKeys[] = {"epochs",    "lr",        "decay_epoch",
                                      "gamma",     "batch_size", "seed",
                                      "hidden",    "tol",       "max_iters",
                                      "bits",      "max_failure_fraction", "train_subset"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw FormatError("train config: unknown key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.decay_epoch = j.value("decay_epoch", c.decay_epoch);
    c.gamma = j.value("gamma", c.gamma);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.hidden = j.value("hidden", c.hidden);
    c.tol = j.value("tol", c.tol);
    c.max_iters = j.value("max_iters", c.max_iters);
    if (j.contains("bits") && !j.at("bits").is_null()) c.bits = j.at("bits").get<int>();
    c.max_failure_fraction = j.value("max_failure_fraction", c.max_failure_fraction);
    c.train_subset = j.value("train_subset", c.train_subset);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"lr", lr},
          {"decay_epoch", decay_epoch},
          {"gamma", gamma},
          {"batch_size", batch_size},
          {"seed", seed},
          {"hidden", hidden},
          {"tol", tol},
          {"max_iters", max_iters},
          {"bits", bits ? nlohmann::json(*bits) : nlohmann::json(nullptr)},
          {"max_failure_fraction", max_failure_fraction},
          {"train_subset", train_subset}};
}

double scheduled_lr(const TrainConfig& cfg, int epoch) {
  return epoch >= cfg.decay_epoch ? cfg.lr * cfg.gamma : cfg.lr;
}

EvalResult evaluate(const MonDEQParams& params, const DenseMatrix& W_used, const Dataset& ds,
                    const SolverConfig& cfg, std::optional<double> fallback_alpha) {
  require_dim(ds.dim(), params.input_dim(), "evaluate(dataset)");
  EvalResult out;
  out.samples = ds.size();
  if (ds.size() == 0) return out;
  out.alpha = resolve_fb_alpha(W_used, cfg, fallback_alpha);

  constexpr Eigen::Index kChunk = 2048;
  const auto total = static_cast<Eigen::Index>(ds.size());
  std::size_t correct = 0;
  std::size_t converged = 0;
  double iter_sum = 0.0;
  for (Eigen::Index start = 0; start < total; start += kChunk) {
    const Eigen::Index width = std::min(kChunk, total - start);
    DenseMatrix C = params.U * ds.inputs.middleCols(start, width);
    C.colwise() += params.b;
    const BatchEquilibrium eq = solve_fb_batch(W_used, C, out.alpha, cfg);
    DenseMatrix logits = params.head_weight * eq.Z;
    logits.colwise() += params.head_bias;
    for (Eigen::Index j = 0; j < width; ++j) {
      const auto idx = static_cast<std::size_t>(j);
      if (argmax(logits.col(j)) == ds.labels[static_cast<std::size_t>(start + j)]) ++correct;
      if (eq.status[idx] == SolveStatus::kConverged) ++converged;
      iter_sum += eq.iterations[idx];
      out.max_iterations = std::max(out.max_iterations, eq.iterations[idx]);
    }
  }
  const auto n = static_cast<double>(ds.size());
  out.accuracy = static_cast<double>(correct) / n;
  out.converged_fraction = static_cast<double>(converged) / n;
  out.mean_iterations = iter_sum / n;
  return out;
}

TrainResult train(const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  train_set.validate();
  const Dataset data = cfg.train_subset > 0 ? train_set.head(cfg.train_subset) : train_set;
  if (data.size() == 0) throw DomainError("train: empty training set");
  const SolverConfig solver = cfg.solver();

  TrainResult result;
  result.params = init_params(cfg.hidden, data.dim(), data.num_classes, cfg.seed);
  MonDEQParams& params = result.params;
  AdamState adam(params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    adam.config().lr = scheduled_lr(cfg, epoch);
    EpochLog row;
    row.epoch = epoch;
    row.lr = adam.config().lr;

    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t correct = 0;
    double fwd_iters = 0.0;
    double bwd_iters = 0.0;
    double last_ratio = 0.0;
    for (const auto& idx : batch_indices(data.size(), cfg.batch_size, epoch_seed(cfg.seed, epoch))) {
      ++row.batches;
      const Batch batch = gather_batch(data, idx);
      const DenseMatrix W = params.weight();
      DenseMatrix W_used = W;
      double alpha = 0.0;
      if (cfg.bits) {
        W_used = ste_quantize(W, *cfg.bits).first;
        const double m_q = margin(W_used);
        alpha = m_q > 0.0 ? select_alpha_fb(m_q, lipschitz(W_used))
                          : select_alpha_fb(margin(W), lipschitz(W));
      } else {
        alpha = select_alpha_fb(margin(W), lipschitz(W));
      }

      const BatchLossAndGrad step =
          batch_loss_and_grad(params, W_used, alpha, batch.inputs, batch.labels, solver);
      fwd_iters += step.forward.mean_iterations();
      if (!step.forward_converged) {
        ++row.failed_batches;
        last_ratio = cfg.bits ? weight_ratio(params, W_used) : 0.0;
        continue;
      }
      bwd_iters += step.backward.mean_iterations();
      if (!step.backward_converged) {
        ++row.failed_batches;
        ++result.backward_failures_after_forward_success;
        continue;
      }
      loss_sum += step.mean_loss * static_cast<double>(idx.size());
      seen += idx.size();
      correct += static_cast<std::size_t>(step.correct);
      adam.step(params, step.grads);
    }

    if (static_cast<double>(row.failed_batches) >
        cfg.max_failure_fraction * static_cast<double>(row.batches)) {
      std::ostringstream msg;
      msg << "training aborted in epoch " << epoch << ": " << row.failed_batches << " of "
          << row.batches << " batches failed";
      if (cfg.bits) msg << "; last |dW|/m = " << fmt_double(last_ratio);
      throw TrainingError(msg.str());
    }

    const int ok_batches = row.batches - row.failed_batches;
    row.loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    row.train_accuracy = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    row.mean_forward_iters = fwd_iters / static_cast<double>(row.batches);
    row.mean_backward_iters = ok_batches > 0 ? bwd_iters / static_cast<double>(ok_batches) : 0.0;

    const DenseMatrix W = params.weight();
    row.m = margin(W);
    row.L = lipschitz(W);
    const double float_alpha = select_alpha_fb(row.m, row.L);
    const DenseMatrix W_used = deployed_weight(params, cfg.bits);
    if (cfg.bits) row.m_tilde = margin(W_used);
    if (test_set != nullptr) {
      row.test_accuracy = evaluate(params, W_used, *test_set, solver, float_alpha).accuracy;
    }
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.failed_batches += row.failed_batches;
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }

  const DenseMatrix W = params.weight();
  result.m = margin(W);
  result.L = lipschitz(W);
  result.kappa = result.L / result.m;
  if (cfg.bits) result.m_tilde = margin(deployed_weight(params, cfg.bits));
  return result;
}

std::string train_log_csv_header() {
  return "epoch,lr,loss,train_accuracy,test_accuracy,m,L,m_tilde,failed_batches,batches,"
         "mean_forward_iters,mean_backward_iters,seconds";
}

std::string to_csv_row(const EpochLog& row) {
  std::ostringstream out;
  out << row.epoch << ',' << fmt_double(row.lr) << ',' << fmt_double(row.loss) << ','
      << fmt_double(row.train_accuracy) << ',' << fmt_double(row.test_accuracy) << ','
      << fmt_double(row.m) << ',' << fmt_double(row.L) << ',' << fmt_double(row.m_tilde) << ','
      << row.failed_batches << ',' << row.batches << ',' << fmt_double(row.mean_forward_iters)
      << ',' << fmt_double(row.mean_backward_iters) << ',' << fmt_double(row.seconds);
  return out.str();
}

}  // namespace mondeq
