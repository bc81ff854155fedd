#include "mondeq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "mondeq/format.hpp"
#include "mondeq/quant.hpp"
#include "mondeq/spectral.hpp"

namespace mondeq {

namespace {

DenseMatrix offsets_for(const MonDEQParams& params, const DenseMatrix& X) {
  DenseMatrix C = params.U * X;
  C.colwise() += params.b;
  return C;
}

DenseMatrix gather_columns(const DenseMatrix& M, const std::vector<std::size_t>& idx) {
  DenseMatrix out(M.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = M.col(static_cast<Eigen::Index>(idx[j]));
  }
  return out;
}

const char* bool_text(bool v) { return v ? "true" : "false"; }

}  // namespace

std::vector<int> parse_bit_list(const std::string& text) {
  std::vector<int> bits;
  std::stringstream in(text);
  std::string item;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw DomainError("bad bit-width '" + s + "'");
    return v;
  };
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const int lo = to_int(item.substr(0, dash));
      const int hi = to_int(item.substr(dash + 1));
      if (hi < lo) throw DomainError("bad bit range '" + item + "'");
      for (int b = lo; b <= hi; ++b) bits.push_back(b);
    } else {
      bits.push_back(to_int(item));
    }
  }
  if (bits.empty()) throw DomainError("empty bit list");
  for (int b : bits) {
    if (b < 2 || b > 52) throw DomainError("bit-width " + std::to_string(b) + " outside [2, 52]");
  }
  return bits;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw DomainError("sample count must be >= 1");
  if (count > n) {
    throw DomainError("requested " + std::to_string(count) + " samples from a set of " +
                      std::to_string(n));
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

double quantized_alpha(const DenseMatrix& W_quant, const DenseMatrix& W_float) {
  const double m_q = margin(W_quant);
  if (m_q > 0.0) return select_alpha_fb(m_q, lipschitz(W_quant));
  return select_alpha_fb(margin(W_float), lipschitz(W_float));
}

SweepReport certify_sweep(const MonDEQParams& params, const Dataset& held_out,
                          const SweepConfig& cfg) {
  cfg.solver.validate();
  std::vector<int> bits = cfg.bits;
  if (bits.empty()) {
    for (int b = 3; b <= 32; ++b) bits.push_back(b);
  }
  const DenseMatrix W = params.weight();
  SweepReport report;
  report.m = margin(W);
  report.L = lipschitz(W);
  report.sample_indices = sample_indices(held_out.size(), cfg.samples, cfg.seed);
  const DenseMatrix C =
      offsets_for(params, gather_columns(held_out.inputs, report.sample_indices));

  const BatchEquilibrium base =
      solve_fb_batch(W, C, select_alpha_fb(report.m, report.L), cfg.solver);
  report.float_mean_iterations = base.mean_iterations();

  for (int b : bits) {
    const QuantizationReport q = quantize_matrix(W, b);
    SweepRow row;
    row.bits = b;
    row.certificate = build_certificate(W, q);
    row.ratio = row.certificate.ratio;
    row.m_tilde = row.certificate.m_tilde_actual;
    row.alpha = row.certificate.alpha_fb_quantized;
    const BatchEquilibrium eq = solve_fb_batch(q.W_q, C, row.alpha, cfg.solver);
    row.mean_iterations = eq.mean_iterations();
    row.max_residual = *std::max_element(eq.final_residual.begin(), eq.final_residual.end());
    const auto done = std::count(eq.status.begin(), eq.status.end(), SolveStatus::kConverged);
    row.converged_fraction = static_cast<double>(done) / static_cast<double>(eq.status.size());
    row.converged = eq.all_converged();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string sweep_csv_header() {
  return "bits,ratio,m_tilde,iterations,residual,converged,converged_fraction,alpha,"
         "delta_W_norm,m_tilde_lower,L_tilde,fb_modulus";
}

std::string to_csv_row(const SweepRow& row) {
  std::ostringstream out;
  out << row.bits << ',' << fmt_double(row.ratio) << ',' << fmt_double(row.m_tilde) << ','
      << fmt_double(row.mean_iterations) << ',' << fmt_double(row.max_residual) << ','
      << bool_text(row.converged) << ',' << fmt_double(row.converged_fraction) << ','
      << fmt_double(row.alpha) << ',' << fmt_double(row.certificate.delta_W_norm) << ','
      << fmt_double(row.certificate.m_tilde_lower) << ','
      << fmt_double(row.certificate.L_tilde_actual) << ','
      << fmt_double(row.certificate.fb_modulus_quantized);
  return out.str();
}

nlohmann::json to_json(const SweepReport& report) {
  nlohmann::json certs = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json c = to_json(row.certificate);
    c["mean_iterations"] = row.mean_iterations;
    c["converged"] = row.converged;
    c["converged_fraction"] = row.converged_fraction;
    certs.push_back(std::move(c));
  }
  const auto threshold = phase_threshold(report.rows);
  return {{"m", report.m},
          {"L", report.L},
          {"kappa", report.L / report.m},
          {"float_mean_iterations", report.float_mean_iterations},
          {"samples", report.sample_indices.size()},
          {"phase_threshold_bits", threshold ? nlohmann::json(*threshold) : nlohmann::json(nullptr)},
          {"certificates", certs}};
}

std::optional<int> phase_threshold(const std::vector<SweepRow>& rows) {
  if (rows.empty()) return std::nullopt;
  std::vector<const SweepRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const SweepRow* a, const SweepRow* b) { return a->bits < b->bits; });
  std::optional<int> threshold;
  for (const SweepRow* r : sorted) {
    if (r->converged && !threshold) threshold = r->bits;
    if (!r->converged && threshold) return std::nullopt;
  }
  return threshold;
}

DisplaceReport displacement_experiment(const MonDEQParams& params, const Dataset& ds,
                                       const DisplaceConfig& cfg) {
  cfg.solver.validate();
  const DenseMatrix W = params.weight();
  DisplaceReport report;
  report.m = margin(W);
  if (!(report.m > 0.0)) throw DomainError("displacement_experiment: float model has m <= 0");
  const double L = lipschitz(W);
  const std::vector<std::size_t> idx = sample_indices(ds.size(), cfg.samples, cfg.seed);
  const DenseMatrix C = offsets_for(params, gather_columns(ds.inputs, idx));
  const BatchEquilibrium base = solve_fb_batch(W, C, select_alpha_fb(report.m, L), cfg.solver);

  for (int b : cfg.bits) {
    const QuantizationReport q = quantize_matrix(W, b);
    const BatchEquilibrium eq = solve_fb_batch(q.W_q, C, quantized_alpha(q.W_q, W), cfg.solver);
    const double ratio = q.delta_W_norm / report.m;
    DisplaceSummary summary;
    summary.bits = b;
    summary.ratio = ratio;
    double slack_sum = 0.0;
    std::size_t slack_count = 0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      DisplaceRow row;
      row.bits = b;
      row.sample = idx[j];
      row.float_converged = base.status[j] == SolveStatus::kConverged;
      row.quant_converged = eq.status[j] == SolveStatus::kConverged;
      row.empirical = (eq.Z.col(col) - base.Z.col(col)).norm();
      row.bound = ratio * eq.Z.col(col).norm();
      row.excluded = !(row.float_converged && row.quant_converged);
      row.satisfied = !row.excluded && row.empirical <= row.bound;
      if (row.excluded) {
        ++summary.excluded;
      } else {
        ++summary.evaluated;
        if (row.satisfied) ++summary.satisfied;
        if (row.empirical > 0.0) {
          slack_sum += row.bound / row.empirical;
          ++slack_count;
        } else {
          ++summary.zero_displacement;
        }
      }
      report.rows.push_back(row);
    }
    summary.satisfaction_rate =
        summary.evaluated > 0
            ? static_cast<double>(summary.satisfied) / static_cast<double>(summary.evaluated)
            : 0.0;
    if (slack_count > 0) summary.mean_slack = slack_sum / static_cast<double>(slack_count);
    report.summaries.push_back(summary);
  }
  return report;
}

std::string displace_csv_header() {
  return "bits,sample,float_converged,quant_converged,empirical,bound,satisfied,excluded";
}

std::string to_csv_row(const DisplaceRow& row) {
  std::ostringstream out;
  out << row.bits << ',' << row.sample << ',' << bool_text(row.float_converged) << ','
      << bool_text(row.quant_converged) << ',' << fmt_double(row.empirical) << ','
      << fmt_double(row.bound) << ',' << bool_text(row.satisfied) << ','
      << bool_text(row.excluded);
  return out.str();
}

nlohmann::json to_json(const DisplaceSummary& s) {
  return {{"bits", s.bits},
          {"ratio", s.ratio},
          {"evaluated", s.evaluated},
          {"excluded", s.excluded},
          {"satisfied", s.satisfied},
          {"satisfaction_rate", s.satisfaction_rate},
          {"mean_slack", json_or_null(s.mean_slack)},
          {"zero_displacement", s.zero_displacement}};
}

QatCell evaluate_quantized(const MonDEQParams& params, const Dataset& test, int bits,
                           const SolverConfig& solver, const std::string& method) {
  const DenseMatrix W = params.weight();
  const QuantizationReport q = quantize_matrix(W, bits);
  QatCell cell;
  cell.bits = bits;
  cell.method = method;
  cell.m = margin(W);
  cell.m_tilde = margin(q.W_q);
  cell.ratio = q.delta_W_norm / cell.m;
  SolverConfig cfg = solver;
  cfg.alpha = quantized_alpha(q.W_q, W);
  const EvalResult ev = evaluate(params, q.W_q, test, cfg);
  cell.converged_fraction = ev.converged_fraction;
  cell.converged = ev.converged_fraction == 1.0;
  cell.mean_iterations = ev.mean_iterations;
  if (cell.converged) cell.accuracy = ev.accuracy;
  return cell;
}

QatReport qat_compare(const MonDEQParams& float_params, const Dataset& test,
                      const QatCompareConfig& cfg, const QatTrainer& trainer) {
  cfg.solver.validate();
  QatReport report;
  const DenseMatrix W = float_params.weight();
  report.float_m = margin(W);
  SolverConfig float_cfg = cfg.solver;
  float_cfg.alpha = select_alpha_fb(report.float_m, lipschitz(W));
  report.float_accuracy = evaluate(float_params, W, test, float_cfg).accuracy;

  for (int b : cfg.bits) {
    report.cells.push_back(evaluate_quantized(float_params, test, b, cfg.solver, "ptq"));
    try {
      const MonDEQParams qat = trainer(b);
      report.cells.push_back(evaluate_quantized(qat, test, b, cfg.solver, "qat"));
    } catch (const NumericalError& e) {
      QatCell cell;
      cell.bits = b;
      cell.method = "qat";
      cell.error = e.what();
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

nlohmann::json to_json(const QatCell& c) {
  nlohmann::json j = {{"bits", c.bits},
                      {"method", c.method},
                      {"converged", c.converged},
                      {"converged_fraction", c.converged_fraction},
                      {"accuracy", json_or_null(c.accuracy)},
                      {"m", c.m},
                      {"m_tilde", c.m_tilde},
                      {"ratio", c.ratio},
                      {"mean_iterations", c.mean_iterations}};
  j["error"] = c.error ? nlohmann::json(*c.error) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const QatReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return {{"float_accuracy", r.float_accuracy}, {"float_m", r.float_m}, {"cells", cells}};
}

std::vector<InexactRow> inexact_experiment(const DenseMatrix& W,
                                           const std::vector<DenseVector>& offsets,
                                           const InexactConfig& cfg) {
  const double m = margin(W);
  if (!(m > 0.0)) throw DomainError("inexact_experiment: operator has m <= 0");
  const double L = lipschitz(W);
  const double alpha = select_alpha_fb(m, L);
  const double r = fb_modulus(alpha, m, L);

  SolverConfig run_cfg;
  run_cfg.alpha = alpha;
  run_cfg.max_iters = cfg.iterations;
  SolverConfig ref_cfg;
  ref_cfg.alpha = alpha;
  ref_cfg.tol = cfg.reference_tol;
  ref_cfg.max_iters = cfg.reference_max_iters;

  std::vector<InexactRow> rows;
  auto run = [&](const std::string& name, const ErrorSchedule& noise, std::size_t instance,
                 const AffineOperator& op, const DenseVector& reference) {
    InexactOptions opts;
    opts.reference = reference;
    opts.late_window = cfg.late_window;
    opts.run_to_cap = true;
    const InexactResult res =
        solve_fb_inexact(op, run_cfg, DenseVector::Zero(op.dim()), noise, opts);
    InexactRow row;
    row.schedule = name;
    row.magnitude = noise.magnitude;
    row.decay = noise.decay;
    row.instance = instance;
    row.modulus = r;
    row.sup_noise_late = res.sup_noise_late;
    row.bound = res.sup_noise_late / (1.0 - r);
    row.max_late_error = res.max_late_error.value_or(0.0);
    row.final_error = res.final_error.value_or(0.0);
    row.satisfied = noise.kind == ErrorSchedule::Kind::kGeometric
                        ? row.final_error <= cfg.geometric_target
                        : row.max_late_error <= row.bound;
    rows.push_back(row);
  };

  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const AffineOperator op{W, offsets[i]};
    const EquilibriumResult ref = solve_fb(op, ref_cfg, DenseVector::Zero(op.dim()));
    if (!ref.converged) throw NumericalError("inexact_experiment: reference solve did not converge");
    const std::uint64_t seed = cfg.seed + 1000 * i;
    for (double mag : cfg.constant_magnitudes) {
      run("constant", ErrorSchedule::constant(mag, seed), i, op, ref.z_star);
    }
    for (double decay : cfg.geometric_decays) {
      run("geometric", ErrorSchedule::geometric(cfg.geometric_magnitude, decay, seed), i, op,
          ref.z_star);
    }
  }
  return rows;
}

AffineOperator random_instance(Eigen::Index n, double margin_value, std::uint64_t seed) {
  const MonDEQParams p = init_params(n, n, 2, seed);
  std::mt19937_64 rng(seed ^ 0x5DEECE66DULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DenseVector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = unit(rng);
  const DenseMatrix W = build_weight(p.A, p.B, margin_value);
  return AffineOperator{W, p.U * x + DenseVector::Constant(n, 0.1)};
}

std::string inexact_csv_header() {
  return "schedule,magnitude,decay,instance,modulus,sup_noise_late,bound,max_late_error,"
         "final_error,satisfied";
}

std::string to_csv_row(const InexactRow& row) {
  std::ostringstream out;
  out << row.schedule << ',' << fmt_double(row.magnitude) << ',' << fmt_double(row.decay) << ','
      << row.instance << ',' << fmt_double(row.modulus) << ',' << fmt_double(row.sup_noise_late)
      << ',' << fmt_double(row.bound) << ',' << fmt_double(row.max_late_error) << ','
      << fmt_double(row.final_error) << ',' << bool_text(row.satisfied);
  return out.str();
}

std::string kappa_summary(double m, double L) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "m = %.3f, L = %.3f, condition number κ = L/m = %.2f", m,
                L, L / m);
  return buf;
}

}  // namespace mondeq
