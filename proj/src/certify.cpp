#include "mondeq/certify.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mondeq/format.hpp"
#include "mondeq/model.hpp"
#include "mondeq/solvers.hpp"
#include "mondeq/spectral.hpp"

namespace mondeq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double margin_perturbation_bound(double m, double delta_norm) {
  if (!(delta_norm >= 0.0)) throw DomainError("margin_perturbation_bound: negative norm");
  return m - delta_norm;
}

std::pair<double, double> lipschitz_perturbation_interval(double L, double delta_norm) {
  if (!(L >= 0.0) || !(delta_norm >= 0.0)) {
    throw DomainError("lipschitz_perturbation_interval: negative argument");
  }
  return {std::abs(L - delta_norm), L + delta_norm};
}

std::optional<double> displacement_bound(double delta_norm, double m, double z_tilde_norm) {
  if (!(m > 0.0)) return std::nullopt;
  return delta_norm / m * z_tilde_norm;
}

RelativeBound relative_error_bound(double delta_norm, double m) {
  if (!(m > 0.0)) throw DomainError("relative_error_bound: margin must be positive");
  if (delta_norm >= m) return {kInf, true};
  const double value = delta_norm / (m - delta_norm);
  return {value, value >= 1.0};
}

std::optional<ConditionNumbers> condition_numbers(double m, double W_norm, double z_star_norm) {
  if (!(m > 0.0)) return std::nullopt;
  return ConditionNumbers{z_star_norm / m, W_norm / m};
}

Certificate build_certificate(const DenseMatrix& W, const QuantizationReport& report,
                              std::optional<double> z_tilde_norm,
                              std::optional<double> z_star_norm) {
  require_square(W, "build_certificate");
  if (report.W_q.rows() != W.rows() || report.W_q.cols() != W.cols()) {
    throw DimensionError("build_certificate: quantized matrix shape differs from W");
  }
  Certificate c;
  c.bits = report.bits;
  c.m = margin(W);
  c.L = lipschitz(W);
  c.W_norm = spectral_norm(W);
  c.kappa = c.m > 0.0 ? c.L / c.m : kInf;
  c.delta_W_norm = report.delta_W_norm;
  c.eps_W_apriori = report.eps_W_apriori;
  c.ratio = c.m > 0.0 ? c.delta_W_norm / c.m : kInf;
  c.m_tilde_lower = margin_perturbation_bound(c.m, c.delta_W_norm);
  std::tie(c.L_tilde_lower, c.L_tilde_upper) =
      lipschitz_perturbation_interval(c.L, c.delta_W_norm);
  c.m_tilde_actual = margin(report.W_q);
  c.L_tilde_actual = lipschitz(report.W_q);

  // Without a positive quantized margin there is no admissible step; the
  // float model's step is reported and the moduli come out >= 1.
  if (c.m_tilde_actual > 0.0) {
    c.alpha_fb_quantized = select_alpha_fb(c.m_tilde_actual, c.L_tilde_actual);
  } else if (c.m > 0.0) {
    c.alpha_fb_quantized = select_alpha_fb(c.m, c.L);
  } else {
    c.alpha_fb_quantized = 1.0;
  }
  c.fb_modulus_quantized = fb_modulus(c.alpha_fb_quantized, c.m_tilde_actual, c.L_tilde_actual);
  c.pr_modulus_quantized = pr_modulus(1.0, c.m_tilde_actual, c.L_tilde_actual);

  if (z_tilde_norm) c.displacement_bound_abs = displacement_bound(c.delta_W_norm, c.m, *z_tilde_norm);
  c.relative_bound = c.m > 0.0 ? relative_error_bound(c.delta_W_norm, c.m) : RelativeBound{kInf, true};
  if (c.m > 0.0) {
    c.kappa_rel = c.W_norm / c.m;
    if (z_star_norm) c.kappa_abs_bound = condition_numbers(c.m, c.W_norm, *z_star_norm)->kappa_abs_bound;
  }
  c.sufficient_check_passed = c.ratio < 1.0;
  c.apriori_check_passed = c.eps_W_apriori < c.m;
  c.actually_well_posed = c.m_tilde_actual > 0.0;
  return c;
}

nlohmann::json to_json(const Certificate& c) {
  return nlohmann::json{
      {"bits", c.bits},
      {"m", c.m},
      {"L", c.L},
      {"W_norm", c.W_norm},
      {"kappa", c.kappa},
      {"delta_W_norm", c.delta_W_norm},
      {"eps_W_apriori", c.eps_W_apriori},
      {"ratio", c.ratio},
      {"m_tilde_lower", c.m_tilde_lower},
      {"m_tilde_actual", c.m_tilde_actual},
      {"L_tilde_lower", c.L_tilde_lower},
      {"L_tilde_upper", c.L_tilde_upper},
      {"L_tilde_actual", c.L_tilde_actual},
      {"alpha_fb_quantized", c.alpha_fb_quantized},
      {"fb_modulus_quantized", c.fb_modulus_quantized},
      {"pr_modulus_quantized", c.pr_modulus_quantized},
      {"displacement_bound_abs", json_or_null(c.displacement_bound_abs)},
      {"relative_bound", std::isfinite(c.relative_bound.value)
                             ? nlohmann::json(c.relative_bound.value)
                             : nlohmann::json(nullptr)},
      {"relative_bound_vacuous", c.relative_bound.vacuous},
      {"kappa_abs_bound", json_or_null(c.kappa_abs_bound)},
      {"kappa_rel", json_or_null(c.kappa_rel)},
      {"sufficient_check_passed", c.sufficient_check_passed},
      {"apriori_check_passed", c.apriori_check_passed},
      {"actually_well_posed", c.actually_well_posed},
  };
}

std::string certificate_csv_header() {
  return "bits,ratio,m_tilde_lower,m_tilde_actual,L_tilde_actual,fb_modulus,pr_modulus,"
         "sufficient_check,well_posed";
}

std::string to_csv_row(const Certificate& c) {
  std::ostringstream os;
  os << c.bits << ',' << fmt_double(c.ratio) << ',' << fmt_double(c.m_tilde_lower) << ','
     << fmt_double(c.m_tilde_actual) << ',' << fmt_double(c.L_tilde_actual) << ','
     << fmt_double(c.fb_modulus_quantized) << ',' << fmt_double(c.pr_modulus_quantized) << ','
     << (c.sufficient_check_passed ? 1 : 0) << ',' << (c.actually_well_posed ? 1 : 0);
  return os.str();
}

}  // namespace mondeq
