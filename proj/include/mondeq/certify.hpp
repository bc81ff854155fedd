#pragma once

#include <optional>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "mondeq/quant.hpp"

namespace mondeq {

// Lower bound on the quantized margin: m - |dW|_2 (may be negative).
double margin_perturbation_bound(double m, double delta_norm);

// (|L - |dW|_2|, L + |dW|_2): the interval containing the quantized
// Lipschitz constant.
std::pair<double, double> lipschitz_perturbation_interval(double L, double delta_norm);

// (|dW|_2 / m) |z~*|_2. Empty when m <= 0: the bound needs a strongly
// monotone unperturbed operator.
std::optional<double> displacement_bound(double delta_norm, double m, double z_tilde_norm);

struct RelativeBound {
  double value = 0.0;  // +inf when delta_norm >= m
  bool vacuous = false;
};

// |dW|_2 / (m - |dW|_2) on |z* - z~*| / |z*|. Vacuous once the perturbation
// reaches the margin or the bound reaches 100%.
RelativeBound relative_error_bound(double delta_norm, double m);

struct ConditionNumbers {
  double kappa_abs_bound = 0.0;  // |z*|_2 / m
  double kappa_rel = 0.0;        // |W|_2 / m
};

// Empty when m <= 0.
std::optional<ConditionNumbers> condition_numbers(double m, double W_norm, double z_star_norm);

struct Certificate {
  int bits = 0;
  double m = 0.0;
  double L = 0.0;
  double W_norm = 0.0;
  double kappa = 0.0;  // L / m
  double delta_W_norm = 0.0;
  double eps_W_apriori = 0.0;
  double ratio = 0.0;  // |dW|_2 / m
  double m_tilde_lower = 0.0;
  double m_tilde_actual = 0.0;
  double L_tilde_lower = 0.0;
  double L_tilde_upper = 0.0;
  double L_tilde_actual = 0.0;
  double alpha_fb_quantized = 0.0;
  double fb_modulus_quantized = 0.0;
  double pr_modulus_quantized = 0.0;  // at alpha = 1
  std::optional<double> displacement_bound_abs;
  RelativeBound relative_bound;
  std::optional<double> kappa_abs_bound;
  std::optional<double> kappa_rel;
  bool sufficient_check_passed = false;  // |dW|_2 < m
  bool apriori_check_passed = false;     // eps_W < m
  bool actually_well_posed = false;      // m~ > 0
};

// Evaluates every bound for W against the quantization in `report`.
// Displacement and absolute condition bounds are filled only when the
// corresponding equilibrium norms are supplied.
Certificate build_certificate(const DenseMatrix& W, const QuantizationReport& report,
                              std::optional<double> z_tilde_norm = std::nullopt,
                              std::optional<double> z_star_norm = std::nullopt);

nlohmann::json to_json(const Certificate& cert);
std::string certificate_csv_header();
std::string to_csv_row(const Certificate& cert);

}  // namespace mondeq
