#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mondeq/certify.hpp"
#include "mondeq/data.hpp"
#include "mondeq/model.hpp"
#include "mondeq/solvers.hpp"
#include "mondeq/train.hpp"

namespace mondeq {

// Experiment drivers behind the CLI. Rows come back ordered by
// (bits, sample index) and every float is written with 17 significant digits,
// so reruns with the same inputs produce byte-identical files.

// "3,4,8" -> {3, 4, 8}; "3-6" ranges are accepted. Every entry must be >= 2.
std::vector<int> parse_bit_list(const std::string& text);

// `count` distinct indices into [0, n), drawn with a seeded shuffle and
// returned in increasing order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

// Forward-backward step for a possibly quantized W: m~ / L~^2 when m~ > 0,
// otherwise the step of the float model so divergence can be observed.
double quantized_alpha(const DenseMatrix& W_quant, const DenseMatrix& W_float);

// --- margin certificate sweep -------------------------------------------

struct SweepConfig {
  std::vector<int> bits;  // defaults to 3..32 when empty
  std::size_t samples = 64;
  std::uint64_t seed = 0;
  SolverConfig solver;
};

struct SweepRow {
  int bits = 0;
  double ratio = 0.0;  // |dW|_2 / m
  double m_tilde = 0.0;
  double mean_iterations = 0.0;
  double max_residual = 0.0;
  bool converged = false;  // every held-out sample converged
  double converged_fraction = 0.0;
  double alpha = 0.0;
  Certificate certificate;
};

struct SweepReport {
  double m = 0.0;
  double L = 0.0;
  double float_mean_iterations = 0.0;
  std::vector<std::size_t> sample_indices;
  std::vector<SweepRow> rows;
};

SweepReport certify_sweep(const MonDEQParams& params, const Dataset& held_out,
                          const SweepConfig& cfg);

std::string sweep_csv_header();
std::string to_csv_row(const SweepRow& row);
nlohmann::json to_json(const SweepReport& report);

// Smallest bit-width b such that every row with bits >= b converged and every
// row below b did not. Empty when the sweep has no such clean split.
std::optional<int> phase_threshold(const std::vector<SweepRow>& rows);

// --- displacement validation --------------------------------------------

struct DisplaceConfig {
  std::vector<int> bits{6, 8, 12, 16};
  std::size_t samples = 2560;
  std::uint64_t seed = 0;
  SolverConfig solver;
};

struct DisplaceRow {
  int bits = 0;
  std::size_t sample = 0;  // index into the dataset
  bool float_converged = false;
  bool quant_converged = false;
  double empirical = 0.0;  // |z~* - z*|_2
  double bound = 0.0;      // (|dW|_2 / m) |z~*|_2
  bool satisfied = false;
  bool excluded = false;  // one of the two solves did not converge
};

struct DisplaceSummary {
  int bits = 0;
  double ratio = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  std::size_t satisfied = 0;
  double satisfaction_rate = 0.0;
  // Mean of bound / empirical over evaluated samples with a nonzero
  // displacement.
  std::optional<double> mean_slack;
  std::size_t zero_displacement = 0;
};

struct DisplaceReport {
  double m = 0.0;
  std::vector<DisplaceRow> rows;
  std::vector<DisplaceSummary> summaries;
};

DisplaceReport displacement_experiment(const MonDEQParams& params, const Dataset& ds,
                                       const DisplaceConfig& cfg);

std::string displace_csv_header();
std::string to_csv_row(const DisplaceRow& row);
nlohmann::json to_json(const DisplaceSummary& summary);

// --- QAT against PTQ ----------------------------------------------------

struct QatCell {
  int bits = 0;
  std::string method;  // "ptq" or "qat"
  bool converged = false;
  double converged_fraction = 0.0;
  std::optional<double> accuracy;  // only when every sample converged
  double m = 0.0;                  // margin of the float W
  double m_tilde = 0.0;
  double ratio = 0.0;
  double mean_iterations = 0.0;
  std::optional<std::string> error;  // training failure
};

struct QatReport {
  double float_accuracy = 0.0;
  double float_m = 0.0;
  std::vector<QatCell> cells;
};

struct QatCompareConfig {
  std::vector<int> bits{4, 6, 8};
  SolverConfig solver;
};

// Produces a QAT model for the given bit-width; may throw TrainingError.
using QatTrainer = std::function<MonDEQParams(int bits)>;

// Accuracy of the quantized float model against freshly QAT-trained models.
// A training failure becomes a cell with `error` set.
QatReport qat_compare(const MonDEQParams& float_params, const Dataset& test,
                      const QatCompareConfig& cfg, const QatTrainer& trainer);

QatCell evaluate_quantized(const MonDEQParams& params, const Dataset& test, int bits,
                           const SolverConfig& solver, const std::string& method);

nlohmann::json to_json(const QatCell& cell);
nlohmann::json to_json(const QatReport& report);

// --- inexact iteration --------------------------------------------------

struct InexactConfig {
  std::vector<double> constant_magnitudes{1e-2, 1e-3, 1e-4};
  std::vector<double> geometric_decays{0.5, 0.9, 0.99};
  double geometric_magnitude = 1e-2;
  std::size_t samples = 4;
  std::uint64_t seed = 0;
  int iterations = 6000;  // every run goes to this cap
  int late_window = 200;
  double reference_tol = 1e-13;
  int reference_max_iters = 200000;
  double geometric_target = 1e-8;  // final error a decaying schedule must reach
};

struct InexactRow {
  std::string schedule;  // "constant" or "geometric"
  double magnitude = 0.0;
  double decay = 1.0;
  std::size_t instance = 0;
  double modulus = 0.0;        // r of the exact map
  double sup_noise_late = 0.0;
  double bound = 0.0;          // sup_noise_late / (1 - r)
  double max_late_error = 0.0;
  double final_error = 0.0;
  // constant: max_late_error <= bound; geometric: final_error <= geometric_target
  bool satisfied = false;
};

// Each instance is an affine operator built from W and one input's c.
std::vector<InexactRow> inexact_experiment(const DenseMatrix& W,
                                           const std::vector<DenseVector>& offsets,
                                           const InexactConfig& cfg);

// A random operator with margin at least `margin_value`, for runs without a model.
AffineOperator random_instance(Eigen::Index n, double margin_value, std::uint64_t seed);

std::string inexact_csv_header();
std::string to_csv_row(const InexactRow& row);

// --- training summary ---------------------------------------------------

// "m = 0.227, L = 1.845, condition number κ = L/m = 8.13"
std::string kappa_summary(double m, double L);

}  // namespace mondeq
