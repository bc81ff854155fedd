#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fetch.hpp"
#include "mondeq/data.hpp"
#include "mondeq/experiments.hpp"
#include "mondeq/format.hpp"
#include "mondeq/serialize.hpp"
#include "mondeq/train.hpp"

namespace fs = std::filesystem;
using namespace mondeq;

namespace {

struct DataOptions {
  std::string dataset;
  std::string synthetic;
  std::size_t synthetic_samples = 2000;
  Eigen::Index synthetic_dim = 2;
};

struct SolverOptions {
  double tol = 1e-5;
  int max_iters = 2000;

  SolverConfig config() const {
    SolverConfig s;
    s.tol = tol;
    s.max_iters = max_iters;
    s.validate();
    return s;
  }
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--dataset", opts.dataset,
                  "MNIST directory (defaults to $MONDEQ_DATA_DIR)");
  cmd->add_option("--synthetic", opts.synthetic, "Use a synthetic set instead: two-gaussians | xor-like");
  cmd->add_option("--synthetic-samples", opts.synthetic_samples, "Training samples of the synthetic set")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--synthetic-dim", opts.synthetic_dim, "Input dimension of the synthetic set")
      ->check(CLI::PositiveNumber);
}

void add_solver_options(CLI::App* cmd, SolverOptions& opts) {
  cmd->add_option("--tol", opts.tol, "Relative residual tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", opts.max_iters, "Iteration cap")->check(CLI::PositiveNumber);
}

fs::path data_dir(const DataOptions& opts) {
  if (!opts.dataset.empty()) return opts.dataset;
  fs::path dir = default_data_dir();
  if (dir.empty()) throw DomainError("no dataset: pass --dataset or set MONDEQ_DATA_DIR");
  return dir;
}

// Synthetic sets use `seed` for training data and `seed + 1` for the held-out split.
Dataset load_split(const DataOptions& opts, MnistSplit split, std::uint64_t seed) {
  if (!opts.synthetic.empty()) {
    const SyntheticKind kind = parse_synthetic_kind(opts.synthetic);
    const bool train = split == MnistSplit::kTrain;
    const std::size_t n = train ? opts.synthetic_samples : std::max<std::size_t>(opts.synthetic_samples / 4, 2);
    return make_synthetic(kind, n, opts.synthetic_dim, train ? seed : seed + 1);
  }
  return load_mnist(data_dir(opts), split);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monotone equilibrium networks under weight quantization"};
  app.require_subcommand(1);

  // train
  DataOptions train_data;
  SolverOptions train_solver;
  std::string train_config_path;
  std::string train_out = "model.bin";
  std::string train_log;
  std::optional<int> train_epochs;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_bits;
  std::optional<std::size_t> train_subset;
  auto* train_cmd = app.add_subcommand("train", "Train a model (float, or QAT with --bits)");
  add_data_options(train_cmd, train_data);
  train_cmd->add_option("--config", train_config_path, "JSON training config");
  train_cmd->add_option("--epochs", train_epochs, "Override the number of epochs");
  train_cmd->add_option("--seed", train_seed, "Override the seed");
  train_cmd->add_option("--bits", train_bits, "Quantization-aware training at this bit-width");
  train_cmd->add_option("--subset", train_subset, "Train on the first N samples only");
  train_cmd->add_option("--tol", train_solver.tol, "Relative residual tolerance");
  train_cmd->add_option("--max-iters", train_solver.max_iters, "Iteration cap");
  train_cmd->add_option("--out", train_out, "Model output path");
  train_cmd->add_option("--log", train_log, "Epoch log CSV (default: <out>.log.csv)");

  // certify-sweep
  DataOptions sweep_data;
  SolverOptions sweep_solver;
  std::string sweep_model;
  std::string sweep_bits = "3-32";
  std::size_t sweep_samples = 64;
  std::uint64_t sweep_seed = 0;
  std::string sweep_out = ".";
  auto* sweep_cmd = app.add_subcommand("certify-sweep", "Margin certificate and convergence per bit-width");
  add_data_options(sweep_cmd, sweep_data);
  add_solver_options(sweep_cmd, sweep_solver);
  sweep_cmd->add_option("--model", sweep_model, "Trained float model")->required();
  sweep_cmd->add_option("--bits", sweep_bits, "Bit-widths, e.g. 3-32 or 4,8,16");
  sweep_cmd->add_option("--samples", sweep_samples, "Held-out inputs per bit-width");
  sweep_cmd->add_option("--seed", sweep_seed, "Sample selection seed");
  sweep_cmd->add_option("--out-dir", sweep_out, "Output directory");

  // displace
  DataOptions disp_data;
  SolverOptions disp_solver;
  std::string disp_model;
  std::string disp_bits = "6,8,12,16";
  std::size_t disp_samples = 2560;
  std::uint64_t disp_seed = 0;
  std::string disp_out = ".";
  auto* disp_cmd = app.add_subcommand("displace", "Equilibrium displacement against its bound");
  add_data_options(disp_cmd, disp_data);
  add_solver_options(disp_cmd, disp_solver);
  disp_cmd->add_option("--model", disp_model, "Trained float model")->required();
  disp_cmd->add_option("--bits", disp_bits, "Bit-widths");
  disp_cmd->add_option("--samples", disp_samples, "Test inputs");
  disp_cmd->add_option("--seed", disp_seed, "Sample selection seed");
  disp_cmd->add_option("--out-dir", disp_out, "Output directory");

  // qat-compare
  DataOptions qat_data;
  SolverOptions qat_solver;
  std::string qat_model;
  std::string qat_bits = "4,6,8";
  std::string qat_config_path;
  std::optional<int> qat_epochs;
  std::optional<std::uint64_t> qat_seed;
  std::string qat_out = ".";
  auto* qat_cmd = app.add_subcommand("qat-compare", "Post-training quantization against QAT");
  add_data_options(qat_cmd, qat_data);
  add_solver_options(qat_cmd, qat_solver);
  qat_cmd->add_option("--model", qat_model, "Trained float model")->required();
  qat_cmd->add_option("--bits", qat_bits, "Bit-widths");
  qat_cmd->add_option("--config", qat_config_path, "JSON training config for the QAT runs");
  qat_cmd->add_option("--epochs", qat_epochs, "Override the number of QAT epochs");
  qat_cmd->add_option("--seed", qat_seed, "Override the QAT seed");
  qat_cmd->add_option("--out-dir", qat_out, "Output directory");

  // inexact
  DataOptions inex_data;
  std::string inex_model;
  std::size_t inex_samples = 4;
  std::uint64_t inex_seed = 0;
  int inex_iters = 6000;
  std::string inex_out = ".";
  auto* inex_cmd = app.add_subcommand("inexact", "Forward-backward with injected per-step errors");
  add_data_options(inex_cmd, inex_data);
  inex_cmd->add_option("--model", inex_model, "Trained model (random operators when omitted)");
  inex_cmd->add_option("--samples", inex_samples, "Inputs or random instances")->check(CLI::PositiveNumber);
  inex_cmd->add_option("--seed", inex_seed, "Seed for inputs and noise");
  inex_cmd->add_option("--max-iters", inex_iters, "Iterations per run")->check(CLI::PositiveNumber);
  inex_cmd->add_option("--out-dir", inex_out, "Output directory");

  // fetch-mnist
  std::string fetch_dir;
  std::string fetch_mirror = tools::kDefaultMirror;
  bool fetch_verify_only = false;
  auto* fetch_cmd = app.add_subcommand("fetch-mnist", "Download and verify the MNIST IDX files");
  fetch_cmd->add_option("--out", fetch_dir, "Target directory (defaults to $MONDEQ_DATA_DIR)");
  fetch_cmd->add_option("--mirror", fetch_mirror, "Base URL serving <name>.gz files");
  fetch_cmd->add_flag("--verify-only", fetch_verify_only, "Only check the SHA-256 digests");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      TrainConfig cfg;
      if (!train_config_path.empty()) {
        std::ifstream in(train_config_path);
        if (!in) throw FormatError("cannot open " + train_config_path);
        cfg = TrainConfig::from_json(nlohmann::json::parse(in));
      }
      if (train_epochs) cfg.epochs = *train_epochs;
      if (train_seed) cfg.seed = *train_seed;
      if (train_bits) cfg.bits = *train_bits;
      if (train_subset) cfg.train_subset = *train_subset;
      if (train_cmd->count("--tol")) cfg.tol = train_solver.tol;
      if (train_cmd->count("--max-iters")) cfg.max_iters = train_solver.max_iters;
      cfg.validate();

      const Dataset train_set = load_split(train_data, MnistSplit::kTrain, cfg.seed);
      const Dataset test_set = load_split(train_data, MnistSplit::kTest, cfg.seed);
      const fs::path log_path = train_log.empty() ? fs::path(train_out + ".log.csv") : fs::path(train_log);
      std::string log = train_log_csv_header() + "\n";
      std::cout << train_log_csv_header() << std::endl;
      const TrainResult result = train(train_set, &test_set, cfg, [&](const EpochLog& row) {
        const std::string line = to_csv_row(row);
        std::cout << line << std::endl;
        log += line + "\n";
      });
      save_model(train_out, result.params);
      write_text(log_path, log);

      const auto& last = result.log.back();
      nlohmann::json summary = {{"config", cfg.to_json()},
                                {"m", result.m},
                                {"L", result.L},
                                {"kappa", result.kappa},
                                {"m_tilde", json_or_null(result.m_tilde)},
                                {"test_accuracy", json_or_null(last.test_accuracy)},
                                {"failed_batches", result.failed_batches}};
      write_text(train_out + ".summary.json", dump_json(summary));
      std::cout << "test accuracy " << fmt_double(last.test_accuracy) << "\n"
                << kappa_summary(result.m, result.L) << "\n";
      if (result.m_tilde) std::cout << "quantized margin m~ = " << fmt_double(*result.m_tilde) << "\n";
    } else if (*sweep_cmd) {
      const MonDEQParams params = load_model(sweep_model);
      const Dataset test = load_split(sweep_data, MnistSplit::kTest, 0);
      SweepConfig cfg;
      cfg.bits = parse_bit_list(sweep_bits);
      cfg.samples = sweep_samples;
      cfg.seed = sweep_seed;
      cfg.solver = sweep_solver.config();
      const SweepReport report = certify_sweep(params, test, cfg);
      std::string csv = sweep_csv_header() + "\n";
      for (const auto& row : report.rows) csv += to_csv_row(row) + "\n";
      write_text(fs::path(sweep_out) / "certify_sweep.csv", csv);
      write_text(fs::path(sweep_out) / "certificates.json", dump_json(to_json(report)));
      std::cout << csv;
    } else if (*disp_cmd) {
      const MonDEQParams params = load_model(disp_model);
      const Dataset test = load_split(disp_data, MnistSplit::kTest, 0);
      DisplaceConfig cfg;
      cfg.bits = parse_bit_list(disp_bits);
      cfg.samples = disp_samples;
      cfg.seed = disp_seed;
      cfg.solver = disp_solver.config();
      const DisplaceReport report = displacement_experiment(params, test, cfg);
      std::string csv = displace_csv_header() + "\n";
      for (const auto& row : report.rows) csv += to_csv_row(row) + "\n";
      nlohmann::json summaries = nlohmann::json::array();
      for (const auto& s : report.summaries) summaries.push_back(to_json(s));
      const nlohmann::json summary = {{"m", report.m}, {"tol", cfg.solver.tol}, {"bits", summaries}};
      write_text(fs::path(disp_out) / "displace.csv", csv);
      write_text(fs::path(disp_out) / "displace_summary.json", dump_json(summary));
      std::cout << dump_json(summary);
    } else if (*qat_cmd) {
      const MonDEQParams params = load_model(qat_model);
      TrainConfig tcfg;
      if (!qat_config_path.empty()) {
        std::ifstream in(qat_config_path);
        if (!in) throw FormatError("cannot open " + qat_config_path);
        tcfg = TrainConfig::from_json(nlohmann::json::parse(in));
      }
      if (qat_epochs) tcfg.epochs = *qat_epochs;
      if (qat_seed) tcfg.seed = *qat_seed;
      tcfg.validate();
      const Dataset train_set = load_split(qat_data, MnistSplit::kTrain, tcfg.seed);
      const Dataset test = load_split(qat_data, MnistSplit::kTest, tcfg.seed);
      QatCompareConfig cfg;
      cfg.bits = parse_bit_list(qat_bits);
      cfg.solver = qat_solver.config();
      fs::create_directories(qat_out);
      const QatReport report = qat_compare(params, test, cfg, [&](int bits) {
        TrainConfig c = tcfg;
        c.bits = bits;
        std::cout << "QAT " << bits << " bits" << std::endl;
        const TrainResult r = train(train_set, nullptr, c, [](const EpochLog& row) {
          std::cout << to_csv_row(row) << std::endl;
        });
        save_model(fs::path(qat_out) / ("qat_" + std::to_string(bits) + ".bin"), r.params);
        return r.params;
      });
      write_text(fs::path(qat_out) / "qat_compare.json", dump_json(to_json(report)));
      std::cout << dump_json(to_json(report));
    } else if (*inex_cmd) {
      InexactConfig cfg;
      cfg.samples = inex_samples;
      cfg.seed = inex_seed;
      cfg.iterations = inex_iters;
      std::vector<InexactRow> rows;
      if (!inex_model.empty()) {
        const MonDEQParams params = load_model(inex_model);
        const Dataset test = load_split(inex_data, MnistSplit::kTest, 0);
        std::vector<DenseVector> offsets;
        for (std::size_t i : sample_indices(test.size(), cfg.samples, cfg.seed)) {
          offsets.push_back(params.U * test.inputs.col(static_cast<Eigen::Index>(i)) + params.b);
        }
        rows = inexact_experiment(params.weight(), offsets, cfg);
      } else {
        for (std::size_t i = 0; i < cfg.samples; ++i) {
          const AffineOperator op = random_instance(100, 0.2, cfg.seed + i);
          InexactConfig one = cfg;
          one.seed = cfg.seed + i;
          for (InexactRow row : inexact_experiment(op.W, {op.c}, one)) {
            row.instance = i;
            rows.push_back(row);
          }
        }
      }
      std::string csv = inexact_csv_header() + "\n";
      for (const auto& row : rows) csv += to_csv_row(row) + "\n";
      write_text(fs::path(inex_out) / "inexact.csv", csv);
      std::cout << csv;
    } else if (*fetch_cmd) {
      fs::path dir = fetch_dir.empty() ? default_data_dir() : fs::path(fetch_dir);
      if (dir.empty()) throw DomainError("no target: pass --out or set MONDEQ_DATA_DIR");
      if (fetch_verify_only) {
        tools::verify_mnist(dir);
        std::cout << "all MNIST files verified in " << dir.string() << "\n";
      } else {
        tools::fetch_mnist(dir, fetch_mirror);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
