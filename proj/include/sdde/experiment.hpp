#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdde/approaches.hpp"
#include "sdde/library.hpp"
#include "sdde/metrics.hpp"
#include "sdde/models.hpp"

namespace sdde {

struct LibraryConfig {
   unsigned drift_degree = 2;
   unsigned diffusion_degree = 2;
   // Adds ln(x/x_tau) to the drift library and tensors the diffusion
   // library with {1, ln, ln^2}.
   bool log_terms = false;

   bool operator==(const LibraryConfig&) const = default;
};

struct ExperimentConfig {
   std::string model = "logistic";
   std::map<std::string, double> params; // overrides of the model defaults
   double t0 = 0.0;
   double dt = 0.01;
   double t_end = 20.0;
   Approach approach = Approach::B1;
   EstimatorMethod drift_method = EstimatorMethod::KM;
   EstimatorMethod diffusion_method = EstimatorMethod::KM;
   std::size_t M = 1000;
   double eps = 1e-4;
   double lambda_f = 0.025;
   double lambda_G = 0.025;
   LibraryConfig library;
   double train_fraction = 0.8;
   std::uint64_t seed = 0;
   QuerySet b1_queries = QuerySet::All;
   double cell_factor = 2.0;
   std::size_t stls_max_iter = 10;
   std::string output_dir;

   bool operator==(const ExperimentConfig&) const = default;
};

// Defaults for a benchmark model, including its libraries (degree 1 + log
// drift and degree 4 x {1, ln, ln^2} diffusion for option_pricing).
ExperimentConfig default_config(const std::string& model);

// Throws ConfigError on any violated precondition.
void validate(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
// Requires "seed"; unspecified keys take the model defaults. Validates.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

ModelSpec make_model(const ExperimentConfig& config);
BasisLibrary drift_library(const ExperimentConfig& config);
BasisLibrary diffusion_library(const ExperimentConfig& config);
TimeGrid make_grid(const ExperimentConfig& config);

// Simulated data shared by runs with the same model, grid, M and seed.
struct GroundTruth {
   ModelSpec model;
   TimeGrid grid;
   NoisePlan plan; // path 0
   std::vector<Trajectory> ensemble;
};

// Simulates M paths (one for Approach A, which spawns its own ensembles).
GroundTruth generate(const ExperimentConfig& config);

struct BenchmarkResult {
   ExperimentConfig config;
   std::string status = "ok";
   NamedErrors coefficient_errors;
   bool drift_support = false;
   bool diffusion_support = false;
   double rmse_full = 0.0;
   double rmse_drift = 0.0;
   double rmse_diffusion = 0.0;
   double cpu_seconds = 0.0;
   std::size_t rows = 0;
   std::size_t skipped = 0;
   std::size_t failed_paths = 0;
   std::optional<SparseFit> fit;
   std::vector<std::size_t> neighbor_counts;
   std::optional<EstimateSet> estimates; // path 0 only

   bool ok() const { return status == "ok"; }
   double max_drift_error() const;
   double max_diffusion_error() const;
};

// Ground truth -> identification -> metrics. Errors propagate.
BenchmarkResult run(const ExperimentConfig& config);
BenchmarkResult run(const ExperimentConfig& config, const GroundTruth& data);

// Same as run, but any sdde::Error becomes a failed result row.
BenchmarkResult run_cell(const ExperimentConfig& config, const GroundTruth* data);

// Writes fit_report.txt, result.json, ledger.csv, estimates.csv (A, B1) and
// neighbor_hist.csv (B1) to `dir`.
void persist(const BenchmarkResult& result, const std::filesystem::path& dir);

// Ledger CSV: deterministic columns, doubles in %.17g, timing last.
std::string ledger_header();
std::string ledger_row(const BenchmarkResult& result);
std::string ledger_csv(const std::vector<BenchmarkResult>& results);

enum class DiffusionMode { Same, Matched };
std::string_view to_string(DiffusionMode mode);

struct MatrixAxes {
   std::vector<Approach> approaches{Approach::A, Approach::B1, Approach::B2};
   std::vector<EstimatorMethod> methods{EstimatorMethod::KM, EstimatorMethod::FD, EstimatorMethod::CD,
                                        EstimatorMethod::TR};
   std::vector<DiffusionMode> modes{DiffusionMode::Same, DiffusionMode::Matched};
};

std::vector<ExperimentConfig> matrix_cells(const ExperimentConfig& base, const MatrixAxes& axes);

// Runs every cell (failures kept as flagged rows). When `dir` is given,
// writes ledger.csv and table.txt there.
std::vector<BenchmarkResult> benchmark_matrix(const ExperimentConfig& base, const MatrixAxes& axes,
                                              const std::optional<std::filesystem::path>& dir = std::nullopt);

// Text table: one line per cell with coefficient errors and RMSEs.
std::string render_table(const std::vector<BenchmarkResult>& results);

enum class SweepParameter { Eps, M };
SweepParameter parse_sweep_parameter(std::string_view name);
std::string_view to_string(SweepParameter p);

// One run per value; writes ledger.csv and the tidy plot.csv
// (`parameter,value,metric,score`) when `dir` is given.
std::vector<BenchmarkResult> sweep(const ExperimentConfig& base, SweepParameter parameter,
                                   const std::vector<double>& values,
                                   const std::optional<std::filesystem::path>& dir = std::nullopt);
std::string plot_csv(SweepParameter parameter, const std::vector<double>& values,
                     const std::vector<BenchmarkResult>& results);

} // namespace sdde
