#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "sdde/core.hpp"
#include "sdde/estimators.hpp"
#include "sdde/library.hpp"
#include "sdde/models.hpp"
#include "sdde/neighbor_index.hpp"
#include "sdde/regression.hpp"
#include "sdde/simulate.hpp"

namespace sdde {

enum class Approach { A, B1, B2 };
std::string_view to_string(Approach approach);
Approach parse_approach(std::string_view name);

// Approach A: from each training state Z(t_i) of `ref`, M synthetic paths
// take the method's stencil of Euler-Maruyama steps (step dt) under the
// assumed model. Drift is the mean stencil drift; covariance applies the
// stencil to increments centered on their mean (TR uses the pathwise TR
// form with `tr_drift` instead). Estimates cover indices stencil-valid in
// [0, n_train); n_train = 0 means the whole trajectory.
// Path j at index i draws from stream spawn_stream_offset + i of `seed`.
EstimateSet approach_a(const ModelSpec& model, const Trajectory& ref, std::size_t M, std::uint64_t seed,
                       EstimatorMethod method, std::size_t n_train = 0, const DriftFunction* tr_drift = nullptr);

namespace serial {
EstimateSet approach_a(const ModelSpec& model, const Trajectory& ref, std::size_t M, std::uint64_t seed,
                       EstimatorMethod method, std::size_t n_train = 0, const DriftFunction* tr_drift = nullptr);
} // namespace serial

// Pathwise stencil quantities for every point of a NeighborIndex built over
// the same ensemble and window.
struct PointEstimates {
   EstimatorMethod method = EstimatorMethod::KM;
   std::size_t n = 0;
   double dt = 0.0;
   std::vector<char> valid;
   RowMatrix drift;      // n columns
   RowMatrix cov;        // n*n columns, empty for TR without a drift
   RowMatrix successors; // TR only
};

PointEstimates point_estimates(const std::vector<Trajectory>& ensemble, const NeighborIndex& index, double tau,
                               EstimatorMethod method, std::size_t n_train, const DriftFunction* tr_drift = nullptr);

// Approach B1: for each query z, averages the precomputed stencil
// quantities over the stencil-valid neighbors within eps. Queries without a
// valid neighbor are skipped and counted in `skipped`; `neighbor_counts`
// (if given) receives the valid-neighbor count of each kept query.
EstimateSet approach_b1(const NeighborIndex& index, const PointEstimates& est, const std::vector<AugmentedSample>& queries,
                        const std::vector<std::size_t>& query_paths, const std::vector<std::size_t>& query_steps,
                        double eps, std::vector<std::size_t>* neighbor_counts = nullptr);

namespace serial {
EstimateSet approach_b1(const NeighborIndex& index, const PointEstimates& est, const std::vector<AugmentedSample>& queries,
                        const std::vector<std::size_t>& query_paths, const std::vector<std::size_t>& query_steps,
                        double eps, std::vector<std::size_t>* neighbor_counts = nullptr);
} // namespace serial

// Convenience form: builds the index (cell = 2 eps, or 1 when eps = 0) over
// the full paths and queries every listed sample.
EstimateSet approach_b1(const std::vector<Trajectory>& ensemble, const std::vector<AugmentedSample>& queries, double eps,
                        EstimatorMethod method, const DriftFunction* tr_drift = nullptr);

enum class QuerySet { All, Reference };
std::string_view to_string(QuerySet q);
QuerySet parse_query_set(std::string_view name);

struct IdentifyConfig {
   Approach approach = Approach::B1;
   EstimatorMethod drift_method = EstimatorMethod::KM;
   EstimatorMethod diffusion_method = EstimatorMethod::KM;
   std::size_t M = 1000; // spawn count for A
   double eps = 1e-4;
   double cell_factor = 2.0;
   QuerySet queries = QuerySet::All;
   FitOptions fit;
   std::size_t n_train = 0; // training prefix length; 0 = whole paths
   std::uint64_t seed = 0;
};

struct Identification {
   SparseFit fit;
   std::size_t drift_rows = 0;
   std::size_t cov_rows = 0;
   std::size_t skipped = 0;      // B1 queries without valid neighbors
   std::size_t failed_paths = 0; // B2 paths dropped
   std::vector<std::size_t> neighbor_counts;
   std::optional<EstimateSet> estimates; // drift-stage rows of path 0 (A, B1)
};

// Approach B2: independent identification per path, coefficients averaged
// (no re-thresholding). Failed paths are dropped; more than half failing is
// an error.
Identification approach_b2(const std::vector<Trajectory>& ensemble, double tau, const BasisLibrary& lib_f,
                           const BasisLibrary& lib_G, const IdentifyConfig& config);

// Estimation plus sparse regression for any approach, with the drift and
// diffusion estimators chosen independently. TR diffusion uses the drift
// fitted in the first stage. Approach A reads only ensemble[0].
Identification identify(const ModelSpec& model, const std::vector<Trajectory>& ensemble, const BasisLibrary& lib_f,
                        const BasisLibrary& lib_G, const IdentifyConfig& config);

} // namespace sdde
