#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sdde/core.hpp"

namespace sdde {

// Pathwise drift/covariance estimators: Kramers-Moyal (first order), forward
// differences, central differences and the trapezoidal-like scheme.
enum class EstimatorMethod { KM, FD, CD, TR };

std::string_view to_string(EstimatorMethod method);
EstimatorMethod parse_method(std::string_view name);

// Samples a stencil needs on either side of the estimation index.
struct StencilRange {
   std::size_t before = 0;
   std::size_t after = 1;
   std::size_t width() const noexcept { return before + after; }
};
StencilRange stencil_range(EstimatorMethod method);

// Increments around X(t):
//   forward  = X(t+dt) - X(t)
//   forward2 = X(t+2dt) - X(t)      (FD)
//   central  = X(t+dt) - X(t-dt)    (CD)
// Unused members may be empty.
struct IncrementView {
   std::span<const double> forward;
   std::span<const double> forward2;
   std::span<const double> central;
};

// Drift estimate (or, for TR, the increment target dX/dt).
void drift_from_increments(EstimatorMethod method, const IncrementView& inc, double dt, std::span<double> out);

// Covariance estimate targeting C = g g^T, written as an n x n row-major
// block. For TR the result is the sum C(Z(t+dt)) + C(Z(t)) and
// `drift_sum` must hold f(Z(t)) + f(Z(t+dt)); other methods ignore it.
void cov_from_increments(EstimatorMethod method, const IncrementView& inc, double dt,
                         std::span<const double> drift_sum, std::span<double> out);

// Drift model evaluated on an augmented point z (2n) into out (n).
using DriftFunction = std::function<void(std::span<const double> z, std::span<double> out)>;

Vector drift_estimate(EstimatorMethod method, const Trajectory& traj, std::size_t i);

// `drift_at` supplies f at t_i and t_{i+1}; required for TR.
Matrix cov_estimate(EstimatorMethod method, const Trajectory& traj, std::size_t i,
                    const std::optional<std::pair<Vector, Vector>>& drift_at = std::nullopt);

// Regression data: one row per stencil-valid sample.
struct EstimateSet {
   EstimatorMethod method = EstimatorMethod::KM;
   double dt = 0.0;
   std::size_t n = 0;
   Vector t;
   RowMatrix points;      // Z at the row, 2n columns
   RowMatrix successors;  // Z one step later (TR only)
   RowMatrix drift;       // n columns
   RowMatrix cov;         // n*n columns; empty for TR until a drift is supplied
   RowMatrix increments;  // forward increments (TR only)
   std::vector<std::size_t> grid_index;
   std::vector<std::size_t> path_index;
   std::size_t stencil_width = 1;
   std::size_t skipped = 0; // queries dropped for lack of valid data (B1)

   std::size_t rows() const noexcept { return static_cast<std::size_t>(points.rows()); }
   bool has_cov() const noexcept { return cov.rows() == points.rows() && cov.cols() > 0; }
   std::vector<AugmentedSample> samples() const;
   // Mirrors every covariance row to an exactly symmetric matrix.
   void symmetrize();
   // Checks row agreement and finiteness.
   void validate() const;
};

// Applies the method at every stencil-valid index of `traj` (with delayed
// values from `tau`); boundary indices are dropped. For TR the covariance is
// filled only when `tr_drift` is given.
EstimateSet pathwise_estimates(EstimatorMethod method, const Trajectory& traj, double tau,
                               const DriftFunction* tr_drift = nullptr, std::size_t path = 0);

// Forms the TR covariance rows of a pathwise TR set from a drift model.
void inject_tr_covariance(EstimateSet& set, const DriftFunction& drift);

inline constexpr std::size_t min_estimate_rows = 10;

} // namespace sdde
