#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sdde/core.hpp"
#include "sdde/models.hpp"
#include "sdde/regression.hpp"
#include "sdde/simulate.hpp"

namespace sdde {

// Absolute coefficient errors keyed "f<c>:<term>" (drift component c) and
// "C<i><j>:<term>" (covariance entry, upper triangle only), 1-based.
using NamedErrors = std::map<std::string, double>;

NamedErrors coefficient_errors(const SparseFit& fit, const TruthTable& truth);

// True when the nonzero coefficients of every drift component are exactly
// the truth's terms.
bool drift_support_matches(const SparseFit& fit, const TruthTable& truth);
bool cov_support_matches(const SparseFit& fit, const TruthTable& truth);

// The identified SDDE: drift from the fit, diffusion diag(sqrt(C_ii)) with
// one noise channel per state. History and delay come from `reference`.
// A negative fitted C_ii at a visited state raises NumericalError.
ModelSpec identified_model(const SparseFit& fit, const ModelSpec& reference);

// Re-simulates the identified model with the Wiener increments and history
// of the ground-truth run under `plan`, and returns the RMS deviation over
// grid indices [begin, end) and all components.
double rmse_state(const ModelSpec& truth, const SparseFit& fit, const TimeGrid& grid, const NoisePlan& plan,
                  std::size_t begin, std::size_t end);

// Same, against an already simulated ground-truth path on `plan`.
double rmse_state(const Trajectory& truth_path, const ModelSpec& truth, const SparseFit& fit, const NoisePlan& plan,
                  std::size_t begin, std::size_t end);

// (rmse_drift, rmse_diffusion): sqrt(sum ||f_hat - f||^2 / (N n)) and
// sqrt(sum ||C_hat - C||_F^2 / (N n^2)) over the samples.
std::pair<double, double> rmse_drift_diffusion(const SparseFit& fit, const ModelSpec& truth,
                                               const std::vector<AugmentedSample>& validation);

} // namespace sdde
