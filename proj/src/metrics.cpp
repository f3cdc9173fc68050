#include "sdde/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

namespace sdde {

namespace {

void check_truth_shape(const SparseFit& fit, const TruthTable& truth)
{
   const auto n = fit.n();
   if (truth.drift.size() != n || truth.cov.size() != n * n) {
      throw ArgumentError(fmt::format("truth table shape ({} drift, {} cov) does not match n={}", truth.drift.size(),
                                      truth.cov.size(), n));
   }
}

bool support_equals(const BasisLibrary& lib, const Matrix& coef, Eigen::Index col,
                    const std::map<std::string, double>& truth)
{
   for (std::size_t j = 0; j < lib.size(); ++j) {
      const bool fitted = coef(static_cast<Eigen::Index>(j), col) != 0.0;
      const bool expected = truth.count(lib[j].name) > 0;
      if (fitted != expected) return false;
   }
   return true;
}

} // namespace

NamedErrors coefficient_errors(const SparseFit& fit, const TruthTable& truth)
{
   check_truth_shape(fit, truth);
   NamedErrors out;
   const auto n = fit.n();
   for (std::size_t c = 0; c < n; ++c) {
      for (const auto& [term, value] : truth.drift[c]) {
         if (!fit.lib_f.index_of(term)) {
            throw ArgumentError(fmt::format("coefficient_errors: drift term '{}' not in the library", term));
         }
         out[fmt::format("f{}:{}", c + 1, term)] = std::abs(fit.drift_coefficient(c, term) - value);
      }
   }
   for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
         for (const auto& [term, value] : truth.cov[i * n + j]) {
            if (!fit.lib_G.index_of(term)) {
               throw ArgumentError(fmt::format("coefficient_errors: covariance term '{}' not in the library", term));
            }
            out[fmt::format("C{}{}:{}", i + 1, j + 1, term)] = std::abs(fit.cov_coefficient(i, j, term) - value);
         }
      }
   }
   return out;
}

bool drift_support_matches(const SparseFit& fit, const TruthTable& truth)
{
   check_truth_shape(fit, truth);
   for (std::size_t c = 0; c < fit.n(); ++c) {
      if (!support_equals(fit.lib_f, fit.drift_coef, static_cast<Eigen::Index>(c), truth.drift[c])) return false;
   }
   return true;
}

bool cov_support_matches(const SparseFit& fit, const TruthTable& truth)
{
   check_truth_shape(fit, truth);
   const auto nn = fit.n() * fit.n();
   for (std::size_t c = 0; c < nn; ++c) {
      if (!support_equals(fit.lib_G, fit.cov_coef, static_cast<Eigen::Index>(c), truth.cov[c])) return false;
   }
   return true;
}

ModelSpec identified_model(const SparseFit& fit, const ModelSpec& reference)
{
   const auto n = fit.n();
   if (reference.n != n) {
      throw ArgumentError("identified_model: reference model dimension differs from the fit");
   }
   ModelSpec m;
   m.label = reference.label + " (identified)";
   m.n = n;
   m.q = n;
   m.tau = reference.tau;
   m.history = reference.history;
   m.drift_map = [fit, n](std::span<const double> x, std::span<const double> xt, std::span<double> out) {
      std::vector<double> z(2 * n);
      std::copy(x.begin(), x.end(), z.begin());
      std::copy(xt.begin(), xt.end(), z.begin() + static_cast<std::ptrdiff_t>(n));
      fit.drift_at(z, out);
   };
   m.diffusion_map = [fit, n](std::span<const double> x, std::span<const double> xt, std::span<double> out) {
      std::vector<double> z(2 * n), c(n * n);
      std::copy(x.begin(), x.end(), z.begin());
      std::copy(xt.begin(), xt.end(), z.begin() + static_cast<std::ptrdiff_t>(n));
      fit.cov_at(z, c);
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
         const double v = c[i * n + i];
         if (v < 0.0 || !std::isfinite(v)) {
            std::string state;
            for (double s : z) state += fmt::format("{}{:.6g}", state.empty() ? "" : ", ", s);
            throw NumericalError(fmt::format("identified diffusion: C{}{} = {:.6g} < 0 at state ({})", i + 1, i + 1,
                                             v, state),
                                 0);
         }
         out[i * n + i] = std::sqrt(v);
      }
   };
   return m;
}

double rmse_state(const Trajectory& truth_path, const ModelSpec& truth, const SparseFit& fit, const NoisePlan& plan,
                  std::size_t begin, std::size_t end)
{
   const auto& grid = truth_path.grid;
   if (begin >= end || end > grid.steps()) {
      throw ArgumentError(fmt::format("rmse_state: window [{}, {}) outside the grid of {} samples", begin, end,
                                      grid.steps()));
   }
   if (truth.q != fit.n()) {
      throw ArgumentError("rmse_state: common-noise coupling needs one noise channel per state");
   }
   const auto model = identified_model(fit, truth);
   const auto dW = wiener_increments(plan, (grid.steps() - 1) * plan.factor);
   Trajectory path = [&] {
      try {
         return simulate_with_increments(model, grid, plan.fine_dt, plan.factor, dW);
      } catch (const EvaluationError& e) {
         // Overflowing library terms: the identified model diverged.
         throw NumericalError(fmt::format("identified model diverged: {}", e.what()), e.sample());
      }
   }();
   double sum = 0.0;
   for (std::size_t i = begin; i < end; ++i) {
      const auto a = truth_path.state(i);
      const auto b = path.state(i);
      for (std::size_t c = 0; c < a.size(); ++c) sum += (a[c] - b[c]) * (a[c] - b[c]);
   }
   return std::sqrt(sum / static_cast<double>((end - begin) * fit.n()));
}

double rmse_state(const ModelSpec& truth, const SparseFit& fit, const TimeGrid& grid, const NoisePlan& plan,
                  std::size_t begin, std::size_t end)
{
   const auto truth_path = simulate(truth, grid, plan);
   return rmse_state(truth_path, truth, fit, plan, begin, end);
}

std::pair<double, double> rmse_drift_diffusion(const SparseFit& fit, const ModelSpec& truth,
                                               const std::vector<AugmentedSample>& validation)
{
   if (validation.empty()) {
      throw ArgumentError("rmse_drift_diffusion: empty validation set");
   }
   const auto n = fit.n();
   double sf = 0.0;
   double sc = 0.0;
   std::vector<double> f(n), c(n * n);
   for (std::size_t s = 0; s < validation.size(); ++s) {
      const auto& z = validation[s].z;
      const Vector x = z.head(static_cast<Eigen::Index>(n));
      const Vector xt = z.tail(static_cast<Eigen::Index>(n));
      fit.drift_at(as_span(z), f);
      fit.cov_at(as_span(z), c);
      const Vector ft = truth.drift(x, xt);
      const Matrix ct = truth.covariance(x, xt);
      for (std::size_t i = 0; i < n; ++i) {
         const double d = f[i] - ft(static_cast<Eigen::Index>(i));
         sf += d * d;
         for (std::size_t j = 0; j < n; ++j) {
            const double e = c[i * n + j] - ct(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            sc += e * e;
         }
      }
   }
   const auto N = static_cast<double>(validation.size());
   return {std::sqrt(sf / (N * static_cast<double>(n))), std::sqrt(sc / (N * static_cast<double>(n * n)))};
}

} // namespace sdde
