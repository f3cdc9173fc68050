#include "sdde/simulate.hpp"

#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "parallel.hpp"

namespace sdde {

namespace {

bool whole_multiple(double value, double step, std::size_t& count)
{
   const double ratio = value / step;
   const double r = std::round(ratio);
   if (r < 1.0 || std::abs(ratio - r) > 1e-9 * r) {
      return false;
   }
   count = static_cast<std::size_t>(r);
   return true;
}

[[noreturn]] void rethrow_with_path(const NumericalError& e, std::size_t path)
{
   throw NumericalError(fmt::format("path {}: {}", path, e.what()), e.index(), path);
}

} // namespace

NoisePlan default_noise_plan(const ModelSpec& model, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream_id)
{
   for (std::size_t factor = 1; factor <= 1000; ++factor) {
      const double fine = grid.dt() / static_cast<double>(factor);
      std::size_t lag = 0;
      if (whole_multiple(model.tau, fine, lag)) {
         return NoisePlan{model.q, fine, factor, seed, stream_id};
      }
   }
   throw ConfigError(fmt::format("no internal step divides both dt={} and tau={}", grid.dt(), model.tau));
}

RowMatrix wiener_increments(const NoisePlan& plan, std::size_t steps)
{
   if (steps < 1 || plan.q < 1 || !(plan.fine_dt > 0.0)) {
      throw ArgumentError("wiener_increments: need steps >= 1, q >= 1 and fine_dt > 0");
   }
   NormalStream normal(plan.seed, plan.stream_id);
   const double scale = std::sqrt(plan.fine_dt);
   RowMatrix dW(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(plan.q));
   for (Eigen::Index i = 0; i < dW.size(); ++i) {
      dW.data()[i] = scale * normal();
   }
   return dW;
}

RowMatrix coarsen_increments(const RowMatrix& fine, std::size_t factor)
{
   if (factor < 1 || fine.rows() % static_cast<Eigen::Index>(factor) != 0) {
      throw ArgumentError("coarsen_increments: row count is not a multiple of the factor");
   }
   const auto k = static_cast<Eigen::Index>(factor);
   RowMatrix out = RowMatrix::Zero(fine.rows() / k, fine.cols());
   for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
         out.row(i) += fine.row(i * k + j);
      }
   }
   return out;
}

void em_step(const ModelSpec& model, std::span<const double> x, std::span<const double> x_tau,
             std::span<const double> dW, double dt, std::span<double> g, std::span<double> out)
{
   const auto n = model.n;
   const auto q = model.q;
   model.drift_map(x, x_tau, out);
   model.diffusion_map(x, x_tau, g);
   for (std::size_t r = 0; r < n; ++r) {
      double noise = 0.0;
      for (std::size_t c = 0; c < q; ++c) {
         noise += g[r * q + c] * dW[c];
      }
      out[r] = x[r] + out[r] * dt + noise;
   }
}

Vector em_step(const ModelSpec& model, const Vector& x, const Vector& x_tau, const Vector& dW, double dt,
               std::size_t index)
{
   if (static_cast<std::size_t>(x.size()) != model.n || static_cast<std::size_t>(x_tau.size()) != model.n ||
       static_cast<std::size_t>(dW.size()) != model.q) {
      throw ArgumentError("em_step: argument shapes do not match the model");
   }
   Vector out(x.size());
   std::vector<double> g(model.n * model.q);
   em_step(model, as_span(x), as_span(x_tau), as_span(dW), dt, g, {out.data(), model.n});
   if (!out.allFinite()) {
      throw NumericalError(fmt::format("em_step: non-finite state at step {}", index), index);
   }
   return out;
}

Trajectory simulate_with_increments(const ModelSpec& model, const TimeGrid& grid, double fine_dt,
                                    std::size_t factor, const RowMatrix& increments)
{
   if (factor < 1 || std::abs(fine_dt * static_cast<double>(factor) - grid.dt()) > 1e-9 * grid.dt()) {
      throw ConfigError(fmt::format("simulate: fine step {} x {} does not match dt={}", fine_dt, factor, grid.dt()));
   }
   std::size_t lag = 0;
   if (!whole_multiple(model.tau, fine_dt, lag)) {
      throw ConfigError(fmt::format("simulate: fine step {} does not divide tau={}", fine_dt, model.tau));
   }
   const std::size_t fine_steps = (grid.steps() - 1) * factor;
   if (static_cast<std::size_t>(increments.rows()) != fine_steps ||
       static_cast<std::size_t>(increments.cols()) != model.q) {
      throw ArgumentError(fmt::format("simulate: expected {}x{} increments, got {}x{}", fine_steps, model.q,
                                      increments.rows(), increments.cols()));
   }

   const auto n = model.n;
   History history = History::sampled(model.tau, n, model.history, fine_dt);
   RowMatrix fine(static_cast<Eigen::Index>(fine_steps + 1), static_cast<Eigen::Index>(n));
   fine.row(0) = history.nodes.row(history.nodes.rows() - 1);

   std::vector<double> g(n * model.q);
   for (std::size_t j = 0; j < fine_steps; ++j) {
      const auto x_tau = j >= lag ? row_span(std::as_const(fine), static_cast<Eigen::Index>(j - lag))
                                  : row_span(std::as_const(history.nodes), static_cast<Eigen::Index>(j));
      auto next = row_span(fine, static_cast<Eigen::Index>(j + 1));
      em_step(model, row_span(std::as_const(fine), static_cast<Eigen::Index>(j)), x_tau,
              row_span(increments, static_cast<Eigen::Index>(j)), fine_dt, g, next);
      for (double v : next) {
         if (!std::isfinite(v)) {
            throw NumericalError(fmt::format("simulate: non-finite state at fine step {} (t={})", j + 1,
                                             grid.t0() + static_cast<double>(j + 1) * fine_dt),
                                 j + 1);
         }
      }
   }

   RowMatrix coarse(static_cast<Eigen::Index>(grid.steps()), static_cast<Eigen::Index>(n));
   for (std::size_t i = 0; i < grid.steps(); ++i) {
      coarse.row(static_cast<Eigen::Index>(i)) = fine.row(static_cast<Eigen::Index>(i * factor));
   }
   Trajectory traj(grid, std::move(coarse), std::move(history));
   if (factor > 1) {
      traj.fine = FinePath{fine_dt, factor, std::move(fine)};
   }
   return traj;
}

Trajectory simulate(const ModelSpec& model, const TimeGrid& grid, const NoisePlan& plan)
{
   if (plan.q != model.q) {
      throw ConfigError(fmt::format("simulate: noise plan has q={}, model has q={}", plan.q, model.q));
   }
   const auto dW = wiener_increments(plan, (grid.steps() - 1) * plan.factor);
   return simulate_with_increments(model, grid, plan.fine_dt, plan.factor, dW);
}

std::vector<Trajectory> simulate_ensemble(const ModelSpec& model, const TimeGrid& grid, std::size_t M,
                                          std::uint64_t seed)
{
   if (M < 1) {
      throw ArgumentError("simulate_ensemble: M must be at least 1");
   }
   const auto base = default_noise_plan(model, grid, seed);
   std::vector<std::optional<Trajectory>> slots(M);
   detail::parallel_for(M, [&](std::size_t k) {
      auto plan = base;
      plan.stream_id = k;
      try {
         slots[k].emplace(simulate(model, grid, plan));
      } catch (const NumericalError& e) {
         rethrow_with_path(e, k);
      }
   });
   std::vector<Trajectory> out;
   out.reserve(M);
   for (auto& s : slots) {
      out.push_back(std::move(*s));
   }
   return out;
}

namespace serial {

std::vector<Trajectory> simulate_ensemble(const ModelSpec& model, const TimeGrid& grid, std::size_t M,
                                          std::uint64_t seed)
{
   if (M < 1) {
      throw ArgumentError("simulate_ensemble: M must be at least 1");
   }
   const auto base = default_noise_plan(model, grid, seed);
   std::vector<Trajectory> out;
   out.reserve(M);
   for (std::size_t k = 0; k < M; ++k) {
      auto plan = base;
      plan.stream_id = k;
      try {
         out.push_back(simulate(model, grid, plan));
      } catch (const NumericalError& e) {
         rethrow_with_path(e, k);
      }
   }
   return out;
}

} // namespace serial

} // namespace sdde
