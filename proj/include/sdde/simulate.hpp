#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "sdde/core.hpp"
#include "sdde/models.hpp"

namespace sdde {

// Gaussian stream keyed by (seed, stream). Each key seeds its own engine
// through std::seed_seq, so streams are reproducible in isolation and do not
// depend on the order in which they are consumed.
class NormalStream {
public:
   NormalStream(std::uint64_t seed, std::uint64_t stream);
   double operator()() { return dist_(engine_); }

private:
   std::mt19937_64 engine_;
   std::normal_distribution<double> dist_;
};

// Stream ids at or above this offset are reserved for the one-step
// ensembles spawned by Approach A (id = offset + grid index).
inline constexpr std::uint64_t spawn_stream_offset = std::uint64_t{1} << 40;

// Wiener noise for one path: increments are drawn at `fine_dt`, the
// observation step is `factor * fine_dt`.
struct NoisePlan {
   std::size_t q = 1;
   double fine_dt = 0.01;
   std::size_t factor = 1;
   std::uint64_t seed = 0;
   std::uint64_t stream_id = 0;
};

// Smallest factor K such that both dt and tau are whole multiples of dt/K.
NoisePlan default_noise_plan(const ModelSpec& model, const TimeGrid& grid, std::uint64_t seed,
                             std::uint64_t stream_id = 0);

// `steps` fine increments (rows) of variance fine_dt per component.
RowMatrix wiener_increments(const NoisePlan& plan, std::size_t steps);
// Sums consecutive blocks of `factor` fine increments.
RowMatrix coarsen_increments(const RowMatrix& fine, std::size_t factor);

// x + f(x, x_tau) dt + g(x, x_tau) dW. Throws NumericalError(index) on a
// non-finite result.
Vector em_step(const ModelSpec& model, const Vector& x, const Vector& x_tau, const Vector& dW, double dt,
               std::size_t index = 0);

// Allocation-free form; `g` is n*q scratch.
void em_step(const ModelSpec& model, std::span<const double> x, std::span<const double> x_tau,
             std::span<const double> dW, double dt, std::span<double> g, std::span<double> out);

// Euler-Maruyama on the fine step; delayed values read from the fine path
// (or the cached history). The fine path is kept when factor > 1.
Trajectory simulate(const ModelSpec& model, const TimeGrid& grid, const NoisePlan& plan);

// Same integrator driven by explicit fine increments, (grid.steps()-1)*factor rows.
Trajectory simulate_with_increments(const ModelSpec& model, const TimeGrid& grid, double fine_dt,
                                    std::size_t factor, const RowMatrix& increments);

// M independent paths, path k on stream k. Parallel over paths; the result
// does not depend on the thread count.
std::vector<Trajectory> simulate_ensemble(const ModelSpec& model, const TimeGrid& grid, std::size_t M,
                                          std::uint64_t seed);

namespace serial {
std::vector<Trajectory> simulate_ensemble(const ModelSpec& model, const TimeGrid& grid, std::size_t M,
                                          std::uint64_t seed);
} // namespace serial

} // namespace sdde
