#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sdde/errors.hpp"

namespace sdde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Sample sets (one sample per row) are stored row-major so a row is a
// contiguous span.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index row)
{
   return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<double> row_span(RowMatrix& m, Eigen::Index row)
{
   return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<const double> as_span(const Vector& v)
{
   return {v.data(), static_cast<std::size_t>(v.size())};
}

// Uniform time grid t_i = t0 + i*dt, i = 0..steps-1.
class TimeGrid {
public:
   TimeGrid(double t0, double dt, std::size_t steps);

   // Grid covering [t0, t_end] inclusive; (t_end - t0)/dt must be an integer
   // up to 1e-9 relative.
   static TimeGrid from_window(double t0, double t_end, double dt);

   double t0() const noexcept { return t0_; }
   double dt() const noexcept { return dt_; }
   std::size_t steps() const noexcept { return steps_; }
   double time(std::size_t i) const noexcept { return t0_ + static_cast<double>(i) * dt_; }
   double t_end() const noexcept { return time(steps_ - 1); }

   bool operator==(const TimeGrid&) const = default;

private:
   double t0_;
   double dt_;
   std::size_t steps_;
};

// Initial segment on [-tau, 0] (relative to the grid origin). `map` is the
// prescribed history function when one is known; `nodes` is a cached
// uniform sampling (node j at s = -tau + j*node_dt, last node at s = 0).
struct History {
   using Map = std::function<void(double s, std::span<double> out)>;

   double tau = 0.0;
   Map map;
   double node_dt = 0.0;
   RowMatrix nodes;

   std::size_t dim() const noexcept { return static_cast<std::size_t>(nodes.cols()); }

   // Samples `map` at spacing `node_dt`; tau/node_dt must be an integer.
   static History sampled(double tau, std::size_t n, Map map, double node_dt);
   // History known only through samples.
   static History from_nodes(double tau, double node_dt, RowMatrix nodes);

   void value(double s, std::span<double> out) const;
};

// Path retained at the internal integration step, used for delayed values
// that fall between coarse samples.
struct FinePath {
   double dt = 0.0;
   std::size_t factor = 1; // coarse dt = factor * dt
   RowMatrix states;
};

struct Trajectory {
   Trajectory(TimeGrid grid, RowMatrix states, History history);

   TimeGrid grid;
   RowMatrix states; // grid.steps() x n
   History history;
   std::optional<FinePath> fine;

   std::size_t dim() const noexcept { return static_cast<std::size_t>(states.cols()); }
   std::size_t size() const noexcept { return grid.steps(); }
   double tau() const noexcept { return history.tau; }
   std::span<const double> state(std::size_t i) const { return row_span(states, static_cast<Eigen::Index>(i)); }
};

// Augmented regression input Z(t) = (X(t), X(t - tau)).
struct AugmentedSample {
   double t = 0.0;
   Vector z;

   AugmentedSample() = default;
   AugmentedSample(double t_, Vector z_);
   AugmentedSample(double t_, const Vector& current, const Vector& delayed);

   std::size_t dim() const noexcept { return static_cast<std::size_t>(z.size() / 2); }
   Vector current() const { return z.head(z.size() / 2); }
   Vector delayed() const { return z.tail(z.size() / 2); }
};

struct SplitSpec {
   double train_fraction = 0.8;
};

// State at any t in [t0 - tau, t_end]: exact node values at grid/history
// nodes, linear interpolation in between (on the fine path when present).
Vector interpolate_state(const Trajectory& traj, double t);
void interpolate_state(const Trajectory& traj, double t, std::span<double> out);

std::vector<AugmentedSample> augment(const Trajectory& traj, double tau);
// Same as augment, packed one sample per row (2n columns).
RowMatrix augmented_matrix(const Trajectory& traj, double tau);

// First `count` samples of a trajectory (history and fine path carried over).
Trajectory prefix(const Trajectory& traj, std::size_t count);

std::size_t train_count(std::size_t total, const SplitSpec& spec);

template<typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& samples, const SplitSpec& spec)
{
   if (samples.size() < 2) {
      throw ArgumentError("split: need at least 2 samples");
   }
   const auto n_train = train_count(samples.size(), spec);
   return {std::vector<T>(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
           std::vector<T>(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end())};
}

} // namespace sdde
