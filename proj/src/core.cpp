#include "sdde/core.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace sdde {

namespace {

bool is_integer_ratio(double num, double den, double& ratio)
{
   ratio = num / den;
   const double r = std::round(ratio);
   if (r < 0.0 || std::abs(ratio - r) > 1e-9 * std::max(1.0, r)) {
      return false;
   }
   ratio = r;
   return true;
}

// Linear interpolation on rows of a uniformly spaced node table starting at
// `origin`. Snaps to a node within 1e-12 of the spacing.
void interpolate_rows(const RowMatrix& nodes, double origin, double spacing, double t, std::span<double> out)
{
   const double pos = (t - origin) / spacing;
   const auto last = nodes.rows() - 1;
   const double nearest = std::round(pos);
   if (std::abs(pos - nearest) <= 1e-12) {
      auto j = static_cast<Eigen::Index>(nearest);
      j = std::clamp<Eigen::Index>(j, 0, last);
      for (std::size_t c = 0; c < out.size(); ++c) {
         out[c] = nodes(j, static_cast<Eigen::Index>(c));
      }
      return;
   }
   auto j = static_cast<Eigen::Index>(std::floor(pos));
   j = std::clamp<Eigen::Index>(j, 0, last - 1);
   const double w = pos - static_cast<double>(j);
   for (std::size_t c = 0; c < out.size(); ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      out[c] = (1.0 - w) * nodes(j, col) + w * nodes(j + 1, col);
   }
}

} // namespace

TimeGrid::TimeGrid(double t0, double dt, std::size_t steps)
   : t0_(t0), dt_(dt), steps_(steps)
{
   if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw ArgumentError(fmt::format("TimeGrid: dt must be positive, got {}", dt));
   }
   if (steps < 2) {
      throw ArgumentError(fmt::format("TimeGrid: need at least 2 steps, got {}", steps));
   }
   if (!std::isfinite(t0)) {
      throw ArgumentError("TimeGrid: t0 must be finite");
   }
}

TimeGrid TimeGrid::from_window(double t0, double t_end, double dt)
{
   if (!(dt > 0.0)) {
      throw ArgumentError(fmt::format("TimeGrid: dt must be positive, got {}", dt));
   }
   double intervals = 0.0;
   if (!(t_end > t0) || !is_integer_ratio(t_end - t0, dt, intervals)) {
      throw ArgumentError(fmt::format("TimeGrid: window [{}, {}] is not a whole number of steps {}", t0, t_end, dt));
   }
   return TimeGrid(t0, dt, static_cast<std::size_t>(intervals) + 1);
}

History History::sampled(double tau, std::size_t n, Map map, double node_dt)
{
   double count = 0.0;
   if (!(tau > 0.0) || !(node_dt > 0.0) || !is_integer_ratio(tau, node_dt, count)) {
      throw ConfigError(fmt::format("History: tau={} is not a multiple of node spacing {}", tau, node_dt));
   }
   History h;
   h.tau = tau;
   h.node_dt = node_dt;
   const auto nodes = static_cast<Eigen::Index>(count) + 1;
   h.nodes.resize(nodes, static_cast<Eigen::Index>(n));
   for (Eigen::Index j = 0; j < nodes; ++j) {
      // The last node is s = 0 exactly.
      const double s = (j == nodes - 1) ? 0.0 : -tau + static_cast<double>(j) * node_dt;
      map(s, row_span(h.nodes, j));
   }
   h.map = std::move(map);
   return h;
}

History History::from_nodes(double tau, double node_dt, RowMatrix nodes)
{
   double count = 0.0;
   if (!(tau > 0.0) || !(node_dt > 0.0) || !is_integer_ratio(tau, node_dt, count) ||
       nodes.rows() != static_cast<Eigen::Index>(count) + 1) {
      throw ArgumentError("History: node table does not cover [-tau, 0]");
   }
   History h;
   h.tau = tau;
   h.node_dt = node_dt;
   h.nodes = std::move(nodes);
   return h;
}

void History::value(double s, std::span<double> out) const
{
   if (map) {
      map(s, out);
      return;
   }
   interpolate_rows(nodes, -tau, node_dt, s, out);
}

Trajectory::Trajectory(TimeGrid grid_, RowMatrix states_, History history_)
   : grid(grid_), states(std::move(states_)), history(std::move(history_))
{
   if (states.rows() != static_cast<Eigen::Index>(grid.steps())) {
      throw ArgumentError(fmt::format("Trajectory: {} state rows for a grid of {} steps", states.rows(), grid.steps()));
   }
   if (!states.allFinite()) {
      throw ArgumentError("Trajectory: states must be finite");
   }
   if (history.dim() != 0 && history.dim() != static_cast<std::size_t>(states.cols())) {
      throw ArgumentError("Trajectory: history dimension differs from state dimension");
   }
}

AugmentedSample::AugmentedSample(double t_, Vector z_) : t(t_), z(std::move(z_))
{
   if (z.size() % 2 != 0) {
      throw ArgumentError("AugmentedSample: z must have even length");
   }
}

AugmentedSample::AugmentedSample(double t_, const Vector& current, const Vector& delayed) : t(t_)
{
   if (current.size() != delayed.size()) {
      throw ArgumentError("AugmentedSample: current and delayed parts differ in length");
   }
   z.resize(current.size() * 2);
   z << current, delayed;
}

void interpolate_state(const Trajectory& traj, double t, std::span<double> out)
{
   const auto& g = traj.grid;
   const double lo = g.t0() - traj.tau();
   const double hi = g.t_end();
   const double slack = 1e-12 * g.dt();
   if (!(t >= lo - slack && t <= hi + slack)) {
      throw DomainError(fmt::format("interpolate_state: t={} outside [{}, {}]", t, lo, hi));
   }
   const double s = t - g.t0();
   if (s < -slack) {
      traj.history.value(s, out);
      return;
   }
   if (traj.fine) {
      interpolate_rows(traj.fine->states, g.t0(), traj.fine->dt, t, out);
   } else {
      interpolate_rows(traj.states, g.t0(), g.dt(), t, out);
   }
}

Vector interpolate_state(const Trajectory& traj, double t)
{
   Vector out(static_cast<Eigen::Index>(traj.dim()));
   interpolate_state(traj, t, {out.data(), traj.dim()});
   return out;
}

RowMatrix augmented_matrix(const Trajectory& traj, double tau)
{
   if (!(tau > 0.0)) {
      throw ArgumentError(fmt::format("augment: tau must be positive, got {}", tau));
   }
   if (tau > traj.tau() * (1.0 + 1e-12)) {
      throw DomainError(fmt::format("augment: tau={} exceeds the available history span {}", tau, traj.tau()));
   }
   const auto n = static_cast<Eigen::Index>(traj.dim());
   const auto m = static_cast<Eigen::Index>(traj.size());
   RowMatrix z(m, 2 * n);
   for (Eigen::Index i = 0; i < m; ++i) {
      auto row = row_span(z, i);
      const auto x = traj.state(static_cast<std::size_t>(i));
      std::copy(x.begin(), x.end(), row.begin());
      interpolate_state(traj, traj.grid.time(static_cast<std::size_t>(i)) - tau, row.subspan(static_cast<std::size_t>(n)));
   }
   return z;
}

std::vector<AugmentedSample> augment(const Trajectory& traj, double tau)
{
   const auto z = augmented_matrix(traj, tau);
   std::vector<AugmentedSample> out;
   out.reserve(static_cast<std::size_t>(z.rows()));
   for (Eigen::Index i = 0; i < z.rows(); ++i) {
      out.emplace_back(traj.grid.time(static_cast<std::size_t>(i)), Vector(z.row(i).transpose()));
   }
   return out;
}

Trajectory prefix(const Trajectory& traj, std::size_t count)
{
   if (count < 2 || count > traj.size()) {
      throw ArgumentError(fmt::format("prefix: count {} outside [2, {}]", count, traj.size()));
   }
   Trajectory out(TimeGrid(traj.grid.t0(), traj.grid.dt(), count),
                  traj.states.topRows(static_cast<Eigen::Index>(count)), traj.history);
   if (traj.fine) {
      FinePath fine = *traj.fine;
      fine.states = traj.fine->states.topRows(static_cast<Eigen::Index>((count - 1) * fine.factor + 1));
      out.fine = std::move(fine);
   }
   return out;
}

std::size_t train_count(std::size_t total, const SplitSpec& spec)
{
   if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
      throw ArgumentError(fmt::format("split: train fraction {} outside (0, 1)", spec.train_fraction));
   }
   return static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(total) + 1e-9));
}

} // namespace sdde
