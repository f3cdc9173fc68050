#include "sdde/estimators.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace sdde {

std::string_view to_string(EstimatorMethod method)
{
   switch (method) {
   case EstimatorMethod::KM: return "KM";
   case EstimatorMethod::FD: return "FD";
   case EstimatorMethod::CD: return "CD";
   case EstimatorMethod::TR: return "TR";
   }
   return "?";
}

EstimatorMethod parse_method(std::string_view name)
{
   if (name == "KM") return EstimatorMethod::KM;
   if (name == "FD") return EstimatorMethod::FD;
   if (name == "CD") return EstimatorMethod::CD;
   if (name == "TR") return EstimatorMethod::TR;
   throw ArgumentError(fmt::format("unknown estimator method '{}' (expected KM, FD, CD or TR)", name));
}

StencilRange stencil_range(EstimatorMethod method)
{
   switch (method) {
   case EstimatorMethod::FD: return {0, 2};
   case EstimatorMethod::CD: return {1, 1};
   case EstimatorMethod::KM:
   case EstimatorMethod::TR: break;
   }
   return {0, 1};
}

void drift_from_increments(EstimatorMethod method, const IncrementView& inc, double dt, std::span<double> out)
{
   const auto n = out.size();
   switch (method) {
   case EstimatorMethod::KM:
   case EstimatorMethod::TR:
      for (std::size_t i = 0; i < n; ++i) out[i] = inc.forward[i] / dt;
      break;
   case EstimatorMethod::FD:
      for (std::size_t i = 0; i < n; ++i) out[i] = (4.0 * inc.forward[i] - inc.forward2[i]) / (2.0 * dt);
      break;
   case EstimatorMethod::CD:
      for (std::size_t i = 0; i < n; ++i) out[i] = inc.central[i] / (2.0 * dt);
      break;
   }
}

void cov_from_increments(EstimatorMethod method, const IncrementView& inc, double dt,
                         std::span<const double> drift_sum, std::span<double> out)
{
   // KM, FD and CD carry an extra factor 2 relative to the g g^T / 2
   // convention so that every method targets C = g g^T.
   const auto n = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(out.size()))));
   for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
         double v = 0.0;
         switch (method) {
         case EstimatorMethod::KM:
            v = inc.forward[i] * inc.forward[j] / dt;
            break;
         case EstimatorMethod::FD:
            v = (4.0 * inc.forward[i] * inc.forward[j] - inc.forward2[i] * inc.forward2[j]) / (2.0 * dt);
            break;
         case EstimatorMethod::CD:
            v = inc.central[i] * inc.central[j] / (2.0 * dt);
            break;
         case EstimatorMethod::TR: {
            const double ui = 2.0 * inc.forward[i] - dt * drift_sum[i];
            const double uj = 2.0 * inc.forward[j] - dt * drift_sum[j];
            v = ui * uj / (2.0 * dt);
            break;
         }
         }
         out[i * n + j] = v;
         out[j * n + i] = v;
      }
   }
}

namespace {

void check_index(EstimatorMethod method, const Trajectory& traj, std::size_t i)
{
   const auto r = stencil_range(method);
   const auto m = traj.size();
   if (i < r.before || i + r.after > m - 1) {
      throw StencilError(fmt::format("{} stencil needs {} <= i <= {}, got i={}", to_string(method), r.before,
                                     static_cast<long long>(m) - 1 - static_cast<long long>(r.after), i));
   }
}

// Increment buffers for index i of a trajectory.
struct IncrementBuffers {
   explicit IncrementBuffers(std::size_t n) : forward(n), forward2(n), central(n) {}

   void load(EstimatorMethod method, const Trajectory& traj, std::size_t i)
   {
      const auto n = traj.dim();
      const auto x = traj.state(i);
      const auto x1 = traj.state(i + 1);
      for (std::size_t c = 0; c < n; ++c) forward[c] = x1[c] - x[c];
      if (method == EstimatorMethod::FD) {
         const auto x2 = traj.state(i + 2);
         for (std::size_t c = 0; c < n; ++c) forward2[c] = x2[c] - x[c];
      }
      if (method == EstimatorMethod::CD) {
         const auto xm = traj.state(i - 1);
         for (std::size_t c = 0; c < n; ++c) central[c] = x1[c] - xm[c];
      }
   }

   IncrementView view() const { return {forward, forward2, central}; }

   std::vector<double> forward;
   std::vector<double> forward2;
   std::vector<double> central;
};

} // namespace

Vector drift_estimate(EstimatorMethod method, const Trajectory& traj, std::size_t i)
{
   check_index(method, traj, i);
   IncrementBuffers buf(traj.dim());
   buf.load(method, traj, i);
   Vector out(static_cast<Eigen::Index>(traj.dim()));
   drift_from_increments(method, buf.view(), traj.grid.dt(), {out.data(), traj.dim()});
   return out;
}

Matrix cov_estimate(EstimatorMethod method, const Trajectory& traj, std::size_t i,
                    const std::optional<std::pair<Vector, Vector>>& drift_at)
{
   check_index(method, traj, i);
   const auto n = traj.dim();
   Vector drift_sum = Vector::Zero(static_cast<Eigen::Index>(n));
   if (method == EstimatorMethod::TR) {
      if (!drift_at) {
         throw ArgumentError("TR covariance needs drift values at t_i and t_{i+1}");
      }
      drift_sum = drift_at->first + drift_at->second;
   }
   IncrementBuffers buf(n);
   buf.load(method, traj, i);
   RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
   cov_from_increments(method, buf.view(), traj.grid.dt(), as_span(drift_sum), {out.data(), n * n});
   return out;
}

std::vector<AugmentedSample> EstimateSet::samples() const
{
   std::vector<AugmentedSample> out;
   out.reserve(rows());
   for (Eigen::Index r = 0; r < points.rows(); ++r) {
      out.emplace_back(t(r), Vector(points.row(r).transpose()));
   }
   return out;
}

void EstimateSet::symmetrize()
{
   if (!has_cov()) return;
   const auto nn = static_cast<Eigen::Index>(n);
   for (Eigen::Index r = 0; r < cov.rows(); ++r) {
      for (Eigen::Index i = 0; i < nn; ++i) {
         for (Eigen::Index j = i + 1; j < nn; ++j) {
            const double v = 0.5 * (cov(r, i * nn + j) + cov(r, j * nn + i));
            cov(r, i * nn + j) = v;
            cov(r, j * nn + i) = v;
         }
      }
   }
}

void EstimateSet::validate() const
{
   const auto r = points.rows();
   if (drift.rows() != r || t.size() != r || grid_index.size() != static_cast<std::size_t>(r) ||
       path_index.size() != static_cast<std::size_t>(r)) {
      throw Error("EstimateSet: row counts disagree");
   }
   if (cov.size() > 0 && cov.rows() != r) {
      throw Error("EstimateSet: covariance rows disagree with points");
   }
   if (successors.size() > 0 && successors.rows() != r) {
      throw Error("EstimateSet: successor rows disagree with points");
   }
   if (!drift.allFinite() || !cov.allFinite() || !points.allFinite()) {
      throw NumericalError("EstimateSet: non-finite estimate", 0);
   }
}

EstimateSet pathwise_estimates(EstimatorMethod method, const Trajectory& traj, double tau,
                               const DriftFunction* tr_drift, std::size_t path)
{
   const auto range = stencil_range(method);
   const auto m = traj.size();
   const auto n = traj.dim();
   if (m < range.width() + min_estimate_rows) {
      throw InsufficientDataError(fmt::format("{} estimates need at least {} valid samples, trajectory has {} points",
                                              to_string(method), min_estimate_rows, m));
   }
   const auto rows = m - range.width();
   const auto z = augmented_matrix(traj, tau);

   EstimateSet set;
   set.method = method;
   set.dt = traj.grid.dt();
   set.n = n;
   set.stencil_width = range.width();
   set.t.resize(static_cast<Eigen::Index>(rows));
   set.points.resize(static_cast<Eigen::Index>(rows), z.cols());
   set.drift.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
   set.grid_index.resize(rows);
   set.path_index.assign(rows, path);
   const bool tr = method == EstimatorMethod::TR;
   if (tr) {
      set.successors.resize(static_cast<Eigen::Index>(rows), z.cols());
      set.increments.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
   } else {
      set.cov.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n * n));
   }

   IncrementBuffers buf(n);
   const std::vector<double> no_drift(n, 0.0);
   for (std::size_t r = 0; r < rows; ++r) {
      const auto i = r + range.before;
      const auto row = static_cast<Eigen::Index>(r);
      buf.load(method, traj, i);
      set.t(row) = traj.grid.time(i);
      set.grid_index[r] = i;
      set.points.row(row) = z.row(static_cast<Eigen::Index>(i));
      drift_from_increments(method, buf.view(), set.dt, row_span(set.drift, row));
      if (tr) {
         set.successors.row(row) = z.row(static_cast<Eigen::Index>(i + 1));
         for (std::size_t c = 0; c < n; ++c) set.increments(row, static_cast<Eigen::Index>(c)) = buf.forward[c];
      } else {
         cov_from_increments(method, buf.view(), set.dt, no_drift, row_span(set.cov, row));
      }
   }
   if (tr && tr_drift) {
      inject_tr_covariance(set, *tr_drift);
   }
   set.symmetrize();
   set.validate();
   return set;
}

void inject_tr_covariance(EstimateSet& set, const DriftFunction& drift)
{
   if (set.method != EstimatorMethod::TR || set.successors.rows() != set.points.rows() ||
       set.increments.rows() != set.points.rows()) {
      throw ArgumentError("inject_tr_covariance: set lacks TR successors/increments");
   }
   const auto n = set.n;
   set.cov.resize(set.points.rows(), static_cast<Eigen::Index>(n * n));
   std::vector<double> f0(n), f1(n), sum(n);
   for (Eigen::Index r = 0; r < set.points.rows(); ++r) {
      drift(row_span(std::as_const(set.points), r), f0);
      drift(row_span(std::as_const(set.successors), r), f1);
      for (std::size_t c = 0; c < n; ++c) sum[c] = f0[c] + f1[c];
      const IncrementView inc{row_span(std::as_const(set.increments), r), {}, {}};
      cov_from_increments(EstimatorMethod::TR, inc, set.dt, sum, row_span(set.cov, r));
   }
   set.symmetrize();
   if (!set.cov.allFinite()) {
      throw NumericalError("inject_tr_covariance: non-finite covariance target", 0);
   }
}

} // namespace sdde
