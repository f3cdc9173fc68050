#include "sdde/approaches.hpp"

#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "parallel.hpp"

namespace sdde {

std::string_view to_string(Approach approach)
{
   switch (approach) {
   case Approach::A: return "A";
   case Approach::B1: return "B1";
   case Approach::B2: return "B2";
   }
   return "?";
}

Approach parse_approach(std::string_view name)
{
   if (name == "A") return Approach::A;
   if (name == "B1") return Approach::B1;
   if (name == "B2") return Approach::B2;
   throw ArgumentError(fmt::format("unknown approach '{}' (expected A, B1 or B2)", name));
}

std::string_view to_string(QuerySet q)
{
   return q == QuerySet::All ? "all" : "reference";
}

QuerySet parse_query_set(std::string_view name)
{
   if (name == "all") return QuerySet::All;
   if (name == "reference") return QuerySet::Reference;
   throw ArgumentError(fmt::format("unknown B1 query set '{}' (expected all or reference)", name));
}

namespace {

std::size_t window_of(const Trajectory& traj, std::size_t n_train)
{
   return n_train == 0 ? traj.size() : std::min(n_train, traj.size());
}

// ---- Approach A -----------------------------------------------------------

struct SpawnContext {
   const ModelSpec& model;
   const Trajectory& ref;
   const RowMatrix& z; // augmented reference
   std::size_t M;
   std::uint64_t seed;
   EstimatorMethod method;
   StencilRange range;
   const DriftFunction* tr_drift;
};

EstimateSet allocate_a(const SpawnContext& ctx, std::size_t first, std::size_t rows)
{
   const auto n = ctx.model.n;
   EstimateSet set;
   set.method = ctx.method;
   set.dt = ctx.ref.grid.dt();
   set.n = n;
   set.stencil_width = ctx.range.width();
   set.t.resize(static_cast<Eigen::Index>(rows));
   set.points.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(2 * n));
   set.drift.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
   set.grid_index.resize(rows);
   set.path_index.assign(rows, 0);
   const bool tr = ctx.method == EstimatorMethod::TR;
   if (tr) {
      set.successors.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(2 * n));
   }
   if (!tr || ctx.tr_drift) {
      set.cov.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n * n));
   }
   for (std::size_t r = 0; r < rows; ++r) {
      const auto i = first + r;
      set.grid_index[r] = i;
      set.t(static_cast<Eigen::Index>(r)) = ctx.ref.grid.time(i);
      set.points.row(static_cast<Eigen::Index>(r)) = ctx.z.row(static_cast<Eigen::Index>(i));
   }
   return set;
}

// Fills row r (grid index i) of `set`.
void spawn_row(const SpawnContext& ctx, std::size_t i, std::size_t r, EstimateSet& set)
{
   const auto& model = ctx.model;
   const auto n = model.n;
   const auto q = model.q;
   const auto M = ctx.M;
   const double dt = ctx.ref.grid.dt();
   const double tau = model.tau;
   const auto s = i - ctx.range.before; // spawn origin
   const auto w = ctx.range.width();    // steps per spawned path
   const double ts = ctx.ref.grid.time(s);
   const double sqdt = std::sqrt(dt);

   // Delayed values that precede the origin come from the reference path.
   std::vector<std::optional<Vector>> ref_delay(w + 1);
   for (std::size_t l = 0; l <= w; ++l) {
      const double td = ts + static_cast<double>(l) * dt - tau;
      if (td <= ts + 1e-12 * dt) ref_delay[l] = interpolate_state(ctx.ref, td);
   }

   // Spawned states, M x (w+1) x n.
   std::vector<double> states(M * (w + 1) * n);
   auto node = [&](std::size_t j, std::size_t l) {
      return std::span<double>(states.data() + (j * (w + 1) + l) * n, n);
   };
   auto delayed = [&](std::size_t j, std::size_t l, std::span<double> out) {
      if (ref_delay[l]) {
         for (std::size_t c = 0; c < n; ++c) out[c] = (*ref_delay[l])(static_cast<Eigen::Index>(c));
         return;
      }
      const double u = (static_cast<double>(l) * dt - tau) / dt;
      auto a = static_cast<std::size_t>(std::floor(u));
      if (a >= l) a = l - 1;
      const double frac = u - static_cast<double>(a);
      const auto xa = node(j, a);
      const auto xb = node(j, a + 1);
      for (std::size_t c = 0; c < n; ++c) out[c] = xa[c] + frac * (xb[c] - xa[c]);
   };

   NormalStream normal(ctx.seed, spawn_stream_offset + i);
   std::vector<double> xt(n), dW(q), g(n * q);
   const auto x0 = ctx.ref.state(s);
   for (std::size_t j = 0; j < M; ++j) {
      std::copy(x0.begin(), x0.end(), node(j, 0).begin());
      for (std::size_t l = 0; l < w; ++l) {
         delayed(j, l, xt);
         for (auto& v : dW) v = sqdt * normal();
         auto next = node(j, l + 1);
         em_step(model, node(j, l), xt, dW, dt, g, next);
         for (double v : next) {
            if (!std::isfinite(v)) {
               throw NumericalError(fmt::format("approach A: non-finite spawned state at index {}, path {}", i, j), i, j);
            }
         }
      }
   }

   // Stencil increments per spawned path.
   std::vector<double> fwd(M * n, 0.0), fwd2(M * n, 0.0), cen(M * n, 0.0);
   for (std::size_t j = 0; j < M; ++j) {
      const auto a = node(j, 0);
      const auto b = node(j, 1);
      for (std::size_t c = 0; c < n; ++c) fwd[j * n + c] = b[c] - a[c];
      if (ctx.method == EstimatorMethod::FD) {
         const auto e = node(j, 2);
         for (std::size_t c = 0; c < n; ++c) fwd2[j * n + c] = e[c] - a[c];
      }
      if (ctx.method == EstimatorMethod::CD) {
         const auto e = node(j, 2);
         for (std::size_t c = 0; c < n; ++c) cen[j * n + c] = e[c] - a[c];
      }
   }
   auto view = [&](const std::vector<double>& f, const std::vector<double>& f2, const std::vector<double>& ce,
                   std::size_t j) {
      return IncrementView{{f.data() + j * n, n}, {f2.data() + j * n, n}, {ce.data() + j * n, n}};
   };

   const auto row = static_cast<Eigen::Index>(r);
   auto drift_out = row_span(set.drift, row);
   std::vector<double> tmp(n), tmp_cov(n * n);
   std::fill(drift_out.begin(), drift_out.end(), 0.0);
   for (std::size_t j = 0; j < M; ++j) {
      drift_from_increments(ctx.method, view(fwd, fwd2, cen, j), dt, tmp);
      for (std::size_t c = 0; c < n; ++c) drift_out[c] += tmp[c];
   }
   for (auto& v : drift_out) v /= static_cast<double>(M);

   if (ctx.method == EstimatorMethod::TR) {
      // Successor Z(t_{i+1}) per spawned path and its mean.
      std::vector<double> succ(M * 2 * n);
      for (std::size_t j = 0; j < M; ++j) {
         const auto x1 = node(j, 1);
         std::copy(x1.begin(), x1.end(), succ.begin() + static_cast<std::ptrdiff_t>(j * 2 * n));
         delayed(j, 1, {succ.data() + j * 2 * n + n, n});
      }
      auto succ_mean = row_span(set.successors, row);
      std::fill(succ_mean.begin(), succ_mean.end(), 0.0);
      for (std::size_t j = 0; j < M; ++j) {
         for (std::size_t c = 0; c < 2 * n; ++c) succ_mean[c] += succ[j * 2 * n + c];
      }
      for (auto& v : succ_mean) v /= static_cast<double>(M);
      if (!ctx.tr_drift) return;

      std::vector<double> f0(n), f1(n), sum(n);
      (*ctx.tr_drift)(row_span(std::as_const(set.points), row), f0);
      auto cov_out = row_span(set.cov, row);
      std::fill(cov_out.begin(), cov_out.end(), 0.0);
      for (std::size_t j = 0; j < M; ++j) {
         (*ctx.tr_drift)({succ.data() + j * 2 * n, 2 * n}, f1);
         for (std::size_t c = 0; c < n; ++c) sum[c] = f0[c] + f1[c];
         cov_from_increments(EstimatorMethod::TR, view(fwd, fwd2, cen, j), dt, sum, tmp_cov);
         for (std::size_t c = 0; c < n * n; ++c) cov_out[c] += tmp_cov[c];
      }
      for (auto& v : cov_out) v /= static_cast<double>(M);
      return;
   }

   // Center the increments on their ensemble means before the quadratic form.
   for (auto* vec : {&fwd, &fwd2, &cen}) {
      std::vector<double> mean(n, 0.0);
      for (std::size_t j = 0; j < M; ++j) {
         for (std::size_t c = 0; c < n; ++c) mean[c] += (*vec)[j * n + c];
      }
      for (auto& v : mean) v /= static_cast<double>(M);
      for (std::size_t j = 0; j < M; ++j) {
         for (std::size_t c = 0; c < n; ++c) (*vec)[j * n + c] -= mean[c];
      }
   }
   auto cov_out = row_span(set.cov, row);
   std::fill(cov_out.begin(), cov_out.end(), 0.0);
   const std::vector<double> no_drift(n, 0.0);
   for (std::size_t j = 0; j < M; ++j) {
      cov_from_increments(ctx.method, view(fwd, fwd2, cen, j), dt, no_drift, tmp_cov);
      for (std::size_t c = 0; c < n * n; ++c) cov_out[c] += tmp_cov[c];
   }
   for (auto& v : cov_out) v /= static_cast<double>(M);
}

template<typename Loop>
EstimateSet approach_a_impl(const ModelSpec& model, const Trajectory& ref, std::size_t M, std::uint64_t seed,
                            EstimatorMethod method, std::size_t n_train, const DriftFunction* tr_drift, Loop&& loop)
{
   if (M < 2) {
      throw ArgumentError("approach A: M must be at least 2");
   }
   if (ref.dim() != model.n) {
      throw ArgumentError("approach A: reference trajectory does not match the model dimension");
   }
   const auto range = stencil_range(method);
   const auto window = window_of(ref, n_train);
   if (window < range.width() + min_estimate_rows) {
      throw InsufficientDataError(fmt::format("approach A: {} training samples are too few for {}", window,
                                              to_string(method)));
   }
   const auto z = augmented_matrix(ref, model.tau);
   const SpawnContext ctx{model, ref, z, M, seed, method, range, tr_drift};
   const auto first = range.before;
   const auto rows = window - range.width();
   auto set = allocate_a(ctx, first, rows);
   loop(rows, [&](std::size_t r) { spawn_row(ctx, first + r, r, set); });
   set.symmetrize();
   set.validate();
   return set;
}

// ---- Approach B1 ----------------------------------------------------------

template<typename Loop>
EstimateSet approach_b1_impl(const NeighborIndex& index, const PointEstimates& pe,
                             const std::vector<AugmentedSample>& queries, const std::vector<std::size_t>& query_paths,
                             const std::vector<std::size_t>& query_steps, double eps,
                             std::vector<std::size_t>* neighbor_counts, Loop&& loop)
{
   if (!(eps >= 0.0)) {
      throw ArgumentError("approach B1: eps must be >= 0");
   }
   if (query_paths.size() != queries.size() || query_steps.size() != queries.size()) {
      throw ArgumentError("approach B1: query tags disagree with the query count");
   }
   if (pe.valid.size() != index.size()) {
      throw ArgumentError("approach B1: point estimates do not match the index");
   }
   const auto n = pe.n;
   const bool tr = pe.method == EstimatorMethod::TR;
   const bool with_cov = pe.cov.rows() == static_cast<Eigen::Index>(index.size()) && pe.cov.cols() > 0;
   const auto Q = queries.size();

   RowMatrix drift(static_cast<Eigen::Index>(Q), static_cast<Eigen::Index>(n));
   RowMatrix cov(with_cov ? static_cast<Eigen::Index>(Q) : 0, static_cast<Eigen::Index>(n * n));
   RowMatrix succ(tr ? static_cast<Eigen::Index>(Q) : 0, static_cast<Eigen::Index>(2 * n));
   std::vector<std::size_t> counts(Q, 0);

   loop(Q, [&](std::size_t qi) {
      thread_local std::vector<std::size_t> ids;
      const auto& z = queries[qi].z;
      if (static_cast<std::size_t>(z.size()) != index.dim()) {
         throw ArgumentError("approach B1: query dimension mismatch");
      }
      index.query(as_span(z), eps, ids);
      const auto row = static_cast<Eigen::Index>(qi);
      drift.row(row).setZero();
      if (with_cov) cov.row(row).setZero();
      if (tr) succ.row(row).setZero();
      std::size_t count = 0;
      for (auto id : ids) {
         if (!pe.valid[id]) continue;
         ++count;
         const auto pr = static_cast<Eigen::Index>(id);
         drift.row(row) += pe.drift.row(pr);
         if (with_cov) cov.row(row) += pe.cov.row(pr);
         if (tr) succ.row(row) += pe.successors.row(pr);
      }
      counts[qi] = count;
      if (count == 0) return;
      const double inv = static_cast<double>(count);
      drift.row(row) /= inv;
      if (with_cov) cov.row(row) /= inv;
      if (tr) succ.row(row) /= inv;
   });

   std::size_t kept = 0;
   for (auto c : counts) kept += c > 0 ? 1 : 0;
   EstimateSet set;
   set.method = pe.method;
   set.dt = pe.dt;
   set.n = n;
   set.stencil_width = stencil_range(pe.method).width();
   set.skipped = Q - kept;
   set.t.resize(static_cast<Eigen::Index>(kept));
   set.points.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(2 * n));
   set.drift.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(n));
   if (with_cov) set.cov.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(n * n));
   if (tr) set.successors.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(2 * n));
   set.grid_index.reserve(kept);
   set.path_index.reserve(kept);
   if (neighbor_counts) neighbor_counts->clear();
   Eigen::Index out = 0;
   for (std::size_t qi = 0; qi < Q; ++qi) {
      if (counts[qi] == 0) continue;
      const auto row = static_cast<Eigen::Index>(qi);
      set.t(out) = queries[qi].t;
      set.points.row(out) = queries[qi].z.transpose();
      set.drift.row(out) = drift.row(row);
      if (with_cov) set.cov.row(out) = cov.row(row);
      if (tr) set.successors.row(out) = succ.row(row);
      set.grid_index.push_back(query_steps[qi]);
      set.path_index.push_back(query_paths[qi]);
      if (neighbor_counts) neighbor_counts->push_back(counts[qi]);
      ++out;
   }
   set.symmetrize();
   set.validate();
   return set;
}

auto parallel_loop = [](std::size_t count, auto&& body) { detail::parallel_for(count, body); };
auto serial_loop = [](std::size_t count, auto&& body) {
   for (std::size_t k = 0; k < count; ++k) body(k);
};

} // namespace

EstimateSet approach_a(const ModelSpec& model, const Trajectory& ref, std::size_t M, std::uint64_t seed,
                       EstimatorMethod method, std::size_t n_train, const DriftFunction* tr_drift)
{
   return approach_a_impl(model, ref, M, seed, method, n_train, tr_drift, parallel_loop);
}

namespace serial {

EstimateSet approach_a(const ModelSpec& model, const Trajectory& ref, std::size_t M, std::uint64_t seed,
                       EstimatorMethod method, std::size_t n_train, const DriftFunction* tr_drift)
{
   return approach_a_impl(model, ref, M, seed, method, n_train, tr_drift, serial_loop);
}

EstimateSet approach_b1(const NeighborIndex& index, const PointEstimates& est, const std::vector<AugmentedSample>& queries,
                        const std::vector<std::size_t>& query_paths, const std::vector<std::size_t>& query_steps,
                        double eps, std::vector<std::size_t>* neighbor_counts)
{
   return approach_b1_impl(index, est, queries, query_paths, query_steps, eps, neighbor_counts, serial_loop);
}

} // namespace serial

PointEstimates point_estimates(const std::vector<Trajectory>& ensemble, const NeighborIndex& index, double tau,
                               EstimatorMethod method, std::size_t n_train, const DriftFunction* tr_drift)
{
   if (ensemble.empty()) {
      throw ArgumentError("point_estimates: empty ensemble");
   }
   const auto n = ensemble.front().dim();
   PointEstimates pe;
   pe.method = method;
   pe.n = n;
   pe.dt = ensemble.front().grid.dt();
   pe.valid.assign(index.size(), 0);
   pe.drift = RowMatrix::Zero(static_cast<Eigen::Index>(index.size()), static_cast<Eigen::Index>(n));
   const bool tr = method == EstimatorMethod::TR;
   const bool with_cov = !tr || tr_drift;
   if (with_cov) pe.cov = RowMatrix::Zero(static_cast<Eigen::Index>(index.size()), static_cast<Eigen::Index>(n * n));
   if (tr) pe.successors = RowMatrix::Zero(static_cast<Eigen::Index>(index.size()), static_cast<Eigen::Index>(2 * n));

   // Ids of path k are contiguous, starting at offsets[k].
   std::vector<std::size_t> offsets(ensemble.size() + 1, 0);
   for (std::size_t k = 0; k < ensemble.size(); ++k) {
      offsets[k + 1] = offsets[k] + window_of(ensemble[k], n_train);
   }
   if (offsets.back() != index.size()) {
      throw ArgumentError("point_estimates: index was built over a different ensemble or window");
   }
   detail::parallel_for(ensemble.size(), [&](std::size_t k) {
      const auto window = window_of(ensemble[k], n_train);
      const auto set = pathwise_estimates(method, prefix(ensemble[k], window), tau, tr_drift, k);
      for (std::size_t r = 0; r < set.rows(); ++r) {
         const auto id = offsets[k] + set.grid_index[r];
         if (index.path(id) != k || index.index(id) != set.grid_index[r]) {
            throw Error("point_estimates: index ids are not in path order");
         }
         const auto row = static_cast<Eigen::Index>(r);
         const auto pr = static_cast<Eigen::Index>(id);
         pe.valid[id] = 1;
         pe.drift.row(pr) = set.drift.row(row);
         if (with_cov) pe.cov.row(pr) = set.cov.row(row);
         if (tr) pe.successors.row(pr) = set.successors.row(row);
      }
   });
   return pe;
}

EstimateSet approach_b1(const NeighborIndex& index, const PointEstimates& est, const std::vector<AugmentedSample>& queries,
                        const std::vector<std::size_t>& query_paths, const std::vector<std::size_t>& query_steps,
                        double eps, std::vector<std::size_t>* neighbor_counts)
{
   return approach_b1_impl(index, est, queries, query_paths, query_steps, eps, neighbor_counts, parallel_loop);
}

EstimateSet approach_b1(const std::vector<Trajectory>& ensemble, const std::vector<AugmentedSample>& queries, double eps,
                        EstimatorMethod method, const DriftFunction* tr_drift)
{
   if (ensemble.empty()) {
      throw ArgumentError("approach B1: empty ensemble");
   }
   const double tau = ensemble.front().tau();
   const auto index = build_index(ensemble, tau, eps > 0.0 ? 2.0 * eps : 1.0);
   const auto pe = point_estimates(ensemble, index, tau, method, 0, tr_drift);
   std::vector<std::size_t> paths(queries.size(), 0), steps(queries.size());
   const auto& grid = ensemble.front().grid;
   for (std::size_t q = 0; q < queries.size(); ++q) {
      steps[q] = static_cast<std::size_t>(std::llround((queries[q].t - grid.t0()) / grid.dt()));
   }
   return approach_b1(index, pe, queries, paths, steps, eps);
}

namespace {

EstimateSet path_rows(const EstimateSet& set, std::size_t path)
{
   std::vector<Eigen::Index> keep;
   for (std::size_t r = 0; r < set.rows(); ++r) {
      if (set.path_index.empty() || set.path_index[r] == path) keep.push_back(static_cast<Eigen::Index>(r));
   }
   EstimateSet out;
   out.method = set.method;
   out.dt = set.dt;
   out.n = set.n;
   out.stencil_width = set.stencil_width;
   out.skipped = set.skipped;
   const auto take = [&](const RowMatrix& m) {
      RowMatrix o(static_cast<Eigen::Index>(keep.size()), m.cols());
      if (m.rows() == 0) return RowMatrix();
      for (std::size_t k = 0; k < keep.size(); ++k) o.row(static_cast<Eigen::Index>(k)) = m.row(keep[k]);
      return o;
   };
   out.t.resize(static_cast<Eigen::Index>(keep.size()));
   for (std::size_t k = 0; k < keep.size(); ++k) {
      out.t(static_cast<Eigen::Index>(k)) = set.t(keep[k]);
      if (!set.grid_index.empty()) out.grid_index.push_back(set.grid_index[static_cast<std::size_t>(keep[k])]);
      if (!set.path_index.empty()) out.path_index.push_back(path);
   }
   out.points = take(set.points);
   out.successors = take(set.successors);
   out.drift = take(set.drift);
   out.cov = take(set.cov);
   out.increments = take(set.increments);
   return out;
}

struct PathFit {
   ComponentFit drift;
   ComponentFit cov;
};

// Drift then covariance from pathwise estimates of one trajectory.
PathFit identify_path(const Trajectory& traj, double tau, const BasisLibrary& lib_f, const BasisLibrary& lib_G,
                      const IdentifyConfig& config, std::size_t path)
{
   const auto window = window_of(traj, config.n_train);
   const auto train = prefix(traj, window);
   const auto drift_est = pathwise_estimates(config.drift_method, train, tau, nullptr, path);
   PathFit out;
   out.drift = fit_drift(drift_est, lib_f, config.fit.lambda_f, config.fit.max_iter);
   if (config.diffusion_method == EstimatorMethod::TR) {
      SparseFit partial(lib_f, lib_G);
      partial.drift_coef = out.drift.coef;
      const auto f = partial.drift_function();
      const auto cov_est = pathwise_estimates(EstimatorMethod::TR, train, tau, &f, path);
      out.cov = fit_cov(cov_est, lib_G, config.fit.lambda_G, config.fit.max_iter);
   } else if (config.diffusion_method == config.drift_method) {
      out.cov = fit_cov(drift_est, lib_G, config.fit.lambda_G, config.fit.max_iter);
   } else {
      const auto cov_est = pathwise_estimates(config.diffusion_method, train, tau, nullptr, path);
      out.cov = fit_cov(cov_est, lib_G, config.fit.lambda_G, config.fit.max_iter);
   }
   return out;
}

} // namespace

Identification approach_b2(const std::vector<Trajectory>& ensemble, double tau, const BasisLibrary& lib_f,
                           const BasisLibrary& lib_G, const IdentifyConfig& config)
{
   if (ensemble.empty()) {
      throw ArgumentError("approach B2: empty ensemble");
   }
   const auto M = ensemble.size();
   std::vector<std::optional<PathFit>> fits(M);
   detail::parallel_for(M, [&](std::size_t k) {
      try {
         fits[k] = identify_path(ensemble[k], tau, lib_f, lib_G, config, k);
      } catch (const Error&) {
         fits[k].reset();
      }
   });
   std::size_t ok = 0;
   ComponentFit drift, cov;
   for (const auto& f : fits) {
      if (!f) continue;
      if (ok == 0) {
         drift = f->drift;
         cov = f->cov;
         drift.coef.setZero();
         cov.coef.setZero();
         drift.rows = cov.rows = 0;
         std::fill(drift.residual.begin(), drift.residual.end(), 0.0);
         std::fill(cov.residual.begin(), cov.residual.end(), 0.0);
         drift.condition = cov.condition = 0.0;
      }
      ++ok;
      drift.coef += f->drift.coef;
      cov.coef += f->cov.coef;
      drift.rows += f->drift.rows;
      cov.rows += f->cov.rows;
      drift.condition += f->drift.condition;
      cov.condition += f->cov.condition;
      for (std::size_t t = 0; t < drift.residual.size(); ++t) drift.residual[t] += f->drift.residual[t];
      for (std::size_t t = 0; t < cov.residual.size(); ++t) cov.residual[t] += f->cov.residual[t];
   }
   const auto failed = M - ok;
   if (ok == 0 || 2 * failed > M) {
      throw InsufficientDataError(fmt::format("approach B2: {} of {} per-path fits failed", failed, M));
   }
   const double inv = 1.0 / static_cast<double>(ok);
   drift.coef *= inv;
   cov.coef *= inv;
   drift.condition *= inv;
   cov.condition *= inv;
   for (auto& v : drift.residual) v *= inv;
   for (auto& v : cov.residual) v *= inv;
   for (std::size_t t = 0; t < drift.empty_support.size(); ++t) drift.empty_support[t] = drift.coef.col(static_cast<Eigen::Index>(t)).isZero(0.0);
   for (std::size_t t = 0; t < cov.empty_support.size(); ++t) cov.empty_support[t] = cov.coef.col(static_cast<Eigen::Index>(t)).isZero(0.0);

   Identification out{combine(lib_f, lib_G, drift, cov, config.fit, config.drift_method, config.diffusion_method), 0, 0, 0, 0, {}, std::nullopt};
   out.drift_rows = drift.rows;
   out.cov_rows = cov.rows;
   out.failed_paths = failed;
   return out;
}

Identification identify(const ModelSpec& model, const std::vector<Trajectory>& ensemble, const BasisLibrary& lib_f,
                        const BasisLibrary& lib_G, const IdentifyConfig& config)
{
   if (ensemble.empty()) {
      throw ArgumentError("identify: empty ensemble");
   }
   const double tau = ensemble.front().tau();
   if (config.approach == Approach::B2) {
      return approach_b2(ensemble, tau, lib_f, lib_G, config);
   }

   // Stage builders: estimates for a method, with an optional TR drift.
   std::function<EstimateSet(EstimatorMethod, const DriftFunction*)> build;
   std::optional<NeighborIndex> index;
   std::vector<AugmentedSample> queries;
   std::vector<std::size_t> q_paths, q_steps;
   std::vector<std::size_t> counts;

   if (config.approach == Approach::A) {
      build = [&](EstimatorMethod m, const DriftFunction* f) {
         return approach_a(model, ensemble.front(), config.M, config.seed, m, config.n_train, f);
      };
   } else {
      const double cell = config.eps > 0.0 ? config.cell_factor * config.eps : 1.0;
      index.emplace(build_index(ensemble, tau, cell, config.n_train));
      const auto& grid = ensemble.front().grid;
      for (std::size_t id = 0; id < index->size(); ++id) {
         if (config.queries == QuerySet::Reference && index->path(id) != 0) continue;
         const auto p = index->point(id);
         queries.emplace_back(grid.time(index->index(id)), Vector(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()))));
         q_paths.push_back(index->path(id));
         q_steps.push_back(index->index(id));
      }
      build = [&](EstimatorMethod m, const DriftFunction* f) {
         const auto pe = point_estimates(ensemble, *index, tau, m, config.n_train, f);
         std::vector<std::size_t> c;
         auto set = approach_b1(*index, pe, queries, q_paths, q_steps, config.eps, &c);
         if (counts.empty()) counts = std::move(c);
         return set;
      };
   }

   const auto drift_est = build(config.drift_method, nullptr);
   const auto drift = fit_drift(drift_est, lib_f, config.fit.lambda_f, config.fit.max_iter);
   ComponentFit cov;
   std::size_t cov_rows = drift_est.rows();
   std::size_t skipped = drift_est.skipped;
   if (config.diffusion_method == EstimatorMethod::TR) {
      SparseFit partial(lib_f, lib_G);
      partial.drift_coef = drift.coef;
      const auto f = partial.drift_function();
      const auto cov_est = build(EstimatorMethod::TR, &f);
      cov = fit_cov(cov_est, lib_G, config.fit.lambda_G, config.fit.max_iter);
      cov_rows = cov_est.rows();
      skipped = std::max(skipped, cov_est.skipped);
   } else if (config.diffusion_method == config.drift_method) {
      cov = fit_cov(drift_est, lib_G, config.fit.lambda_G, config.fit.max_iter);
   } else {
      const auto cov_est = build(config.diffusion_method, nullptr);
      cov = fit_cov(cov_est, lib_G, config.fit.lambda_G, config.fit.max_iter);
      cov_rows = cov_est.rows();
      skipped = std::max(skipped, cov_est.skipped);
   }

   Identification out{combine(lib_f, lib_G, drift, cov, config.fit, config.drift_method, config.diffusion_method), 0, 0, 0, 0, {}, std::nullopt};
   out.drift_rows = drift_est.rows();
   out.cov_rows = cov_rows;
   out.skipped = skipped;
   out.neighbor_counts = std::move(counts);
   out.estimates = path_rows(drift_est, 0);
   return out;
}

} // namespace sdde
