#include "sdde/regression.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "parallel.hpp"

namespace sdde {

namespace {

void require_finite(const Matrix& A, const Vector& b, const char* who)
{
   if (!A.allFinite() || !b.allFinite()) {
      throw ArgumentError(fmt::format("{}: non-finite input", who));
   }
}

Vector solve_min_norm(const Matrix& A, const Vector& b)
{
   Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
   return cod.solve(b);
}

// Upper-triangular factor of `block`, padded to width x width.
Matrix triangular_factor(const Matrix& block, Eigen::Index width)
{
   Matrix w = Matrix::Zero(width, width);
   if (block.rows() == 0) return w;
   Eigen::HouseholderQR<Matrix> qr(block);
   const auto rows = std::min(block.rows(), width);
   w.topRows(rows) = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
   return w;
}

std::vector<std::pair<std::size_t, std::size_t>> upper_pairs(std::size_t n)
{
   std::vector<std::pair<std::size_t, std::size_t>> out;
   for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) out.emplace_back(i, j);
   }
   return out;
}

// Active-set iteration shared by the dense and reduced solvers. `solve`
// returns the restricted solution for a column subset.
template<typename Solve, typename Residual>
StlsResult run_stls(std::size_t p, double lambda, std::size_t max_iter, Solve&& solve, Residual&& residual)
{
   if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ArgumentError("stls: lambda must be finite and >= 0");
   }
   if (max_iter < 1) {
      throw ArgumentError("stls: max_iter must be at least 1");
   }
   StlsResult out;
   out.coef = Vector::Zero(static_cast<Eigen::Index>(p));
   std::vector<std::size_t> active(p);
   for (std::size_t j = 0; j < p; ++j) active[j] = j;

   bool stable = false;
   while (out.iterations < max_iter) {
      const Vector x = solve(active);
      ++out.iterations;
      out.coef.setZero();
      std::vector<std::size_t> keep;
      for (std::size_t a = 0; a < active.size(); ++a) {
         out.coef(static_cast<Eigen::Index>(active[a])) = x(static_cast<Eigen::Index>(a));
         if (std::abs(x(static_cast<Eigen::Index>(a))) >= lambda) keep.push_back(active[a]);
      }
      if (keep.size() == active.size()) {
         stable = true;
         break;
      }
      active = std::move(keep);
      if (active.empty()) break;
   }
   if (!stable) {
      // Out of iterations (or support emptied): enforce the threshold on the
      // last solution so no sub-threshold entry survives.
      for (Eigen::Index j = 0; j < out.coef.size(); ++j) {
         if (std::abs(out.coef(j)) < lambda) out.coef(j) = 0.0;
      }
   }
   out.empty_support = p > 0 && (out.coef.array() != 0.0).count() == 0;
   out.residual = residual(out.coef);
   return out;
}

} // namespace

Vector least_squares(const Matrix& A, const Vector& b)
{
   if (A.rows() < 1 || A.cols() < 1 || A.rows() != b.size()) {
      throw ArgumentError("least_squares: need a nonempty A with rows matching b");
   }
   require_finite(A, b, "least_squares");
   return solve_min_norm(A, b);
}

StlsResult stls(const Matrix& theta, const Vector& y, double lambda, std::size_t max_iter)
{
   if (theta.rows() < 1 || theta.cols() < 1 || theta.rows() != y.size()) {
      throw ArgumentError("stls: need a nonempty Theta with rows matching y");
   }
   require_finite(theta, y, "stls");
   const auto p = static_cast<std::size_t>(theta.cols());
   return run_stls(
      p, lambda, max_iter,
      [&](const std::vector<std::size_t>& cols) {
         Matrix sub(theta.rows(), static_cast<Eigen::Index>(cols.size()));
         for (std::size_t a = 0; a < cols.size(); ++a) sub.col(static_cast<Eigen::Index>(a)) = theta.col(static_cast<Eigen::Index>(cols[a]));
         return solve_min_norm(sub, y);
      },
      [&](const Vector& coef) { return (theta * coef - y).norm(); });
}

double ReducedProblem::remainder2(std::size_t j) const
{
   const auto col = static_cast<Eigen::Index>(p + j);
   return w.col(col).segment(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j + 1)).squaredNorm();
}

double ReducedProblem::condition() const
{
   if (p == 0) return 0.0;
   const Matrix R = r();
   Eigen::JacobiSVD<Matrix> svd(R);
   const auto& s = svd.singularValues();
   const double smax = s(0);
   const double smin = s(s.size() - 1);
   if (smin <= 0.0) return std::numeric_limits<double>::infinity();
   return smax / smin;
}

void ReducedProblem::absorb(const Matrix& block)
{
   const auto width = static_cast<Eigen::Index>(p + k);
   if (block.cols() != width) {
      throw ArgumentError("ReducedProblem::absorb: column count mismatch");
   }
   if (w.rows() != width) {
      w = triangular_factor(block, width);
   } else {
      Matrix stacked(width + block.rows(), width);
      stacked << w, block;
      w = triangular_factor(stacked, width);
   }
   rows += static_cast<std::size_t>(block.rows());
}

namespace {

template<typename MakeBlock>
ReducedProblem reduce_chunks(std::size_t p, std::size_t k, std::size_t rows, std::size_t chunk, MakeBlock&& make)
{
   if (chunk < 1) chunk = 8192;
   ReducedProblem out;
   out.p = p;
   out.k = k;
   const auto width = static_cast<Eigen::Index>(p + k);
   const std::size_t chunks = (rows + chunk - 1) / chunk;
   std::vector<Matrix> factors(chunks);
   detail::parallel_for(chunks, [&](std::size_t c) {
      const auto begin = c * chunk;
      const auto end = std::min(rows, begin + chunk);
      const Matrix block = make(begin, end);
      if (!block.allFinite()) {
         throw ArgumentError("regression: non-finite design or target entries");
      }
      factors[c] = triangular_factor(block, width);
   });
   if (chunks == 0) {
      out.w = Matrix::Zero(width, width);
      return out;
   }
   out.w = std::move(factors[0]);
   for (std::size_t c = 1; c < chunks; ++c) {
      Matrix stacked(2 * width, width);
      stacked << out.w, factors[c];
      out.w = triangular_factor(stacked, width);
   }
   out.rows = rows;
   return out;
}

} // namespace

ReducedProblem reduce(const RowMatrix& design, const RowMatrix& targets, std::size_t chunk)
{
   if (design.rows() != targets.rows()) {
      throw ArgumentError("reduce: design and targets disagree in row count");
   }
   const auto p = static_cast<std::size_t>(design.cols());
   const auto k = static_cast<std::size_t>(targets.cols());
   return reduce_chunks(p, k, static_cast<std::size_t>(design.rows()), chunk, [&](std::size_t b, std::size_t e) {
      const auto len = static_cast<Eigen::Index>(e - b);
      Matrix block(len, static_cast<Eigen::Index>(p + k));
      block << design.middleRows(static_cast<Eigen::Index>(b), len), targets.middleRows(static_cast<Eigen::Index>(b), len);
      return block;
   });
}

StlsResult stls(const ReducedProblem& problem, std::size_t target, double lambda, std::size_t max_iter)
{
   if (target >= problem.k) {
      throw ArgumentError("stls: target index out of range");
   }
   const Matrix R = problem.r();
   const Vector c = problem.qty(target);
   const double rest = problem.remainder2(target);
   return run_stls(
      problem.p, lambda, max_iter,
      [&](const std::vector<std::size_t>& cols) {
         Matrix sub(R.rows(), static_cast<Eigen::Index>(cols.size()));
         for (std::size_t a = 0; a < cols.size(); ++a) sub.col(static_cast<Eigen::Index>(a)) = R.col(static_cast<Eigen::Index>(cols[a]));
         return solve_min_norm(sub, c);
      },
      [&](const Vector& coef) { return std::sqrt((R * coef - c).squaredNorm() + rest); });
}

RowMatrix design_rows(DesignKind kind, const EstimateSet& est, const BasisLibrary& lib, std::size_t begin,
                      std::size_t end)
{
   if (end > est.rows() || begin > end) {
      throw ArgumentError("design_rows: row range out of bounds");
   }
   if (lib.n() != est.n) {
      throw ArgumentError(fmt::format("design_rows: library is for n={}, estimates have n={}", lib.n(), est.n));
   }
   const bool tr = est.method == EstimatorMethod::TR;
   if (tr && est.successors.rows() != est.points.rows()) {
      throw Error("design_rows: TR estimates lack successor points");
   }
   const auto p = lib.size();
   RowMatrix out(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(p));
   std::vector<double> next(p);
   for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      auto row = row_span(out, static_cast<Eigen::Index>(i - begin));
      evaluate_row(lib, row_span(est.points, r), row, i);
      if (!tr) continue;
      evaluate_row(lib, row_span(est.successors, r), next, i);
      const double scale = kind == DesignKind::Drift ? 0.5 : 1.0;
      for (std::size_t j = 0; j < p; ++j) row[j] = scale * (row[j] + next[j]);
   }
   return out;
}

RowMatrix target_rows(DesignKind kind, const EstimateSet& est, std::size_t begin, std::size_t end)
{
   if (end > est.rows() || begin > end) {
      throw ArgumentError("target_rows: row range out of bounds");
   }
   const auto len = static_cast<Eigen::Index>(end - begin);
   if (kind == DesignKind::Drift) {
      return est.drift.middleRows(static_cast<Eigen::Index>(begin), len);
   }
   if (!est.has_cov()) {
      throw Error("target_rows: estimate set has no covariance rows");
   }
   const auto pairs = upper_pairs(est.n);
   const auto n = static_cast<Eigen::Index>(est.n);
   RowMatrix out(len, static_cast<Eigen::Index>(pairs.size()));
   for (Eigen::Index r = 0; r < len; ++r) {
      for (std::size_t c = 0; c < pairs.size(); ++c) {
         const auto [i, j] = pairs[c];
         out(r, static_cast<Eigen::Index>(c)) =
            est.cov(static_cast<Eigen::Index>(begin) + r, static_cast<Eigen::Index>(i) * n + static_cast<Eigen::Index>(j));
      }
   }
   return out;
}

RegressionProblem assemble_problem(const EstimateSet& est, const BasisLibrary& lib_f, const BasisLibrary& lib_G)
{
   est.validate();
   RegressionProblem out;
   const auto m = est.rows();
   out.drift_design = design_rows(DesignKind::Drift, est, lib_f, 0, m);
   out.drift_targets = target_rows(DesignKind::Drift, est, 0, m);
   out.cov_design = design_rows(DesignKind::Cov, est, lib_G, 0, m);
   if (est.has_cov()) {
      out.cov_targets = target_rows(DesignKind::Cov, est, 0, m);
   }
   if (out.drift_design.rows() != out.drift_targets.rows() ||
       (out.cov_targets.size() > 0 && out.cov_design.rows() != out.cov_targets.rows())) {
      throw Error("assemble_problem: design and target rows are misaligned");
   }
   return out;
}

namespace {

ComponentFit fit_component(DesignKind kind, const EstimateSet& est, const BasisLibrary& lib, double lambda,
                           std::size_t max_iter)
{
   const auto m = est.rows();
   if (m < lib.size() || m < min_estimate_rows) {
      throw InsufficientDataError(fmt::format("fit: {} estimate rows for a library of {} terms", m, lib.size()));
   }
   if (lib.n() != est.n) {
      throw ArgumentError(fmt::format("fit: library is for n={}, estimates have n={}", lib.n(), est.n));
   }
   const auto p = lib.size();
   const std::size_t k = kind == DesignKind::Drift ? est.n : est.n * (est.n + 1) / 2;
   const auto problem = reduce_chunks(p, k, m, 8192, [&](std::size_t b, std::size_t e) {
      const auto len = static_cast<Eigen::Index>(e - b);
      Matrix block(len, static_cast<Eigen::Index>(p + k));
      block << design_rows(kind, est, lib, b, e), target_rows(kind, est, b, e);
      return block;
   });

   ComponentFit out;
   out.rows = m;
   out.condition = problem.condition();
   Matrix coef(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
   out.residual.resize(k);
   out.empty_support.resize(k);
   for (std::size_t t = 0; t < k; ++t) {
      const auto res = stls(problem, t, lambda, max_iter);
      coef.col(static_cast<Eigen::Index>(t)) = res.coef;
      out.residual[t] = res.residual;
      out.empty_support[t] = res.empty_support;
   }
   if (kind == DesignKind::Drift) {
      out.coef = std::move(coef);
      return out;
   }
   // Mirror the upper triangle into all n*n entries.
   const auto n = est.n;
   const auto pairs = upper_pairs(n);
   out.coef = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n * n));
   std::vector<double> residual(n * n);
   std::vector<bool> empty(n * n);
   for (std::size_t c = 0; c < pairs.size(); ++c) {
      const auto [i, j] = pairs[c];
      out.coef.col(static_cast<Eigen::Index>(i * n + j)) = coef.col(static_cast<Eigen::Index>(c));
      out.coef.col(static_cast<Eigen::Index>(j * n + i)) = coef.col(static_cast<Eigen::Index>(c));
      residual[i * n + j] = residual[j * n + i] = out.residual[c];
      empty[i * n + j] = empty[j * n + i] = out.empty_support[c];
   }
   out.residual = std::move(residual);
   out.empty_support = std::move(empty);
   return out;
}

} // namespace

ComponentFit fit_drift(const EstimateSet& est, const BasisLibrary& lib_f, double lambda, std::size_t max_iter)
{
   return fit_component(DesignKind::Drift, est, lib_f, lambda, max_iter);
}

ComponentFit fit_cov(const EstimateSet& est, const BasisLibrary& lib_G, double lambda, std::size_t max_iter)
{
   return fit_component(DesignKind::Cov, est, lib_G, lambda, max_iter);
}

SparseFit::SparseFit(BasisLibrary f, BasisLibrary g) : lib_f(std::move(f)), lib_G(std::move(g))
{
   if (lib_f.n() != lib_G.n()) {
      throw ArgumentError("SparseFit: drift and diffusion libraries disagree on n");
   }
   drift_coef = Matrix::Zero(static_cast<Eigen::Index>(lib_f.size()), static_cast<Eigen::Index>(lib_f.n()));
   cov_coef = Matrix::Zero(static_cast<Eigen::Index>(lib_G.size()), static_cast<Eigen::Index>(lib_G.n() * lib_G.n()));
}

void SparseFit::drift_at(std::span<const double> z, std::span<double> out) const
{
   std::vector<double> theta(lib_f.size());
   evaluate_row(lib_f, z, theta);
   for (std::size_t c = 0; c < n(); ++c) {
      double v = 0.0;
      for (std::size_t j = 0; j < theta.size(); ++j) v += theta[j] * drift_coef(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
      out[c] = v;
   }
}

void SparseFit::cov_at(std::span<const double> z, std::span<double> out) const
{
   std::vector<double> theta(lib_G.size());
   evaluate_row(lib_G, z, theta);
   const auto nn = n() * n();
   for (std::size_t c = 0; c < nn; ++c) {
      double v = 0.0;
      for (std::size_t j = 0; j < theta.size(); ++j) v += theta[j] * cov_coef(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
      out[c] = v;
   }
}

Vector SparseFit::drift_at(const Vector& z) const
{
   Vector out(static_cast<Eigen::Index>(n()));
   drift_at(as_span(z), {out.data(), n()});
   return out;
}

Matrix SparseFit::cov_at(const Vector& z) const
{
   RowMatrix out(static_cast<Eigen::Index>(n()), static_cast<Eigen::Index>(n()));
   cov_at(as_span(z), {out.data(), n() * n()});
   return out;
}

DriftFunction SparseFit::drift_function() const
{
   return [self = *this](std::span<const double> z, std::span<double> out) { self.drift_at(z, out); };
}

double SparseFit::drift_coefficient(std::size_t c, std::string_view term) const
{
   const auto j = lib_f.index_of(term);
   if (!j || c >= n()) {
      throw ArgumentError(fmt::format("drift_coefficient: unknown term '{}' or component {}", term, c));
   }
   return drift_coef(static_cast<Eigen::Index>(*j), static_cast<Eigen::Index>(c));
}

double SparseFit::cov_coefficient(std::size_t i, std::size_t j, std::string_view term) const
{
   const auto t = lib_G.index_of(term);
   if (!t || i >= n() || j >= n()) {
      throw ArgumentError(fmt::format("cov_coefficient: unknown term '{}' or entry ({}, {})", term, i, j));
   }
   return cov_coef(static_cast<Eigen::Index>(*t), static_cast<Eigen::Index>(i * n() + j));
}

std::string SparseFit::report() const
{
   std::ostringstream os;
   os << fmt::format("drift_method={} diffusion_method={} lambda_f={} lambda_G={} rows={}\n", to_string(drift_method),
                     to_string(diffusion_method), lambda_f, lambda_G, rows);
   os << fmt::format("drift_condition={:.6g} cov_condition={:.6g}\n", drift_condition, cov_condition);
   for (std::size_t c = 0; c < n(); ++c) {
      os << fmt::format("[f{}] residual={:.10g}{}\n", c + 1, c < drift_residual.size() ? drift_residual[c] : 0.0,
                        c < drift_empty.size() && drift_empty[c] ? " (empty support)" : "");
      for (std::size_t j = 0; j < lib_f.size(); ++j) {
         os << fmt::format("{}, {:.17g}\n", lib_f[j].name, drift_coef(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)));
      }
   }
   for (std::size_t a = 0; a < n(); ++a) {
      for (std::size_t b = 0; b < n(); ++b) {
         const auto c = a * n() + b;
         os << fmt::format("[C{}{}] residual={:.10g}{}\n", a + 1, b + 1, c < cov_residual.size() ? cov_residual[c] : 0.0,
                           c < cov_empty.size() && cov_empty[c] ? " (empty support)" : "");
         for (std::size_t j = 0; j < lib_G.size(); ++j) {
            os << fmt::format("{}, {:.17g}\n", lib_G[j].name, cov_coef(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)));
         }
      }
   }
   return os.str();
}

SparseFit combine(const BasisLibrary& lib_f, const BasisLibrary& lib_G, const ComponentFit& drift,
                  const ComponentFit& cov, const FitOptions& options, EstimatorMethod drift_method,
                  EstimatorMethod diffusion_method)
{
   SparseFit out(lib_f, lib_G);
   out.drift_coef = drift.coef;
   out.cov_coef = cov.coef;
   out.lambda_f = options.lambda_f;
   out.lambda_G = options.lambda_G;
   out.drift_method = drift_method;
   out.diffusion_method = diffusion_method;
   out.drift_residual = drift.residual;
   out.cov_residual = cov.residual;
   out.drift_empty = drift.empty_support;
   out.cov_empty = cov.empty_support;
   out.drift_condition = drift.condition;
   out.cov_condition = cov.condition;
   out.rows = drift.rows;
   return out;
}

SparseFit fit(const EstimateSet& est, const BasisLibrary& lib_f, const BasisLibrary& lib_G, const FitOptions& options)
{
   est.validate();
   const auto drift = fit_drift(est, lib_f, options.lambda_f, options.max_iter);
   if (est.has_cov()) {
      const auto cov = fit_cov(est, lib_G, options.lambda_G, options.max_iter);
      return combine(lib_f, lib_G, drift, cov, options, est.method, est.method);
   }
   if (est.method != EstimatorMethod::TR) {
      throw Error("fit: estimate set has no covariance rows");
   }
   SparseFit partial(lib_f, lib_G);
   partial.drift_coef = drift.coef;
   EstimateSet with_cov = est;
   inject_tr_covariance(with_cov, partial.drift_function());
   const auto cov = fit_cov(with_cov, lib_G, options.lambda_G, options.max_iter);
   return combine(lib_f, lib_G, drift, cov, options, est.method, est.method);
}

SparseFit fit(const EstimateSet& drift_est, const EstimateSet& cov_est, const BasisLibrary& lib_f,
              const BasisLibrary& lib_G, const FitOptions& options)
{
   drift_est.validate();
   cov_est.validate();
   const auto drift = fit_drift(drift_est, lib_f, options.lambda_f, options.max_iter);
   if (cov_est.has_cov()) {
      const auto cov = fit_cov(cov_est, lib_G, options.lambda_G, options.max_iter);
      return combine(lib_f, lib_G, drift, cov, options, drift_est.method, cov_est.method);
   }
   if (cov_est.method != EstimatorMethod::TR) {
      throw Error("fit: covariance estimate set has no covariance rows");
   }
   SparseFit partial(lib_f, lib_G);
   partial.drift_coef = drift.coef;
   EstimateSet with_cov = cov_est;
   inject_tr_covariance(with_cov, partial.drift_function());
   const auto cov = fit_cov(with_cov, lib_G, options.lambda_G, options.max_iter);
   return combine(lib_f, lib_G, drift, cov, options, drift_est.method, cov_est.method);
}

} // namespace sdde
