#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdde/core.hpp"
#include "sdde/estimators.hpp"
#include "sdde/library.hpp"

namespace sdde {

// Minimum-norm least-squares solution of A x = b.
Vector least_squares(const Matrix& A, const Vector& b);

struct StlsResult {
   Vector coef;
   std::size_t iterations = 0;
   bool empty_support = false; // every coefficient fell below the threshold
   double residual = 0.0;      // ||Theta coef - y||_2
};

// Sequential thresholded least squares: solve, zero |xi| < lambda, re-solve
// on the survivors until the support stops changing or max_iter solves.
StlsResult stls(const Matrix& theta, const Vector& y, double lambda, std::size_t max_iter = 10);

// A tall least-squares problem compressed to its triangular factor:
// [Theta | Y] = Q W with W upper triangular of size (p+k). The first p rows
// hold R and Q^T Y; the rest hold each target's orthogonal remainder.
struct ReducedProblem {
   std::size_t p = 0;
   std::size_t k = 0;
   std::size_t rows = 0;
   Matrix w;

   auto r() const { return w.topLeftCorner(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)); }
   auto qty(std::size_t j) const
   {
      return w.col(static_cast<Eigen::Index>(p + j)).head(static_cast<Eigen::Index>(p));
   }
   double remainder2(std::size_t j) const;
   double condition() const;
   // Adds more rows to the problem.
   void absorb(const Matrix& block);
};

// Rows are folded in fixed-size chunks; chunks are factored in parallel and
// combined in order, so the result does not depend on the thread count.
ReducedProblem reduce(const RowMatrix& design, const RowMatrix& targets, std::size_t chunk = 8192);

StlsResult stls(const ReducedProblem& problem, std::size_t target, double lambda, std::size_t max_iter = 10);

enum class DesignKind { Drift, Cov };

// Design rows [begin, end) of an estimate set: theta(Z_i) for KM/FD/CD; for
// TR the averaged (drift) or summed (cov) rows over Z_i and its successor.
RowMatrix design_rows(DesignKind kind, const EstimateSet& est, const BasisLibrary& lib, std::size_t begin,
                      std::size_t end);

// Targets: drift (n columns) or the upper triangle of the covariance
// (n(n+1)/2 columns, row-major order (0,0), (0,1), ..., (1,1), ...).
RowMatrix target_rows(DesignKind kind, const EstimateSet& est, std::size_t begin, std::size_t end);

struct RegressionProblem {
   RowMatrix drift_design;
   RowMatrix drift_targets;
   RowMatrix cov_design;
   RowMatrix cov_targets; // upper triangle columns; empty when the set has no covariance
};

RegressionProblem assemble_problem(const EstimateSet& est, const BasisLibrary& lib_f, const BasisLibrary& lib_G);

struct FitOptions {
   double lambda_f = 0.025;
   double lambda_G = 0.025;
   std::size_t max_iter = 10;
};

struct ComponentFit {
   Matrix coef; // p x targets
   std::vector<double> residual;
   std::vector<bool> empty_support;
   double condition = 0.0;
   std::size_t rows = 0;
};

ComponentFit fit_drift(const EstimateSet& est, const BasisLibrary& lib_f, double lambda, std::size_t max_iter = 10);
// Fits the upper triangle and mirrors; coef is p x n*n (row-major entry order).
ComponentFit fit_cov(const EstimateSet& est, const BasisLibrary& lib_G, double lambda, std::size_t max_iter = 10);

struct SparseFit {
   SparseFit(BasisLibrary lib_f, BasisLibrary lib_G);

   BasisLibrary lib_f;
   BasisLibrary lib_G;
   Matrix drift_coef; // p_f x n
   Matrix cov_coef;   // p_G x n*n
   double lambda_f = 0.0;
   double lambda_G = 0.0;
   EstimatorMethod drift_method = EstimatorMethod::KM;
   EstimatorMethod diffusion_method = EstimatorMethod::KM;
   std::vector<double> drift_residual;
   std::vector<double> cov_residual;
   std::vector<bool> drift_empty;
   std::vector<bool> cov_empty;
   double drift_condition = 0.0;
   double cov_condition = 0.0;
   std::size_t rows = 0;

   std::size_t n() const noexcept { return lib_f.n(); }
   void drift_at(std::span<const double> z, std::span<double> out) const;
   void cov_at(std::span<const double> z, std::span<double> out) const; // n*n row-major
   Vector drift_at(const Vector& z) const;
   Matrix cov_at(const Vector& z) const;
   DriftFunction drift_function() const;

   // Coefficient of a named term in drift component c / covariance entry (i, j).
   double drift_coefficient(std::size_t c, std::string_view term) const;
   double cov_coefficient(std::size_t i, std::size_t j, std::string_view term) const;

   // Per-target "term, coefficient" lists with lambdas, methods and residuals.
   std::string report() const;
};

SparseFit combine(const BasisLibrary& lib_f, const BasisLibrary& lib_G, const ComponentFit& drift,
                  const ComponentFit& cov, const FitOptions& options, EstimatorMethod drift_method,
                  EstimatorMethod diffusion_method);

// Drift and covariance from one estimate set. A TR set without covariance
// rows gets them from the fitted drift first.
SparseFit fit(const EstimateSet& est, const BasisLibrary& lib_f, const BasisLibrary& lib_G,
              const FitOptions& options = {});

// Drift from `drift_est`, covariance from `cov_est` (methods may differ).
SparseFit fit(const EstimateSet& drift_est, const EstimateSet& cov_est, const BasisLibrary& lib_f,
              const BasisLibrary& lib_G, const FitOptions& options = {});

} // namespace sdde
