#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sdde/core.hpp"

namespace sdde {

// Signed true coefficients of a model expressed in library term names.
// `cov` holds one map per entry of C = g g^T in row-major order (n*n maps).
struct TruthTable {
   std::vector<std::map<std::string, double>> drift;
   std::vector<std::map<std::string, double>> cov;
};

// dX = f(X(t), X(t - tau)) dt + g(X(t), X(t - tau)) dW with W q-dimensional
// and history X(s) = phi(s) on [-tau, 0].
struct ModelSpec {
   using DriftMap = std::function<void(std::span<const double> x, std::span<const double> x_tau, std::span<double> out)>;
   // Writes g as an n x q row-major block.
   using DiffusionMap = DriftMap;

   std::string label;
   std::size_t n = 1;
   std::size_t q = 1;
   double tau = 1.0;
   DriftMap drift_map;
   DiffusionMap diffusion_map;
   History::Map history;
   TruthTable truth;

   Vector drift(const Vector& x, const Vector& x_tau) const;
   Matrix diffusion(const Vector& x, const Vector& x_tau) const;
   // C = g g^T, the quadratic-variation rate.
   Matrix covariance(const Vector& x, const Vector& x_tau) const;
   Vector history_at(double s) const;
};

struct LogisticParams {
   double alpha = 2.0;
   double sigma = 0.4;
   double tau = 1.0;
};

struct PredatorPreyParams {
   double alpha = 1.0;
   double beta = 0.1;
   double gamma = 0.1;
   double delta = 0.5;
   double kappa = 0.1;
   double sigma1 = 0.4;
   double sigma2 = 0.4;
   double tau = 1.0;
};

struct OptionPricingParams {
   double r = 0.05;
   double V = 0.127;
   double alpha = 0.6;
   double gamma = 0.4;
   double tau = 0.002;
   double x0 = 100.0;
};

// Stochastic delay logistic (Hutchinson) equation:
//   f = alpha x (1 - x_tau), g = sigma x, history cos(s).
ModelSpec logistic_model(double alpha, double sigma, double tau);
inline ModelSpec logistic_model(const LogisticParams& p = {}) { return logistic_model(p.alpha, p.sigma, p.tau); }

// Prey x1 / predator x2 with delayed interaction and diagonal multiplicative
// noise; constant history (5, 2).
ModelSpec predator_prey_model(const PredatorPreyParams& p = {});

// GARCH-like delayed volatility
//   sigma^2 = gamma V/(alpha+gamma) + alpha/(tau (alpha+gamma)) ln^2(x/x_tau).
double volatility_squared(double x, double x_tau, double V, double alpha, double gamma, double tau);

// Asset price dX = r X dt + sigma(X, X_tau) X dW with constant history x0.
ModelSpec option_pricing_model(const OptionPricingParams& p = {});

} // namespace sdde
