#include "sdde/models.hpp"

#include <cmath>

#include <fmt/format.h>

namespace sdde {

namespace {

void require_positive(std::string_view model, std::string_view name, double value)
{
   if (!(value > 0.0) || !std::isfinite(value)) {
      throw ArgumentError(fmt::format("{}: parameter {} must be positive, got {}", model, name, value));
   }
}

} // namespace

Vector ModelSpec::drift(const Vector& x, const Vector& x_tau) const
{
   Vector out(static_cast<Eigen::Index>(n));
   drift_map(as_span(x), as_span(x_tau), {out.data(), n});
   return out;
}

Matrix ModelSpec::diffusion(const Vector& x, const Vector& x_tau) const
{
   RowMatrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
   diffusion_map(as_span(x), as_span(x_tau), {g.data(), n * q});
   return g;
}

Matrix ModelSpec::covariance(const Vector& x, const Vector& x_tau) const
{
   const Matrix g = diffusion(x, x_tau);
   return g * g.transpose();
}

Vector ModelSpec::history_at(double s) const
{
   Vector out(static_cast<Eigen::Index>(n));
   history(s, {out.data(), n});
   return out;
}

ModelSpec logistic_model(double alpha, double sigma, double tau)
{
   require_positive("logistic", "alpha", alpha);
   require_positive("logistic", "sigma", sigma);
   require_positive("logistic", "tau", tau);

   ModelSpec m;
   m.label = "logistic";
   m.n = 1;
   m.q = 1;
   m.tau = tau;
   m.drift_map = [alpha](auto x, auto xt, auto out) { out[0] = alpha * x[0] * (1.0 - xt[0]); };
   m.diffusion_map = [sigma](auto x, auto, auto out) { out[0] = sigma * x[0]; };
   m.history = [](double s, std::span<double> out) { out[0] = std::cos(s); };
   m.truth.drift = {{{"X(t)", alpha}, {"X(t)X(t-tau)", -alpha}}};
   m.truth.cov = {{{"X(t)^2", sigma * sigma}}};
   return m;
}

ModelSpec predator_prey_model(const PredatorPreyParams& p)
{
   const std::string model = "predator_prey";
   require_positive(model, "alpha", p.alpha);
   require_positive(model, "beta", p.beta);
   require_positive(model, "gamma", p.gamma);
   require_positive(model, "delta", p.delta);
   require_positive(model, "kappa", p.kappa);
   require_positive(model, "sigma1", p.sigma1);
   require_positive(model, "sigma2", p.sigma2);
   require_positive(model, "tau", p.tau);

   ModelSpec m;
   m.label = model;
   m.n = 2;
   m.q = 2;
   m.tau = p.tau;
   m.drift_map = [p](auto x, auto xt, auto out) {
      out[0] = x[0] * (p.alpha - p.beta * x[0] - p.gamma * xt[1]);
      out[1] = x[1] * (-p.delta + p.kappa * xt[0]);
   };
   m.diffusion_map = [p](auto x, auto, auto out) {
      out[0] = p.sigma1 * x[0];
      out[1] = 0.0;
      out[2] = 0.0;
      out[3] = p.sigma2 * x[1];
   };
   m.history = [](double, std::span<double> out) {
      out[0] = 5.0;
      out[1] = 2.0;
   };
   m.truth.drift = {
      {{"X(t)", p.alpha}, {"X(t)^2", -p.beta}, {"X(t)Y(t-tau)", -p.gamma}},
      {{"Y(t)", -p.delta}, {"Y(t)X(t-tau)", p.kappa}},
   };
   m.truth.cov = {
      {{"X(t)^2", p.sigma1 * p.sigma1}},
      {},
      {},
      {{"Y(t)^2", p.sigma2 * p.sigma2}},
   };
   return m;
}

double volatility_squared(double x, double x_tau, double V, double alpha, double gamma, double tau)
{
   if (!(x > 0.0) || !(x_tau > 0.0)) {
      throw DomainError(fmt::format("volatility_squared: log undefined for x={}, x_tau={}", x, x_tau));
   }
   if (!(tau > 0.0) || !(alpha + gamma > 0.0)) {
      throw ArgumentError("volatility_squared: need tau > 0 and alpha + gamma > 0");
   }
   const double log_ratio = std::log(x / x_tau);
   return gamma * V / (alpha + gamma) + alpha / (tau * (alpha + gamma)) * log_ratio * log_ratio;
}

ModelSpec option_pricing_model(const OptionPricingParams& p)
{
   const std::string model = "option_pricing";
   require_positive(model, "r", p.r);
   require_positive(model, "V", p.V);
   require_positive(model, "alpha", p.alpha);
   require_positive(model, "gamma", p.gamma);
   require_positive(model, "tau", p.tau);
   require_positive(model, "x0", p.x0);

   ModelSpec m;
   m.label = model;
   m.n = 1;
   m.q = 1;
   m.tau = p.tau;
   m.drift_map = [p](auto x, auto, auto out) { out[0] = p.r * x[0]; };
   m.diffusion_map = [p](auto x, auto xt, auto out) {
      out[0] = std::sqrt(volatility_squared(x[0], xt[0], p.V, p.alpha, p.gamma, p.tau)) * x[0];
   };
   const double x0 = p.x0;
   m.history = [x0](double, std::span<double> out) { out[0] = x0; };
   m.truth.drift = {{{"X(t)", p.r}}};
   m.truth.cov = {{
      {"X(t)^2", p.gamma * p.V / (p.alpha + p.gamma)},
      {"X(t)^2*ln(X(t)/X(t-tau))^2", p.alpha / (p.tau * (p.alpha + p.gamma))},
   }};
   return m;
}

} // namespace sdde
