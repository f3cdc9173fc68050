// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "sdde/approaches.hpp"
#include "sdde/errors.hpp"
#include "sdde/estimators.hpp"
#include "sdde/experiment.hpp"
#include "sdde/io.hpp"
#include "sdde/library.hpp"
#include "sdde/neighbor_index.hpp"
#include "sdde/regression.hpp"
#include "sdde/simulate.hpp"

using namespace sdde;
namespace fs = std::filesystem;

namespace {

const std::uint64_t seeds[] = {1, 2, 3, 4, 5};
const EstimatorMethod methods[] = {EstimatorMethod::KM, EstimatorMethod::FD, EstimatorMethod::CD, EstimatorMethod::TR};

struct Outcome {
   bool pass = false;
   std::string detail;
};

double mean(const std::vector<double>& v)
{
   return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string sci(double v)
{
   return fmt::format("{:.3g}", v);
}

// Per-key mean of coefficient errors over runs.
std::map<std::string, double> mean_errors(const std::vector<BenchmarkResult>& rs)
{
   std::map<std::string, std::vector<double>> all;
   for (const auto& r : rs)
      for (const auto& [k, v] : r.coefficient_errors) all[k].push_back(v);
   std::map<std::string, double> out;
   for (const auto& [k, v] : all) out[k] = mean(v);
   return out;
}

std::string describe_errors(const std::map<std::string, double>& e)
{
   std::string s;
   for (const auto& [k, v] : e) s += fmt::format("{}{}={}", s.empty() ? "" : " ", k, sci(v));
   return s;
}

ExperimentConfig paper_setting(const std::string& model, Approach a, EstimatorMethod m, std::uint64_t seed)
{
   auto c = default_config(model);
   c.approach = a;
   c.drift_method = c.diffusion_method = m;
   c.M = 1000;
   c.eps = 1e-4;
   c.lambda_f = c.lambda_G = 0.025;
   c.seed = seed;
   return c;
}

std::vector<BenchmarkResult> over_seeds(const std::string& model, Approach a, EstimatorMethod m)
{
   std::vector<BenchmarkResult> rs;
   for (auto s : seeds) rs.push_back(run_cell(paper_setting(model, a, m, s), nullptr));
   return rs;
}

std::string statuses(const std::vector<BenchmarkResult>& rs)
{
   std::string s;
   for (const auto& r : rs)
      if (r.status.rfind("error", 0) == 0) s += " [" + r.status + "]";
   return s;
}

Outcome criterion1()
{
   const auto rs = over_seeds("logistic", Approach::B1, EstimatorMethod::KM);
   std::size_t drift_ok = 0, diff_ok = 0;
   for (const auto& r : rs) {
      drift_ok += r.drift_support;
      diff_ok += r.diffusion_support;
   }
   const auto e = mean_errors(rs);
   bool pass = drift_ok == rs.size() && diff_ok == rs.size() && !e.empty();
   for (const auto& [k, v] : e) pass = pass && v <= (k[0] == 'f' ? 1e-2 : 1e-3);
   return {pass, fmt::format("drift support {}/5, diffusion support {}/5, mean errors {}{}", drift_ok, diff_ok,
                             describe_errors(e), statuses(rs))};
}

Outcome criterion2()
{
   const auto rs = over_seeds("logistic", Approach::A, EstimatorMethod::KM);
   std::size_t ok = 0;
   for (const auto& r : rs) ok += r.drift_support;
   std::map<std::string, double> drift;
   for (const auto& [k, v] : mean_errors(rs))
      if (k[0] == 'f') drift[k] = v;
   bool pass = ok == rs.size() && !drift.empty();
   for (const auto& [k, v] : drift) pass = pass && v <= 5e-2;
   return {pass, fmt::format("drift support {}/5, mean errors {}{}", ok, describe_errors(drift), statuses(rs))};
}

Outcome criterion3()
{
   const auto rs = over_seeds("predator_prey", Approach::B1, EstimatorMethod::KM);
   std::size_t drift_ok = 0, diff_ok = 0;
   for (const auto& r : rs) {
      drift_ok += r.drift_support;
      diff_ok += r.diffusion_support;
   }
   const auto e = mean_errors(rs);
   bool pass = drift_ok == rs.size() && diff_ok == rs.size() && !e.empty();
   for (const auto& [k, v] : e) pass = pass && v <= 5e-2;
   return {pass, fmt::format("drift support {}/5, diffusion support {}/5, mean errors {}{}", drift_ok, diff_ok,
                             describe_errors(e), statuses(rs))};
}

Outcome criterion4()
{
   std::map<EstimatorMethod, int> wins;
   std::string detail;
   for (auto s : seeds) {
      auto base = paper_setting("logistic", Approach::B1, EstimatorMethod::KM, s);
      const auto data = generate(base);
      for (auto m : methods) {
         auto b1 = paper_setting("logistic", Approach::B1, m, s);
         auto b2 = paper_setting("logistic", Approach::B2, m, s);
         const auto r1 = run_cell(b1, &data);
         const auto r2 = run_cell(b2, &data);
         // An unsimulable B1 model (NaN) counts as a loss.
         const bool win = std::isfinite(r1.rmse_full) && (!std::isfinite(r2.rmse_full) || r1.rmse_full < r2.rmse_full);
         wins[m] += win;
         detail += fmt::format(" s{}:{}={}/{}", s, to_string(m), sci(r1.rmse_full), sci(r2.rmse_full));
      }
   }
   bool pass = true;
   std::string tally;
   for (auto m : methods) {
      pass = pass && wins[m] >= 4;
      tally += fmt::format("{}{} {}/5", tally.empty() ? "" : ", ", to_string(m), wins[m]);
   }
   return {pass, "B1 wins " + tally + " (B1/B2 rmse_full:" + detail + ")"};
}

// Deterministic logistic DDE sampled at dt from a fine oracle run.
Trajectory oracle_path(const std::vector<double>& fine, double h, double dt, double t_end)
{
   const auto stride = static_cast<std::size_t>(std::llround(dt / h));
   const auto steps = static_cast<std::size_t>(std::llround(t_end / dt)) + 1;
   RowMatrix x(static_cast<Eigen::Index>(steps), 1);
   for (std::size_t i = 0; i < steps; ++i) x(static_cast<Eigen::Index>(i), 0) = fine[i * stride];
   auto hist = History::sampled(
      1.0, 1, [](double s, std::span<double> out) { out[0] = std::cos(s); }, dt);
   return Trajectory(TimeGrid(0.0, dt, steps), std::move(x), std::move(hist));
}

Outcome criterion5()
{
   const double alpha = 2.0, t_end = 6.0, lo = 1.5, hi = 5.5;
   const double h = 1.0 / 6400.0;
   const auto fine = oracle::logistic_dde(alpha, 1.0, t_end, h);
   const auto lib = polynomial_library(1, 2);
   Vector truth = Vector::Zero(static_cast<Eigen::Index>(lib.size()));
   truth(static_cast<Eigen::Index>(*lib.index_of("X(t)"))) = alpha;
   truth(static_cast<Eigen::Index>(*lib.index_of("X(t)X(t-tau)"))) = -alpha;

   std::map<EstimatorMethod, std::vector<double>> err;
   std::vector<double> dts;
   for (int k = 0; k < 5; ++k) {
      const double dt = 0.02 / std::pow(2.0, k);
      dts.push_back(dt);
      const auto path = oracle_path(fine, h, dt, t_end);
      for (auto m : methods) {
         const auto est = pathwise_estimates(m, path, 1.0);
         std::size_t b = 0, e = 0;
         for (std::size_t r = 0; r < est.rows(); ++r) {
            const double t = est.t(static_cast<Eigen::Index>(r));
            if (t < lo) b = r + 1;
            if (t <= hi) e = r + 1;
         }
         double worst = 0.0;
         if (m == EstimatorMethod::TR) {
            // Coefficient error of the fit on the averaged design.
            const Matrix design = design_rows(DesignKind::Drift, est, lib, b, e);
            const Vector target = target_rows(DesignKind::Drift, est, b, e).col(0);
            worst = (least_squares(design, target) - truth).cwiseAbs().maxCoeff();
         } else {
            for (std::size_t r = b; r < e; ++r) {
               const auto z = est.points.row(static_cast<Eigen::Index>(r));
               const double exact = alpha * z(0) * (1.0 - z(1));
               worst = std::max(worst, std::abs(est.drift(static_cast<Eigen::Index>(r), 0) - exact));
            }
         }
         err[m].push_back(worst);
      }
   }
   bool pass = true;
   std::string detail;
   for (auto m : methods) {
      // Least-squares slope of log error against log dt.
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double n = static_cast<double>(dts.size());
      for (std::size_t k = 0; k < dts.size(); ++k) {
         const double x = std::log(dts[k]), y = std::log(err[m][k]);
         sx += x;
         sy += y;
         sxx += x * x;
         sxy += x * y;
      }
      const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      const double need = m == EstimatorMethod::KM ? 0.9 : 1.8;
      pass = pass && slope >= need;
      detail += fmt::format("{}{} order {:.2f} (errors {}..{})", detail.empty() ? "" : ", ", to_string(m), slope,
                            sci(err[m].front()), sci(err[m].back()));
   }
   return {pass, detail};
}

Outcome criterion6()
{
   const auto model = oracle::brownian(0.3);
   const auto grid = TimeGrid(0.0, 0.01, 1001);
   const auto ensemble = simulate_ensemble(model, grid, 100, 21);
   const DriftFunction zero = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
   bool pass = true;
   std::string detail;
   for (auto m : methods) {
      double s = 0.0;
      std::size_t count = 0;
      for (const auto& p : ensemble) {
         const auto set = pathwise_estimates(m, p, 0.1, &zero);
         s += set.cov.sum();
         count += set.rows();
      }
      double c = s / static_cast<double>(count);
      if (m == EstimatorMethod::TR) c /= 2.0; // summed target over Z_i and its successor
      const double rel = std::abs(c - 0.09) / 0.09;
      pass = pass && rel <= 0.05;
      detail += fmt::format("{}{} {:.5f} ({} samples)", detail.empty() ? "" : ", ", to_string(m), c, count);
   }
   return {pass, detail};
}

Outcome criterion7()
{
   std::mt19937_64 rng(2024);
   std::normal_distribution<double> N;
   std::uniform_int_distribution<int> P(2, 8);
   std::uniform_real_distribution<double> mag(0.5, 2.0);
   int good = 0;
   for (int inst = 0; inst < 100; ++inst) {
      const int p = P(rng);
      const int m = std::uniform_int_distribution<int>(p + 5, 200)(rng);
      Eigen::MatrixXd A(m, p);
      for (int i = 0; i < m; ++i)
         for (int j = 0; j < p; ++j) A(i, j) = N(rng);
      Eigen::VectorXd xi = Eigen::VectorXd::Zero(p);
      const int k = std::uniform_int_distribution<int>(1, p)(rng);
      std::vector<int> cols(static_cast<std::size_t>(p));
      std::iota(cols.begin(), cols.end(), 0);
      std::shuffle(cols.begin(), cols.end(), rng);
      for (int j = 0; j < k; ++j) xi(cols[static_cast<std::size_t>(j)]) = (N(rng) < 0 ? -1 : 1) * mag(rng);
      const Eigen::VectorXd y = A * xi;
      const auto r = stls(A, y, 0.1);
      const int card = static_cast<int>((r.coef.array() != 0.0).count());
      const double best = oracle::best_subset(A, y, card);
      good += r.residual <= 1.1 * best + 1e-9 * y.norm();
   }

   // Planted logistic-library instance.
   const auto lib = polynomial_library(1, 2);
   RowMatrix z(300, 2);
   std::uniform_real_distribution<double> U(0.2, 1.8);
   for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, 0) = U(rng), z(i, 1) = U(rng);
   const Matrix theta = evaluate_library(lib, z);
   Vector truth = Vector::Zero(static_cast<Eigen::Index>(lib.size()));
   truth(1) = 2.0;
   truth(4) = -2.0;
   const auto planted = stls(theta, theta * truth, 0.025);
   const double perr = (planted.coef - truth).cwiseAbs().maxCoeff();
   const bool exact = perr <= 1e-10 && ((planted.coef.array() != 0.0) == (truth.array() != 0.0)).all();
   return {good >= 90 && exact, fmt::format("{}/100 within 10% of best subset, planted max error {}", good, sci(perr))};
}

Outcome criterion8()
{
   std::mt19937_64 rng(77);
   std::uniform_real_distribution<double> U(0.0, 1.0);
   int agree = 0;
   std::size_t queries = 0;
   for (int e = 0; e < 100; ++e) {
      const bool pp = e % 2 == 1;
      const auto model = pp ? predator_prey_model() : logistic_model();
      const std::size_t M = 2 + static_cast<std::size_t>(U(rng) * 8);
      const auto grid = TimeGrid(0.0, 0.01, 150 + static_cast<std::size_t>(300 * U(rng)));
      const auto ensemble = simulate_ensemble(model, grid, M, 1000 + static_cast<std::uint64_t>(e));
      const double eps = std::pow(10.0, -3.0 + 3.0 * U(rng));
      const double cell = eps * (0.5 + 3.0 * U(rng));
      const auto index = build_index(ensemble, model.tau, cell);
      bool ok = true;
      for (int q = 0; q < 40; ++q) {
         std::vector<double> z(index.dim());
         if (q % 2 == 0) {
            const auto id = static_cast<std::size_t>(U(rng) * static_cast<double>(index.size()));
            const auto pt = index.point(std::min(id, index.size() - 1));
            for (std::size_t d = 0; d < z.size(); ++d) z[d] = pt[d] + eps * (U(rng) - 0.5);
         } else {
            for (std::size_t d = 0; d < z.size(); ++d) {
               const auto col = index.points().col(static_cast<Eigen::Index>(d));
               z[d] = col.minCoeff() + (col.maxCoeff() - col.minCoeff()) * U(rng);
            }
         }
         // Independent scan.
         std::vector<std::size_t> want;
         for (std::size_t id = 0; id < index.size(); ++id) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < z.size(); ++d) d2 += std::pow(index.point(id)[d] - z[d], 2);
            if (std::sqrt(d2) <= eps) want.push_back(id);
         }
         auto got = index.query(z, eps);
         std::sort(got.begin(), got.end());
         ok = ok && got == want;
         ++queries;
      }
      agree += ok;
   }
   return {agree == 100, fmt::format("{}/100 ensembles set-equal ({} queries)", agree, queries)};
}

Outcome criterion9()
{
   const auto s = polynomial_library(1, 2);
   const auto p = polynomial_library(2, 2);
   const auto idx = [](const BasisLibrary& l, const char* name) {
      const auto i = l.index_of(name);
      return i ? static_cast<long>(*i) + 1 : -1L;
   };
   const long a = idx(s, "X(t)"), b = idx(s, "X(t)^2"), c = idx(s, "X(t)X(t-tau)");
   const long d = idx(p, "X(t)Y(t-tau)"), e = idx(p, "Y(t)X(t-tau)");
   const bool pass = a == 2 && b == 4 && c == 5 && d == 9 && e == 11;
   return {pass, fmt::format("X={} X^2={} X*X_tau={} X*Y_tau={} Y*X_tau={}", a, b, c, d, e)};
}

std::string without_last_column(const std::string& csv)
{
   std::istringstream in(csv);
   std::string line, out;
   while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
   return out;
}

Outcome criterion10()
{
   const auto root = fs::temp_directory_path() / "sdde_acceptance_determinism";
   fs::remove_all(root);
   fs::create_directories(root);
   auto c = default_config("logistic");
   c.M = 100;
   c.seed = 17;
   write_text(root / "config.json", to_json(c).dump(2) + "\n");
   std::string ledgers[2];
   for (int k = 0; k < 2; ++k) {
      const auto out = root / fmt::format("run{}", k);
      const auto cmd = fmt::format("\"{}\" benchmark -c \"{}\" -o \"{}\" > \"{}\" 2>&1", SDDE_CLI_PATH,
                                   (root / "config.json").string(), out.string(), (root / "log.txt").string());
      const int rc = std::system(cmd.c_str());
      if (rc != 0 || !fs::exists(out / "ledger.csv")) {
         return {false, fmt::format("benchmark run {} failed (status {}): {}", k, rc, read_text(root / "log.txt"))};
      }
      ledgers[k] = read_text(out / "ledger.csv");
   }
   const auto a = without_last_column(ledgers[0]);
   const auto b = without_last_column(ledgers[1]);
   const auto rows = std::count(a.begin(), a.end(), '\n') - 1;
   const bool pass = a == b && rows == 24;
   fs::remove_all(root);
   return {pass, fmt::format("{} ledger rows, identical apart from timing: {}", rows, a == b ? "yes" : "no")};
}

Outcome criterion11()
{
   // B1-FD with decreasing eps, mean over seeds.
   const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
   std::vector<double> eps_err(eps.size(), 0.0);
   const std::uint64_t sweep_seeds[] = {1, 2, 3};
   for (auto s : sweep_seeds) {
      auto c = paper_setting("logistic", Approach::B1, EstimatorMethod::FD, s);
      c.M = 100;
      const auto rs = sweep(c, SweepParameter::Eps, eps);
      for (std::size_t k = 0; k < rs.size(); ++k) eps_err[k] += rs[k].max_drift_error() / 3.0;
   }
   bool eps_ok = true;
   for (std::size_t k = 1; k < eps.size(); ++k) eps_ok = eps_ok && eps_err[k] <= 2.0 * eps_err[k - 1];

   // Approach A with growing spawn count.
   const std::vector<double> Ms{1e2, 1e3, 1e4};
   std::vector<double> m_err(Ms.size(), 0.0);
   for (auto s : sweep_seeds) {
      auto c = paper_setting("logistic", Approach::A, EstimatorMethod::FD, s);
      const auto rs = sweep(c, SweepParameter::M, Ms);
      for (std::size_t k = 0; k < rs.size(); ++k) m_err[k] += rs[k].max_drift_error() / 3.0;
   }
   const double slope = (std::log(m_err.back()) - std::log(m_err.front())) / (std::log(Ms.back()) - std::log(Ms.front()));
   const bool m_ok = slope <= -0.3;

   std::string e1, e2;
   for (auto v : eps_err) e1 += (e1.empty() ? "" : " ") + sci(v);
   for (auto v : m_err) e2 += (e2.empty() ? "" : " ") + sci(v);
   return {eps_ok && m_ok, fmt::format("B1-FD max drift error over eps 1e-1..1e-4: {} ({}); A-FD over M 1e2..1e4: {} "
                                       "slope {:.2f}",
                                       e1, eps_ok ? "non-increasing within 2x" : "rises beyond 2x", e2, slope)};
}

} // namespace

int main(int argc, char** argv)
{
   const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},   {5, criterion5},   {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11},
   };
   // Optional list of criterion numbers to run.
   std::vector<int> only;
   for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

   int failed = 0;
   for (const auto& [id, fn] : criteria) {
      if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
      const auto start = std::chrono::steady_clock::now();
      Outcome o;
      try {
         o = fn();
      } catch (const std::exception& e) {
         o = {false, fmt::format("exception: {}", e.what())};
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      fmt::print("criterion {:2} {} [{:.1f}s] {}\n", id, o.pass ? "PASS" : "FAIL", secs, o.detail);
      std::fflush(stdout);
      failed += !o.pass;
   }
   fmt::print("{} of {} criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
   return failed == 0 ? 0 : 1;
}
