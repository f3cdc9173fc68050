#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sdde/experiment.hpp"
#include "sdde/io.hpp"
#include "sdde/simulate.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
   std::string config_path;
   std::optional<std::string> model;
   std::vector<std::string> params;
   std::optional<double> dt, t_end;
   std::optional<std::string> approach, drift_method, diffusion_method, queries;
   std::optional<std::size_t> M, stls_max_iter;
   std::optional<double> eps, lambda, lambda_f, lambda_G, train_fraction, cell_factor;
   std::optional<unsigned> drift_degree, diffusion_degree;
   std::optional<std::uint64_t> seed;
   std::optional<std::string> out;

   void add(CLI::App* app)
   {
      app->add_option("-c,--config", config_path, "JSON experiment config");
      app->add_option("--model", model, "logistic | predator_prey | option_pricing");
      app->add_option("--param", params, "model parameter override name=value (repeatable)");
      app->add_option("--dt", dt, "grid step");
      app->add_option("--t-end", t_end, "grid end time");
      app->add_option("--approach", approach, "A | B1 | B2");
      app->add_option("--drift-method", drift_method, "KM | FD | CD | TR");
      app->add_option("--diffusion-method", diffusion_method, "KM | FD | CD | TR");
      app->add_option("-M,--paths", M, "ensemble size (spawn count for A)");
      app->add_option("--eps", eps, "B1 neighborhood radius");
      app->add_option("--lambda", lambda, "threshold for drift and diffusion");
      app->add_option("--lambda-f", lambda_f, "drift threshold");
      app->add_option("--lambda-G", lambda_G, "diffusion threshold");
      app->add_option("--drift-degree", drift_degree, "drift library degree");
      app->add_option("--diffusion-degree", diffusion_degree, "diffusion library degree");
      app->add_option("--train-fraction", train_fraction, "training split");
      app->add_option("--queries", queries, "B1 query set: all | reference");
      app->add_option("--cell-factor", cell_factor, "B1 hash cell size in units of eps");
      app->add_option("--stls-max-iter", stls_max_iter, "STLS iteration cap");
      app->add_option("--seed", seed, "master seed (required without --config)");
      app->add_option("-o,--out", out, "output directory");
   }

   sdde::ExperimentConfig build() const
   {
      sdde::ExperimentConfig c;
      if (!config_path.empty()) {
         c = sdde::load_config(config_path);
         if (model && *model != c.model) {
            auto d = sdde::default_config(*model);
            d.seed = c.seed;
            c = d;
         }
      } else {
         if (!seed) throw sdde::ConfigError("--seed is required when no --config is given");
         c = sdde::default_config(model.value_or("logistic"));
      }
      for (const auto& p : params) {
         const auto eq = p.find('=');
         if (eq == std::string::npos) throw sdde::ConfigError(fmt::format("--param '{}' is not name=value", p));
         try {
            c.params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
         } catch (const std::exception&) {
            throw sdde::ConfigError(fmt::format("--param '{}' has a non-numeric value", p));
         }
      }
      if (dt) c.dt = *dt;
      if (t_end) c.t_end = *t_end;
      if (approach) c.approach = sdde::parse_approach(*approach);
      if (drift_method) c.drift_method = sdde::parse_method(*drift_method);
      if (diffusion_method) c.diffusion_method = sdde::parse_method(*diffusion_method);
      if (M) c.M = *M;
      if (eps) c.eps = *eps;
      if (lambda) c.lambda_f = c.lambda_G = *lambda;
      if (lambda_f) c.lambda_f = *lambda_f;
      if (lambda_G) c.lambda_G = *lambda_G;
      if (drift_degree) c.library.drift_degree = *drift_degree;
      if (diffusion_degree) c.library.diffusion_degree = *diffusion_degree;
      if (train_fraction) c.train_fraction = *train_fraction;
      if (queries) c.b1_queries = sdde::parse_query_set(*queries);
      if (cell_factor) c.cell_factor = *cell_factor;
      if (stls_max_iter) c.stls_max_iter = *stls_max_iter;
      if (seed) c.seed = *seed;
      if (out) c.output_dir = *out;
      sdde::validate(c);
      return c;
   }
};

// Relative directories live under $SDDE_OUTPUT_ROOT when it is set.
std::optional<fs::path> output_dir(const std::string& configured, const std::string& fallback)
{
   const char* root = std::getenv("SDDE_OUTPUT_ROOT");
   if (!configured.empty()) {
      const fs::path p(configured);
      return (root && p.is_relative()) ? fs::path(root) / p : p;
   }
   if (root) return fs::path(root) / fallback;
   return std::nullopt;
}

std::vector<double> parse_values(const std::string& text)
{
   std::vector<double> out;
   std::stringstream ss(text);
   std::string cell;
   while (std::getline(ss, cell, ',')) {
      try {
         std::size_t used = 0;
         out.push_back(std::stod(cell, &used));
         if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
         throw sdde::ConfigError(fmt::format("'{}' is not a number", cell));
      }
   }
   if (out.empty()) throw sdde::ConfigError("--values is empty");
   return out;
}

template <class T, class F>
std::vector<T> parse_list(const std::vector<std::string>& names, F parse)
{
   std::vector<T> out;
   for (const auto& n : names) out.push_back(parse(n));
   return out;
}

int cmd_simulate(const Overrides& o, std::size_t paths)
{
   auto c = o.build();
   const auto dir = output_dir(c.output_dir, "simulate");
   if (!dir) throw sdde::ConfigError("simulate needs --out or SDDE_OUTPUT_ROOT");
   const auto model = sdde::make_model(c);
   const auto grid = sdde::make_grid(c);
   const auto ensemble = sdde::simulate_ensemble(model, grid, paths, c.seed);
   for (std::size_t k = 0; k < ensemble.size(); ++k) {
      const auto stem = fmt::format("path_{:04d}", k);
      sdde::write_trajectory_csv(*dir / (stem + ".csv"), ensemble[k]);
      sdde::write_trajectory_meta(*dir / (stem + ".json"),
                                  sdde::TrajectoryMeta{model.n, model.tau, grid.dt(), c.seed, k, c.model});
   }
   std::cout << fmt::format("wrote {} path(s) to {}\n", ensemble.size(), dir->string());
   return 0;
}

int cmd_identify(const Overrides& o)
{
   auto c = o.build();
   const auto dir = output_dir(c.output_dir, "identify");
   c.output_dir = dir ? dir->string() : std::string();
   const auto r = sdde::run(c);
   std::cout << r.fit->report() << '\n' << sdde::ledger_csv({r});
   if (!r.ok()) {
      std::cerr << r.status << '\n';
      return 2;
   }
   return 0;
}

int cmd_benchmark(const Overrides& o, const std::vector<std::string>& approaches,
                  const std::vector<std::string>& methods, const std::vector<std::string>& modes)
{
   const auto c = o.build();
   sdde::MatrixAxes axes;
   if (!approaches.empty()) axes.approaches = parse_list<sdde::Approach>(approaches, sdde::parse_approach);
   if (!methods.empty()) axes.methods = parse_list<sdde::EstimatorMethod>(methods, sdde::parse_method);
   if (!modes.empty()) {
      axes.modes = parse_list<sdde::DiffusionMode>(modes, [](const std::string& m) {
         if (m == "same") return sdde::DiffusionMode::Same;
         if (m == "matched") return sdde::DiffusionMode::Matched;
         throw sdde::ConfigError(fmt::format("unknown diffusion mode '{}' (expected same or matched)", m));
      });
   }
   const auto dir = output_dir(c.output_dir, "benchmark");
   const auto results = sdde::benchmark_matrix(c, axes, dir);
   std::cout << sdde::render_table(results);
   if (dir) std::cout << fmt::format("ledger: {}\n", (*dir / "ledger.csv").string());
   return 0;
}

int cmd_sweep(const Overrides& o, const std::string& parameter, const std::string& values)
{
   const auto c = o.build();
   const auto p = sdde::parse_sweep_parameter(parameter);
   const auto v = parse_values(values);
   const auto dir = output_dir(c.output_dir, "sweep");
   const auto results = sdde::sweep(c, p, v, dir);
   std::cout << sdde::render_table(results);
   if (dir) std::cout << fmt::format("plot data: {}\n", (*dir / "plot.csv").string());
   return 0;
}

} // namespace

int main(int argc, char** argv)
{
   CLI::App app{"Sparse identification of stochastic delay differential equations"};
   app.require_subcommand(1);

   Overrides sim_o, id_o, bench_o, sweep_o;
   auto* sim = app.add_subcommand("simulate", "simulate ground-truth paths to CSV");
   sim_o.add(sim);

   auto* id = app.add_subcommand("identify", "run one identification");
   id_o.add(id);

   std::vector<std::string> approaches, methods, modes;
   auto* bench = app.add_subcommand("benchmark", "approach x method x diffusion-mode matrix");
   bench_o.add(bench);
   bench->add_option("--approaches", approaches, "subset of A B1 B2");
   bench->add_option("--methods", methods, "subset of KM FD CD TR");
   bench->add_option("--modes", modes, "subset of same matched");

   std::string parameter, values;
   auto* sw = app.add_subcommand("sweep", "one run per epsilon or M value");
   sweep_o.add(sw);
   sw->add_option("--parameter", parameter, "eps | M")->required();
   sw->add_option("--values", values, "comma-separated values")->required();

   CLI11_PARSE(app, argc, argv);

   const Overrides* active = nullptr;
   try {
      if (sim->parsed()) return cmd_simulate(*(active = &sim_o), sim_o.M.value_or(1));
      if (id->parsed()) return cmd_identify(*(active = &id_o));
      if (bench->parsed()) return cmd_benchmark(*(active = &bench_o), approaches, methods, modes);
      if (sw->parsed()) return cmd_sweep(*(active = &sweep_o), parameter, values);
   } catch (const sdde::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      if (active) {
         try {
            std::cerr << "config: " << sdde::to_json(active->build()).dump() << '\n';
         } catch (const sdde::Error&) {
         }
      }
      return e.numerical() ? 2 : 1;
   }
   return 1;
}
