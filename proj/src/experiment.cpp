#include "sdde/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sdde/io.hpp"

namespace sdde {

namespace {

const std::map<std::string, std::vector<std::string>>& model_params()
{
   static const std::map<std::string, std::vector<std::string>> known{
      {"logistic", {"alpha", "sigma", "tau"}},
      {"predator_prey", {"alpha", "beta", "gamma", "delta", "kappa", "sigma1", "sigma2", "tau"}},
      {"option_pricing", {"r", "V", "alpha", "gamma", "tau", "x0"}},
   };
   return known;
}

double param(const ExperimentConfig& c, const std::string& name, double fallback)
{
   const auto it = c.params.find(name);
   return it == c.params.end() ? fallback : it->second;
}

std::string csv_field(const std::string& s)
{
   if (s.find_first_of(",\"\n") == std::string::npos) return s;
   std::string out = "\"";
   for (char ch : s) {
      if (ch == '"') out += '"';
      out += ch == '\n' ? ' ' : ch;
   }
   return out + "\"";
}

std::string g17(double v)
{
   return fmt::format("{:.17g}", v);
}

} // namespace

ExperimentConfig default_config(const std::string& model)
{
   if (!model_params().count(model)) {
      throw ConfigError(fmt::format("unknown model '{}' (expected logistic, predator_prey or option_pricing)", model));
   }
   ExperimentConfig c;
   c.model = model;
   if (model == "option_pricing") {
      c.library = LibraryConfig{1, 4, true};
   }
   return c;
}

void validate(const ExperimentConfig& c)
{
   const auto it = model_params().find(c.model);
   if (it == model_params().end()) {
      throw ConfigError(fmt::format("unknown model '{}'", c.model));
   }
   for (const auto& [name, value] : c.params) {
      if (std::find(it->second.begin(), it->second.end(), name) == it->second.end()) {
         throw ConfigError(fmt::format("model '{}' has no parameter '{}'", c.model, name));
      }
      if (!(value > 0.0) || !std::isfinite(value)) {
         throw ConfigError(fmt::format("parameter '{}' must be positive and finite, got {}", name, value));
      }
   }
   if (!(c.dt > 0.0) || !std::isfinite(c.t0) || !(c.t_end > c.t0) || !std::isfinite(c.t_end)) {
      throw ConfigError(fmt::format("grid needs dt > 0 and t_end > t0 (t0={}, dt={}, t_end={})", c.t0, c.dt, c.t_end));
   }
   if (c.M < 1 || (c.approach == Approach::A && c.M < 2)) {
      throw ConfigError(fmt::format("M={} is too small for approach {}", c.M, to_string(c.approach)));
   }
   if (!(c.eps >= 0.0) || !std::isfinite(c.eps)) {
      throw ConfigError(fmt::format("epsilon must be finite and >= 0, got {}", c.eps));
   }
   if (!(c.lambda_f >= 0.0) || !(c.lambda_G >= 0.0) || !std::isfinite(c.lambda_f) || !std::isfinite(c.lambda_G)) {
      throw ConfigError("lambda_f and lambda_G must be finite and >= 0");
   }
   if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
      throw ConfigError(fmt::format("train_fraction must lie in (0, 1), got {}", c.train_fraction));
   }
   if (!(c.cell_factor > 0.0) || !std::isfinite(c.cell_factor)) {
      throw ConfigError("cell_factor must be positive");
   }
   if (c.stls_max_iter < 1) {
      throw ConfigError("stls_max_iter must be at least 1");
   }
   if (c.library.drift_degree > 8 || c.library.diffusion_degree > 8) {
      throw ConfigError("library degrees above 8 are not supported");
   }
   if (c.library.log_terms && c.model != "option_pricing") {
      // ln(x/x_tau) needs positive states, which only the price model guarantees.
      throw ConfigError("log_terms is only available for option_pricing");
   }
   make_grid(c);
}

nlohmann::json to_json(const ExperimentConfig& c)
{
   nlohmann::json params = nlohmann::json::object();
   for (const auto& [k, v] : c.params) params[k] = v;
   return {
      {"model", c.model},
      {"params", params},
      {"grid", {{"t0", c.t0}, {"dt", c.dt}, {"t_end", c.t_end}}},
      {"approach", std::string(to_string(c.approach))},
      {"drift_method", std::string(to_string(c.drift_method))},
      {"diffusion_method", std::string(to_string(c.diffusion_method))},
      {"M", c.M},
      {"epsilon", c.eps},
      {"lambda_f", c.lambda_f},
      {"lambda_G", c.lambda_G},
      {"library",
       {{"drift_degree", c.library.drift_degree},
        {"diffusion_degree", c.library.diffusion_degree},
        {"log_terms", c.library.log_terms}}},
      {"train_fraction", c.train_fraction},
      {"seed", c.seed},
      {"b1_queries", std::string(to_string(c.b1_queries))},
      {"cell_factor", c.cell_factor},
      {"stls_max_iter", c.stls_max_iter},
      {"output_dir", c.output_dir},
   };
}

ExperimentConfig config_from_json(const nlohmann::json& j)
{
   if (!j.is_object()) {
      throw ConfigError("config must be a JSON object");
   }
   static const std::set<std::string> keys{"model", "params", "grid", "approach", "drift_method", "diffusion_method",
                                           "M", "epsilon", "lambda_f", "lambda_G", "library", "train_fraction",
                                           "seed", "b1_queries", "cell_factor", "stls_max_iter", "output_dir"};
   for (const auto& [k, v] : j.items()) {
      if (!keys.count(k)) throw ConfigError(fmt::format("unknown config key '{}'", k));
   }
   if (!j.contains("seed")) {
      throw ConfigError("config must set 'seed'");
   }
   try {
      auto c = default_config(j.value("model", std::string("logistic")));
      if (j.contains("params")) {
         for (const auto& [k, v] : j.at("params").items()) c.params[k] = v.get<double>();
      }
      if (j.contains("grid")) {
         const auto& g = j.at("grid");
         for (const auto& [k, v] : g.items()) {
            if (k != "t0" && k != "dt" && k != "t_end") throw ConfigError(fmt::format("unknown grid key '{}'", k));
         }
         c.t0 = g.value("t0", c.t0);
         c.dt = g.value("dt", c.dt);
         c.t_end = g.value("t_end", c.t_end);
      }
      if (j.contains("approach")) c.approach = parse_approach(j.at("approach").get<std::string>());
      if (j.contains("drift_method")) c.drift_method = parse_method(j.at("drift_method").get<std::string>());
      if (j.contains("diffusion_method")) c.diffusion_method = parse_method(j.at("diffusion_method").get<std::string>());
      if (j.contains("M")) {
         const auto m = j.at("M").get<long long>();
         if (m < 1) throw ConfigError(fmt::format("M must be at least 1, got {}", m));
         c.M = static_cast<std::size_t>(m);
      }
      c.eps = j.value("epsilon", c.eps);
      c.lambda_f = j.value("lambda_f", c.lambda_f);
      c.lambda_G = j.value("lambda_G", c.lambda_G);
      if (j.contains("library")) {
         const auto& l = j.at("library");
         for (const auto& [k, v] : l.items()) {
            if (k != "drift_degree" && k != "diffusion_degree" && k != "log_terms") {
               throw ConfigError(fmt::format("unknown library key '{}'", k));
            }
         }
         c.library.drift_degree = l.value("drift_degree", c.library.drift_degree);
         c.library.diffusion_degree = l.value("diffusion_degree", c.library.diffusion_degree);
         c.library.log_terms = l.value("log_terms", c.library.log_terms);
      }
      c.train_fraction = j.value("train_fraction", c.train_fraction);
      c.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("b1_queries")) c.b1_queries = parse_query_set(j.at("b1_queries").get<std::string>());
      c.cell_factor = j.value("cell_factor", c.cell_factor);
      if (j.contains("stls_max_iter")) {
         const auto it = j.at("stls_max_iter").get<long long>();
         if (it < 1) throw ConfigError("stls_max_iter must be at least 1");
         c.stls_max_iter = static_cast<std::size_t>(it);
      }
      c.output_dir = j.value("output_dir", c.output_dir);
      validate(c);
      return c;
   } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("config: {}", e.what()));
   } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
   }
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
   nlohmann::json j;
   try {
      j = nlohmann::json::parse(read_text(path));
   } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("'{}': {}", path.string(), e.what()));
   }
   return config_from_json(j);
}

ModelSpec make_model(const ExperimentConfig& c)
{
   if (c.model == "logistic") {
      const LogisticParams d;
      return logistic_model(param(c, "alpha", d.alpha), param(c, "sigma", d.sigma), param(c, "tau", d.tau));
   }
   if (c.model == "predator_prey") {
      PredatorPreyParams p;
      p.alpha = param(c, "alpha", p.alpha);
      p.beta = param(c, "beta", p.beta);
      p.gamma = param(c, "gamma", p.gamma);
      p.delta = param(c, "delta", p.delta);
      p.kappa = param(c, "kappa", p.kappa);
      p.sigma1 = param(c, "sigma1", p.sigma1);
      p.sigma2 = param(c, "sigma2", p.sigma2);
      p.tau = param(c, "tau", p.tau);
      return predator_prey_model(p);
   }
   if (c.model == "option_pricing") {
      OptionPricingParams p;
      p.r = param(c, "r", p.r);
      p.V = param(c, "V", p.V);
      p.alpha = param(c, "alpha", p.alpha);
      p.gamma = param(c, "gamma", p.gamma);
      p.tau = param(c, "tau", p.tau);
      p.x0 = param(c, "x0", p.x0);
      return option_pricing_model(p);
   }
   throw ConfigError(fmt::format("unknown model '{}'", c.model));
}

BasisLibrary drift_library(const ExperimentConfig& c)
{
   const auto n = make_model(c).n;
   auto lib = polynomial_library(n, c.library.drift_degree);
   if (c.library.log_terms) {
      std::vector<BasisTerm> extra;
      for (std::size_t k = 0; k < n; ++k) extra.push_back(log_ratio_term(n, k));
      lib = with_custom_terms(lib, extra, Placement::Append);
   }
   return lib;
}

BasisLibrary diffusion_library(const ExperimentConfig& c)
{
   const auto n = make_model(c).n;
   auto lib = polynomial_library(n, c.library.diffusion_degree);
   if (c.library.log_terms) {
      std::vector<BasisTerm> extra;
      for (std::size_t k = 0; k < n; ++k) extra.push_back(log_ratio_term(n, k, 1));
      for (std::size_t k = 0; k < n; ++k) extra.push_back(log_ratio_term(n, k, 2));
      lib = with_custom_terms(lib, extra, Placement::Tensor);
   }
   return lib;
}

TimeGrid make_grid(const ExperimentConfig& c)
{
   try {
      return TimeGrid::from_window(c.t0, c.t_end, c.dt);
   } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
   }
}

GroundTruth generate(const ExperimentConfig& c)
{
   validate(c);
   auto model = make_model(c);
   const auto grid = make_grid(c);
   const auto plan = default_noise_plan(model, grid, c.seed, 0);
   const std::size_t paths = c.approach == Approach::A ? 1 : c.M;
   auto ensemble = simulate_ensemble(model, grid, paths, c.seed);
   return GroundTruth{std::move(model), grid, plan, std::move(ensemble)};
}

double BenchmarkResult::max_drift_error() const
{
   double m = 0.0;
   for (const auto& [k, v] : coefficient_errors) {
      if (k.rfind('f', 0) == 0) m = std::max(m, v);
   }
   return m;
}

double BenchmarkResult::max_diffusion_error() const
{
   double m = 0.0;
   for (const auto& [k, v] : coefficient_errors) {
      if (k.rfind('C', 0) == 0) m = std::max(m, v);
   }
   return m;
}

BenchmarkResult run(const ExperimentConfig& config, const GroundTruth& data)
{
   validate(config);
   const auto lib_f = drift_library(config);
   const auto lib_G = diffusion_library(config);
   const auto m = data.grid.steps();
   const auto n_train = train_count(m, SplitSpec{config.train_fraction});
   if (data.ensemble.empty() || (config.approach != Approach::A && data.ensemble.size() != config.M)) {
      throw ConfigError("run: ground truth does not match the configured ensemble size");
   }

   IdentifyConfig ic;
   ic.approach = config.approach;
   ic.drift_method = config.drift_method;
   ic.diffusion_method = config.diffusion_method;
   ic.M = config.M;
   ic.eps = config.eps;
   ic.cell_factor = config.cell_factor;
   ic.queries = config.b1_queries;
   ic.fit = FitOptions{config.lambda_f, config.lambda_G, config.stls_max_iter};
   ic.n_train = n_train;
   ic.seed = config.seed;

   const auto start = std::chrono::steady_clock::now();
   auto id = identify(data.model, data.ensemble, lib_f, lib_G, ic);
   const auto stop = std::chrono::steady_clock::now();

   BenchmarkResult r;
   r.config = config;
   r.cpu_seconds = std::chrono::duration<double>(stop - start).count();
   r.rows = id.drift_rows;
   r.skipped = id.skipped;
   r.failed_paths = id.failed_paths;
   r.neighbor_counts = std::move(id.neighbor_counts);
   r.estimates = std::move(id.estimates);
   r.coefficient_errors = coefficient_errors(id.fit, data.model.truth);
   r.drift_support = drift_support_matches(id.fit, data.model.truth);
   r.diffusion_support = cov_support_matches(id.fit, data.model.truth);

   const auto& path0 = data.ensemble.front();
   const auto all = augment(path0, data.model.tau);
   const std::vector<AugmentedSample> validation(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
   std::tie(r.rmse_drift, r.rmse_diffusion) = rmse_drift_diffusion(id.fit, data.model, validation);
   try {
      r.rmse_full = rmse_state(path0, data.model, id.fit, data.plan, n_train, m);
   } catch (const NumericalError& e) {
      // The identified model cannot be simulated (e.g. negative fitted
      // variance); the remaining metrics are still meaningful.
      r.rmse_full = std::numeric_limits<double>::quiet_NaN();
      r.status = fmt::format("rmse_full failed: {}", e.what());
   }
   r.fit.emplace(std::move(id.fit));
   if (!config.output_dir.empty()) {
      persist(r, config.output_dir);
   }
   return r;
}

BenchmarkResult run(const ExperimentConfig& config)
{
   const auto data = generate(config);
   return run(config, data);
}

BenchmarkResult run_cell(const ExperimentConfig& config, const GroundTruth* data)
{
   try {
      if (data) return run(config, *data);
      return run(config);
   } catch (const Error& e) {
      BenchmarkResult r;
      r.config = config;
      r.status = fmt::format("error: {}", e.what());
      r.rmse_full = r.rmse_drift = r.rmse_diffusion = std::numeric_limits<double>::quiet_NaN();
      return r;
   }
}

void persist(const BenchmarkResult& r, const std::filesystem::path& dir)
{
   std::filesystem::create_directories(dir);
   if (r.fit) {
      write_text(dir / "fit_report.txt", r.fit->report());
      write_text(dir / "library_drift.csv", r.fit->lib_f.describe());
      write_text(dir / "library_diffusion.csv", r.fit->lib_G.describe());
   }
   nlohmann::json errors = nlohmann::json::object();
   for (const auto& [k, v] : r.coefficient_errors) errors[k] = v;
   const nlohmann::json j{
      {"config", to_json(r.config)},
      {"status", r.status},
      {"coefficient_errors", errors},
      {"drift_support", r.drift_support},
      {"diffusion_support", r.diffusion_support},
      {"rmse_full", r.rmse_full},
      {"rmse_drift", r.rmse_drift},
      {"rmse_diffusion", r.rmse_diffusion},
      {"rows", r.rows},
      {"skipped", r.skipped},
      {"failed_paths", r.failed_paths},
      {"cpu_seconds", r.cpu_seconds},
   };
   write_text(dir / "result.json", j.dump(2) + "\n");
   if (r.estimates) {
      write_estimates_csv(dir / "estimates.csv", *r.estimates);
   }
   if (!r.neighbor_counts.empty()) {
      write_histogram_csv(dir / "neighbor_hist.csv", r.neighbor_counts);
   }
   write_text(dir / "ledger.csv", ledger_csv({r}));
}

std::string ledger_header()
{
   return "model,approach,drift_method,diffusion_method,M,epsilon,lambda_f,lambda_G,seed,status,drift_support,"
          "diffusion_support,rows,skipped,failed_paths,rmse_full,rmse_drift,rmse_diffusion,coefficient_errors,"
          "cpu_seconds";
}

std::string ledger_row(const BenchmarkResult& r)
{
   const auto& c = r.config;
   std::string errors;
   for (const auto& [k, v] : r.coefficient_errors) {
      errors += fmt::format("{}{}={}", errors.empty() ? "" : ";", k, g17(v));
   }
   return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", c.model, to_string(c.approach),
                      to_string(c.drift_method), to_string(c.diffusion_method), c.M, g17(c.eps), g17(c.lambda_f),
                      g17(c.lambda_G), c.seed, csv_field(r.status), r.drift_support ? 1 : 0,
                      r.diffusion_support ? 1 : 0, r.rows, r.skipped, r.failed_paths, g17(r.rmse_full),
                      g17(r.rmse_drift), g17(r.rmse_diffusion), csv_field(errors), fmt::format("{:.6f}", r.cpu_seconds));
}

std::string ledger_csv(const std::vector<BenchmarkResult>& results)
{
   std::string out = ledger_header() + "\n";
   for (const auto& r : results) out += ledger_row(r) + "\n";
   return out;
}

std::string_view to_string(DiffusionMode mode)
{
   return mode == DiffusionMode::Same ? "same" : "matched";
}

std::vector<ExperimentConfig> matrix_cells(const ExperimentConfig& base, const MatrixAxes& axes)
{
   if (axes.approaches.empty() || axes.methods.empty() || axes.modes.empty()) {
      throw ConfigError("benchmark axes must be nonempty");
   }
   std::vector<ExperimentConfig> cells;
   for (auto approach : axes.approaches) {
      for (auto mode : axes.modes) {
         for (auto method : axes.methods) {
            auto c = base;
            c.approach = approach;
            c.drift_method = method;
            c.diffusion_method = mode == DiffusionMode::Same ? EstimatorMethod::KM : method;
            c.output_dir.clear();
            cells.push_back(std::move(c));
         }
      }
   }
   return cells;
}

std::vector<BenchmarkResult> benchmark_matrix(const ExperimentConfig& base, const MatrixAxes& axes,
                                              const std::optional<std::filesystem::path>& dir)
{
   validate(base);
   const auto cells = matrix_cells(base, axes);
   // One ensemble serves every cell; Approach A only reads path 0.
   const bool only_a = std::all_of(axes.approaches.begin(), axes.approaches.end(),
                                   [](Approach a) { return a == Approach::A; });
   auto data_cfg = base;
   data_cfg.approach = only_a ? Approach::A : Approach::B1;
   std::optional<GroundTruth> data;
   std::string data_error;
   try {
      data.emplace(generate(data_cfg));
   } catch (const Error& e) {
      data_error = e.what();
   }
   std::vector<BenchmarkResult> results;
   for (const auto& c : cells) {
      if (!data) {
         BenchmarkResult r;
         r.config = c;
         r.status = fmt::format("error: {}", data_error);
         r.rmse_full = r.rmse_drift = r.rmse_diffusion = std::numeric_limits<double>::quiet_NaN();
         results.push_back(std::move(r));
         continue;
      }
      results.push_back(run_cell(c, &*data));
   }
   if (dir) {
      write_text(*dir / "ledger.csv", ledger_csv(results));
      write_text(*dir / "table.txt", render_table(results));
   }
   return results;
}

std::string render_table(const std::vector<BenchmarkResult>& results)
{
   std::set<std::string> keys;
   for (const auto& r : results) {
      for (const auto& [k, v] : r.coefficient_errors) keys.insert(k);
   }
   std::ostringstream os;
   os << fmt::format("{:<4} {:<6} {:<9}", "app", "drift", "diffusion");
   for (const auto& k : keys) os << fmt::format(" {:>22}", k.size() > 22 ? k.substr(0, 22) : k);
   os << fmt::format(" {:>10} {:>10} {:>10} {:>9}  status\n", "rmse_full", "rmse_drift", "rmse_diff", "cpu[s]");
   for (const auto& r : results) {
      os << fmt::format("{:<4} {:<6} {:<9}", to_string(r.config.approach), to_string(r.config.drift_method),
                        to_string(r.config.diffusion_method));
      for (const auto& k : keys) {
         const auto it = r.coefficient_errors.find(k);
         os << (it == r.coefficient_errors.end() ? fmt::format(" {:>22}", "-") : fmt::format(" {:>22.3e}", it->second));
      }
      os << fmt::format(" {:>10.3e} {:>10.3e} {:>10.3e} {:>9.3f}  {}\n", r.rmse_full, r.rmse_drift, r.rmse_diffusion,
                        r.cpu_seconds, r.status);
   }
   return os.str();
}

SweepParameter parse_sweep_parameter(std::string_view name)
{
   if (name == "eps" || name == "epsilon") return SweepParameter::Eps;
   if (name == "M") return SweepParameter::M;
   throw ConfigError(fmt::format("unknown sweep parameter '{}' (expected eps or M)", name));
}

std::string_view to_string(SweepParameter p)
{
   return p == SweepParameter::Eps ? "eps" : "M";
}

std::vector<BenchmarkResult> sweep(const ExperimentConfig& base, SweepParameter parameter,
                                   const std::vector<double>& values, const std::optional<std::filesystem::path>& dir)
{
   if (values.empty()) {
      throw ConfigError("sweep needs at least one value");
   }
   std::vector<ExperimentConfig> configs;
   for (double v : values) {
      auto c = base;
      c.output_dir.clear();
      if (parameter == SweepParameter::Eps) {
         c.eps = v;
      } else {
         if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError(fmt::format("M must be a positive integer, got {}", v));
         c.M = static_cast<std::size_t>(v);
      }
      validate(c);
      configs.push_back(std::move(c));
   }
   std::vector<BenchmarkResult> results;
   std::optional<GroundTruth> shared;
   const bool share = parameter == SweepParameter::Eps || base.approach == Approach::A;
   for (const auto& c : configs) {
      const GroundTruth* data = nullptr;
      if (share) {
         if (!shared) {
            try {
               shared.emplace(generate(c));
            } catch (const Error&) {
            }
         }
         data = shared ? &*shared : nullptr;
      }
      results.push_back(run_cell(c, data));
   }
   if (dir) {
      write_text(*dir / "ledger.csv", ledger_csv(results));
      write_text(*dir / "plot.csv", plot_csv(parameter, values, results));
   }
   return results;
}

std::string plot_csv(SweepParameter parameter, const std::vector<double>& values,
                     const std::vector<BenchmarkResult>& results)
{
   std::string out = "parameter,value,metric,score\n";
   for (std::size_t i = 0; i < results.size() && i < values.size(); ++i) {
      const auto& r = results[i];
      const auto p = to_string(parameter);
      const auto v = g17(values[i]);
      for (const auto& [k, e] : r.coefficient_errors) out += fmt::format("{},{},{},{}\n", p, v, csv_field(k), g17(e));
      out += fmt::format("{},{},max_drift_error,{}\n", p, v, g17(r.max_drift_error()));
      out += fmt::format("{},{},max_diffusion_error,{}\n", p, v, g17(r.max_diffusion_error()));
      out += fmt::format("{},{},rmse_full,{}\n", p, v, g17(r.rmse_full));
      out += fmt::format("{},{},rmse_drift,{}\n", p, v, g17(r.rmse_drift));
      out += fmt::format("{},{},rmse_diffusion,{}\n", p, v, g17(r.rmse_diffusion));
   }
   return out;
}

} // namespace sdde
