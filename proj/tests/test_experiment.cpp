#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "sdde/errors.hpp"
#include "sdde/experiment.hpp"
#include "sdde/io.hpp"

using namespace sdde;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(Approach a = Approach::B2)
{
   auto c = default_config("logistic");
   c.t_end = 6.0;
   c.M = 20;
   c.eps = 0.05;
   c.seed = 11;
   c.approach = a;
   return c;
}

fs::path scratch(const std::string& name)
{
   const auto p = fs::temp_directory_path() / ("sdde_test_" + name);
   fs::remove_all(p);
   return p;
}

// Ledger text with the timing column dropped.
std::string strip_timing(const std::string& csv)
{
   std::istringstream in(csv);
   std::string line, out;
   while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
   return out;
}

} // namespace

TEST_CASE("config json round trip")
{
   auto c = default_config("predator_prey");
   c.params["beta"] = 0.2;
   c.approach = Approach::A;
   c.drift_method = EstimatorMethod::CD;
   c.diffusion_method = EstimatorMethod::TR;
   c.seed = 99;
   c.b1_queries = QuerySet::Reference;
   c.output_dir = "out";
   CHECK(config_from_json(to_json(c)) == c);

   const auto o = default_config("option_pricing");
   CHECK(config_from_json(to_json(o)) == o);
   CHECK(drift_library(o).size() == 4);
   CHECK(diffusion_library(o).size() == 45);
   CHECK(drift_library(default_config("logistic")).size() == 6);
}

TEST_CASE("config validation")
{
   auto j = to_json(small());
   j.erase("seed");
   CHECK_THROWS_AS(config_from_json(j), ConfigError);

   j = to_json(small());
   j["bogus"] = 1;
   CHECK_THROWS_AS(config_from_json(j), ConfigError);

   j = to_json(small());
   j["epsilon"] = -1.0;
   CHECK_THROWS_AS(config_from_json(j), ConfigError);

   j = to_json(small());
   j["drift_method"] = "XX";
   CHECK_THROWS_AS(config_from_json(j), ConfigError);

   auto c = small();
   c.params["omega"] = 1.0;
   CHECK_THROWS_AS(validate(c), ConfigError);
   c = small();
   c.train_fraction = 1.0;
   CHECK_THROWS_AS(validate(c), ConfigError);
   c = small();
   c.library.log_terms = true;
   CHECK_THROWS_AS(validate(c), ConfigError);
   CHECK_THROWS_AS(default_config("lorenz"), ConfigError);
   CHECK_THROWS_AS(parse_sweep_parameter("lambda"), ConfigError);
   CHECK(parse_sweep_parameter("eps") == SweepParameter::Eps);
   CHECK(parse_sweep_parameter("M") == SweepParameter::M);
}

TEST_CASE("benchmark matrix cells")
{
   const auto cells = matrix_cells(small(), MatrixAxes{});
   CHECK(cells.size() == 24);
   std::size_t same = 0;
   for (const auto& c : cells) same += c.diffusion_method == EstimatorMethod::KM;
   // Every Same cell plus the matched KM cells.
   CHECK(same == 12 + 3);

   MatrixAxes one;
   one.approaches = {Approach::B2};
   one.methods = {EstimatorMethod::FD};
   one.modes = {DiffusionMode::Matched};
   const auto base = small();
   const auto rows = benchmark_matrix(base, one);
   REQUIRE(rows.size() == 1);
   auto c = base;
   c.drift_method = c.diffusion_method = EstimatorMethod::FD;
   const auto direct = run(c);
   CHECK(strip_timing(ledger_row(rows[0])) == strip_timing(ledger_row(direct)));
}

TEST_CASE("runs are deterministic apart from timing")
{
   for (auto a : {Approach::A, Approach::B1, Approach::B2}) {
      auto c = small(a);
      c.M = a == Approach::A ? 50 : 20;
      const auto r1 = run_cell(c, nullptr);
      const auto r2 = run_cell(c, nullptr);
      CHECK(r1.status.rfind("error", 0) != 0);
      CHECK(strip_timing(ledger_csv({r1})) == strip_timing(ledger_csv({r2})));
      CHECK(r1.rows > 0);
   }
}

TEST_CASE("failed cells become flagged rows")
{
   auto c = small();
   c.t_end = 0.05; // fewer samples than the regression needs
   const auto r = run_cell(c, nullptr);
   CHECK(r.status.rfind("error:", 0) == 0);
   CHECK(std::isnan(r.rmse_full));
   CHECK(ledger_row(r).find("error:") != std::string::npos);
}

TEST_CASE("sweep output")
{
   const auto dir = scratch("sweep");
   const auto rs = sweep(small(), SweepParameter::Eps, {0.05}, dir);
   REQUIRE(rs.size() == 1);
   const auto plot = read_text(dir / "plot.csv");
   CHECK(plot.rfind("parameter,value,metric,score\n", 0) == 0);
   CHECK(plot.find("eps,0.050000000000000003,f1:X(t),") != std::string::npos);
   CHECK(plot.find(",rmse_full,") != std::string::npos);
   std::istringstream in(plot);
   std::string line;
   std::getline(in, line);
   while (std::getline(in, line)) CHECK(std::count(line.begin(), line.end(), ',') == 3);
   const auto ledger = read_text(dir / "ledger.csv");
   CHECK(ledger.rfind(ledger_header() + "\n", 0) == 0);
   CHECK(std::count(ledger.begin(), ledger.end(), '\n') == 2);

   CHECK_THROWS_AS(sweep(small(), SweepParameter::M, {2.5}), ConfigError);
   fs::remove_all(dir);
}

TEST_CASE("persisted artifacts")
{
   const auto dir = scratch("persist");
   auto c = small(Approach::B1);
   c.output_dir = dir.string();
   const auto r = run(c);
   for (const char* f : {"fit_report.txt", "library_drift.csv", "library_diffusion.csv", "result.json", "ledger.csv",
                         "estimates.csv", "neighbor_hist.csv"}) {
      CHECK_MESSAGE(fs::exists(dir / f), f);
   }
   const auto j = nlohmann::json::parse(read_text(dir / "result.json"));
   CHECK(config_from_json(j["config"]) == c);
   CHECK(read_text(dir / "fit_report.txt") == r.fit->report());
   CHECK(read_text(dir / "library_drift.csv").rfind("index,name,kind\n1,1,monomial\n", 0) == 0);
   fs::remove_all(dir);
}
