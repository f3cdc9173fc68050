#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <omp.h>

#include "sdde/approaches.hpp"
#include "sdde/errors.hpp"
#include "sdde/simulate.hpp"

using namespace sdde;

namespace {

Trajectory constant_path(double value, double dt, std::size_t steps, double tau)
{
   RowMatrix s = RowMatrix::Constant(static_cast<Eigen::Index>(steps), 1, value);
   auto h = History::sampled(
      tau, 1, [value](double, std::span<double> out) { out[0] = value; }, dt);
   return Trajectory(TimeGrid(0.0, dt, steps), std::move(s), std::move(h));
}

std::vector<std::size_t> scan(const RowMatrix& pts, std::span<const double> z, double eps)
{
   std::vector<std::size_t> out;
   for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < pts.cols(); ++c) d2 += (pts(i, c) - z[static_cast<std::size_t>(c)]) * (pts(i, c) - z[static_cast<std::size_t>(c)]);
      if (d2 <= eps * eps) out.push_back(static_cast<std::size_t>(i));
   }
   return out;
}

const EstimatorMethod methods[] = {EstimatorMethod::KM, EstimatorMethod::FD, EstimatorMethod::CD};

} // namespace

TEST_CASE("approach and query names")
{
   for (auto a : {Approach::A, Approach::B1, Approach::B2}) CHECK(parse_approach(to_string(a)) == a);
   for (auto q : {QuerySet::All, QuerySet::Reference}) CHECK(parse_query_set(to_string(q)) == q);
   CHECK_THROWS_AS(parse_approach("C"), ArgumentError);
}

TEST_CASE("neighbor index")
{
   const auto model = logistic_model();
   const auto grid = TimeGrid::from_window(0.0, 3.0, 0.01);
   const auto ensemble = simulate_ensemble(model, grid, 10, 4);
   const auto index = build_index(ensemble, 1.0, 0.1);
   CHECK(index.size() == 10 * grid.steps());
   CHECK(index.path(grid.steps() + 3) == 1);
   CHECK(index.index(grid.steps() + 3) == 3);

   for (double eps : {0.0, 0.01, 0.3}) {
      const auto hits = index.query(index.point(42), eps);
      CHECK(std::find(hits.begin(), hits.end(), 42u) != hits.end());
   }
   CHECK(index.query(index.point(0), 1e3).size() == index.size());

   std::mt19937_64 rng(8);
   std::uniform_real_distribution<double> u(-0.5, 2.5);
   for (int q = 0; q < 100; ++q) {
      const double z[2] = {u(rng), u(rng)};
      const auto got = index.query(z, 0.05);
      CHECK(got == scan(index.points(), z, 0.05));
      CHECK(got == index.brute_force(z, 0.05));
      CHECK(std::is_sorted(got.begin(), got.end()));
   }
   const auto head = build_index(ensemble, 1.0, 0.1, 50);
   CHECK(head.size() == 500);
}

TEST_CASE("approach A without noise is the Euler drift")
{
   auto model = logistic_model();
   model.diffusion_map = [](std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
   const auto grid = TimeGrid::from_window(0.0, 3.0, 0.01);
   const auto ref = simulate(model, grid, default_noise_plan(model, grid, 1));
   const auto set = approach_a(model, ref, 4, 9, EstimatorMethod::KM);
   CHECK(set.rows() == grid.steps() - 1);
   for (std::size_t r = 0; r < set.rows(); r += 13) {
      const Vector z = set.points.row(static_cast<Eigen::Index>(r)).transpose();
      CHECK(set.drift(static_cast<Eigen::Index>(r), 0) == doctest::Approx(model.drift(z.head(1), z.tail(1))(0)).epsilon(1e-12));
      CHECK(std::abs(set.cov(static_cast<Eigen::Index>(r), 0)) < 1e-20);
   }
   CHECK_THROWS_AS(approach_a(model, ref, 1, 9, EstimatorMethod::KM), ArgumentError);
}

TEST_CASE("approach A at the logistic fixed point")
{
   const auto model = logistic_model();
   const auto ref = constant_path(1.0, 0.01, 12, 1.0);
   const std::size_t M = 100000;
   const auto set = approach_a(model, ref, M, 3, EstimatorMethod::KM);
   const double band = 3.0 * 0.4 / std::sqrt(static_cast<double>(M) * 0.01);
   for (std::size_t r = 0; r < set.rows(); ++r) {
      CHECK(std::abs(set.drift(static_cast<Eigen::Index>(r), 0)) < band);
      CHECK(std::abs(set.cov(static_cast<Eigen::Index>(r), 0) - 0.16) < 0.05 * 0.16);
   }
}

TEST_CASE("approach A variance decays like M^-1/2")
{
   const auto model = logistic_model();
   const auto ref = constant_path(1.0, 0.01, 201, 1.0);
   std::vector<double> sd;
   const double Ms[] = {100, 1000, 10000};
   for (double M : Ms) {
      const auto set = approach_a(model, ref, static_cast<std::size_t>(M), 17, EstimatorMethod::KM);
      const auto& f = set.drift;
      const double mean = f.mean();
      sd.push_back(std::sqrt((f.array() - mean).square().sum() / static_cast<double>(f.rows() - 1)));
   }
   const double slope = (std::log(sd[2]) - std::log(sd[0])) / (std::log(Ms[2]) - std::log(Ms[0]));
   CHECK(slope == doctest::Approx(-0.5).epsilon(0.2));
}

TEST_CASE("approach A parallel and serial agree")
{
   const auto model = logistic_model();
   const auto grid = TimeGrid::from_window(0.0, 2.0, 0.01);
   const auto ref = simulate(model, grid, default_noise_plan(model, grid, 2));
   for (auto m : {EstimatorMethod::KM, EstimatorMethod::FD, EstimatorMethod::CD}) {
      const auto a = approach_a(model, ref, 50, 5, m, 150);
      const auto b = serial::approach_a(model, ref, 50, 5, m, 150);
      CHECK(a.drift == b.drift);
      CHECK(a.cov == b.cov);
      CHECK(a.grid_index.back() + stencil_range(m).after < 150);
   }
   const DriftFunction zero = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
   const auto a = approach_a(model, ref, 50, 5, EstimatorMethod::TR, 0, &zero);
   const auto b = serial::approach_a(model, ref, 50, 5, EstimatorMethod::TR, 0, &zero);
   CHECK(a.cov == b.cov);
   CHECK(a.successors == b.successors);
   CHECK(a.has_cov());
}

TEST_CASE("B1 with eps = 0 is the pathwise estimator")
{
   const auto model = logistic_model();
   const auto grid = TimeGrid::from_window(0.0, 5.0, 0.01);
   const std::vector<Trajectory> one{simulate(model, grid, default_noise_plan(model, grid, 12))};
   const auto queries = augment(one[0], 1.0);
   const auto lib = polynomial_library(1, 2);
   for (auto m : methods) {
      const auto b1 = approach_b1(one, queries, 0.0, m);
      const auto pw = pathwise_estimates(m, one[0], 1.0);
      REQUIRE(b1.rows() == pw.rows());
      CHECK(b1.skipped == queries.size() - pw.rows());
      CHECK(b1.drift == pw.drift);
      CHECK(b1.cov == pw.cov);
      const auto f1 = fit(b1, lib, lib);
      const auto f2 = fit(pw, lib, lib);
      CHECK(f1.drift_coef == f2.drift_coef);
      CHECK(f1.cov_coef == f2.cov_coef);
   }
}

TEST_CASE("B1 with a huge radius returns global averages")
{
   const auto model = logistic_model();
   const auto grid = TimeGrid::from_window(0.0, 2.0, 0.01);
   const auto ensemble = simulate_ensemble(model, grid, 3, 6);
   std::vector<AugmentedSample> queries;
   for (const auto& p : ensemble) {
      const auto z = augment(p, 1.0);
      queries.insert(queries.end(), z.begin() + 10, z.begin() + 20);
   }
   for (auto m : methods) {
      double fsum = 0.0, csum = 0.0;
      std::size_t count = 0;
      for (const auto& p : ensemble) {
         const auto pw = pathwise_estimates(m, p, 1.0);
         fsum += pw.drift.sum();
         csum += pw.cov.sum();
         count += pw.rows();
      }
      const auto b1 = approach_b1(ensemble, queries, 1e3, m);
      REQUIRE(b1.rows() == queries.size());
      for (std::size_t r = 0; r < b1.rows(); ++r) {
         CHECK(b1.drift(static_cast<Eigen::Index>(r), 0) == doctest::Approx(fsum / static_cast<double>(count)).epsilon(1e-10));
         CHECK(b1.cov(static_cast<Eigen::Index>(r), 0) == doctest::Approx(csum / static_cast<double>(count)).epsilon(1e-10));
      }
   }
}

TEST_CASE("B1 parallel and serial agree")
{
   const auto model = predator_prey_model();
   const auto grid = TimeGrid::from_window(0.0, 5.0, 0.01);
   const auto ensemble = simulate_ensemble(model, grid, 8, 3);
   const auto index = build_index(ensemble, 1.0, 0.4, 400);
   std::vector<AugmentedSample> queries;
   std::vector<std::size_t> paths, steps;
   for (std::size_t id = 0; id < index.size(); id += 7) {
      const auto p = index.point(id);
      queries.emplace_back(grid.time(index.index(id)), Vector(Eigen::Map<const Vector>(p.data(), 4)));
      paths.push_back(index.path(id));
      steps.push_back(index.index(id));
   }
   for (auto m : methods) {
      const auto pe = point_estimates(ensemble, index, 1.0, m, 400);
      std::vector<std::size_t> ca, cb;
      const auto a = approach_b1(index, pe, queries, paths, steps, 0.2, &ca);
      const int saved = omp_get_max_threads();
      omp_set_num_threads(3);
      const auto b = serial::approach_b1(index, pe, queries, paths, steps, 0.2, &cb);
      const auto c = approach_b1(index, pe, queries, paths, steps, 0.2);
      omp_set_num_threads(saved);
      CHECK(a.drift == b.drift);
      CHECK(a.cov == b.cov);
      CHECK(c.cov == a.cov);
      CHECK(ca == cb);
      CHECK(*std::min_element(ca.begin(), ca.end()) >= 1);
   }
}

TEST_CASE("B2 averaging")
{
   const auto model = logistic_model();
   const auto grid = TimeGrid::from_window(0.0, 10.0, 0.01);
   const auto lib = polynomial_library(1, 2);
   const auto path = simulate(model, grid, default_noise_plan(model, grid, 30));
   IdentifyConfig cfg;
   cfg.approach = Approach::B2;

   const auto single = fit(pathwise_estimates(EstimatorMethod::KM, path, 1.0), lib, lib);
   const auto b2 = approach_b2({path}, 1.0, lib, lib, cfg);
   CHECK(b2.fit.drift_coef == single.drift_coef);
   CHECK(b2.fit.cov_coef == single.cov_coef);
   CHECK(b2.failed_paths == 0);

   const auto triple = approach_b2({path, path, path}, 1.0, lib, lib, cfg);
   CHECK((triple.fit.drift_coef - single.drift_coef).norm() < 1e-14);

   // Union of supports, no re-thresholding.
   const auto ensemble = simulate_ensemble(model, grid, 6, 31);
   const auto avg = approach_b2(ensemble, 1.0, lib, lib, cfg);
   Matrix sum = Matrix::Zero(6, 1);
   for (const auto& p : ensemble) sum += fit(pathwise_estimates(EstimatorMethod::KM, p, 1.0), lib, lib).drift_coef;
   CHECK((avg.fit.drift_coef - sum / 6.0).norm() < 1e-12);

   // Too short to fit: every path fails.
   const auto tiny = TimeGrid(0.0, 0.01, 8);
   const auto shorts = simulate_ensemble(model, tiny, 3, 1);
   CHECK_THROWS_AS(approach_b2(shorts, 1.0, lib, lib, cfg), InsufficientDataError);
   std::vector<Trajectory> mixed{path, shorts[0]};
   const auto half = approach_b2(mixed, 1.0, lib, lib, cfg);
   CHECK(half.failed_paths == 1);
   CHECK(half.fit.drift_coef == single.drift_coef);
}

TEST_CASE("identify runs every approach")
{
   const auto model = logistic_model();
   const auto grid = TimeGrid::from_window(0.0, 10.0, 0.01);
   const auto ensemble = simulate_ensemble(model, grid, 20, 2);
   const auto lib = polynomial_library(1, 2);
   for (auto a : {Approach::A, Approach::B1, Approach::B2}) {
      for (auto m : {EstimatorMethod::KM, EstimatorMethod::TR}) {
         IdentifyConfig cfg;
         cfg.approach = a;
         cfg.drift_method = m;
         cfg.diffusion_method = m;
         cfg.M = 50;
         cfg.eps = 0.01;
         cfg.n_train = 800;
         cfg.seed = 2;
         const auto id = identify(model, ensemble, lib, lib, cfg);
         CHECK(id.fit.drift_coef.allFinite());
         CHECK(id.fit.cov_coef.allFinite());
         CHECK(id.fit.drift_method == m);
         if (a == Approach::B1) {
            CHECK(id.neighbor_counts.size() == id.drift_rows);
            REQUIRE(id.estimates.has_value());
            for (auto p : id.estimates->path_index) CHECK(p == 0);
         }
         if (a == Approach::A) CHECK(id.drift_rows == 799);
      }
   }
   IdentifyConfig mixed;
   mixed.drift_method = EstimatorMethod::FD;
   mixed.diffusion_method = EstimatorMethod::KM;
   mixed.eps = 0.01;
   const auto id = identify(model, ensemble, lib, lib, mixed);
   CHECK(id.fit.diffusion_method == EstimatorMethod::KM);
   CHECK(id.fit.drift_method == EstimatorMethod::FD);
}
