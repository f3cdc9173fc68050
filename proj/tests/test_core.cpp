#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sdde/core.hpp"
#include "sdde/errors.hpp"
#include "sdde/models.hpp"
#include "sdde/simulate.hpp"

using namespace sdde;

namespace {

Trajectory two_points()
{
   RowMatrix states(2, 1);
   states << 1.0, 2.0;
   RowMatrix nodes(2, 1);
   nodes << 1.0, 1.0;
   return Trajectory(TimeGrid(0.0, 0.01, 2), states, History::from_nodes(0.01, 0.01, nodes));
}

} // namespace

TEST_CASE("time grid reconstructs nodes")
{
   const auto g = TimeGrid::from_window(0.0, 20.0, 0.01);
   CHECK(g.steps() == 2001);
   CHECK(g.time(2000) == doctest::Approx(20.0).epsilon(1e-14));
   CHECK(g.time(7) == 7 * 0.01);
   CHECK_THROWS_AS(TimeGrid(0.0, 0.0, 3), ArgumentError);
   CHECK_THROWS_AS(TimeGrid(0.0, 0.1, 1), ArgumentError);
}

TEST_CASE("interpolate_state")
{
   const auto traj = two_points();
   CHECK(interpolate_state(traj, 0.005)(0) == doctest::Approx(1.5).epsilon(1e-14));
   CHECK(interpolate_state(traj, 0.0)(0) == 1.0);
   CHECK(interpolate_state(traj, 0.01)(0) == 2.0);
   CHECK_THROWS_AS(interpolate_state(traj, 0.02), DomainError);
   CHECK_THROWS_AS(interpolate_state(traj, -0.011), DomainError);

   SUBCASE("functional history")
   {
      const auto model = logistic_model();
      const auto grid = TimeGrid(0.0, 0.01, 11);
      const auto path = simulate(model, grid, default_noise_plan(model, grid, 3));
      CHECK(interpolate_state(path, -0.5)(0) == doctest::Approx(std::cos(-0.5)).epsilon(1e-12));
      CHECK(interpolate_state(path, -0.505)(0) == doctest::Approx(std::cos(-0.505)).epsilon(1e-12));
      for (std::size_t i = 0; i < grid.steps(); ++i) {
         CHECK(interpolate_state(path, grid.time(i))(0) == path.states(static_cast<Eigen::Index>(i), 0));
      }
   }
}

TEST_CASE("augment with a grid-aligned delay")
{
   const auto model = logistic_model();
   const auto grid = TimeGrid::from_window(0.0, 3.0, 0.01);
   const auto path = simulate(model, grid, default_noise_plan(model, grid, 5));
   const auto z = augment(path, 1.0);
   REQUIRE(z.size() == grid.steps());
   for (std::size_t i = 100; i < z.size(); ++i) {
      CHECK(z[i].z(1) == path.states(static_cast<Eigen::Index>(i - 100), 0));
      CHECK(z[i].z(0) == path.states(static_cast<Eigen::Index>(i), 0));
   }
   CHECK(z[30].z(1) == doctest::Approx(std::cos(0.3 - 1.0)).epsilon(1e-12));
   CHECK_THROWS_AS(augment(path, 1.5), DomainError);
   CHECK_THROWS_AS(augment(path, 0.0), ArgumentError);
}

TEST_CASE("augment with a sub-step delay")
{
   const auto model = option_pricing_model();
   const auto grid = TimeGrid::from_window(0.0, 1.0, 0.01);
   const auto plan = default_noise_plan(model, grid, 2);
   CHECK(plan.factor == 5);
   const auto path = simulate(model, grid, plan);
   REQUIRE(path.fine.has_value());

   // With the fine path the delayed value is the fine node one step back.
   const auto z = augment(path, 0.002);
   for (std::size_t i = 1; i < grid.steps(); ++i) {
      CHECK(z[i].z(1) == path.fine->states(static_cast<Eigen::Index>(5 * i - 1), 0));
   }

   // Coarse samples only: interpolant between X(t_{i-1}) and X(t_i) at 0.8.
   Trajectory coarse(path.grid, path.states, path.history);
   const auto zc = augment(coarse, 0.002);
   for (std::size_t i = 1; i < grid.steps(); ++i) {
      const double a = path.states(static_cast<Eigen::Index>(i - 1), 0);
      const double b = path.states(static_cast<Eigen::Index>(i), 0);
      CHECK(zc[i].z(1) == doctest::Approx(a + 0.8 * (b - a)).epsilon(1e-12));
   }
   CHECK(zc[0].z(1) == 100.0);
}

TEST_CASE("augment of a constant trajectory")
{
   RowMatrix states = RowMatrix::Constant(50, 2, 3.5);
   auto h = History::sampled(
      0.2, 2, [](double, std::span<double> out) { out[0] = out[1] = 3.5; }, 0.01);
   const Trajectory traj(TimeGrid(0.0, 0.01, 50), states, std::move(h));
   for (const auto& s : augment(traj, 0.13)) {
      CHECK(s.z.size() == 4);
      CHECK((s.z.array() == 3.5).all());
   }
}

TEST_CASE("augmented sample partition round-trips")
{
   Vector cur(2), del(2);
   cur << 1.0, 2.0;
   del << 3.0, 4.0;
   const AugmentedSample s(0.5, cur, del);
   CHECK(s.dim() == 2);
   CHECK(s.current() == cur);
   CHECK(s.delayed() == del);
   const AugmentedSample t(0.5, s.z);
   CHECK(t.current() == cur);
   CHECK(t.delayed() == del);
}

TEST_CASE("chronological split")
{
   std::vector<int> ten(10);
   std::iota(ten.begin(), ten.end(), 0);
   const auto [train, val] = split(ten, SplitSpec{0.8});
   CHECK(train == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
   CHECK(val == std::vector<int>{8, 9});

   CHECK(train_count(2001, SplitSpec{0.8}) == 1600);
   std::vector<int> four{1, 2, 3, 4};
   const auto [a, b] = split(four, SplitSpec{0.5});
   CHECK(a.size() == 2);
   CHECK(b.size() == 2);

   CHECK_THROWS_AS(train_count(10, SplitSpec{1.0}), ArgumentError);
   CHECK_THROWS_AS(train_count(10, SplitSpec{0.0}), ArgumentError);

   // Partition property over a range of sizes and fractions.
   for (int m = 5; m < 60; ++m) {
      std::vector<int> v(static_cast<std::size_t>(m));
      std::iota(v.begin(), v.end(), 0);
      for (double f : {0.1, 0.33, 0.5, 0.8, 0.95}) {
         const auto [tr, va] = split(v, SplitSpec{f});
         CHECK(tr.size() == static_cast<std::size_t>(std::floor(f * m + 1e-9)));
         std::vector<int> joined = tr;
         joined.insert(joined.end(), va.begin(), va.end());
         CHECK(joined == v);
      }
   }
}

TEST_CASE("prefix keeps history and fine path")
{
   const auto model = option_pricing_model();
   const auto grid = TimeGrid::from_window(0.0, 0.5, 0.01);
   const auto path = simulate(model, grid, default_noise_plan(model, grid, 4));
   const auto head = prefix(path, 20);
   CHECK(head.size() == 20);
   REQUIRE(head.fine.has_value());
   CHECK(head.fine->states.rows() == 19 * 5 + 1);
   const auto a = augment(head, 0.002);
   const auto b = augment(path, 0.002);
   for (std::size_t i = 0; i < 20; ++i) CHECK(a[i].z == b[i].z);
}
