#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdde/core.hpp"
#include "sdde/estimators.hpp"

namespace sdde {

// Trajectory CSV: header `t,x1,...,xn`; history rows (t < 0) first, then the
// grid samples.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
// Reads a trajectory written by write_trajectory_csv. The history must be
// present and span exactly tau.
Trajectory read_trajectory_csv(const std::filesystem::path& path, double tau);

struct TrajectoryMeta {
   std::size_t n = 0;
   double tau = 0.0;
   double dt = 0.0;
   std::uint64_t seed = 0;
   std::uint64_t stream = 0;
   std::string model;
};
void write_trajectory_meta(const std::filesystem::path& path, const TrajectoryMeta& meta);
TrajectoryMeta read_trajectory_meta(const std::filesystem::path& path);

// Estimate CSV: `t,x1,...,x1_tau,...,fhat1,...,chat11,chat12,...`.
void write_estimates_csv(const std::filesystem::path& path, const EstimateSet& set);

// Neighbor-count histogram: `neighbors,queries`.
void write_histogram_csv(const std::filesystem::path& path, const std::vector<std::size_t>& counts);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

} // namespace sdde
