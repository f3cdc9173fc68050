#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "sdde/core.hpp"

namespace sdde {

// Fixed-radius neighbor search over augmented samples (Euclidean norm),
// backed by a uniform-grid hash. query() returns exactly the points with
// ||p - z||_2 <= eps, sorted by point id.
class NeighborIndex {
public:
   NeighborIndex(RowMatrix points, std::vector<std::size_t> path, std::vector<std::size_t> index, double cell);

   std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
   std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }
   double cell() const noexcept { return cell_; }
   std::size_t path(std::size_t id) const { return path_[id]; }
   std::size_t index(std::size_t id) const { return index_[id]; }
   std::span<const double> point(std::size_t id) const { return row_span(points_, static_cast<Eigen::Index>(id)); }
   const RowMatrix& points() const noexcept { return points_; }

   std::vector<std::size_t> query(std::span<const double> z, double eps) const;
   void query(std::span<const double> z, double eps, std::vector<std::size_t>& out) const;
   // O(size) scan with the same distance test.
   std::vector<std::size_t> brute_force(std::span<const double> z, double eps) const;

   static bool within(std::span<const double> a, std::span<const double> b, double eps);

private:
   std::int64_t coord(double v) const;
   std::uint64_t bucket_key(std::span<const std::int64_t> cell) const;

   RowMatrix points_;
   std::vector<std::size_t> path_;
   std::vector<std::size_t> index_;
   double cell_;
   std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

// Indexes the first `count` augmented samples of every path (all when
// count is 0). `cell` defaults to 2*eps when eps > 0.
NeighborIndex build_index(const std::vector<Trajectory>& ensemble, double tau, double cell, std::size_t count = 0);

} // namespace sdde
