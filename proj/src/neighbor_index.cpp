#include "sdde/neighbor_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace sdde {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v)
{
   // splitmix64 finalizer folded into a running hash.
   v += 0x9e3779b97f4a7c15ULL + h;
   v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
   v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
   return v ^ (v >> 31);
}

} // namespace

NeighborIndex::NeighborIndex(RowMatrix points, std::vector<std::size_t> path, std::vector<std::size_t> index,
                             double cell)
   : points_(std::move(points)), path_(std::move(path)), index_(std::move(index)), cell_(cell)
{
   if (!(cell_ > 0.0) || !std::isfinite(cell_)) {
      throw ArgumentError(fmt::format("NeighborIndex: cell size must be positive, got {}", cell_));
   }
   if (path_.size() != size() || index_.size() != size()) {
      throw ArgumentError("NeighborIndex: tag vectors disagree with the point count");
   }
   if (!points_.allFinite()) {
      throw ArgumentError("NeighborIndex: non-finite point");
   }
   std::vector<std::int64_t> c(dim());
   for (std::size_t id = 0; id < size(); ++id) {
      const auto p = point(id);
      for (std::size_t d = 0; d < dim(); ++d) c[d] = coord(p[d]);
      buckets_[bucket_key(c)].push_back(id);
   }
}

std::int64_t NeighborIndex::coord(double v) const
{
   const double q = std::floor(v / cell_);
   constexpr double lim = 4.0e18;
   return static_cast<std::int64_t>(std::clamp(q, -lim, lim));
}

std::uint64_t NeighborIndex::bucket_key(std::span<const std::int64_t> cell) const
{
   std::uint64_t h = 0;
   for (auto c : cell) h = mix(h, static_cast<std::uint64_t>(c));
   return h;
}

bool NeighborIndex::within(std::span<const double> a, std::span<const double> b, double eps)
{
   double s = 0.0;
   for (std::size_t d = 0; d < a.size(); ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
   }
   return s <= eps * eps;
}

void NeighborIndex::query(std::span<const double> z, double eps, std::vector<std::size_t>& out) const
{
   out.clear();
   if (!(eps >= 0.0)) {
      throw ArgumentError("NeighborIndex::query: eps must be >= 0");
   }
   if (z.size() != dim()) {
      throw ArgumentError("NeighborIndex::query: dimension mismatch");
   }
   const auto dims = dim();
   std::vector<std::int64_t> lo(dims), hi(dims);
   double visits = 1.0;
   for (std::size_t d = 0; d < dims; ++d) {
      lo[d] = coord(z[d] - eps);
      hi[d] = coord(z[d] + eps);
      visits *= static_cast<double>(hi[d] - lo[d] + 1);
   }
   if (visits > static_cast<double>(buckets_.size())) {
      // Ball covers more cells than are occupied: scan the buckets instead.
      for (const auto& [key, ids] : buckets_) {
         for (auto id : ids) {
            if (within(point(id), z, eps)) out.push_back(id);
         }
      }
      std::sort(out.begin(), out.end());
      return;
   }
   std::vector<std::int64_t> cur = lo;
   std::vector<std::uint64_t> seen;
   while (true) {
      const auto key = bucket_key(cur);
      // Distinct cells may share a hash; visit each bucket once.
      if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
         seen.push_back(key);
         if (auto it = buckets_.find(key); it != buckets_.end()) {
            for (auto id : it->second) {
               if (within(point(id), z, eps)) out.push_back(id);
            }
         }
      }
      std::size_t d = 0;
      for (; d < dims; ++d) {
         if (cur[d] < hi[d]) {
            ++cur[d];
            break;
         }
         cur[d] = lo[d];
      }
      if (d == dims) break;
   }
   std::sort(out.begin(), out.end());
}

std::vector<std::size_t> NeighborIndex::query(std::span<const double> z, double eps) const
{
   std::vector<std::size_t> out;
   query(z, eps, out);
   return out;
}

std::vector<std::size_t> NeighborIndex::brute_force(std::span<const double> z, double eps) const
{
   std::vector<std::size_t> out;
   for (std::size_t id = 0; id < size(); ++id) {
      if (within(point(id), z, eps)) out.push_back(id);
   }
   return out;
}

NeighborIndex build_index(const std::vector<Trajectory>& ensemble, double tau, double cell, std::size_t count)
{
   if (ensemble.empty()) {
      throw ArgumentError("build_index: empty ensemble");
   }
   std::vector<RowMatrix> parts;
   std::size_t total = 0;
   for (const auto& traj : ensemble) {
      const auto use = count == 0 ? traj.size() : std::min(count, traj.size());
      parts.push_back(augmented_matrix(prefix(traj, use), tau));
      total += use;
   }
   const auto cols = parts.front().cols();
   RowMatrix points(static_cast<Eigen::Index>(total), cols);
   std::vector<std::size_t> path(total), index(total);
   std::size_t row = 0;
   for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto rows = parts[k].rows();
      points.middleRows(static_cast<Eigen::Index>(row), rows) = parts[k];
      for (Eigen::Index i = 0; i < rows; ++i) {
         path[row + static_cast<std::size_t>(i)] = k;
         index[row + static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
      }
      row += static_cast<std::size_t>(rows);
   }
   return NeighborIndex(std::move(points), std::move(path), std::move(index), cell);
}

} // namespace sdde
