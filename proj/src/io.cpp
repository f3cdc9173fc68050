#include "sdde/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace sdde {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path)
{
   if (path.has_parent_path()) {
      fs::create_directories(path.parent_path());
   }
   std::ofstream os(path, std::ios::binary);
   if (!os) {
      throw ConfigError(fmt::format("cannot write '{}'", path.string()));
   }
   return os;
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no)
{
   std::vector<double> out;
   std::stringstream ss(line);
   std::string cell;
   while (std::getline(ss, cell, ',')) {
      try {
         std::size_t used = 0;
         out.push_back(std::stod(cell, &used));
         if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
         throw ConfigError(fmt::format("line {}: '{}' is not a number", line_no, cell));
      }
   }
   return out;
}

} // namespace

std::string format_double(double v)
{
   return fmt::format("{}", v);
}

void write_trajectory_csv(const fs::path& path, const Trajectory& traj)
{
   auto os = open_out(path);
   const auto n = traj.dim();
   os << 't';
   for (std::size_t c = 0; c < n; ++c) os << ",x" << c + 1;
   os << '\n';
   const auto& h = traj.history;
   // History nodes except s = 0, which is the first grid sample.
   for (Eigen::Index j = 0; j + 1 < h.nodes.rows(); ++j) {
      os << format_double(traj.grid.t0() - h.tau + static_cast<double>(j) * h.node_dt);
      for (Eigen::Index c = 0; c < h.nodes.cols(); ++c) os << ',' << format_double(h.nodes(j, c));
      os << '\n';
   }
   for (std::size_t i = 0; i < traj.size(); ++i) {
      os << format_double(traj.grid.time(i));
      for (double v : traj.state(i)) os << ',' << format_double(v);
      os << '\n';
   }
}

Trajectory read_trajectory_csv(const fs::path& path, double tau)
{
   std::ifstream is(path);
   if (!is) {
      throw ConfigError(fmt::format("cannot read '{}'", path.string()));
   }
   std::string line;
   if (!std::getline(is, line) || line.rfind("t,", 0) != 0) {
      throw ConfigError(fmt::format("'{}': missing 't,x1,...' header", path.string()));
   }
   const auto n = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
   std::vector<double> hist_t, grid_t;
   std::vector<std::vector<double>> hist, grid;
   std::size_t line_no = 1;
   while (std::getline(is, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      auto row = parse_row(line, line_no);
      if (row.size() != n + 1) {
         throw ConfigError(fmt::format("'{}' line {}: expected {} columns", path.string(), line_no, n + 1));
      }
      const double t = row[0];
      row.erase(row.begin());
      if (grid.empty() && t < 0.0) {
         hist_t.push_back(t);
         hist.push_back(std::move(row));
      } else {
         grid_t.push_back(t);
         grid.push_back(std::move(row));
      }
   }
   if (grid.size() < 2) {
      throw ConfigError(fmt::format("'{}': need at least two grid samples", path.string()));
   }
   if (hist.empty()) {
      throw ConfigError(fmt::format("'{}': no history rows (t < 0)", path.string()));
   }
   const double dt = grid_t[1] - grid_t[0];
   TimeGrid tg(grid_t[0], dt, grid.size());
   RowMatrix states(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(n));
   for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(grid_t[i] - tg.time(i)) > 1e-6 * dt) {
         throw ConfigError(fmt::format("'{}': grid times are not uniform", path.string()));
      }
      for (std::size_t c = 0; c < n; ++c) states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = grid[i][c];
   }
   const double node_dt = hist.size() > 1 ? hist_t[1] - hist_t[0] : grid_t[0] - hist_t[0];
   if (std::abs(grid_t[0] - hist_t[0] - tau) > 1e-6 * tau) {
      throw ConfigError(fmt::format("'{}': history spans {} but tau is {}", path.string(), grid_t[0] - hist_t[0], tau));
   }
   RowMatrix nodes(static_cast<Eigen::Index>(hist.size() + 1), static_cast<Eigen::Index>(n));
   for (std::size_t j = 0; j < hist.size(); ++j) {
      for (std::size_t c = 0; c < n; ++c) nodes(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = hist[j][c];
   }
   nodes.row(nodes.rows() - 1) = states.row(0);
   return Trajectory(tg, std::move(states), History::from_nodes(tau, node_dt, std::move(nodes)));
}

void write_trajectory_meta(const fs::path& path, const TrajectoryMeta& meta)
{
   nlohmann::json j{{"n", meta.n},       {"tau", meta.tau},       {"dt", meta.dt},
                    {"seed", meta.seed}, {"stream", meta.stream}, {"model", meta.model}};
   write_text(path, j.dump(2) + "\n");
}

TrajectoryMeta read_trajectory_meta(const fs::path& path)
{
   try {
      const auto j = nlohmann::json::parse(read_text(path));
      TrajectoryMeta m;
      m.n = j.at("n").get<std::size_t>();
      m.tau = j.at("tau").get<double>();
      m.dt = j.at("dt").get<double>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.stream = j.at("stream").get<std::uint64_t>();
      m.model = j.at("model").get<std::string>();
      return m;
   } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("'{}': {}", path.string(), e.what()));
   }
}

void write_estimates_csv(const fs::path& path, const EstimateSet& set)
{
   auto os = open_out(path);
   const auto n = set.n;
   os << 't';
   for (std::size_t c = 0; c < n; ++c) os << ",x" << c + 1;
   for (std::size_t c = 0; c < n; ++c) os << ",x" << c + 1 << "_tau";
   for (std::size_t c = 0; c < n; ++c) os << ",fhat" << c + 1;
   if (set.has_cov()) {
      for (std::size_t i = 0; i < n; ++i) {
         for (std::size_t j = 0; j < n; ++j) os << ",chat" << i + 1 << j + 1;
      }
   }
   os << '\n';
   for (Eigen::Index r = 0; r < set.points.rows(); ++r) {
      os << format_double(set.t(r));
      for (Eigen::Index c = 0; c < set.points.cols(); ++c) os << ',' << format_double(set.points(r, c));
      for (Eigen::Index c = 0; c < set.drift.cols(); ++c) os << ',' << format_double(set.drift(r, c));
      if (set.has_cov()) {
         for (Eigen::Index c = 0; c < set.cov.cols(); ++c) os << ',' << format_double(set.cov(r, c));
      }
      os << '\n';
   }
}

void write_histogram_csv(const fs::path& path, const std::vector<std::size_t>& counts)
{
   std::map<std::size_t, std::size_t> hist;
   for (auto c : counts) ++hist[c];
   auto os = open_out(path);
   os << "neighbors,queries\n";
   for (const auto& [k, v] : hist) os << k << ',' << v << '\n';
}

void write_text(const fs::path& path, const std::string& text)
{
   auto os = open_out(path);
   os << text;
}

std::string read_text(const fs::path& path)
{
   std::ifstream is(path, std::ios::binary);
   if (!is) {
      throw ConfigError(fmt::format("cannot read '{}'", path.string()));
   }
   std::ostringstream ss;
   ss << is.rdbuf();
   return ss.str();
}

} // namespace sdde
