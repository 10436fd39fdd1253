#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gdw/solver.hpp"

namespace gdw {

struct GraphConfig {
  /// "lattice" or "file"
  std::string kind = "lattice";
  int dim = 1;
  int radius = 200;
  std::string file;
  /// base vertex id; empty means the lattice origin (or the first vertex)
  std::string x0;
  /// "hop" (shortest path, l1 on lattices) or "euclidean" (lattices only)
  std::string metric = "hop";
  /// decay exponent of the distance Laplacian
  double nu = 1.0;
};

struct DataConfig {
  /// bump: u0 = u1 = c on B(x0, radius) with sum mu (u0 + u1) = mass
  /// indicator: u0 = u1 = amplitude on B(x0, radius)
  /// random: u0, u1 uniform in (0, amplitude] on B(x0, radius), from the seed
  std::string shape = "bump";
  double radius = 2.0;
  double mass = 1.0;
  double amplitude = 1.0;
};

struct SweepConfig {
  double eps_min = 0.05;
  double eps_max = 0.4;
  int eps_count = 8;
  /// worker threads; 0 uses the hardware concurrency
  int threads = 0;
  std::uint64_t seed = 1;
  /// rerun a contaminated lattice run once on twice the radius
  bool auto_retry = true;
};

struct ExperimentConfig {
  GraphConfig graph;
  ProblemKind kind = ProblemKind::scalar;
  double p = 2.0;
  double q = 2.0;
  DataConfig data;
  SweepConfig sweep;
  SolverControls solver;
  /// beta = ceil(2 / (min(p,q) - 1)) + beta_margin
  double beta_margin = 1.0;
  std::vector<double> R_ladder{8.0, 16.0, 32.0};
  std::size_t quad_points = 256;
  /// "auto" (from the predicted model), "power" or "exponential"
  std::string fit_model = "auto";
  /// (p, q) pairs for the critical-curve scan
  std::vector<std::pair<double, double>> curve_pairs{{2.0, 2.0}, {2.0, 3.0}, {3.0, 3.0}, {4.0, 4.0}};
  std::string output_dir = "out";

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  /// Geometric grid from eps_min to eps_max with eps_count points.
  [[nodiscard]] std::vector<double> epsilon_grid() const;
  [[nodiscard]] double beta() const;
};

/// Parses `key = value` lines grouped in [graph], [problem], [data],
/// [sweep], [solver], [cutoff], [fit], [curve] and [output] sections; ';'
/// starts a comment line. Unset keys keep their defaults. Unknown sections
/// or keys and malformed values throw ConfigError naming the key.
[[nodiscard]] ExperimentConfig parse_config(std::istream& is);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

/// Every key with its value, in the format parse_config reads.
[[nodiscard]] std::string render_config(const ExperimentConfig& config);

}  // namespace gdw
