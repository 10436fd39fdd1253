#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "gdw/graph.hpp"

namespace gdw {

enum class MetricKind { hop, euclidean, custom };

/// Distances d(x0, .) from a base vertex together with the jump size L.
///
/// `trusted_radius` is the largest radius for which the stored ball
/// B(x0, r) coincides with the ball of the untruncated graph: the smallest
/// distance of a truncation-boundary vertex (infinity without a boundary).
struct GraphMetric {
  std::size_t base = 0;
  std::vector<double> dist;
  double jump_size = 0.0;
  MetricKind kind = MetricKind::hop;
  double trusted_radius = std::numeric_limits<double>::infinity();

  [[nodiscard]] double operator()(std::size_t v) const { return dist[v]; }
};

/// Unit-weight shortest-path distance from x0 (breadth first); jump size 1.
/// On lattice patches this is the l1 distance. Throws DomainError for a
/// disconnected graph or an unknown base vertex.
[[nodiscard]] GraphMetric compute_metric(const WeightedGraph& graph, std::size_t x0);

/// Euclidean distance |x - x0| on a lattice patch. Jump size 1, like the
/// hop metric, but |Delta d| decays like 1/d in every dimension, whereas the
/// l1 distance has Delta d = (n-1)/n on the coordinate axes. DomainError for
/// graphs without lattice coordinates.
[[nodiscard]] GraphMetric euclidean_metric(const WeightedGraph& graph, std::size_t x0);

/// Wraps a user-supplied distance table d(x0, .). Requires dist[x0] == 0 and
/// nonnegative finite entries; the jump size is measured over the edges.
[[nodiscard]] GraphMetric custom_metric(const WeightedGraph& graph, std::size_t x0,
                                        std::vector<double> dist);

/// Largest |d(x) - d(y)| over positive-weight edges.
[[nodiscard]] double measure_jump_size(const WeightedGraph& graph, std::span<const double> dist);

struct BallTable {
  std::vector<double> radii;
  std::vector<std::size_t> counts;
  std::vector<double> volumes;
};

/// Vol(B(x0, r)) = sum of mu over vertices with d <= r, for each radius.
/// Throws RangeError for radii beyond the metric's trusted radius and
/// DomainError for negative or non-increasing radii.
[[nodiscard]] BallTable ball_volumes(const WeightedGraph& graph, const GraphMetric& metric,
                                     std::span<const double> radii);

struct PowerFit {
  double exponent = 0.0;
  double log_prefactor = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of log Vol against log r over radii >= r_min.
/// Needs at least four usable radii with distinct volumes.
[[nodiscard]] PowerFit fit_volume_growth(const BallTable& table, double r_min);

struct DecayEntry {
  std::size_t vertex;
  double d;
  double abs_laplacian;
  double weighted;  ///< |Delta d| * d^nu
};

struct DecayReport {
  double nu = 1.0;
  double R0 = 1.0;
  double threshold = 10.0;
  double sup_constant = 0.0;
  std::size_t argsup = 0;
  bool pass = true;
  std::vector<DecayEntry> entries;
};

/// Measures sup |Delta d(x0, .)(x)| d(x0, x)^nu over vertices outside
/// B(x0, R0) whose neighbourhood is fully stored. Throws
/// InsufficientDataError when no such vertex exists.
[[nodiscard]] DecayReport check_distance_laplacian_decay(const WeightedGraph& graph,
                                                         const GraphMetric& metric, double nu,
                                                         double R0, double threshold = 10.0);

/// CSV with columns r,count,volume.
void write_ball_table_csv(std::ostream& os, const BallTable& table);
/// CSV with columns vertex,d,abs_laplacian_d,weighted.
void write_decay_csv(std::ostream& os, const WeightedGraph& graph, const DecayReport& report);

}  // namespace gdw
