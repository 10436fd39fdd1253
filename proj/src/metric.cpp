#include "gdw/metric.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>

#include "gdw/csv.hpp"
#include "gdw/errors.hpp"

namespace gdw {

namespace {

double boundary_distance(const WeightedGraph& graph, std::span<const double> dist) {
  double trusted = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (graph.is_boundary(v)) trusted = std::min(trusted, dist[v]);
  }
  return trusted;
}

}  // namespace

double measure_jump_size(const WeightedGraph& graph, std::span<const double> dist) {
  double jump = 0.0;
  for (std::size_t x = 0; x < graph.size(); ++x) {
    for (const auto& nb : graph.neighbors(x)) {
      jump = std::max(jump, std::abs(dist[x] - dist[nb.index]));
    }
  }
  return jump;
}

GraphMetric compute_metric(const WeightedGraph& graph, std::size_t x0) {
  if (x0 >= graph.size()) throw DomainError("base vertex out of range");
  constexpr double unreached = -1.0;
  GraphMetric m;
  m.base = x0;
  m.kind = MetricKind::hop;
  m.dist.assign(graph.size(), unreached);
  m.dist[x0] = 0.0;
  std::queue<std::size_t> queue;
  queue.push(x0);
  while (!queue.empty()) {
    const auto x = queue.front();
    queue.pop();
    for (const auto& nb : graph.neighbors(x)) {
      if (m.dist[nb.index] == unreached) {
        m.dist[nb.index] = m.dist[x] + 1.0;
        queue.push(nb.index);
      }
    }
  }
  if (std::find(m.dist.begin(), m.dist.end(), unreached) != m.dist.end()) {
    throw DomainError("graph is disconnected; the hop metric is undefined");
  }
  m.jump_size = graph.edge_count() > 0 ? 1.0 : 0.0;
  m.trusted_radius = boundary_distance(graph, m.dist);
  return m;
}

GraphMetric custom_metric(const WeightedGraph& graph, std::size_t x0, std::vector<double> dist) {
  if (x0 >= graph.size()) throw DomainError("base vertex out of range");
  if (dist.size() != graph.size()) throw DomainError("distance table size does not match graph");
  if (dist[x0] != 0.0) throw DomainError("custom distance must vanish at the base vertex");
  for (double d : dist) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw DomainError("custom distances must be finite and nonnegative");
    }
  }
  GraphMetric m;
  m.base = x0;
  m.kind = MetricKind::custom;
  m.jump_size = measure_jump_size(graph, dist);
  m.trusted_radius = boundary_distance(graph, dist);
  m.dist = std::move(dist);
  return m;
}

GraphMetric euclidean_metric(const WeightedGraph& graph, std::size_t x0) {
  if (graph.lattice_dim() == 0) throw DomainError("euclidean metric needs lattice coordinates");
  if (x0 >= graph.size()) throw DomainError("base vertex out of range");
  const auto base = graph.coords(x0);
  std::vector<double> dist(graph.size());
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const auto c = graph.coords(v);
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double d = static_cast<double>(c[i]) - base[i];
      s += d * d;
    }
    dist[v] = std::sqrt(s);
  }
  auto m = custom_metric(graph, x0, std::move(dist));
  m.kind = MetricKind::euclidean;
  return m;
}

BallTable ball_volumes(const WeightedGraph& graph, const GraphMetric& metric,
                       std::span<const double> radii) {
  BallTable table;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double r = radii[i];
    if (!(r >= 0.0)) throw DomainError("ball radii must be nonnegative");
    if (i > 0 && !(r > radii[i - 1])) throw DomainError("ball radii must be increasing");
    if (r > metric.trusted_radius) {
      throw RangeError("radius " + format_real(r) + " exceeds the trusted truncation radius " +
                       format_real(metric.trusted_radius));
    }
  }
  // Sort vertices by distance once, then sweep the radii.
  std::vector<std::size_t> order(graph.size());
  for (std::size_t v = 0; v < order.size(); ++v) order[v] = v;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return metric.dist[a] < metric.dist[b]; });
  std::size_t cursor = 0;
  std::size_t count = 0;
  double volume = 0.0;
  for (double r : radii) {
    while (cursor < order.size() && metric.dist[order[cursor]] <= r) {
      volume += graph.mu(order[cursor]);
      ++count;
      ++cursor;
    }
    table.radii.push_back(r);
    table.counts.push_back(count);
    table.volumes.push_back(volume);
  }
  return table;
}

PowerFit fit_volume_growth(const BallTable& table, double r_min) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < table.radii.size(); ++i) {
    const double r = table.radii[i];
    if (r < r_min || r <= 0.0 || table.volumes[i] <= 0.0) continue;
    if (!ys.empty() && std::log(table.volumes[i]) == ys.back()) continue;
    xs.push_back(std::log(r));
    ys.push_back(std::log(table.volumes[i]));
  }
  if (xs.size() < 4) {
    throw InsufficientDataError("volume growth fit needs at least 4 radii >= r_min with distinct volumes");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  PowerFit fit;
  fit.exponent = sxy / sxx;
  fit.log_prefactor = my - fit.exponent * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = xs.size();
  return fit;
}

DecayReport check_distance_laplacian_decay(const WeightedGraph& graph, const GraphMetric& metric,
                                           double nu, double R0, double threshold) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("nu must lie in [0, 1]");
  DecayReport report;
  report.nu = nu;
  report.R0 = R0;
  report.threshold = threshold;
  for (std::size_t x = 0; x < graph.size(); ++x) {
    const double d = metric.dist[x];
    if (d <= R0 || graph.is_boundary(x)) continue;
    const double lap = std::abs(graph.laplacian(metric.dist, x));
    const double weighted = lap * std::pow(d, nu);
    report.entries.push_back({x, d, lap, weighted});
    if (weighted > report.sup_constant || report.entries.size() == 1) {
      report.sup_constant = weighted;
      report.argsup = x;
    }
  }
  if (report.entries.empty()) {
    throw InsufficientDataError("no interior vertex lies outside B(x0, R0)");
  }
  report.pass = report.sup_constant <= threshold;
  return report;
}

void write_ball_table_csv(std::ostream& os, const BallTable& table) {
  CsvWriter csv(os);
  csv.row({"r", "count", "volume"});
  for (std::size_t i = 0; i < table.radii.size(); ++i) {
    csv.row({format_real(table.radii[i]), std::to_string(table.counts[i]),
             format_real(table.volumes[i])});
  }
}

void write_decay_csv(std::ostream& os, const WeightedGraph& graph, const DecayReport& report) {
  CsvWriter csv(os);
  csv.row({"vertex", "d", "abs_laplacian_d", "weighted"});
  for (const auto& e : report.entries) {
    csv.row({graph.id(e.vertex), format_real(e.d), format_real(e.abs_laplacian),
             format_real(e.weighted)});
  }
}

}  // namespace gdw
