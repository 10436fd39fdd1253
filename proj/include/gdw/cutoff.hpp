#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gdw/graph.hpp"
#include "gdw/metric.hpp"

namespace gdw {

// Smooth step and its tail part.
//
// phi(r) = 1 on [0, 1/2], 0 on [1, inf), and on (1/2, 1) the exponential
// partition-of-unity step: with e(s) = exp(-1/s) (0 for s <= 0) and
// s = 2r - 1, phi(r) = e(1-s) / (e(1-s) + e(s)). It is C-infinity, strictly
// decreasing on (1/2, 1) and phi(3/4) = 1/2.

[[nodiscard]] double phi(double r);
[[nodiscard]] double phi_prime(double r);
[[nodiscard]] double phi_second(double r);
/// 0 on [0, 1/2), phi(r) from 1/2 on.
[[nodiscard]] double phi_star(double r);

/// Exponent alpha with 1 + nu = 4 / (alpha + 2).
[[nodiscard]] double alpha_for_nu(double nu);
/// Smallest admissible beta is 2/(min(p,q) - 1); the default rounds it up to
/// an integer and adds one.
[[nodiscard]] double default_beta(double p, std::optional<double> q = std::nullopt);

struct CutoffParams {
  double alpha = 0.0;
  double beta = 4.0;
  double nu = 1.0;
  double R = 1.0;
  std::size_t x0 = 0;

  /// alpha from nu and the default beta for the given powers.
  static CutoffParams automatic(double nu, double R, std::size_t x0, double p,
                                std::optional<double> q = std::nullopt);
};

/// The space-time test functions
///   Phi_R(t,x)  = phi ((t^{alpha+2} + d(x0,x)^4) / R^4)^{beta+2}
///   Phi*_R(t,x) = phi*((t^{alpha+2} + d(x0,x)^4) / R^4)^{beta+2}
/// bound to a metric. Holds references: the metric must outlive it.
class SpaceTimeCutoff {
 public:
  SpaceTimeCutoff(const CutoffParams& params, const GraphMetric& metric);

  [[nodiscard]] const CutoffParams& params() const noexcept { return params_; }

  /// Scaled argument s = (t^{alpha+2} + d^4) / R^4.
  [[nodiscard]] double argument(double t, std::size_t x) const;
  [[nodiscard]] double value(double t, std::size_t x) const;
  [[nodiscard]] double star(double t, std::size_t x) const;
  /// (d/dt Phi_R, d^2/dt^2 Phi_R), from the closed-form chain rule.
  [[nodiscard]] std::array<double, 2> time_derivatives(double t, std::size_t x) const;
  /// Graph Laplacian of Phi_R(t, .) at x over the stored neighbours.
  [[nodiscard]] double laplacian(const WeightedGraph& graph, double t, std::size_t x) const;

  /// Largest time where Phi_R can be nonzero: R^{4/(alpha+2)}.
  [[nodiscard]] double time_support() const;

 private:
  CutoffParams params_;
  const GraphMetric* metric_;
  double inv_R4_;
};

struct BoundResult {
  /// sup over the counted samples of lhs / (R-power * Phi*^exponent)
  double sup_ratio = 0.0;
  double argmax_t = 0.0;
  std::size_t argmax_vertex = 0;
  /// samples where the left side is nonzero but the right side vanishes
  std::size_t violations = 0;
  std::size_t counted = 0;
};

/// Laplacian bound diagnostics beyond the main ratio.
struct LaplacianDiagnostics {
  /// sup of |Delta Phi_R| / (R^{-(1+nu)} Phi*^{(beta+1)/(beta+2)}) on supp Phi*_R
  double abs_sup_ratio = 0.0;
  /// points on supp Phi*_R where Delta Phi_R > 0 (the proven bound is one sided)
  std::size_t sign_anomalies = 0;
  /// points off supp Phi*_R where Delta Phi_R != 0
  std::size_t off_support = 0;
  double off_support_max_abs = 0.0;
};

struct CutoffBoundsReport {
  double R = 0.0;
  /// 0: |d_t Phi_R|, 1: |d_t^2 Phi_R|, 2: -Delta Phi_R (one sided, on supp Phi*_R)
  std::array<BoundResult, 3> bounds{};
  LaplacianDiagnostics laplacian;
  std::size_t samples = 0;
  /// sup |d_t Phi_R| over the samples (for exponent checks)
  double sup_abs_dt = 0.0;
};

/// Evaluates the three cutoff estimates over the sample grid.
///
/// Bounds 0 and 1 are checked at every sample; a sample where the
/// derivative is nonzero while Phi*_R vanishes is a violation. Bound 2 is
/// checked on supp Phi*_R with the one-sided quantity max(-Delta Phi_R, 0),
/// the form that holds on graphs; absolute values and off-support behaviour
/// are reported in `laplacian`. Vertex samples must have complete
/// neighbourhoods. Throws InsufficientDataError when no sample lands in
/// supp Phi*_R.
[[nodiscard]] CutoffBoundsReport verify_cutoff_bounds(const CutoffParams& params, const WeightedGraph& graph,
                                           const GraphMetric& metric,
                                           std::span<const double> t_samples,
                                           std::span<const std::size_t> vertex_samples);

/// Uniform grid of `count` times on [0, R^{4/(alpha+2)}] plus all interior
/// vertices with d <= R + L, then verify_cutoff_bounds.
[[nodiscard]] CutoffBoundsReport verify_cutoff_bounds_grid(const CutoffParams& params,
                                                const WeightedGraph& graph,
                                                const GraphMetric& metric,
                                                std::size_t time_count);

/// True when the sequence grows monotonically across the ladder and ends
/// more than `tolerance` above where it started.
[[nodiscard]] bool monotone_growth(std::span<const double> values, double tolerance = 0.10);

/// CSV with columns R,bound_id,sup_ratio,argmax_t,argmax_vertex,violations,
/// plus abs_sup_ratio,sign_anomalies,off_support for the Laplacian bound.
void write_cutoff_bounds_csv(std::ostream& os, const WeightedGraph& graph,
                       std::span<const CutoffBoundsReport> reports);

}  // namespace gdw
