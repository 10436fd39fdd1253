#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdw/cutoff.hpp"
#include "gdw/graph.hpp"
#include "gdw/metric.hpp"
#include "gdw/solver.hpp"

namespace gdw {

// Test-function functionals evaluated along computed trajectories.
//
// Time integrals use the trapezoid rule on the trajectory snapshots, cut at
// t_cut = min(t_end, R^{4/(alpha+2)}): beyond the time support Phi_R
// vanishes, and a blow-up run has nothing past t_end.

enum class Component { u, v };

struct QuadratureValue {
  double value = 0.0;
  /// |I_h - I_2h| / 3 from the same rule on every second snapshot.
  double error_estimate = 0.0;
};

/// Integral over [0, t_cut] of sum_x mu Phi_R |w|^power (Phi*_R when
/// `starred`), with w the chosen component.
///
/// Throws CoverageError when the trajectory stops before the time support
/// without blowing up, or when its snapshots end before t_cut.
[[nodiscard]] QuadratureValue functional_PR(const WeightedGraph& graph, const GraphMetric& metric,
                                            const Trajectory& trajectory,
                                            const CutoffParams& params, double power,
                                            bool starred, Component component = Component::u);

/// eps sum_x mu (w0 + w1) Phi_R(0, x) for the data of the chosen component.
[[nodiscard]] double data_term(const WeightedGraph& graph, const GraphMetric& metric,
                               const ProblemSpec& spec, const CutoffParams& params,
                               Component component = Component::u);

struct SupportMeasure {
  /// integral over [0, t_cap] of sum of mu over the vertices in supp Phi*_R(t, .)
  double value = 0.0;
  /// R^{4/(alpha+2)} Vol(B(x0, R))
  double comparison = 0.0;
};

/// Exact space-time measure of supp Phi*_R. At distance d the support in
/// time is the slab t^{alpha+2} in [R^4/2 - d^4, R^4 - d^4), clipped to
/// [0, t_cap]. Throws RangeError when B(x0, R) reaches past the metric's
/// trusted radius.
[[nodiscard]] SupportMeasure support_measure(const WeightedGraph& graph, const GraphMetric& metric,
                                             const CutoffParams& params,
                                             double t_cap = std::numeric_limits<double>::infinity());

/// H(R) = integral of h(r)/r over (r_min, R], h(r) the starred functional
/// at scale r, on `quad_points` log-spaced nodes. r_min is the smallest
/// scale whose starred support holds a sample. The time weights are the
/// ones functional_PR uses at scale R, so H(R) <= (log 2 / 4) P_R holds
/// sample by sample up to the r-quadrature error.
///
/// The same routine gives G_p (component v, power p) and G_q (component u,
/// power q) for systems. Throws InsufficientDataError when R <= r_min.
[[nodiscard]] double functional_H(const WeightedGraph& graph, const GraphMetric& metric,
                                  const Trajectory& trajectory, const CutoffParams& params,
                                  double power, std::size_t quad_points = 256,
                                  Component component = Component::u);

/// Terms of the weak-form identity tested with Psi = Phi_R.
struct WeakFormTerms {
  double u_psi_tt = 0.0;
  double lap_u_psi = 0.0;
  double u_psi_t = 0.0;
  /// only for double damping: integral of sum mu Delta u Psi_t
  double lap_u_psi_t = 0.0;
  double source = 0.0;
  double data = 0.0;
  double data_psi_t = 0.0;
  /// only for double damping: eps sum mu (Delta u0) Psi(0)
  double data_lap = 0.0;
  double residual = 0.0;
  /// |residual| / max |term|
  double relative = 0.0;
};

/// Left minus right side of the weak formulation for the chosen component,
/// with Psi = Phi_R and analytic derivatives of Psi. Delta u uses the
/// Dirichlet Laplacian of the stored graph.
///
/// Needs Phi_R's time support strictly inside the trajectory (CoverageError)
/// and B(x0, R + L) inside the trusted radius (RangeError).
[[nodiscard]] WeakFormTerms weak_form_residual(const WeightedGraph& graph,
                                               const GraphMetric& metric,
                                               const ProblemSpec& spec,
                                               const Trajectory& trajectory,
                                               const CutoffParams& params,
                                               Component component = Component::u);

/// The trajectory seen from time `shift` on: snapshots with t >= shift,
/// relabelled t - shift. Used as a negative control for the weak form.
[[nodiscard]] Trajectory time_shifted(const Trajectory& trajectory, double shift);

/// One rung of an inequality chain
///   F_R + data_term <= C R^{-(1+nu)} (F*_R)^{1/s} S^{1/s'}
/// where F is the left functional, F* the starred functional on the right
/// and S the support measure. For the scalar problem F = F* integrand
/// |u|^p. For systems chain "I" has F = |v|^p, F* = |u|^q, s = q and chain
/// "J" has F = |u|^q, F* = |v|^p, s = p.
struct FunctionalRow {
  std::string chain = "P";
  double R = 0.0;
  double P_R = 0.0;
  double P_star = 0.0;
  double data_term = 0.0;
  double support_measure = 0.0;
  double rhs_bound = 0.0;
  /// lhs / rhs; empty when both sides vanish
  std::optional<double> implied_constant;
  /// lhs > 0 while rhs == 0
  bool violation = false;
  /// relative quadrature error estimate of P_R
  double quadrature_error = 0.0;
  /// H(R) (or G) for the left functional's integrand; empty when skipped
  std::optional<double> H_value;
  std::optional<double> weak_residual;
};

struct ChainOptions {
  bool compute_H = true;
  bool compute_weak_residual = true;
  std::size_t quad_points = 256;
};

struct ChainReport {
  std::vector<FunctionalRow> rows;
  /// some chain's implied constants grow monotonically by more than 10%
  bool growth_flag = false;
  bool violation = false;
};

/// Evaluates the chain(s) at every R of the ladder, in parallel over R.
/// `params` supplies alpha, beta, nu and x0; its R is ignored.
[[nodiscard]] ChainReport check_estimate_chain(const WeightedGraph& graph,
                                               const GraphMetric& metric,
                                               const ProblemSpec& spec,
                                               const Trajectory& trajectory,
                                               const CutoffParams& params,
                                               std::span<const double> R_ladder,
                                               const ChainOptions& options = {});

/// CSV with columns R,P_R,P*_R,data_term,support_measure,rhs_bound,
/// implied_constant,H_value,weak_residual,chain. Missing values are empty.
void write_functional_csv(std::ostream& os, const ChainReport& report);

}  // namespace gdw
