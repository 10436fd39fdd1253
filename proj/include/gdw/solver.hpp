#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdw/graph.hpp"
#include "gdw/metric.hpp"

namespace gdw {

enum class ProblemKind { scalar, system, scalar_double_damping };

[[nodiscard]] std::string to_string(ProblemKind kind);
[[nodiscard]] ProblemKind parse_problem_kind(std::string_view text);

/// Cauchy problem on a stored graph:
///   scalar:          u_tt - Delta u + u_t = |u|^p
///   double damping:  u_tt - Delta u + u_t - Delta u_t = |u|^p
///   system:          u_tt - Delta u + u_t = |v|^p,  v_tt - Delta v + v_t = |u|^q
/// with u(0) = eps u0, u_t(0) = eps u1 (and v alike). Vertices outside the
/// truncation hold 0.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::scalar;
  double p = 2.0;
  double q = 2.0;
  double epsilon = 1.0;
  GraphFunction u0, u1, v0, v1;
  /// Multiplies the power nonlinearity. 1 for the actual equations; 0 turns
  /// them into linear damped waves (used to check conservation laws).
  double nonlinearity = 1.0;

  [[nodiscard]] bool is_system() const noexcept { return kind == ProblemKind::system; }
  /// Number of state components per vertex (2 or 4).
  [[nodiscard]] std::size_t fields() const noexcept { return is_system() ? 4 : 2; }
  /// Exponent gamma in T_inf - T(M) ~ M^{-gamma} for the blow-up profile
  /// u ~ (T - t)^{-1/gamma} of the second-order dynamics.
  [[nodiscard]] double ladder_exponent() const;
  void validate() const;
};

struct SolverControls {
  double rtol = 1e-8;
  double atol = 1e-12;
  double dt_initial = 1e-3;
  double dt_min = 1e-14;
  double dt_max = 1.0;
  /// Sup-norm levels whose crossing times form the blow-up ladder; blow-up
  /// is declared at the largest.
  std::vector<double> thresholds{1e4, 1e5, 1e6, 1e7, 1e8};
  double t_max = 1e4;
  /// Largest admissible (boundary sup / global sup) ratio for a trusted run.
  double boundary_tolerance = 1e-6;
  /// dt <= growth_cap / S^gamma once the sup norm S exceeds 1.
  double growth_cap = 0.1;
  /// Snapshot cadence; 0 stores only the initial and final states.
  double snapshot_interval = 0.0;
  double snapshot_until = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 100'000'000;

  void validate() const;
};

struct Snapshot {
  double t = 0.0;
  std::vector<double> u, ut, v, vt;
};

struct NormSample {
  double t;
  double sup;
  /// sum_x mu(x) u(t,x)
  double mass;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  std::vector<double> dt_history;
  std::vector<NormSample> norm_history;
  /// running max of |u| (and |v|) over boundary vertices
  double boundary_peak = 0.0;
  /// running max of boundary sup / global sup
  double boundary_ratio = 0.0;
  std::size_t rejected_steps = 0;
  double t_end = 0.0;
  /// The run ended in blow-up, so t_end is (an estimate of) the lifespan.
  bool blew_up = false;
};

enum class Verdict { blowup, survived_horizon, truncation_contaminated };

[[nodiscard]] std::string to_string(Verdict verdict);

struct LadderPoint {
  double threshold;
  double time;
};

struct LifespanRecord {
  double epsilon = 0.0;
  /// Estimated lifespan; empty when the horizon was reached first.
  std::optional<double> T_est;
  Verdict verdict = Verdict::survived_horizon;
  std::vector<LadderPoint> threshold_ladder;
  /// T nondecreasing in M with shrinking successive differences.
  bool ladder_converged = false;
  bool low_confidence = false;
  /// Decay exponent of T_inf - T(M) estimated from the last three rungs.
  std::optional<double> fitted_ladder_exponent;
  double t_end = 0.0;
  std::size_t steps = 0;
  std::string settings_hash;
  std::string note;
};

/// Right-hand side of the first-order system (u, u_t[, v, v_t])' laid out
/// field-major: state[f * n + x]. Throws NumericError on non-finite input.
void rhs(const WeightedGraph& graph, const ProblemSpec& spec, std::span<const double> state,
         std::span<double> derivative);

/// Initial state eps (u0, u1[, v0, v1]) in the same layout as rhs().
[[nodiscard]] std::vector<double> initial_state(const WeightedGraph& graph,
                                                const ProblemSpec& spec);

/// Adaptive Dormand-Prince 5(4) integration with dense output.
///
/// Records the crossing time of every threshold (located on the dense
/// output), declares blow-up at the largest threshold or when the step size
/// collapses below dt_min, and stops with truncation_contaminated as soon as
/// the boundary ratio exceeds its tolerance. Deterministic.
[[nodiscard]] std::pair<Trajectory, LifespanRecord> integrate(const WeightedGraph& graph,
                                                              const ProblemSpec& spec,
                                                              const SolverControls& controls);

/// Runs integrate() and extrapolates the ladder: with geometric thresholds
/// and T_inf - T(M) ~ M^{-gamma}, T_inf = T_k + (T_k - T_{k-1}) /
/// ((M_k/M_{k-1})^gamma - 1). A non-monotone ladder falls back to T at the
/// largest threshold and sets low_confidence.
[[nodiscard]] LifespanRecord estimate_lifespan(const WeightedGraph& graph,
                                               const ProblemSpec& spec,
                                               const SolverControls& controls);

/// Fills ladder diagnostics and T_est of a record produced by integrate().
void extrapolate_ladder(LifespanRecord& record, double gamma);

/// Positive bump eps-free data: u0 = u1 = c on B(x0, radius) with c chosen so
/// that sum mu (u0 + u1) = mass.
[[nodiscard]] GraphFunction bump(const WeightedGraph& graph, const GraphMetric& metric,
                                 double radius, double mass);

/// Hop distance from each vertex to the nearest truncation-boundary vertex
/// (infinity when the graph has no boundary).
[[nodiscard]] std::vector<double> distance_to_boundary(const WeightedGraph& graph);

/// Stable digest of everything that determines a run (fnv1a_hex of the
/// problem, data and controls).
[[nodiscard]] std::string settings_hash(const ProblemSpec& spec, const SolverControls& controls,
                                        std::size_t graph_size);

/// CSV with columns t,vertex,u,u_t[,v,v_t].
void write_trajectory_csv(std::ostream& os, const WeightedGraph& graph,
                          const Trajectory& trajectory, bool system);

}  // namespace gdw
