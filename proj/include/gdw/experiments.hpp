#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdw/config.hpp"
#include "gdw/errors.hpp"
#include "gdw/graph.hpp"
#include "gdw/metric.hpp"
#include "gdw/solver.hpp"

namespace gdw {

/// Parameters outside every proven blow-up regime.
class NoPredictionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Gamma(p, q) = (max{p,q} + 1) / (pq - 1). DomainError unless pq > 1.
[[nodiscard]] double gamma_pq(double p, double q);

/// Fujita exponent 1 + 2/n. DomainError for n < 1.
[[nodiscard]] double fujita(int n);

enum class FitModel { power, exponential };

[[nodiscard]] std::string to_string(FitModel model);
[[nodiscard]] FitModel parse_fit_model(std::string_view text);

/// Upper-bound lifespan law on a graph with Vol(B(x0, r)) ~ r^n.
///
/// With D = 1 + nu: the scalar problem is subcritical when n (p-1) < D,
/// giving log T ~ -(p-1) D / (D - n(p-1)) log eps, and critical when
/// n (p-1) = D, giving log T ~ eps^{-(p-1)}. The system is subcritical when
/// D Gamma > n, giving slope -1 / (Gamma - n/D), and critical at D Gamma = n
/// with kappa = p - 1 (p = q) or max{p,q} / Gamma. Double damping uses the
/// scalar law.
struct LifespanModel {
  FitModel model = FitModel::power;
  /// slope of log T against log eps (power model)
  std::optional<double> predicted_slope;
  /// exponent in T <= exp(C eps^{-kappa}) (exponential model)
  double kappa = 0.0;
  bool critical = false;
};

/// Throws NoPredictionError in the supercritical range.
[[nodiscard]] LifespanModel predicted_lifespan_model(ProblemKind kind, double n, double nu,
                                                     double p, std::optional<double> q = {});

struct Exclusion {
  double epsilon;
  std::string reason;
};

struct ScalingFit {
  FitModel model = FitModel::power;
  double kappa = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::optional<double> predicted_slope;
  std::optional<double> relative_error;
  std::size_t points = 0;
  /// power fits with a prediction: "matches sharp rate" (within 15%),
  /// "consistent with upper bound" (slower growth) or "exceeds upper bound"
  std::string agreement;
  /// records left out, always reported
  std::vector<Exclusion> excluded;
};

/// Least squares of log T against log eps (power) or against eps^{-kappa}
/// (exponential) over the records with a blow-up verdict. Every other
/// record is listed in `excluded`. Throws InsufficientDataError with fewer
/// than `min_points` usable records.
[[nodiscard]] ScalingFit fit_scaling(std::span<const LifespanRecord> records, FitModel model,
                                     double kappa = 0.0,
                                     std::optional<double> predicted_slope = std::nullopt,
                                     std::size_t min_points = 5);

/// Graph, metric and problem data built from a config.
struct Experiment {
  WeightedGraph graph;
  GraphMetric metric;
  /// epsilon-free problem (epsilon = 1)
  ProblemSpec problem;
};

[[nodiscard]] Experiment build_experiment(const ExperimentConfig& config);
/// Same with the lattice radius overridden (ignored for file graphs).
[[nodiscard]] Experiment build_experiment(const ExperimentConfig& config, int radius);

/// n in Vol(B(x0, r)) ~ r^n: the lattice dimension, otherwise a power fit
/// of ball volumes over the outer three quarters of the trusted radius.
[[nodiscard]] double volume_dimension(const Experiment& ex);

struct SweepRecord {
  LifespanRecord record;
  /// lattice radius of the accepted run (0 for file graphs)
  int radius = 0;
  bool retried = false;
  bool excluded = false;
  std::string exclusion_reason;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  std::string config_hash;
  /// records taken over from an earlier manifest
  std::size_t resumed = 0;
};

struct SweepOptions {
  /// JSON manifest updated after every finished run; when it already holds
  /// records for the same config they are reused. Empty disables it.
  std::string manifest_path;
  /// called after each finished run (from the aggregating thread)
  std::function<void(const SweepRecord&)> progress;
};

/// estimate_lifespan at every epsilon of the grid on a bounded worker pool.
/// A contaminated lattice run is repeated once on twice the radius (when
/// enabled); if that is still contaminated the record is kept, flagged and
/// excluded from fits. Records come back in grid order and do not depend on
/// the thread count.
[[nodiscard]] SweepResult lifespan_sweep(const ExperimentConfig& config,
                                         const SweepOptions& options = {});

/// Records of a sweep that fits may use, plus the disclosed exclusions.
[[nodiscard]] std::pair<std::vector<LifespanRecord>, std::vector<Exclusion>> fit_inputs(
    const SweepResult& result);

/// Fit of a sweep with the config's model choice ("auto" takes the predicted
/// model, whose slope is attached). Sweep exclusions are disclosed.
[[nodiscard]] ScalingFit fit_sweep(const ExperimentConfig& config, const SweepResult& result);

/// Stable digest of a config (FNV-1a of its rendered text).
[[nodiscard]] std::string config_hash(const ExperimentConfig& config);

/// CSV: epsilon,T_est,verdict,ladder_converged,low_confidence,
/// fitted_ladder_exponent,t_end,steps,radius,retried,excluded,reason,
/// ladder,settings_hash,note
void write_sweep_csv(std::ostream& os, const SweepResult& result);
/// JSON manifest: config text, config hash and per-record results.
void write_manifest(std::ostream& os, const ExperimentConfig& config, const SweepResult& result);
/// Records of a manifest written by write_manifest; ConfigError when malformed.
[[nodiscard]] std::pair<std::string, SweepResult> read_manifest(std::istream& is);
[[nodiscard]] std::string fit_to_json(const ScalingFit& fit);
/// log T against log eps with the fitted line when it is a power fit.
void write_sweep_svg(std::ostream& os, const SweepResult& result, const ScalingFit* fit);

struct CurvePoint {
  double p = 0.0;
  double q = 0.0;
  double gamma = 0.0;
  /// Gamma - n / (1 + nu): >= 0 means blow-up is proven
  double margin = 0.0;
  bool predicted_blowup = false;
  std::size_t blowups = 0;
  std::size_t survived = 0;
  std::size_t contaminated = 0;
  /// all_blowup, some_survive or contaminated
  std::string summary;
};

struct CurveReport {
  double n = 0.0;
  double nu = 1.0;
  std::vector<CurvePoint> points;
};

/// Runs the system sweep of `config` for every (p, q) pair. n is the
/// lattice dimension, or the fitted volume-growth exponent for file graphs.
[[nodiscard]] CurveReport critical_curve_scan(const ExperimentConfig& config,
                                              std::span<const std::pair<double, double>> pairs);

/// CSV: p,q,gamma,margin,predicted_blowup,blowups,survived,contaminated,summary
void write_curve_csv(std::ostream& os, const CurveReport& report);
/// (p, q) scatter with blow-up markers over the curve Gamma(p,q) = n/(1+nu).
void write_curve_svg(std::ostream& os, const CurveReport& report);

}  // namespace gdw
