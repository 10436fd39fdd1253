#include "gdw/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <ostream>

#include "gdw/csv.hpp"
#include "gdw/errors.hpp"

namespace gdw {

namespace {

// Snapshots entering a time integral together with their trapezoid weights
// on the full and on the every-second-node grid.
struct TimeWindow {
  std::vector<std::size_t> index;
  std::vector<double> weight;
  std::vector<double> coarse;  // same length, zero off the coarse grid
  double t_cut = 0.0;
};

void trapezoid(const std::vector<double>& t, std::vector<double>& w) {
  w.assign(t.size(), 0.0);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double h = t[k + 1] - t[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
}

TimeWindow time_window(const Trajectory& traj, double time_support) {
  const auto& snaps = traj.snapshots;
  if (snaps.empty() || snaps.front().t != 0.0) throw CoverageError("trajectory has no initial snapshot");
  if (!traj.blew_up && traj.t_end < time_support) {
    throw CoverageError("trajectory ends at t = " + format_real(traj.t_end) +
                        " without blow-up, before the cutoff's time support " +
                        format_real(time_support));
  }
  TimeWindow win;
  win.t_cut = std::min(traj.t_end, time_support);
  std::vector<double> t;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    win.index.push_back(k);
    t.push_back(snaps[k].t);
    if (snaps[k].t >= win.t_cut) break;
  }
  if (t.back() < win.t_cut) {
    throw CoverageError("snapshots stop at t = " + format_real(t.back()) + " before t = " +
                        format_real(win.t_cut));
  }
  if (t.size() >= 2) {
    const double h0 = t[1] - t[0];
    for (std::size_t k = 1; k + 1 < t.size(); ++k) {
      if (t[k + 1] - t[k] > 1.5 * h0) {
        throw CoverageError("snapshot gap at t = " + format_real(t[k]) + " exceeds the cadence");
      }
    }
  }
  trapezoid(t, win.weight);

  std::vector<double> tc;
  std::vector<std::size_t> pos;
  for (std::size_t k = 0; k < t.size(); k += 2) {
    tc.push_back(t[k]);
    pos.push_back(k);
  }
  if (pos.back() != t.size() - 1) {
    tc.push_back(t.back());
    pos.push_back(t.size() - 1);
  }
  std::vector<double> wc;
  trapezoid(tc, wc);
  win.coarse.assign(t.size(), 0.0);
  for (std::size_t i = 0; i < pos.size(); ++i) win.coarse[pos[i]] = wc[i];
  return win;
}

const std::vector<double>& field(const Snapshot& s, Component c) {
  if (c == Component::u) return s.u;
  if (s.v.empty()) throw DomainError("trajectory carries no v component");
  return s.v;
}

double abs_pow(double x, double power) {
  const double a = std::abs(x);
  if (power == 2.0) return a * a;
  if (power == 3.0) return a * a * a;
  if (power == 1.0) return a;
  return std::pow(a, power);
}

// Vertices with d(x0, x) < R: the only ones where Phi_R can be nonzero.
std::vector<std::size_t> open_ball(const GraphMetric& metric, double R) {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < metric.dist.size(); ++x) {
    if (metric.dist[x] < R) out.push_back(x);
  }
  return out;
}

void require_ball(const GraphMetric& metric, double radius) {
  if (radius > metric.trusted_radius) {
    throw RangeError("ball of radius " + format_real(radius) +
                     " reaches past the trusted radius " + format_real(metric.trusted_radius));
  }
}

const GraphFunction& data_of(const ProblemSpec& spec, Component c, int which) {
  if (c == Component::u) return which == 0 ? spec.u0 : spec.u1;
  return which == 0 ? spec.v0 : spec.v1;
}

}  // namespace

QuadratureValue functional_PR(const WeightedGraph& graph, const GraphMetric& metric,
                              const Trajectory& trajectory, const CutoffParams& params,
                              double power, bool starred, Component component) {
  if (!(power > 0.0)) throw DomainError("power must be positive");
  const SpaceTimeCutoff cutoff(params, metric);
  const auto win = time_window(trajectory, cutoff.time_support());
  const auto ball = open_ball(metric, params.R);
  double fine = 0.0;
  double coarse = 0.0;
  for (std::size_t i = 0; i < win.index.size(); ++i) {
    const auto& snap = trajectory.snapshots[win.index[i]];
    const auto& w = field(snap, component);
    double sum = 0.0;
    for (auto x : ball) {
      const double psi = starred ? cutoff.star(snap.t, x) : cutoff.value(snap.t, x);
      if (psi != 0.0) sum += graph.mu(x) * psi * abs_pow(w[x], power);
    }
    fine += win.weight[i] * sum;
    coarse += win.coarse[i] * sum;
  }
  QuadratureValue out;
  out.value = fine;
  out.error_estimate = win.index.size() >= 3 ? std::abs(fine - coarse) / 3.0
                                             : std::numeric_limits<double>::infinity();
  return out;
}

double data_term(const WeightedGraph& graph, const GraphMetric& metric, const ProblemSpec& spec,
                 const CutoffParams& params, Component component) {
  const SpaceTimeCutoff cutoff(params, metric);
  const auto& a = data_of(spec, component, 0);
  const auto& b = data_of(spec, component, 1);
  double sum = 0.0;
  for (std::size_t x = 0; x < graph.size(); ++x) {
    const double w = a(x) + b(x);
    if (w != 0.0) sum += graph.mu(x) * w * cutoff.value(0.0, x);
  }
  return spec.epsilon * sum;
}

SupportMeasure support_measure(const WeightedGraph& graph, const GraphMetric& metric,
                               const CutoffParams& params, double t_cap) {
  if (!(params.R > 0.0)) throw DomainError("R must be positive");
  if (!(t_cap >= 0.0)) throw DomainError("time cap must be nonnegative");
  require_ball(metric, params.R);
  const double R4 = std::pow(params.R, 4.0);
  const double e = 1.0 / (params.alpha + 2.0);
  SupportMeasure out;
  double vol = 0.0;
  for (std::size_t x = 0; x < graph.size(); ++x) {
    const double d = metric.dist[x];
    if (d > params.R) continue;
    vol += graph.mu(x);
    const double d4 = std::pow(d, 4.0);
    if (d4 >= R4) continue;
    const double lo = std::min(std::pow(std::max(0.5 * R4 - d4, 0.0), e), t_cap);
    const double hi = std::min(std::pow(R4 - d4, e), t_cap);
    out.value += graph.mu(x) * (hi - lo);
  }
  out.comparison = std::pow(params.R, 4.0 * e) * vol;
  return out;
}

double functional_H(const WeightedGraph& graph, const GraphMetric& metric,
                    const Trajectory& trajectory, const CutoffParams& params, double power,
                    std::size_t quad_points, Component component) {
  if (quad_points < 2) throw DomainError("quadrature needs at least two nodes");
  const SpaceTimeCutoff cutoff(params, metric);
  const auto win = time_window(trajectory, cutoff.time_support());
  const auto ball = open_ball(metric, params.R);
  const double a = params.alpha;

  struct Sample {
    double A;
    double c;
  };
  std::vector<Sample> samples;
  double A_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < win.index.size(); ++i) {
    const auto& snap = trajectory.snapshots[win.index[i]];
    const auto& w = field(snap, component);
    const double ta = std::pow(snap.t, a + 2.0);
    for (auto x : ball) {
      const double A = ta + std::pow(metric.dist[x], 4.0);
      if (A > 0.0) A_min = std::min(A_min, A);
      const double c = win.weight[i] * graph.mu(x) * abs_pow(w[x], power);
      if (c > 0.0 && A > 0.0) samples.push_back({A, c});
    }
  }
  if (!std::isfinite(A_min)) throw InsufficientDataError("no space-time sample away from the origin");
  const double r_min = std::pow(A_min, 0.25);
  if (!(params.R > r_min)) {
    throw InsufficientDataError("R = " + format_real(params.R) + " is not above r_min = " +
                                format_real(r_min));
  }
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end(), [](const Sample& l, const Sample& r) { return l.A < r.A; });

  const double e = params.beta + 2.0;
  const double log_lo = std::log(r_min);
  const double step = (std::log(params.R) - log_lo) / static_cast<double>(quad_points - 1);
  double total = 0.0;
  double prev = 0.0;
  for (std::size_t j = 0; j < quad_points; ++j) {
    const double r = j + 1 == quad_points ? params.R : std::exp(log_lo + step * static_cast<double>(j));
    const double r4 = std::pow(r, 4.0);
    // supp phi* of A / r^4 is the window A in [r^4/2, r^4)
    auto first = std::lower_bound(samples.begin(), samples.end(), 0.5 * r4,
                                  [](const Sample& s, double v) { return s.A < v; });
    double h = 0.0;
    for (auto it = first; it != samples.end() && it->A < r4; ++it) {
      h += it->c * std::pow(phi(it->A / r4), e);
    }
    if (j > 0) total += 0.5 * step * (prev + h);
    prev = h;
  }
  return total;
}

WeakFormTerms weak_form_residual(const WeightedGraph& graph, const GraphMetric& metric,
                                 const ProblemSpec& spec, const Trajectory& trajectory,
                                 const CutoffParams& params, Component component) {
  if (component == Component::v && !spec.is_system()) {
    throw DomainError("the v component exists only for systems");
  }
  require_ball(metric, params.R + metric.jump_size);
  const SpaceTimeCutoff cutoff(params, metric);
  const double ts = cutoff.time_support();
  if (!(ts < trajectory.t_end)) {
    throw CoverageError("test function support " + format_real(ts) +
                        " does not end before the trajectory end " + format_real(trajectory.t_end));
  }
  auto win = time_window(trajectory, ts);
  const auto ball = open_ball(metric, params.R);
  const bool dd = spec.kind == ProblemKind::scalar_double_damping;
  const Component other = component == Component::u ? Component::v : Component::u;
  const Component source_of = spec.is_system() ? other : Component::u;
  const double power = spec.is_system() && component == Component::v ? spec.q : spec.p;

  WeakFormTerms out;
  for (std::size_t i = 0; i < win.index.size(); ++i) {
    const auto& snap = trajectory.snapshots[win.index[i]];
    const auto& w = field(snap, component);
    const auto& src = field(snap, source_of);
    const double wt = win.weight[i];
    for (auto x : ball) {
      const double psi = cutoff.value(snap.t, x);
      const auto [psi_t, psi_tt] = cutoff.time_derivatives(snap.t, x);
      if (psi == 0.0 && psi_t == 0.0 && psi_tt == 0.0) continue;
      const double m = wt * graph.mu(x);
      const double lap = graph.laplacian(w, x);
      out.u_psi_tt += m * w[x] * psi_tt;
      out.lap_u_psi += m * lap * psi;
      out.u_psi_t += m * w[x] * psi_t;
      if (dd) out.lap_u_psi_t += m * lap * psi_t;
      out.source += m * psi * spec.nonlinearity * abs_pow(src[x], power);
    }
  }

  const auto& f0 = data_of(spec, component, 0);
  const auto& f1 = data_of(spec, component, 1);
  std::vector<double> d0;
  if (dd) {
    d0.assign(graph.size(), 0.0);
    for (std::size_t x = 0; x < graph.size(); ++x) d0[x] = f0(x);
  }
  for (auto x : ball) {
    const double psi = cutoff.value(0.0, x);
    const double psi_t = cutoff.time_derivatives(0.0, x)[0];
    const double m = spec.epsilon * graph.mu(x);
    out.data += m * (f0(x) + f1(x)) * psi;
    out.data_psi_t += m * f0(x) * psi_t;
    if (dd) out.data_lap += m * graph.laplacian(d0, x) * psi;
  }

  out.residual = out.u_psi_tt - out.lap_u_psi - out.u_psi_t + out.lap_u_psi_t - out.source -
                 out.data + out.data_psi_t + out.data_lap;
  const double scale =
      std::max({std::abs(out.u_psi_tt), std::abs(out.lap_u_psi), std::abs(out.u_psi_t),
                std::abs(out.lap_u_psi_t), std::abs(out.source), std::abs(out.data),
                std::abs(out.data_psi_t), std::abs(out.data_lap)});
  out.relative = scale > 0.0 ? std::abs(out.residual) / scale : 0.0;
  return out;
}

Trajectory time_shifted(const Trajectory& trajectory, double shift) {
  if (!(shift >= 0.0)) throw DomainError("shift must be nonnegative");
  Trajectory out;
  for (const auto& s : trajectory.snapshots) {
    if (s.t < shift) continue;
    Snapshot c = s;
    c.t = s.t - shift;
    out.snapshots.push_back(std::move(c));
  }
  if (out.snapshots.empty()) throw CoverageError("shift beyond the last snapshot");
  out.snapshots.front().t = 0.0;
  out.t_end = trajectory.t_end - shift;
  out.blew_up = trajectory.blew_up;
  out.boundary_peak = trajectory.boundary_peak;
  out.boundary_ratio = trajectory.boundary_ratio;
  return out;
}

namespace {

struct ChainSpec {
  std::string name;
  Component left;
  double left_power;
  Component right;
  double right_power;
  Component data;
};

FunctionalRow evaluate_rung(const WeightedGraph& graph, const GraphMetric& metric,
                            const ProblemSpec& spec, const Trajectory& traj,
                            const CutoffParams& params, const ChainSpec& chain,
                            const ChainOptions& options) {
  FunctionalRow row;
  row.chain = chain.name;
  row.R = params.R;
  const auto left = functional_PR(graph, metric, traj, params, chain.left_power, false, chain.left);
  row.P_R = left.value;
  row.quadrature_error = left.value > 0.0 ? left.error_estimate / left.value : 0.0;
  row.P_star = functional_PR(graph, metric, traj, params, chain.right_power, true, chain.right).value;
  row.data_term = data_term(graph, metric, spec, params, chain.data);

  const SpaceTimeCutoff cutoff(params, metric);
  const double t_cut = std::min(traj.t_end, cutoff.time_support());
  row.support_measure = support_measure(graph, metric, params, t_cut).value;
  const double s = chain.right_power;
  row.rhs_bound = std::pow(params.R, -(1.0 + params.nu)) * std::pow(row.P_star, 1.0 / s) *
                  std::pow(row.support_measure, 1.0 - 1.0 / s);
  const double lhs = row.P_R + row.data_term;
  if (row.rhs_bound > 0.0) {
    row.implied_constant = lhs / row.rhs_bound;
  } else if (lhs > 0.0) {
    row.violation = true;
  }
  if (options.compute_H) {
    try {
      row.H_value = functional_H(graph, metric, traj, params, chain.left_power, options.quad_points,
                                 chain.left);
    } catch (const InsufficientDataError&) {
    }
  }
  if (options.compute_weak_residual) {
    try {
      row.weak_residual = weak_form_residual(graph, metric, spec, traj, params, chain.data).relative;
    } catch (const CoverageError&) {
      // blow-up before the test function's support ends: no admissible Psi
    }
  }
  return row;
}

}  // namespace

ChainReport check_estimate_chain(const WeightedGraph& graph, const GraphMetric& metric,
                                 const ProblemSpec& spec, const Trajectory& trajectory,
                                 const CutoffParams& params, std::span<const double> R_ladder,
                                 const ChainOptions& options) {
  spec.validate();
  std::vector<ChainSpec> chains;
  if (spec.is_system()) {
    chains.push_back({"I", Component::v, spec.p, Component::u, spec.q, Component::u});
    chains.push_back({"J", Component::u, spec.q, Component::v, spec.p, Component::v});
  } else {
    chains.push_back({"P", Component::u, spec.p, Component::u, spec.p, Component::u});
  }

  std::vector<std::future<FunctionalRow>> jobs;
  for (const auto& chain : chains) {
    for (double R : R_ladder) {
      CutoffParams p = params;
      p.R = R;
      jobs.push_back(std::async(std::launch::async, [&, p, chain] {
        return evaluate_rung(graph, metric, spec, trajectory, p, chain, options);
      }));
    }
  }
  ChainReport report;
  for (auto& j : jobs) report.rows.push_back(j.get());

  for (const auto& chain : chains) {
    std::vector<double> constants;
    for (const auto& row : report.rows) {
      if (row.chain == chain.name && row.implied_constant) constants.push_back(*row.implied_constant);
    }
    if (constants.size() >= 2 && monotone_growth(constants)) report.growth_flag = true;
  }
  for (const auto& row : report.rows) report.violation = report.violation || row.violation;
  return report;
}

void write_functional_csv(std::ostream& os, const ChainReport& report) {
  CsvWriter csv(os);
  csv.row({"R", "P_R", "P*_R", "data_term", "support_measure", "rhs_bound", "implied_constant",
           "H_value", "weak_residual", "chain"});
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : report.rows) {
    csv.row({format_real(r.R), format_real(r.P_R), format_real(r.P_star), format_real(r.data_term),
             format_real(r.support_measure), format_real(r.rhs_bound), opt(r.implied_constant),
             opt(r.H_value), opt(r.weak_residual), r.chain});
  }
}

}  // namespace gdw
