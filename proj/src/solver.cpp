#include "gdw/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

#include "gdw/csv.hpp"
#include "gdw/errors.hpp"

namespace gdw {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::scalar: return "scalar";
    case ProblemKind::system: return "system";
    case ProblemKind::scalar_double_damping: return "double_damping";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(std::string_view text) {
  if (text == "scalar") return ProblemKind::scalar;
  if (text == "system") return ProblemKind::system;
  if (text == "double_damping") return ProblemKind::scalar_double_damping;
  throw ConfigError("unknown problem kind '" + std::string(text) +
                    "' (expected scalar, system or double_damping)");
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::blowup: return "blowup";
    case Verdict::survived_horizon: return "survived_horizon";
    case Verdict::truncation_contaminated: return "truncation_contaminated";
  }
  return "unknown";
}

double ProblemSpec::ladder_exponent() const {
  if (!is_system()) return (p - 1.0) / 2.0;
  // The faster-growing component sets the sup norm.
  const double big_gamma = (std::max(p, q) + 1.0) / (p * q - 1.0);
  return 1.0 / (2.0 * big_gamma);
}

void ProblemSpec::validate() const {
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("p must be a finite number > 1");
  if (is_system() && (!(q > 1.0) || !std::isfinite(q))) {
    throw DomainError("q must be a finite number > 1");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw DomainError("epsilon must be finite and nonnegative");
  }
  for (const auto* f : {&u0, &u1, &v0, &v1}) {
    if (!f->finitely_supported()) throw DomainError("initial data must be finitely supported");
    for (const auto& [v, value] : f->values) {
      if (!std::isfinite(value)) throw DomainError("initial data must be finite");
    }
  }
}

void SolverControls::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw DomainError("tolerances must be positive");
  if (!(dt_min > 0.0) || !(dt_initial > 0.0) || !(dt_max >= dt_min)) {
    throw DomainError("step bounds must satisfy 0 < dt_min <= dt_max, dt_initial > 0");
  }
  if (thresholds.empty()) throw DomainError("at least one blow-up threshold is required");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1]))) {
      throw DomainError("blow-up thresholds must be positive and increasing");
    }
  }
  if (!(t_max > 0.0)) throw DomainError("t_max must be positive");
  if (!(boundary_tolerance > 0.0)) throw DomainError("boundary tolerance must be positive");
  if (!(growth_cap > 0.0)) throw DomainError("growth cap must be positive");
  if (!(snapshot_interval >= 0.0)) throw DomainError("snapshot interval must be nonnegative");
}

namespace {

inline double power(double x, double p) {
  const double a = std::abs(x);
  if (a == 0.0) return 0.0;
  if (p == 2.0) return a * a;
  if (p == 3.0) return a * a * a;
  return std::pow(a, p);
}

thread_local std::vector<double> scratch;

}  // namespace

void rhs(const WeightedGraph& graph, const ProblemSpec& spec, std::span<const double> state,
         std::span<double> derivative) {
  const std::size_t n = graph.size();
  const std::size_t fields = spec.fields();
  if (state.size() != fields * n || derivative.size() != fields * n) {
    throw DomainError("state size does not match the graph");
  }
  const double s = spec.nonlinearity;
  const auto u = state.subspan(0, n);
  const auto w = state.subspan(n, n);
  auto du = derivative.subspan(0, n);
  auto dw = derivative.subspan(n, n);
  std::copy(w.begin(), w.end(), du.begin());

  if (spec.kind == ProblemKind::scalar_double_damping) {
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = u[i] + w[i];
    graph.dirichlet_laplacian(scratch, dw);
  } else {
    graph.dirichlet_laplacian(u, dw);
  }

  if (!spec.is_system()) {
    for (std::size_t i = 0; i < n; ++i) dw[i] += s * power(u[i], spec.p) - w[i];
  } else {
    const auto v = state.subspan(2 * n, n);
    const auto z = state.subspan(3 * n, n);
    auto dv = derivative.subspan(2 * n, n);
    auto dz = derivative.subspan(3 * n, n);
    std::copy(z.begin(), z.end(), dv.begin());
    graph.dirichlet_laplacian(v, dz);
    for (std::size_t i = 0; i < n; ++i) {
      dw[i] += s * power(v[i], spec.p) - w[i];
      dz[i] += s * power(u[i], spec.q) - z[i];
    }
  }
  for (double d : derivative) {
    if (!std::isfinite(d)) throw NumericError("non-finite value in the evolution");
  }
}

std::vector<double> initial_state(const WeightedGraph& graph, const ProblemSpec& spec) {
  const std::size_t n = graph.size();
  std::vector<double> y(spec.fields() * n, 0.0);
  auto place = [&](const GraphFunction& f, std::size_t field) {
    for (const auto& [v, value] : f.values) {
      if (v >= n) throw DomainError("initial data refers to a vertex outside the graph");
      y[field * n + v] = spec.epsilon * value;
    }
  };
  place(spec.u0, 0);
  place(spec.u1, 1);
  if (spec.is_system()) {
    place(spec.v0, 2);
    place(spec.v1, 3);
  }
  return y;
}

std::vector<double> distance_to_boundary(const WeightedGraph& graph) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(graph.size(), inf);
  std::queue<std::size_t> queue;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (graph.is_boundary(v)) {
      dist[v] = 0.0;
      queue.push(v);
    }
  }
  while (!queue.empty()) {
    const auto x = queue.front();
    queue.pop();
    for (const auto& nb : graph.neighbors(x)) {
      if (dist[nb.index] == inf) {
        dist[nb.index] = dist[x] + 1.0;
        queue.push(nb.index);
      }
    }
  }
  return dist;
}

GraphFunction bump(const WeightedGraph& graph, const GraphMetric& metric, double radius,
                   double mass) {
  if (!(radius >= 0.0)) throw DomainError("bump radius must be nonnegative");
  if (!(mass > 0.0)) throw DomainError("bump mass must be positive");
  double volume = 0.0;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (metric.dist[v] <= radius) volume += graph.mu(v);
  }
  const double c = mass / (2.0 * volume);
  GraphFunction f;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (metric.dist[v] <= radius) f.values[v] = c;
  }
  return f;
}

std::string settings_hash(const ProblemSpec& spec, const SolverControls& controls,
                          std::size_t graph_size) {
  std::ostringstream os;
  os << to_string(spec.kind) << '|' << format_real(spec.p) << '|' << format_real(spec.q) << '|'
     << format_real(spec.epsilon) << '|' << format_real(spec.nonlinearity) << '|' << graph_size;
  for (const auto* f : {&spec.u0, &spec.u1, &spec.v0, &spec.v1}) {
    os << "|f";
    for (const auto& [v, value] : f->values) os << ';' << v << ':' << format_real(value);
  }
  os << '|' << format_real(controls.rtol) << '|' << format_real(controls.atol) << '|'
     << format_real(controls.dt_initial) << '|' << format_real(controls.dt_min) << '|'
     << format_real(controls.dt_max) << '|' << format_real(controls.t_max) << '|'
     << format_real(controls.boundary_tolerance) << '|' << format_real(controls.growth_cap);
  for (double m : controls.thresholds) os << ";M" << format_real(m);
  return fnv1a_hex(os.str());
}

namespace {

// Dormand-Prince 5(4) tableau with the order-4 continuous extension.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

class Stepper {
 public:
  Stepper(const WeightedGraph& graph, const ProblemSpec& spec, std::vector<double> y0)
      : graph_(graph), spec_(spec), y(std::move(y0)) {
    const std::size_t m = y.size();
    for (auto* v : {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &ynew, &tmp, &r1, &r2, &r3, &r4, &r5}) {
      v->assign(m, 0.0);
    }
    rhs(graph_, spec_, y, k1);
  }

  /// Attempts a step of size h; returns the scaled error norm (infinite
  /// when a stage produced non-finite values).
  double attempt(double h, double rtol, double atol) {
    const std::size_t m = y.size();
    try {
      for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * a21 * k1[i];
      rhs(graph_, spec_, tmp, k2);
      for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
      rhs(graph_, spec_, tmp, k3);
      for (std::size_t i = 0; i < m; ++i) {
        tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      }
      rhs(graph_, spec_, tmp, k4);
      for (std::size_t i = 0; i < m; ++i) {
        tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      }
      rhs(graph_, spec_, tmp, k5);
      for (std::size_t i = 0; i < m; ++i) {
        tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      }
      rhs(graph_, spec_, tmp, k6);
      for (std::size_t i = 0; i < m; ++i) {
        ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      }
      rhs(graph_, spec_, ynew, k7);
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
    double err = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e =
          h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err = std::max(err, std::abs(e) / scale);
    }
    return std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
  }

  /// Prepares the dense output of the last attempted step.
  void prepare_dense(double h) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      r1[i] = y[i];
      const double dy = ynew[i] - y[i];
      r2[i] = dy;
      r3[i] = h * k1[i] - dy;
      r4[i] = dy - h * k7[i] - r3[i];
      r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }
  }

  [[nodiscard]] double dense(std::size_t i, double theta) const {
    const double t1 = 1.0 - theta;
    return r1[i] + theta * (r2[i] + t1 * (r3[i] + theta * (r4[i] + t1 * r5[i])));
  }

  void accept() {
    std::swap(y, ynew);
    std::swap(k1, k7);
  }

  const WeightedGraph& graph_;
  const ProblemSpec& spec_;
  std::vector<double> y;
  std::vector<double> k1, k2, k3, k4, k5, k6, k7, ynew, tmp;
  std::vector<double> r1, r2, r3, r4, r5;
};

double sup_of(std::span<const double> y, std::size_t n, bool system) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s = std::max(s, std::abs(y[i]));
  if (system) {
    for (std::size_t i = 2 * n; i < 3 * n; ++i) s = std::max(s, std::abs(y[i]));
  }
  return s;
}

double mass_of(const WeightedGraph& graph, std::span<const double> y) {
  double m = 0.0;
  for (std::size_t i = 0; i < graph.size(); ++i) m += graph.mu(i) * y[i];
  return m;
}

Snapshot make_snapshot(double t, std::span<const double> y, std::size_t n, bool system) {
  Snapshot s;
  s.t = t;
  s.u.assign(y.begin(), y.begin() + n);
  s.ut.assign(y.begin() + n, y.begin() + 2 * n);
  if (system) {
    s.v.assign(y.begin() + 2 * n, y.begin() + 3 * n);
    s.vt.assign(y.begin() + 3 * n, y.begin() + 4 * n);
  }
  return s;
}

}  // namespace

std::pair<Trajectory, LifespanRecord> integrate(const WeightedGraph& graph,
                                                const ProblemSpec& spec,
                                                const SolverControls& controls) {
  spec.validate();
  controls.validate();
  const std::size_t n = graph.size();
  const bool system = spec.is_system();

  std::vector<std::size_t> boundary;
  for (std::size_t v = 0; v < n; ++v) {
    if (graph.is_boundary(v)) boundary.push_back(v);
  }
  if (!boundary.empty()) {
    const auto to_boundary = distance_to_boundary(graph);
    for (const auto* f : {&spec.u0, &spec.u1, &spec.v0, &spec.v1}) {
      for (const auto& [v, value] : f->values) {
        if (v < n && value != 0.0 && to_boundary[v] < 2.0) {
          throw DomainError("initial data must stay at least 2 hops away from the truncation boundary");
        }
      }
    }
  }

  Trajectory traj;
  LifespanRecord rec;
  rec.epsilon = spec.epsilon;
  rec.settings_hash = settings_hash(spec, controls, n);

  Stepper st(graph, spec, initial_state(graph, spec));
  const double gamma = spec.ladder_exponent();
  const auto& M = controls.thresholds;

  double t = 0.0;
  double S = sup_of(st.y, n, system);
  traj.snapshots.push_back(make_snapshot(0.0, st.y, n, system));
  traj.norm_history.push_back({0.0, S, mass_of(graph, st.y)});
  std::size_t rung = 0;
  while (rung < M.size() && S >= M[rung]) rec.threshold_ladder.push_back({M[rung++], 0.0});

  const bool snapshots_on = controls.snapshot_interval > 0.0;
  std::size_t snapshot_index = 1;
  auto next_snapshot = [&] {
    return snapshots_on ? static_cast<double>(snapshot_index) * controls.snapshot_interval
                        : std::numeric_limits<double>::infinity();
  };

  // Step-size control (Hairer's DOPRI5 settings).
  constexpr double safe = 0.9, beta = 0.04, fac_lo = 0.2, fac_hi = 10.0;
  const double expo = 0.2 - beta * 0.75;
  double facold = 1e-4;
  bool last_rejected = false;
  double h = controls.dt_initial;
  std::size_t steps = 0;
  bool finished = rung >= M.size();
  if (finished) rec.verdict = Verdict::blowup;

  while (!finished) {
    if (t >= controls.t_max) {
      rec.verdict = Verdict::survived_horizon;
      break;
    }
    h = std::min({h, controls.dt_max, controls.t_max - t});
    if (S > 1.0) h = std::min(h, controls.growth_cap / std::pow(S, gamma));
    if (h < controls.dt_min) {
      rec.verdict = Verdict::blowup;
      rec.low_confidence = true;
      rec.note = "step size collapsed below dt_min before the last threshold";
      break;
    }
    if (steps >= controls.max_steps) {
      throw NumericError("step budget of " + std::to_string(controls.max_steps) + " exhausted at t = " +
                         format_real(t));
    }

    const double err = st.attempt(h, controls.rtol, controls.atol);
    if (!(err <= 1.0)) {
      ++traj.rejected_steps;
      last_rejected = true;
      const double shrink = std::isfinite(err) ? std::min(1.0 / fac_lo, std::pow(err, expo) / safe)
                                               : 1.0 / fac_lo;
      h /= shrink;
      continue;
    }

    st.prepare_dense(h);
    const double S_new = sup_of(st.ynew, n, system);

    while (rung < M.size() && S_new >= M[rung]) {
      double lo = 0.0;
      double hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s = std::max(s, std::abs(st.dense(i, mid)));
        if (system) {
          for (std::size_t i = 2 * n; i < 3 * n; ++i) s = std::max(s, std::abs(st.dense(i, mid)));
        }
        (s >= M[rung] ? hi : lo) = mid;
      }
      rec.threshold_ladder.push_back({M[rung], t + hi * h});
      ++rung;
    }

    while (next_snapshot() <= t + h && next_snapshot() <= controls.snapshot_until) {
      const double ts = next_snapshot();
      const double theta = (ts - t) / h;
      std::vector<double> ys(st.y.size());
      for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = st.dense(i, theta);
      traj.snapshots.push_back(make_snapshot(ts, ys, n, system));
      ++snapshot_index;
    }

    double bmax = 0.0;
    for (auto b : boundary) {
      bmax = std::max(bmax, std::abs(st.ynew[b]));
      if (system) bmax = std::max(bmax, std::abs(st.ynew[2 * n + b]));
    }
    traj.boundary_peak = std::max(traj.boundary_peak, bmax);
    if (S_new > 0.0) traj.boundary_ratio = std::max(traj.boundary_ratio, bmax / S_new);

    st.accept();
    t += h;
    S = S_new;
    ++steps;
    traj.dt_history.push_back(h);
    traj.norm_history.push_back({t, S, mass_of(graph, st.y)});

    if (rung >= M.size()) {
      rec.verdict = Verdict::blowup;
      break;
    }
    if (traj.boundary_ratio > controls.boundary_tolerance) {
      rec.verdict = Verdict::truncation_contaminated;
      rec.note = "boundary sup reached " + format_real(traj.boundary_ratio) +
                 " of the global sup at t = " + format_real(t);
      break;
    }

    const double fac11 = std::pow(err, expo);
    double fac = fac11 / std::pow(facold, beta);
    fac = std::max(1.0 / fac_hi, std::min(1.0 / fac_lo, fac / safe));
    double h_new = h / fac;
    if (last_rejected) h_new = std::min(h_new, h);
    facold = std::max(err, 1e-4);
    last_rejected = false;
    h = h_new;
  }

  if (traj.snapshots.back().t != t) traj.snapshots.push_back(make_snapshot(t, st.y, n, system));
  traj.t_end = t;
  traj.blew_up = rec.verdict == Verdict::blowup;
  rec.t_end = t;
  rec.steps = steps;
  return {std::move(traj), std::move(rec)};
}

void extrapolate_ladder(LifespanRecord& record, double gamma) {
  const auto& L = record.threshold_ladder;
  if (record.verdict != Verdict::blowup) {
    record.T_est.reset();
    return;
  }
  if (L.empty()) {
    record.T_est = record.t_end;
    record.low_confidence = true;
    return;
  }
  bool monotone = true;
  for (std::size_t i = 1; i < L.size(); ++i) monotone = monotone && L[i].time >= L[i - 1].time;
  bool shrinking = true;
  for (std::size_t i = 2; i < L.size(); ++i) {
    shrinking = shrinking &&
                std::abs(L[i].time - L[i - 1].time) <= std::abs(L[i - 1].time - L[i - 2].time);
  }
  record.ladder_converged = monotone && shrinking && L.size() >= 2;

  if (L.size() >= 3) {
    const auto k = L.size() - 1;
    const double d_last = L[k].time - L[k - 1].time;
    const double d_prev = L[k - 1].time - L[k - 2].time;
    if (d_last > 0.0 && d_prev > 0.0) {
      record.fitted_ladder_exponent =
          std::log(d_prev / d_last) / std::log(L[k].threshold / L[k - 1].threshold);
    }
  }

  if (monotone && L.size() >= 2) {
    const auto k = L.size() - 1;
    const double r = std::pow(L[k].threshold / L[k - 1].threshold, gamma);
    record.T_est = L[k].time + (L[k].time - L[k - 1].time) / (r - 1.0);
  } else {
    record.T_est = L.back().time;
    record.low_confidence = true;
  }
  if (!record.ladder_converged) record.low_confidence = true;
}

LifespanRecord estimate_lifespan(const WeightedGraph& graph, const ProblemSpec& spec,
                                 const SolverControls& controls) {
  auto controls_lean = controls;
  controls_lean.snapshot_interval = 0.0;
  auto [traj, rec] = integrate(graph, spec, controls_lean);
  extrapolate_ladder(rec, spec.ladder_exponent());
  return rec;
}

void write_trajectory_csv(std::ostream& os, const WeightedGraph& graph,
                          const Trajectory& trajectory, bool system) {
  CsvWriter csv(os);
  if (system) {
    csv.row({"t", "vertex", "u", "u_t", "v", "v_t"});
  } else {
    csv.row({"t", "vertex", "u", "u_t"});
  }
  for (const auto& s : trajectory.snapshots) {
    for (std::size_t x = 0; x < graph.size(); ++x) {
      if (system) {
        csv.row({format_real(s.t), graph.id(x), format_real(s.u[x]), format_real(s.ut[x]),
                 format_real(s.v[x]), format_real(s.vt[x])});
      } else {
        csv.row({format_real(s.t), graph.id(x), format_real(s.u[x]), format_real(s.ut[x])});
      }
    }
  }
}

}  // namespace gdw
