#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "gdw/errors.hpp"
#include "gdw/graph.hpp"
#include "gdw/metric.hpp"
#include "gdw/solver.hpp"
#include "ode_oracle.hpp"

using namespace gdw;

namespace {

WeightedGraph isolated_vertex() {
  GraphBuilder b;
  b.add_vertex("x", 1.0);
  return std::move(b).build();
}

std::size_t origin(const WeightedGraph& g) {
  return g.index_of(lattice_id(std::vector<int>(g.lattice_dim(), 0)));
}

ProblemSpec bump_problem(const WeightedGraph& g, double p, double eps) {
  const auto m = compute_metric(g, origin(g));
  ProblemSpec spec;
  spec.p = p;
  spec.epsilon = eps;
  spec.u0 = bump(g, m, 2.0, 1.0);
  spec.u1 = spec.u0;
  return spec;
}

}  // namespace

TEST_CASE("rhs examples") {
  const auto g = isolated_vertex();
  ProblemSpec spec;
  spec.p = 2.0;
  std::vector<double> y{2.0, 0.0};
  std::vector<double> dy(2);
  rhs(g, spec, y, dy);
  CHECK(dy[0] == 0.0);
  CHECK(dy[1] == 4.0);

  y = {0.0, 0.0};
  rhs(g, spec, y, dy);
  CHECK(dy[0] == 0.0);
  CHECK(dy[1] == 0.0);

  // constant u near an interior lattice vertex: Laplacian vanishes there
  const auto line = build_lattice(1, 5);
  std::vector<double> state(2 * line.size(), 0.0);
  for (std::size_t v = 0; v < line.size(); ++v) state[v] = -1.5;
  std::vector<double> d(state.size());
  spec.p = 3.0;
  rhs(line, spec, state, d);
  CHECK(d[line.size() + origin(line)] == doctest::Approx(3.375));

  // fractional powers use |u|^p, never a signed power
  spec.p = 1.5;
  y = {-4.0, 1.0};
  rhs(g, spec, y, dy);
  CHECK(dy[1] == doctest::Approx(8.0 - 1.0));

  y = {std::nan(""), 0.0};
  CHECK_THROWS_AS(rhs(g, spec, y, dy), NumericError);
}

TEST_CASE("system and double damping right-hand sides") {
  const auto g = isolated_vertex();
  ProblemSpec sys;
  sys.kind = ProblemKind::system;
  sys.p = 2.0;
  sys.q = 3.0;
  std::vector<double> y{2.0, 1.0, -3.0, 0.5};
  std::vector<double> dy(4);
  rhs(g, sys, y, dy);
  CHECK(dy[0] == 1.0);
  CHECK(dy[1] == doctest::Approx(9.0 - 1.0));
  CHECK(dy[2] == 0.5);
  CHECK(dy[3] == doctest::Approx(8.0 - 0.5));

  const auto line = build_lattice(1, 3);
  ProblemSpec dd;
  dd.kind = ProblemKind::scalar_double_damping;
  dd.p = 2.0;
  const std::size_t n = line.size();
  std::vector<double> s(2 * n, 0.0);
  const auto x0 = origin(line);
  s[n + x0] = 1.0;  // w = delta at the origin
  std::vector<double> ds(2 * n);
  rhs(line, dd, s, ds);
  // Delta w at the origin = -1, so w' = -w + Delta w = -2
  CHECK(ds[n + x0] == doctest::Approx(-2.0));
  CHECK(ds[n + line.index_of("1")] == doctest::Approx(0.5));
}

TEST_CASE("zero data stays exactly zero") {
  const auto g = build_lattice(1, 30);
  auto spec = bump_problem(g, 2.0, 0.0);
  SolverControls c;
  c.t_max = 50.0;
  c.snapshot_interval = 5.0;
  const auto [traj, rec] = integrate(g, spec, c);
  CHECK(rec.verdict == Verdict::survived_horizon);
  for (const auto& s : traj.snapshots) {
    for (double v : s.u) CHECK(v == 0.0);
    for (double v : s.ut) CHECK(v == 0.0);
  }
  const auto est = estimate_lifespan(g, spec, c);
  CHECK_FALSE(est.T_est.has_value());
}

TEST_CASE("single vertex blow-up matches the ODE oracle") {
  const auto g = isolated_vertex();
  ProblemSpec spec;
  spec.p = 2.0;
  spec.u0.values[0] = 2.0;
  spec.epsilon = 1.0;
  SolverControls c;
  c.rtol = 1e-10;
  c.atol = 1e-12;
  const oracle::OdeOracle ref{2.0, 2.0, 0.0};
  const auto times = ref.crossing_times({1e4, 1e5, 1e6, 1e7, 1e8});
  const double T_inf = times.back();

  const auto [traj, rec] = integrate(g, spec, c);
  REQUIRE(rec.verdict == Verdict::blowup);
  REQUIRE(rec.threshold_ladder.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(rec.threshold_ladder[i].time == doctest::Approx(times[i]).epsilon(1e-4));
  }
  const auto est = estimate_lifespan(g, spec, c);
  REQUIRE(est.T_est.has_value());
  CHECK(*est.T_est == doctest::Approx(T_inf).epsilon(1e-3));
  CHECK(est.ladder_converged);
  CHECK_FALSE(est.low_confidence);
  // the fitted decay exponent of T_inf - T(M) is close to (p-1)/2
  REQUIRE(est.fitted_ladder_exponent.has_value());
  CHECK(*est.fitted_ladder_exponent == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("linear damped waves conserve sum mu (u_t + u)") {
  const auto g = build_lattice(1, 80);
  auto spec = bump_problem(g, 2.0, 1.0);
  spec.nonlinearity = 0.0;
  SolverControls c;
  c.t_max = 30.0;
  c.snapshot_interval = 1.0;
  const auto [traj, rec] = integrate(g, spec, c);
  CHECK(rec.verdict == Verdict::survived_horizon);
  auto invariant = [&](const Snapshot& s) {
    double total = 0.0;
    for (std::size_t v = 0; v < g.size(); ++v) total += g.mu(v) * (s.ut[v] + s.u[v]);
    return total;
  };
  const double I0 = invariant(traj.snapshots.front());
  CHECK(I0 == doctest::Approx(1.0));
  for (const auto& s : traj.snapshots) CHECK(std::abs(invariant(s) - I0) < 1e-8 * std::abs(I0));
}

TEST_CASE("lattice blow-up with a converging ladder") {
  const auto g = build_lattice(1, 120);
  const auto spec = bump_problem(g, 2.0, 0.5);
  SolverControls c;
  const auto rec = estimate_lifespan(g, spec, c);
  REQUIRE(rec.verdict == Verdict::blowup);
  CHECK(rec.ladder_converged);
  for (std::size_t i = 1; i < rec.threshold_ladder.size(); ++i) {
    CHECK(rec.threshold_ladder[i].time >= rec.threshold_ladder[i - 1].time);
  }
  // raising the top threshold from 1e6 to 1e8 barely moves the estimate
  auto short_ladder = c;
  short_ladder.thresholds = {1e4, 1e5, 1e6};
  const auto rec6 = estimate_lifespan(g, spec, short_ladder);
  REQUIRE(rec6.T_est.has_value());
  CHECK(std::abs(*rec.T_est - *rec6.T_est) < 0.005 * *rec.T_est);
  CHECK(rec.settings_hash != rec6.settings_hash);
  CHECK(rec.settings_hash == estimate_lifespan(g, spec, c).settings_hash);
}

TEST_CASE("reflection symmetry is preserved") {
  for (int n : {1, 2}) {
    const auto g = build_lattice(n, n == 1 ? 60 : 24);
    const auto spec = bump_problem(g, 2.0, 0.3);
    SolverControls c;
    c.t_max = 8.0;
    c.snapshot_interval = 1.0;
    const auto [traj, rec] = integrate(g, spec, c);
    for (const auto& s : traj.snapshots) {
      for (std::size_t v = 0; v < g.size(); ++v) {
        std::vector<int> mirror(g.coords(v).begin(), g.coords(v).end());
        mirror[0] = -mirror[0];
        const auto w = g.index_of(lattice_id(mirror));
        CHECK(std::abs(s.u[v] - s.u[w]) <= 1e-10 * (1.0 + std::abs(s.u[v])));
      }
    }
  }
}

TEST_CASE("halving tolerances moves the mid-run state by little") {
  const auto g = build_lattice(1, 60);
  const auto spec = bump_problem(g, 2.0, 0.5);
  SolverControls c;
  c.rtol = 1e-8;
  c.t_max = 10.0;
  c.snapshot_interval = 5.0;
  auto fine = c;
  fine.rtol = 0.5e-8;
  fine.atol = 0.5 * c.atol;
  const auto a = integrate(g, spec, c).first;
  const auto b = integrate(g, spec, fine).first;
  const auto& ua = a.snapshots[1].u;
  const auto& ub = b.snapshots[1].u;
  REQUIRE(a.snapshots[1].t == 5.0);
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t v = 0; v < ua.size(); ++v) {
    diff = std::max(diff, std::abs(ua[v] - ub[v]));
    scale = std::max(scale, std::abs(ub[v]));
  }
  CHECK(diff < 4.0 * fine.rtol * scale);
}

TEST_CASE("truncation contamination is detected") {
  const auto g = build_lattice(1, 8);
  const auto spec = bump_problem(g, 2.0, 0.05);
  SolverControls c;
  c.t_max = 500.0;
  const auto [traj, rec] = integrate(g, spec, c);
  CHECK(rec.verdict == Verdict::truncation_contaminated);
  CHECK(traj.boundary_ratio > c.boundary_tolerance);
  CHECK_FALSE(rec.note.empty());
}

TEST_CASE("data must keep away from the boundary") {
  const auto g = build_lattice(1, 10);
  ProblemSpec spec;
  spec.u0.values[g.index_of("9")] = 1.0;
  CHECK_THROWS_AS((void)integrate(g, spec, SolverControls{}), DomainError);
}

TEST_CASE("control validation") {
  SolverControls c;
  c.thresholds = {1e5, 1e4};
  CHECK_THROWS_AS(c.validate(), DomainError);
  ProblemSpec s;
  s.p = 1.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  CHECK_THROWS_AS((void)parse_problem_kind("wave"), ConfigError);
  CHECK(parse_problem_kind("double_damping") == ProblemKind::scalar_double_damping);
}

TEST_CASE("system blows up and the ladder exponent follows the faster component") {
  const auto g = build_lattice(1, 200);
  const auto m = compute_metric(g, origin(g));
  ProblemSpec spec;
  spec.kind = ProblemKind::system;
  spec.p = 2.0;
  spec.q = 3.0;
  spec.epsilon = 2.0;
  spec.u0 = bump(g, m, 2.0, 1.0);
  spec.u1 = spec.u0;
  spec.v0 = spec.u0;
  spec.v1 = spec.u0;
  // Gamma(2,3) = 4/5, so T_inf - T(M) ~ M^{-5/8}
  CHECK(spec.ladder_exponent() == doctest::Approx(5.0 / 8.0));
  const auto rec = estimate_lifespan(g, spec, SolverControls{});
  CHECK(rec.verdict == Verdict::blowup);
  CHECK(rec.ladder_converged);
}

TEST_CASE("trajectory csv") {
  const auto g = isolated_vertex();
  ProblemSpec spec;
  spec.u0.values[0] = 0.0;
  SolverControls c;
  c.t_max = 1.0;
  c.snapshot_interval = 0.5;
  const auto traj = integrate(g, spec, c).first;
  std::ostringstream os;
  write_trajectory_csv(os, g, traj, false);
  CHECK(os.str() == "t,vertex,u,u_t\r\n0,x,0,0\r\n0.5,x,0,0\r\n1,x,0,0\r\n");
}
