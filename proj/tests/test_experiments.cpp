#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gdw/errors.hpp"
#include "gdw/experiments.hpp"

using namespace gdw;

namespace {

LifespanRecord blowup_at(double eps, double T) {
  LifespanRecord r;
  r.epsilon = eps;
  r.T_est = T;
  r.verdict = Verdict::blowup;
  r.t_end = T;
  return r;
}

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.graph.radius = 60;
  c.sweep.eps_min = 0.5;
  c.sweep.eps_max = 1.0;
  c.sweep.eps_count = 5;
  c.sweep.threads = 1;
  return c;
}

std::string csv_of(const SweepResult& r) {
  std::ostringstream os;
  write_sweep_csv(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("Gamma and the Fujita exponent") {
  CHECK(gamma_pq(2, 3) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(gamma_pq(3, 2) == gamma_pq(2, 3));
  for (double p : {1.5, 2.0, 3.0, 5.0}) {
    CHECK(gamma_pq(p, p) == doctest::Approx(1.0 / (p - 1.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS((void)gamma_pq(0.5, 2.0), DomainError);
  CHECK(fujita(1) == 3.0);
  CHECK(fujita(2) == 2.0);
  CHECK(fujita(4) == 1.5);
  CHECK_THROWS_AS((void)fujita(0), DomainError);
  for (int n = 1; n < 50; ++n) {
    CHECK(fujita(n + 1) < fujita(n));
    CHECK(fujita(n + 1) > 1.0);
  }
}

TEST_CASE("predicted lifespan laws") {
  SUBCASE("scalar subcritical: slope -(p-1) D / (D - n(p-1))") {
    const auto m = predicted_lifespan_model(ProblemKind::scalar, 1, 1, 2);
    CHECK(m.model == FitModel::power);
    REQUIRE(m.predicted_slope);
    CHECK(*m.predicted_slope == doctest::Approx(-2.0));
    const auto h = predicted_lifespan_model(ProblemKind::scalar, 1, 0, 1.5);  // D = 1
    CHECK(*h.predicted_slope == doctest::Approx(-0.5 / 0.5));
  }
  SUBCASE("scalar critical is exponential with kappa = p - 1") {
    const auto m = predicted_lifespan_model(ProblemKind::scalar, 1, 1, 3);
    CHECK(m.model == FitModel::exponential);
    CHECK(m.critical);
    CHECK(m.kappa == doctest::Approx(2.0));
    CHECK(predicted_lifespan_model(ProblemKind::scalar, 2, 1, 2).kappa == doctest::Approx(1.0));
  }
  SUBCASE("double damping follows the scalar law") {
    const auto a = predicted_lifespan_model(ProblemKind::scalar, 1, 1, 2.5);
    const auto b = predicted_lifespan_model(ProblemKind::scalar_double_damping, 1, 1, 2.5);
    CHECK(*a.predicted_slope == *b.predicted_slope);
  }
  SUBCASE("supercritical has no prediction") {
    CHECK_THROWS_AS((void)predicted_lifespan_model(ProblemKind::scalar, 1, 1, 4), NoPredictionError);
    CHECK_THROWS_AS((void)predicted_lifespan_model(ProblemKind::system, 3, 1, 3, 3), NoPredictionError);
  }
  SUBCASE("system subcritical: slope -1 / (Gamma - n/D)") {
    const auto m = predicted_lifespan_model(ProblemKind::system, 1, 1, 2, 3);
    CHECK(*m.predicted_slope == doctest::Approx(-1.0 / (0.8 - 0.5)));
    // p = q reduces to the scalar slope
    const auto s = predicted_lifespan_model(ProblemKind::system, 1, 1, 2, 2);
    CHECK(*s.predicted_slope == doctest::Approx(-2.0));
  }
  SUBCASE("system critical") {
    const auto eq = predicted_lifespan_model(ProblemKind::system, 2, 1, 2, 2);
    CHECK(eq.model == FitModel::exponential);
    CHECK(eq.kappa == doctest::Approx(1.0));
    // Gamma(1.5, 4) = 5 / 5 = 1 = n / D with n = 2, nu = 1
    const auto ne = predicted_lifespan_model(ProblemKind::system, 2, 1, 1.5, 4);
    CHECK(ne.critical);
    CHECK(ne.kappa == doctest::Approx(4.0));
  }
  CHECK_THROWS_AS((void)predicted_lifespan_model(ProblemKind::system, 1, 1, 2), DomainError);
  CHECK_THROWS_AS((void)predicted_lifespan_model(ProblemKind::scalar, 1, 2, 2), DomainError);
}

TEST_CASE("power fit recovers an exact law") {
  std::vector<LifespanRecord> recs;
  for (double e : {0.05, 0.1, 0.2, 0.3, 0.4}) recs.push_back(blowup_at(e, 7.0 * std::pow(e, -1.8)));
  const auto fit = fit_scaling(recs, FitModel::power, 0.0, -2.0);
  CHECK(fit.slope == doctest::Approx(-1.8).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(std::log(7.0)).epsilon(1e-9));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.points == 5);
  CHECK(*fit.relative_error == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(fit.agreement == "matches sharp rate");
  CHECK(fit.excluded.empty());
  const auto slow = fit_scaling(recs, FitModel::power, 0.0, -3.0);
  CHECK(slow.agreement == "consistent with upper bound");
  const auto fast = fit_scaling(recs, FitModel::power, 0.0, -1.0);
  CHECK(fast.agreement == "exceeds upper bound");
}

TEST_CASE("exact inverse-square laws") {
  std::vector<LifespanRecord> pw, ex;
  for (double e : {0.5, 0.6, 0.7, 0.8, 0.9}) {
    pw.push_back(blowup_at(e, std::pow(e, -2.0)));
    ex.push_back(blowup_at(e, std::exp(3.0 * std::pow(e, -2.0))));
  }
  const auto a = fit_scaling(pw, FitModel::power);
  CHECK(std::abs(a.slope + 2.0) <= 1e-9);
  CHECK(a.r_squared == 1.0);
  const auto b = fit_scaling(ex, FitModel::exponential, 2.0);
  CHECK(std::abs(b.slope - 3.0) <= 1e-9);
  CHECK(b.r_squared >= 1.0 - 1e-12);
}

TEST_CASE("exponential fit recovers an exact law") {
  std::vector<LifespanRecord> recs;
  for (double e : {0.6, 0.7, 0.8, 0.9, 1.0, 1.2}) recs.push_back(blowup_at(e, std::exp(0.3 + 2.0 * std::pow(e, -2.0))));
  const auto fit = fit_scaling(recs, FitModel::exponential, 2.0);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)fit_scaling(recs, FitModel::exponential, 0.0), DomainError);
}

TEST_CASE("fits disclose exclusions and need enough points") {
  std::vector<LifespanRecord> recs;
  for (double e : {0.1, 0.2, 0.3, 0.4, 0.5}) recs.push_back(blowup_at(e, 1.0 / e));
  LifespanRecord survived;
  survived.epsilon = 0.01;
  survived.verdict = Verdict::survived_horizon;
  survived.t_end = 1e4;
  LifespanRecord dirty;
  dirty.epsilon = 0.02;
  dirty.verdict = Verdict::truncation_contaminated;
  recs.push_back(survived);
  recs.push_back(dirty);
  const auto fit = fit_scaling(recs, FitModel::power);
  CHECK(fit.points == 5);
  REQUIRE(fit.excluded.size() == 2);
  CHECK(fit.excluded[0].epsilon == 0.01);
  CHECK(fit.excluded[0].reason.find("survived_horizon") != std::string::npos);
  CHECK(fit.excluded[1].reason.find("truncation_contaminated") != std::string::npos);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-9));
  recs.erase(recs.begin());
  CHECK_THROWS_AS((void)fit_scaling(recs, FitModel::power), InsufficientDataError);
  CHECK_NOTHROW((void)fit_scaling(recs, FitModel::power, 0.0, std::nullopt, 4));
  const std::vector<LifespanRecord> same(5, blowup_at(0.1, 3.0));
  CHECK_THROWS_AS((void)fit_scaling(same, FitModel::power), InsufficientDataError);
}

TEST_CASE("experiment data shapes") {
  ExperimentConfig c;
  c.graph.radius = 20;
  c.data.radius = 2;
  SUBCASE("bump carries the requested mass") {
    c.data.mass = 3.0;
    const auto ex = build_experiment(c);
    double mass = 0.0;
    for (const auto& [x, v] : ex.problem.u0.values) mass += ex.graph.mu(x) * v;
    for (const auto& [x, v] : ex.problem.u1.values) mass += ex.graph.mu(x) * v;
    CHECK(mass == doctest::Approx(3.0));
    CHECK(ex.problem.u0.values.size() == 5);
    CHECK(ex.problem.v0.values.empty());
  }
  SUBCASE("indicator is the amplitude on the ball") {
    c.graph.dim = 2;
    c.data.amplitude = 0.5;
    c.data.shape = "indicator";
    c.kind = ProblemKind::system;
    const auto ex = build_experiment(c);
    CHECK(ex.problem.u0.values.size() == 13);
    for (const auto& [x, v] : ex.problem.v1.values) CHECK(v == 0.5);
  }
  SUBCASE("random data is seeded") {
    c.data.shape = "random";
    const auto a = build_experiment(c);
    const auto b = build_experiment(c);
    c.sweep.seed = 2;
    const auto d = build_experiment(c);
    CHECK(a.problem.u0.values == b.problem.u0.values);
    CHECK(a.problem.u0.values != d.problem.u0.values);
    for (const auto& [x, v] : a.problem.u1.values) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("retry radius") {
    const auto big = build_experiment(c, 40);
    CHECK(big.graph.size() == 81);
  }
  SUBCASE("unknown base vertex") {
    c.graph.x0 = "(99)";
    CHECK_THROWS_AS((void)build_experiment(c), ConfigError);
  }
  SUBCASE("volume dimension of a lattice") {
    CHECK(volume_dimension(build_experiment(c)) == 1.0);
  }
}

TEST_CASE("sweep is deterministic and independent of the thread count") {
  auto c = small_sweep();
  const auto one = lifespan_sweep(c);
  c.sweep.threads = 3;
  const auto three = lifespan_sweep(c);
  CHECK(csv_of(one) == csv_of(three));
  REQUIRE(one.records.size() == 5);
  for (std::size_t i = 1; i < one.records.size(); ++i) {
    CHECK(one.records[i].record.epsilon > one.records[i - 1].record.epsilon);
    // larger data blows up sooner
    CHECK(*one.records[i].record.T_est < *one.records[i - 1].record.T_est);
  }
  const auto fit = fit_sweep(c, one);
  CHECK(fit.model == FitModel::power);
  REQUIRE(fit.predicted_slope);
  CHECK(*fit.predicted_slope == doctest::Approx(-2.0));
  CHECK(fit.slope < 0.0);
}

TEST_CASE("contaminated runs are retried and otherwise excluded") {
  auto c = small_sweep();
  c.graph.radius = 20;
  c.sweep.eps_min = 0.3;
  c.sweep.eps_max = 0.6;
  const auto r = lifespan_sweep(c);
  std::size_t excluded = 0;
  for (const auto& s : r.records) {
    CHECK(s.retried);
    CHECK(s.radius == 40);
    if (s.excluded) {
      ++excluded;
      CHECK(s.record.verdict == Verdict::truncation_contaminated);
      CHECK(s.exclusion_reason.find("retry") != std::string::npos);
    }
  }
  CHECK(excluded > 0);
  CHECK(excluded < r.records.size());
  const auto [use, out] = fit_inputs(r);
  CHECK(out.size() == excluded);
  CHECK(use.size() + out.size() == r.records.size());

  c.sweep.auto_retry = false;
  for (const auto& s : lifespan_sweep(c).records) {
    CHECK_FALSE(s.retried);
    CHECK(s.excluded);
  }
}

TEST_CASE("manifest resume and round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "gdw_manifest_test";
  std::filesystem::remove_all(dir);
  const auto path = (dir / "sweep.json").string();
  auto c = small_sweep();
  SweepOptions opt;
  opt.manifest_path = path;
  std::size_t calls = 0;
  opt.progress = [&](const SweepRecord&) { ++calls; };
  const auto first = lifespan_sweep(c, opt);
  CHECK(first.resumed == 0);
  CHECK(calls == 5);
  REQUIRE(std::filesystem::exists(path));

  calls = 0;
  const auto again = lifespan_sweep(c, opt);
  CHECK(again.resumed == 5);
  CHECK(calls == 0);
  CHECK(csv_of(again) == csv_of(first));

  std::ifstream in(path);
  const auto [text, loaded] = read_manifest(in);
  CHECK(text == render_config(c));
  CHECK(loaded.config_hash == config_hash(c));
  CHECK(csv_of(loaded) == csv_of(first));

  c.p = 2.5;  // different config: nothing is reused
  const auto other = lifespan_sweep(c, opt);
  CHECK(other.resumed == 0);
  std::filesystem::remove_all(dir);

  std::istringstream junk("{\"records\": 3}");
  CHECK_THROWS_AS((void)read_manifest(junk), ConfigError);
}

TEST_CASE("empty epsilon grid is rejected") {
  auto c = small_sweep();
  c.sweep.eps_count = 0;
  CHECK_THROWS_AS((void)lifespan_sweep(c), ConfigError);
}

TEST_CASE("system curve point on the line blows up") {
  auto c = small_sweep();
  c.graph.radius = 120;
  c.sweep.eps_count = 2;
  const std::vector<std::pair<double, double>> pairs{{2.0, 3.0}};
  const auto report = critical_curve_scan(c, pairs);
  CHECK(report.n == 1.0);
  REQUIRE(report.points.size() == 1);
  const auto& pt = report.points[0];
  CHECK(pt.gamma == doctest::Approx(0.8));
  CHECK(pt.margin == doctest::Approx(0.3));
  CHECK(pt.predicted_blowup);
  CHECK(pt.blowups == 2);
  CHECK(pt.summary == "all_blowup");
  std::ostringstream csv, svg;
  write_curve_csv(csv, report);
  write_curve_svg(svg, report);
  CHECK(csv.str().rfind("p,q,gamma,margin,predicted_blowup,blowups,survived,contaminated,summary\r\n", 0) == 0);
  CHECK(svg.str().find("</svg>") != std::string::npos);
}

TEST_CASE("fit json and sweep svg") {
  std::vector<LifespanRecord> recs;
  for (double e : {0.1, 0.2, 0.3, 0.4, 0.5}) recs.push_back(blowup_at(e, 2.0 / e));
  const auto fit = fit_scaling(recs, FitModel::power, 0.0, -2.0);
  const auto j = fit_to_json(fit);
  CHECK(j.find("\"slope\"") != std::string::npos);
  CHECK(j.find("\"agreement\": \"consistent with upper bound\"") != std::string::npos);
  SweepResult r;
  for (const auto& rec : recs) r.records.push_back({rec, 60, false, false, {}});
  std::ostringstream svg;
  write_sweep_svg(svg, r, &fit);
  CHECK(svg.str().find("<circle") != std::string::npos);
  CHECK(svg.str().find("<line") != std::string::npos);
}
