#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "gdw/config.hpp"
#include "gdw/errors.hpp"

using namespace gdw;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace

TEST_CASE("empty config keeps the defaults") {
  const auto c = parse("");
  const ExperimentConfig d;
  CHECK(render_config(c) == render_config(d));
  CHECK(c.graph.kind == "lattice");
  CHECK(c.kind == ProblemKind::scalar);
  CHECK(c.sweep.eps_count == 8);
}

TEST_CASE("render and parse round trip") {
  ExperimentConfig c;
  c.graph.dim = 2;
  c.graph.radius = 37;
  c.graph.nu = 0.5;
  c.kind = ProblemKind::system;
  c.p = 2.5;
  c.q = 3.25;
  c.data.shape = "random";
  c.data.amplitude = 0.3;
  c.sweep.eps_min = 0.1;
  c.sweep.eps_max = 0.7;
  c.sweep.eps_count = 4;
  c.sweep.seed = 99;
  c.sweep.auto_retry = false;
  c.solver.thresholds = {1e3, 1e5};
  c.solver.rtol = 1.0 / 3.0;
  c.R_ladder = {4, 8};
  c.fit_model = "power";
  c.curve_pairs = {{2, 3}, {1.5, 4}};
  c.output_dir = "results/run a";
  const auto text = render_config(c);
  const auto back = parse(text);
  CHECK(render_config(back) == text);
  CHECK(back.solver.rtol == c.solver.rtol);
  CHECK(back.curve_pairs == c.curve_pairs);
  CHECK(back.output_dir == "results/run a");
  CHECK(back.sweep.seed == 99);
  CHECK_FALSE(back.sweep.auto_retry);
}

TEST_CASE("comments and partial sections") {
  const auto c = parse("; leading comment\n[problem]\nkind = double_damping\np = 1.5\n\n[sweep]\neps_count = 3\n");
  CHECK(c.kind == ProblemKind::scalar_double_damping);
  CHECK(c.p == 1.5);
  CHECK(c.sweep.eps_count == 3);
  CHECK(c.graph.radius == 200);
}

TEST_CASE("bad input is a ConfigError") {
  CHECK_THROWS_AS(parse("[graph]\nradius = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse("[graph]\ncolour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse("[nowhere]\nkey = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\nkind = wave\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\np = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[sweep]\neps_count = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[sweep]\neps_min = 0.5\neps_max = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[solver]\nrtol = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[curve]\npairs = 2-3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[graph\nkind = lattice\n"), ConfigError);
  CHECK_THROWS_AS(parse("[graph]\nkind = file\n"), ConfigError);
  CHECK_THROWS_AS((void)load_config("/nonexistent/config.ini"), ConfigError);
  try {
    (void)parse("[graph]\nradius = ten\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("radius") != std::string::npos);
  }
}

TEST_CASE("epsilon grid is geometric with exact endpoints") {
  ExperimentConfig c;
  c.sweep.eps_min = 0.05;
  c.sweep.eps_max = 0.4;
  c.sweep.eps_count = 4;
  const auto g = c.epsilon_grid();
  REQUIRE(g.size() == 4);
  CHECK(g.front() == 0.05);
  CHECK(g.back() == 0.4);
  CHECK(g[1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(0.2).epsilon(1e-12));
  c.sweep.eps_count = 1;
  c.sweep.eps_max = 0.05;
  CHECK(c.epsilon_grid() == std::vector<double>{0.05});
}

TEST_CASE("beta follows the default rule plus the margin") {
  ExperimentConfig c;
  c.p = 2.0;
  CHECK(c.beta() == 3.0);  // ceil(2/1) + 1
  c.p = 1.5;
  CHECK(c.beta() == 5.0);
  c.beta_margin = 3.0;
  CHECK(c.beta() == 7.0);
  c.kind = ProblemKind::system;
  c.p = 3.0;
  c.q = 2.0;
  c.beta_margin = 1.0;
  CHECK(c.beta() == 3.0);
}
