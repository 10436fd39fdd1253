// Command-line driver: graph generation, validation, single runs, sweeps,
// fits, critical-curve scans and cutoff/functional reports.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gdw/config.hpp"
#include "gdw/csv.hpp"
#include "gdw/cutoff.hpp"
#include "gdw/errors.hpp"
#include "gdw/experiments.hpp"
#include "gdw/functionals.hpp"
#include "gdw/graph.hpp"
#include "gdw/metric.hpp"
#include "gdw/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gdw;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumeric = 3;
constexpr int kContaminated = 4;

struct Common {
  std::string config_path;
  std::string out_dir;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig config = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (!c.out_dir.empty()) config.output_dir = c.out_dir;
  config.validate();
  return config;
}

std::string output_path(const ExperimentConfig& config, const std::string& name) {
  fs::create_directories(config.output_dir);
  return (fs::path(config.output_dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json record_json(const LifespanRecord& r) {
  json ladder = json::array();
  for (const auto& pt : r.threshold_ladder) ladder.push_back({pt.threshold, pt.time});
  return {{"epsilon", r.epsilon},
          {"T_est", optional_json(r.T_est)},
          {"verdict", to_string(r.verdict)},
          {"threshold_ladder", ladder},
          {"ladder_converged", r.ladder_converged},
          {"low_confidence", r.low_confidence},
          {"fitted_ladder_exponent", optional_json(r.fitted_ladder_exponent)},
          {"t_end", r.t_end},
          {"steps", r.steps},
          {"settings_hash", r.settings_hash},
          {"note", r.note}};
}

CutoffParams cutoff_for(const ExperimentConfig& config, const Experiment& ex, double R) {
  CutoffParams params;
  params.alpha = alpha_for_nu(config.graph.nu);
  params.beta = config.beta();
  params.nu = config.graph.nu;
  params.R = R;
  params.x0 = ex.metric.base;
  return params;
}

// ---------------------------------------------------------------------------

int run_lattice(int dim, int radius, const std::string& out) {
  const auto g = build_lattice(dim, radius);
  if (out.empty() || out == "-") {
    write_graph(std::cout, g);
  } else {
    save_graph(out, g);
    std::cerr << "wrote " << g.size() << " vertices to " << out << '\n';
  }
  return kOk;
}

int run_validate(const Common& common, double c_bound, double R0, double threshold, double r_min) {
  const auto config = load(common);
  const auto ex = build_experiment(config);
  const auto& g = ex.graph;
  const auto& m = ex.metric;
  const auto structure = validate_structure(g, c_bound);

  json report;
  report["vertices"] = g.size();
  report["base_vertex"] = g.id(m.base);
  report["structure"] = {{"symmetric", structure.symmetric},
                         {"zero_diagonal", structure.zero_diagonal},
                         {"positive_measure", structure.positive_measure},
                         {"connected", structure.connected}};
  report["weight_bound"] = {{"constant", structure.weight_ratio},
                            {"argmax", g.id(structure.weight_ratio_argmax)},
                            {"c_bound", c_bound},
                            {"pass", structure.weight_bound_ok}};
  report["jump_size"] = {{"L", m.jump_size}, {"finite", std::isfinite(m.jump_size)}};
  report["trusted_radius"] = std::isfinite(m.trusted_radius) ? json(m.trusted_radius) : json(nullptr);

  double top = std::isfinite(m.trusted_radius) ? m.trusted_radius
                                               : *std::max_element(m.dist.begin(), m.dist.end());
  std::vector<double> radii;
  for (double r = 1.0; r <= top; r += 1.0) radii.push_back(r);
  json balls = {{"finite", true}};
  if (!radii.empty()) {
    const auto table = ball_volumes(g, m, radii);
    {
      auto out = open_out(output_path(config, "balls.csv"));
      write_ball_table_csv(out, table);
    }
    balls["largest_radius"] = radii.back();
    balls["largest_volume"] = table.volumes.back();
    try {
      const auto fit = fit_volume_growth(table, r_min);
      balls["growth_exponent"] = fit.exponent;
      balls["growth_r_squared"] = fit.r_squared;
      balls["growth_points"] = fit.points;
    } catch (const InsufficientDataError& e) {
      balls["growth_exponent"] = nullptr;
      balls["growth_note"] = e.what();
    }
  }
  report["balls"] = balls;

  try {
    const auto decay = check_distance_laplacian_decay(g, m, config.graph.nu, R0, threshold);
    {
      auto out = open_out(output_path(config, "decay.csv"));
      write_decay_csv(out, g, decay);
    }
    report["distance_laplacian_decay"] = {{"nu", decay.nu},
                                          {"R0", decay.R0},
                                          {"constant", decay.sup_constant},
                                          {"argsup", g.id(decay.argsup)},
                                          {"threshold", decay.threshold},
                                          {"pass", decay.pass},
                                          {"vertices_checked", decay.entries.size()}};
  } catch (const InsufficientDataError& e) {
    report["distance_laplacian_decay"] = {{"pass", nullptr}, {"note", e.what()}};
  }
  std::cout << report.dump(2) << '\n';
  return kOk;
}

int run_simulate(const Common& common, double epsilon) {
  auto config = load(common);
  const auto ex = build_experiment(config);
  ProblemSpec spec = ex.problem;
  spec.epsilon = epsilon;
  auto [traj, rec] = integrate(ex.graph, spec, config.solver);
  extrapolate_ladder(rec, spec.ladder_exponent());
  {
    auto out = open_out(output_path(config, "trajectory.csv"));
    write_trajectory_csv(out, ex.graph, traj, spec.is_system());
  }
  {
    auto out = open_out(output_path(config, "run.json"));
    out << record_json(rec).dump(2) << '\n';
  }
  std::cout << record_json(rec).dump(2) << '\n';
  return rec.verdict == Verdict::truncation_contaminated ? kContaminated : kOk;
}

int run_sweep(const Common& common) {
  const auto config = load(common);
  SweepOptions opt;
  opt.manifest_path = output_path(config, "manifest.json");
  opt.progress = [](const SweepRecord& s) {
    std::cerr << "eps " << format_real(s.record.epsilon) << ": " << to_string(s.record.verdict);
    if (s.record.T_est) std::cerr << " T = " << format_real(*s.record.T_est);
    if (s.retried) std::cerr << " (retried at radius " << s.radius << ")";
    std::cerr << '\n';
  };
  const auto result = lifespan_sweep(config, opt);
  if (result.resumed > 0) std::cerr << "resumed " << result.resumed << " records from the manifest\n";
  {
    auto out = open_out(output_path(config, "sweep.csv"));
    write_sweep_csv(out, result);
  }
  {
    auto out = open_out(output_path(config, "sweep.svg"));
    write_sweep_svg(out, result, nullptr);
  }
  bool contaminated = false;
  for (const auto& s : result.records) contaminated = contaminated || s.excluded;
  std::cout << "wrote " << result.records.size() << " records to " << config.output_dir << '\n';
  return contaminated ? kContaminated : kOk;
}

int run_fit(const Common& common, const std::string& manifest, const std::string& model) {
  std::string path = manifest;
  if (path.empty()) path = output_path(load(common), "manifest.json");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path);
  const auto [config_text, result] = read_manifest(in);
  std::istringstream cin_text(config_text);
  auto config = parse_config(cin_text);
  if (!common.out_dir.empty()) config.output_dir = common.out_dir;
  if (!model.empty()) config.fit_model = model;
  config.validate();
  const auto fit = fit_sweep(config, result);
  const auto text = fit_to_json(fit);
  {
    auto out = open_out(output_path(config, "fit.json"));
    out << text << '\n';
  }
  {
    auto out = open_out(output_path(config, "sweep.svg"));
    write_sweep_svg(out, result, &fit);
  }
  std::cout << text << '\n';
  return kOk;
}

int run_curve(const Common& common) {
  const auto config = load(common);
  const auto report = critical_curve_scan(config, config.curve_pairs);
  {
    auto out = open_out(output_path(config, "curve.csv"));
    write_curve_csv(out, report);
  }
  {
    auto out = open_out(output_path(config, "curve.svg"));
    write_curve_svg(out, report);
  }
  write_curve_csv(std::cout, report);
  bool contaminated = false;
  for (const auto& pt : report.points) contaminated = contaminated || pt.contaminated > 0;
  return contaminated ? kContaminated : kOk;
}

int run_cutoff_bounds(const Common& common, std::optional<double> beta, std::size_t times) {
  const auto config = load(common);
  const auto ex = build_experiment(config);
  std::vector<CutoffBoundsReport> reports;
  for (double R : config.R_ladder) {
    auto params = cutoff_for(config, ex, R);
    if (beta) params.beta = *beta;
    reports.push_back(verify_cutoff_bounds_grid(params, ex.graph, ex.metric, times));
  }
  {
    auto out = open_out(output_path(config, "cutoff_bounds.csv"));
    write_cutoff_bounds_csv(out, ex.graph, reports);
  }
  write_cutoff_bounds_csv(std::cout, ex.graph, reports);
  std::size_t violations = 0;
  for (int b = 0; b < 3; ++b) {
    std::vector<double> sups;
    for (const auto& r : reports) {
      sups.push_back(r.bounds[b].sup_ratio);
      violations += r.bounds[b].violations;
    }
    std::cerr << "bound " << b << ": " << (monotone_growth(sups) ? "grows across the ladder" : "bounded")
              << '\n';
  }
  std::cerr << "support violations: " << violations << '\n';
  return kOk;
}

int run_functionals(const Common& common, double epsilon) {
  auto config = load(common);
  if (!(config.solver.snapshot_interval > 0.0)) config.solver.snapshot_interval = 1.0;
  const auto ex = build_experiment(config);
  ProblemSpec spec = ex.problem;
  spec.epsilon = epsilon;
  const auto [traj, rec] = integrate(ex.graph, spec, config.solver);
  if (rec.verdict == Verdict::truncation_contaminated) {
    std::cerr << "run is truncation contaminated at t = " << format_real(rec.t_end) << '\n';
    return kContaminated;
  }
  ChainOptions opt;
  opt.quad_points = config.quad_points;
  const auto report =
      check_estimate_chain(ex.graph, ex.metric, spec, traj, cutoff_for(config, ex, 1.0), config.R_ladder, opt);
  {
    auto out = open_out(output_path(config, "functionals.csv"));
    write_functional_csv(out, report);
  }
  write_functional_csv(std::cout, report);
  std::cerr << "verdict " << to_string(rec.verdict) << " at t = " << format_real(rec.t_end)
            << "; implied constants " << (report.growth_flag ? "grow" : "stay bounded")
            << "; violation " << (report.violation ? "yes" : "no") << '\n';
  return kOk;
}

int run_config(const Common& common, bool defaults) {
  std::cout << render_config(defaults ? ExperimentConfig{} : load(common));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blow-up experiments for damped wave equations on weighted graphs"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "experiment config file")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", common.out_dir, "output directory (overrides [output] dir)");
  };
  int code = kOk;
  std::function<int()> action;

  auto* lattice = app.add_subcommand("lattice", "write the l1-ball patch of Z^n as a graph file");
  int dim = 1, radius = 50;
  std::string graph_out;
  lattice->add_option("-n,--dim", dim, "lattice dimension")->check(CLI::PositiveNumber);
  lattice->add_option("-r,--radius", radius, "ball radius")->check(CLI::PositiveNumber);
  lattice->add_option("-f,--file", graph_out, "output file (stdout when omitted)");
  lattice->callback([&] { action = [&] { return run_lattice(dim, radius, graph_out); }; });

  auto* validate = app.add_subcommand("validate", "structural and metric assumption report (JSON)");
  add_common(validate);
  double c_bound = 1.0, R0 = 1.0, threshold = 10.0, r_min = 8.0;
  validate->add_option("--c-bound", c_bound, "constant for sum omega / mu");
  validate->add_option("--R0", R0, "inner radius of the decay check");
  validate->add_option("--threshold", threshold, "pass threshold of the decay constant");
  validate->add_option("--r-min", r_min, "smallest radius in the volume-growth fit");
  validate->callback([&] { action = [&] { return run_validate(common, c_bound, R0, threshold, r_min); }; });

  auto* simulate = app.add_subcommand("simulate", "single run to trajectory.csv and run.json");
  add_common(simulate);
  double epsilon = 0.1;
  simulate->add_option("-e,--epsilon", epsilon, "data amplitude")->check(CLI::PositiveNumber);
  simulate->callback([&] { action = [&] { return run_simulate(common, epsilon); }; });

  auto* sweep = app.add_subcommand("sweep", "lifespan sweep to sweep.csv and manifest.json");
  add_common(sweep);
  sweep->callback([&] { action = [&] { return run_sweep(common); }; });

  auto* fit = app.add_subcommand("fit", "scaling fit of a sweep manifest to fit.json");
  add_common(fit);
  std::string manifest, model;
  fit->add_option("-m,--manifest", manifest, "manifest (default <out>/manifest.json)");
  fit->add_option("--model", model, "auto, power or exponential")
      ->check(CLI::IsMember({"auto", "power", "exponential"}));
  fit->callback([&] { action = [&] { return run_fit(common, manifest, model); }; });

  auto* curve = app.add_subcommand("curve", "system sweeps over the configured (p, q) pairs");
  add_common(curve);
  curve->callback([&] { action = [&] { return run_curve(common); }; });

  auto* bounds = app.add_subcommand("lemma22", "cutoff derivative bounds over the R ladder");
  add_common(bounds);
  std::optional<double> beta;
  std::size_t times = 129;
  bounds->add_option("--beta", beta, "cutoff power (default from the config)");
  bounds->add_option("--times", times, "time samples per radius")->check(CLI::Range(2, 100000));
  bounds->callback([&] { action = [&] { return run_cutoff_bounds(common, beta, times); }; });

  auto* functionals = app.add_subcommand("functionals", "test-function chain and weak-form residuals");
  add_common(functionals);
  double f_epsilon = 0.1;
  functionals->add_option("-e,--epsilon", f_epsilon, "data amplitude")->check(CLI::PositiveNumber);
  functionals->callback([&] { action = [&] { return run_functionals(common, f_epsilon); }; });

  auto* config = app.add_subcommand("config", "print the effective config");
  add_common(config);
  bool defaults = false;
  config->add_flag("--defaults", defaults, "print every key with its default");
  config->callback([&] { action = [&] { return run_config(common, defaults); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  try {
    code = action();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return code;
}
