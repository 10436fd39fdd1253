#include "gdw/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <json.hpp>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "gdw/csv.hpp"

namespace gdw {

namespace {

constexpr double kCriticalTolerance = 1e-9;

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= kCriticalTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

double gamma_pq(double p, double q) {
  if (!(p * q > 1.0)) throw DomainError("Gamma(p, q) needs pq > 1");
  return (std::max(p, q) + 1.0) / (p * q - 1.0);
}

double fujita(int n) {
  if (n < 1) throw DomainError("dimension must be at least 1");
  return 1.0 + 2.0 / n;
}

std::string to_string(FitModel model) {
  return model == FitModel::power ? "power" : "exponential";
}

FitModel parse_fit_model(std::string_view text) {
  if (text == "power") return FitModel::power;
  if (text == "exponential") return FitModel::exponential;
  throw ConfigError("unknown fit model '" + std::string(text) + "'");
}

LifespanModel predicted_lifespan_model(ProblemKind kind, double n, double nu, double p,
                                       std::optional<double> q) {
  if (!(n > 0.0)) throw DomainError("volume-growth exponent must be positive");
  if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("nu must lie in [0, 1]");
  if (!(p > 1.0)) throw DomainError("p must exceed 1");
  const double D = 1.0 + nu;
  LifespanModel m;
  if (kind != ProblemKind::system) {
    const double load = n * (p - 1.0);
    if (nearly_equal(load, D)) {
      m.model = FitModel::exponential;
      m.kappa = p - 1.0;
      m.critical = true;
      return m;
    }
    if (load > D) {
      throw NoPredictionError("no blow-up result for n(p-1) > 1 + nu (p above the Fujita exponent)");
    }
    m.predicted_slope = -(p - 1.0) * D / (D - load);
    return m;
  }
  if (!q) throw DomainError("systems need q");
  if (!(*q > 1.0)) throw DomainError("q must exceed 1");
  const double G = gamma_pq(p, *q);
  if (nearly_equal(D * G, n)) {
    m.model = FitModel::exponential;
    m.kappa = nearly_equal(p, *q) ? p - 1.0 : std::max(p, *q) / G;
    m.critical = true;
    return m;
  }
  if (D * G < n) throw NoPredictionError("no blow-up result for Gamma(p,q) < n / (1 + nu)");
  m.predicted_slope = -1.0 / (G - n / D);
  return m;
}

ScalingFit fit_scaling(std::span<const LifespanRecord> records, FitModel model, double kappa,
                       std::optional<double> predicted_slope, std::size_t min_points) {
  if (model == FitModel::exponential && !(kappa > 0.0)) {
    throw DomainError("the exponential model needs kappa > 0");
  }
  ScalingFit fit;
  fit.model = model;
  fit.kappa = kappa;
  std::vector<double> xs, ys;
  for (const auto& r : records) {
    if (r.verdict != Verdict::blowup || !r.T_est || !(*r.T_est > 0.0) || !(r.epsilon > 0.0)) {
      std::string reason = to_string(r.verdict);
      if (r.verdict == Verdict::survived_horizon) reason += " (censored at t_end = " + format_real(r.t_end) + ")";
      if (!r.note.empty()) reason += ": " + r.note;
      fit.excluded.push_back({r.epsilon, reason});
      continue;
    }
    xs.push_back(model == FitModel::power ? std::log(r.epsilon) : std::pow(r.epsilon, -kappa));
    ys.push_back(std::log(*r.T_est));
  }
  fit.points = xs.size();
  if (xs.size() < std::max<std::size_t>(min_points, 2)) {
    throw InsufficientDataError("fit needs " + std::to_string(std::max<std::size_t>(min_points, 2)) +
                                " blow-up records, have " + std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientDataError("fit needs at least two distinct epsilon values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;

  if (predicted_slope && model == FitModel::power) {
    fit.predicted_slope = predicted_slope;
    fit.relative_error = std::abs(fit.slope - *predicted_slope) / std::abs(*predicted_slope);
    if (*fit.relative_error <= 0.15) {
      fit.agreement = "matches sharp rate";
    } else if (std::abs(fit.slope) < std::abs(*predicted_slope)) {
      fit.agreement = "consistent with upper bound";
    } else {
      fit.agreement = "exceeds upper bound";
    }
  }
  return fit;
}

// --------------------------------------------------------------------------
// Experiment construction

namespace {

std::size_t resolve_base(const WeightedGraph& g, const ExperimentConfig& config) {
  if (!config.graph.x0.empty()) {
    const auto v = g.find(config.graph.x0);
    if (!v) throw ConfigError("graph.x0: unknown vertex '" + config.graph.x0 + "'");
    return *v;
  }
  if (g.lattice_dim() > 0) return g.index_of(lattice_id(std::vector<int>(g.lattice_dim(), 0)));
  if (g.size() == 0) throw ConfigError("graph is empty");
  return 0;
}

GraphFunction on_ball(const GraphMetric& m, double radius, const std::function<double()>& value) {
  GraphFunction f;
  for (std::size_t x = 0; x < m.dist.size(); ++x) {
    if (m.dist[x] <= radius) f.values[x] = value();
  }
  return f;
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& config) {
  return build_experiment(config, config.graph.radius);
}

Experiment build_experiment(const ExperimentConfig& config, int radius) {
  config.validate();
  Experiment ex;
  ex.graph = config.graph.kind == "lattice" ? build_lattice(config.graph.dim, radius)
                                            : load_graph(config.graph.file);
  const auto base = resolve_base(ex.graph, config);
  ex.metric = config.graph.metric == "euclidean" ? euclidean_metric(ex.graph, base)
                                                 : compute_metric(ex.graph, base);
  auto& pb = ex.problem;
  pb.kind = config.kind;
  pb.p = config.p;
  pb.q = config.q;
  pb.epsilon = 1.0;
  const auto& d = config.data;
  if (d.shape == "bump") {
    pb.u0 = bump(ex.graph, ex.metric, d.radius, d.mass);
    pb.u1 = pb.u0;
    pb.v0 = pb.u0;
    pb.v1 = pb.u0;
  } else if (d.shape == "indicator") {
    pb.u0 = on_ball(ex.metric, d.radius, [&] { return d.amplitude; });
    pb.u1 = pb.u0;
    pb.v0 = pb.u0;
    pb.v1 = pb.u0;
  } else {
    std::mt19937_64 rng(config.sweep.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&] { return d.amplitude * (1.0 - unit(rng)); };  // (0, amplitude]
    pb.u0 = on_ball(ex.metric, d.radius, draw);
    pb.u1 = on_ball(ex.metric, d.radius, draw);
    pb.v0 = on_ball(ex.metric, d.radius, draw);
    pb.v1 = on_ball(ex.metric, d.radius, draw);
  }
  if (!pb.is_system()) {
    pb.v0 = {};
    pb.v1 = {};
  }
  pb.validate();
  return ex;
}

double volume_dimension(const Experiment& ex) {
  if (ex.graph.lattice_dim() > 0) return ex.graph.lattice_dim();
  double top = ex.metric.trusted_radius;
  if (!std::isfinite(top)) top = *std::max_element(ex.metric.dist.begin(), ex.metric.dist.end());
  std::vector<double> radii;
  const double lo = std::max(1.0, std::floor(top / 4.0));
  for (double r = lo; r <= top; r += 1.0) radii.push_back(r);
  return fit_volume_growth(ball_volumes(ex.graph, ex.metric, radii), lo).exponent;
}

std::string config_hash(const ExperimentConfig& config) { return fnv1a_hex(render_config(config)); }

// --------------------------------------------------------------------------
// Manifest

namespace {

using nlohmann::json;

json record_to_json(const SweepRecord& s) {
  const auto& r = s.record;
  json ladder = json::array();
  for (const auto& pt : r.threshold_ladder) ladder.push_back({pt.threshold, pt.time});
  json j;
  j["epsilon"] = r.epsilon;
  j["T_est"] = r.T_est ? json(*r.T_est) : json(nullptr);
  j["verdict"] = to_string(r.verdict);
  j["threshold_ladder"] = ladder;
  j["ladder_converged"] = r.ladder_converged;
  j["low_confidence"] = r.low_confidence;
  j["fitted_ladder_exponent"] =
      r.fitted_ladder_exponent ? json(*r.fitted_ladder_exponent) : json(nullptr);
  j["t_end"] = r.t_end;
  j["steps"] = r.steps;
  j["settings_hash"] = r.settings_hash;
  j["note"] = r.note;
  j["radius"] = s.radius;
  j["retried"] = s.retried;
  j["excluded"] = s.excluded;
  j["exclusion_reason"] = s.exclusion_reason;
  return j;
}

Verdict parse_verdict(const std::string& s) {
  if (s == "blowup") return Verdict::blowup;
  if (s == "survived_horizon") return Verdict::survived_horizon;
  if (s == "truncation_contaminated") return Verdict::truncation_contaminated;
  throw ConfigError("unknown verdict '" + s + "' in manifest");
}

SweepRecord record_from_json(const json& j) {
  SweepRecord s;
  auto& r = s.record;
  r.epsilon = j.at("epsilon").get<double>();
  if (!j.at("T_est").is_null()) r.T_est = j.at("T_est").get<double>();
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  for (const auto& pt : j.at("threshold_ladder")) {
    r.threshold_ladder.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
  }
  r.ladder_converged = j.at("ladder_converged").get<bool>();
  r.low_confidence = j.at("low_confidence").get<bool>();
  if (!j.at("fitted_ladder_exponent").is_null()) {
    r.fitted_ladder_exponent = j.at("fitted_ladder_exponent").get<double>();
  }
  r.t_end = j.at("t_end").get<double>();
  r.steps = j.at("steps").get<std::size_t>();
  r.settings_hash = j.at("settings_hash").get<std::string>();
  r.note = j.at("note").get<std::string>();
  s.radius = j.at("radius").get<int>();
  s.retried = j.at("retried").get<bool>();
  s.excluded = j.at("excluded").get<bool>();
  s.exclusion_reason = j.at("exclusion_reason").get<std::string>();
  return s;
}

json manifest_json(const std::string& config_text, const std::string& hash,
                   const std::vector<std::optional<SweepRecord>>& records) {
  json j;
  j["config"] = config_text;
  j["config_hash"] = hash;
  json list = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i]) continue;
    auto r = record_to_json(*records[i]);
    r["index"] = i;
    list.push_back(std::move(r));
  }
  j["records"] = list;
  return j;
}

void atomic_write(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const auto tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace

void write_manifest(std::ostream& os, const ExperimentConfig& config, const SweepResult& result) {
  std::vector<std::optional<SweepRecord>> recs(result.records.begin(), result.records.end());
  os << manifest_json(render_config(config), config_hash(config), recs).dump(2) << '\n';
}

std::pair<std::string, SweepResult> read_manifest(std::istream& is) {
  try {
    const auto j = json::parse(is);
    SweepResult result;
    result.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& r : j.at("records")) result.records.push_back(record_from_json(r));
    return {j.at("config").get<std::string>(), std::move(result)};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

// --------------------------------------------------------------------------
// Sweep

SweepResult lifespan_sweep(const ExperimentConfig& config, const SweepOptions& options) {
  config.validate();
  const auto grid = config.epsilon_grid();
  const auto hash = config_hash(config);
  const auto config_text = render_config(config);
  const bool lattice = config.graph.kind == "lattice";

  std::vector<std::optional<SweepRecord>> slots(grid.size());
  std::size_t resumed = 0;
  if (!options.manifest_path.empty() && std::filesystem::exists(options.manifest_path)) {
    std::ifstream in(options.manifest_path);
    const auto j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.value("config_hash", std::string()) == hash && j.contains("records")) {
      for (const auto& r : j.at("records")) {
        const auto i = r.value("index", grid.size());
        if (i < grid.size() && r.value("epsilon", -1.0) == grid[i]) {
          slots[i] = record_from_json(r);
          ++resumed;
        }
      }
    }
  }

  const auto base = std::make_shared<const Experiment>(build_experiment(config));
  std::once_flag retry_once;
  std::shared_ptr<const Experiment> retry;
  auto retry_experiment = [&] {
    std::call_once(retry_once, [&] {
      retry = std::make_shared<const Experiment>(build_experiment(config, 2 * config.graph.radius));
    });
    return retry;
  };

  auto run_one = [&](double eps) {
    SweepRecord s;
    ProblemSpec spec = base->problem;
    spec.epsilon = eps;
    s.record = estimate_lifespan(base->graph, spec, config.solver);
    s.radius = lattice ? config.graph.radius : 0;
    if (s.record.verdict == Verdict::truncation_contaminated && lattice && config.sweep.auto_retry) {
      const auto big = retry_experiment();
      ProblemSpec spec2 = big->problem;
      spec2.epsilon = eps;
      s.record = estimate_lifespan(big->graph, spec2, config.solver);
      s.radius = 2 * config.graph.radius;
      s.retried = true;
    }
    if (s.record.verdict == Verdict::truncation_contaminated) {
      s.excluded = true;
      s.exclusion_reason = s.retried ? "truncation contaminated after retry at radius " +
                                           std::to_string(s.radius)
                                     : "truncation contaminated";
    }
    return s;
  };

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!slots[i]) todo.push_back(i);
  }
  unsigned workers = config.sweep.threads > 0 ? static_cast<unsigned>(config.sweep.threads)
                                              : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(todo.size(), 1)));

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      const std::size_t i = todo[k];
      try {
        auto rec = run_one(grid[i]);
        std::lock_guard lock(mu);
        slots[i] = rec;
        if (!options.manifest_path.empty()) {
          atomic_write(options.manifest_path, manifest_json(config_text, hash, slots).dump(2) + "\n");
        }
        if (options.progress) options.progress(rec);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  result.config_hash = hash;
  result.resumed = resumed;
  for (auto& s : slots) result.records.push_back(std::move(*s));
  return result;
}

std::pair<std::vector<LifespanRecord>, std::vector<Exclusion>> fit_inputs(const SweepResult& result) {
  std::vector<LifespanRecord> use;
  std::vector<Exclusion> out;
  for (const auto& s : result.records) {
    if (s.excluded) {
      out.push_back({s.record.epsilon, s.exclusion_reason});
    } else {
      use.push_back(s.record);
    }
  }
  return {std::move(use), std::move(out)};
}

ScalingFit fit_sweep(const ExperimentConfig& config, const SweepResult& result) {
  const auto ex = build_experiment(config);
  const double n = volume_dimension(ex);
  std::optional<LifespanModel> predicted;
  try {
    predicted = predicted_lifespan_model(config.kind, n, config.graph.nu, config.p,
                                         config.kind == ProblemKind::system
                                             ? std::optional<double>(config.q)
                                             : std::nullopt);
  } catch (const NoPredictionError&) {
  }
  FitModel model = FitModel::power;
  if (config.fit_model == "auto") {
    if (predicted) model = predicted->model;
  } else {
    model = parse_fit_model(config.fit_model);
  }
  double kappa = 0.0;
  if (model == FitModel::exponential) {
    kappa = predicted && predicted->model == FitModel::exponential ? predicted->kappa : config.p - 1.0;
  }
  const auto [records, excluded] = fit_inputs(result);
  auto fit = fit_scaling(records, model, kappa,
                         predicted ? predicted->predicted_slope : std::nullopt);
  fit.excluded.insert(fit.excluded.begin(), excluded.begin(), excluded.end());
  return fit;
}

// --------------------------------------------------------------------------
// Output

namespace {

std::string ladder_text(const LifespanRecord& r) {
  std::string s;
  for (std::size_t i = 0; i < r.threshold_ladder.size(); ++i) {
    s += (i ? ";" : "") + format_real(r.threshold_ladder[i].threshold) + ":" +
         format_real(r.threshold_ladder[i].time);
  }
  return s;
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

}  // namespace

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  CsvWriter csv(os);
  csv.row({"epsilon", "T_est", "verdict", "ladder_converged", "low_confidence",
           "fitted_ladder_exponent", "t_end", "steps", "radius", "retried", "excluded", "reason",
           "ladder", "settings_hash", "note"});
  for (const auto& s : result.records) {
    const auto& r = s.record;
    csv.row({format_real(r.epsilon), r.T_est ? format_real(*r.T_est) : std::string(),
             to_string(r.verdict), yes_no(r.ladder_converged), yes_no(r.low_confidence),
             r.fitted_ladder_exponent ? format_real(*r.fitted_ladder_exponent) : std::string(),
             format_real(r.t_end), std::to_string(r.steps), std::to_string(s.radius),
             yes_no(s.retried), yes_no(s.excluded), s.exclusion_reason, ladder_text(r),
             r.settings_hash, r.note});
  }
}

std::string fit_to_json(const ScalingFit& fit) {
  json j;
  j["model"] = to_string(fit.model);
  j["kappa"] = fit.kappa;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r_squared"] = fit.r_squared;
  j["predicted_slope"] = fit.predicted_slope ? json(*fit.predicted_slope) : json(nullptr);
  j["relative_error"] = fit.relative_error ? json(*fit.relative_error) : json(nullptr);
  j["agreement"] = fit.agreement;
  j["points"] = fit.points;
  json ex = json::array();
  for (const auto& e : fit.excluded) ex.push_back({{"epsilon", e.epsilon}, {"reason", e.reason}});
  j["excluded"] = ex;
  return j.dump(2);
}

namespace {

// Minimal SVG canvas mapping a data box onto a fixed pixel frame.
struct Canvas {
  double x0, x1, y0, y1;
  static constexpr double W = 640, H = 480, M = 60;
  [[nodiscard]] double px(double x) const { return M + (x - x0) / (x1 - x0) * (W - 2 * M); }
  [[nodiscard]] double py(double y) const { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); }
};

void svg_open(std::ostream& os, const Canvas& c, const std::string& xlabel, const std::string& ylabel) {
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Canvas::W << "\" height=\"" << Canvas::H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << Canvas::M << "\" y=\"" << Canvas::M << "\" width=\"" << Canvas::W - 2 * Canvas::M
     << "\" height=\"" << Canvas::H - 2 * Canvas::M << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << Canvas::W / 2 << "\" y=\"" << Canvas::H - 20 << "\" text-anchor=\"middle\">"
     << xlabel << "</text>\n";
  os << "<text x=\"20\" y=\"" << Canvas::H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
     << Canvas::H / 2 << ")\">" << ylabel << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = c.x0 + (c.x1 - c.x0) * k / 4.0;
    const double y = c.y0 + (c.y1 - c.y0) * k / 4.0;
    os << "<text x=\"" << c.px(x) << "\" y=\"" << Canvas::H - Canvas::M + 16
       << "\" text-anchor=\"middle\">" << format_real(std::round(x * 100) / 100) << "</text>\n";
    os << "<text x=\"" << Canvas::M - 6 << "\" y=\"" << c.py(y) + 4 << "\" text-anchor=\"end\">"
       << format_real(std::round(y * 100) / 100) << "</text>\n";
  }
}

Canvas padded(double x0, double x1, double y0, double y1) {
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  const double dx = 0.05 * (x1 - x0), dy = 0.05 * (y1 - y0);
  return {x0 - dx, x1 + dx, y0 - dy, y1 + dy};
}

}  // namespace

void write_sweep_svg(std::ostream& os, const SweepResult& result, const ScalingFit* fit) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : result.records) {
    if (!s.excluded && s.record.T_est && s.record.verdict == Verdict::blowup) {
      pts.emplace_back(std::log(s.record.epsilon), std::log(*s.record.T_est));
    }
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    y0 = y1 = pts[0].second;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  const auto c = padded(x0, x1, y0, y1);
  svg_open(os, c, "log epsilon", "log T");
  if (fit && fit->model == FitModel::power) {
    os << "<line x1=\"" << c.px(x0) << "\" y1=\"" << c.py(fit->intercept + fit->slope * x0) << "\" x2=\""
       << c.px(x1) << "\" y2=\"" << c.py(fit->intercept + fit->slope * x1)
       << "\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << Canvas::M + 10 << "\" y=\"" << Canvas::M + 18 << "\">slope "
       << format_real(std::round(fit->slope * 1000) / 1000) << ", R2 "
       << format_real(std::round(fit->r_squared * 1000) / 1000) << "</text>\n";
  }
  for (const auto& [x, y] : pts) {
    os << "<circle cx=\"" << c.px(x) << "\" cy=\"" << c.py(y) << "\" r=\"4\" fill=\"firebrick\"/>\n";
  }
  os << "</svg>\n";
}

// --------------------------------------------------------------------------
// Critical curve

CurveReport critical_curve_scan(const ExperimentConfig& config,
                                std::span<const std::pair<double, double>> pairs) {
  CurveReport report;
  report.nu = config.graph.nu;
  report.n = volume_dimension(build_experiment(config));
  const double D = 1.0 + report.nu;
  for (const auto& [p, q] : pairs) {
    ExperimentConfig c = config;
    c.kind = ProblemKind::system;
    c.p = p;
    c.q = q;
    CurvePoint pt;
    pt.p = p;
    pt.q = q;
    pt.gamma = gamma_pq(p, q);
    pt.margin = pt.gamma - report.n / D;
    pt.predicted_blowup = pt.margin >= -kCriticalTolerance * std::max(1.0, report.n / D);
    const auto sweep = lifespan_sweep(c);
    for (const auto& s : sweep.records) {
      switch (s.record.verdict) {
        case Verdict::blowup: ++pt.blowups; break;
        case Verdict::survived_horizon: ++pt.survived; break;
        case Verdict::truncation_contaminated: ++pt.contaminated; break;
      }
    }
    pt.summary = pt.contaminated > 0 ? "contaminated" : pt.survived > 0 ? "some_survive" : "all_blowup";
    report.points.push_back(pt);
  }
  return report;
}

void write_curve_csv(std::ostream& os, const CurveReport& report) {
  CsvWriter csv(os);
  csv.row({"p", "q", "gamma", "margin", "predicted_blowup", "blowups", "survived", "contaminated",
           "summary"});
  for (const auto& pt : report.points) {
    csv.row({format_real(pt.p), format_real(pt.q), format_real(pt.gamma), format_real(pt.margin),
             yes_no(pt.predicted_blowup), std::to_string(pt.blowups), std::to_string(pt.survived),
             std::to_string(pt.contaminated), pt.summary});
  }
}

void write_curve_svg(std::ostream& os, const CurveReport& report) {
  double top = 4.0;
  for (const auto& pt : report.points) top = std::max({top, pt.p + 0.5, pt.q + 0.5});
  const Canvas c{1.0, top, 1.0, top};
  svg_open(os, c, "p", "q");
  // Gamma(p, q) = g with q >= p: q + 1 = g (pq - 1), i.e. q = (g + 1) / (g p - 1).
  const double g = report.n / (1.0 + report.nu);
  std::vector<std::pair<double, double>> upper, lower;
  for (int i = 0; i <= 400; ++i) {
    const double p = 1.0 + (top - 1.0) * i / 400.0;
    if (g * p - 1.0 <= 0.0) continue;
    const double q = (g + 1.0) / (g * p - 1.0);
    if (q >= p && q <= top) upper.emplace_back(p, q);
  }
  for (const auto& [p, q] : upper) lower.emplace_back(q, p);
  for (const auto* branch : {&upper, &lower}) {
    if (branch->size() < 2) continue;
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (const auto& [p, q] : *branch) os << c.px(p) << ',' << c.py(q) << ' ';
    os << "\"/>\n";
  }
  for (const auto& pt : report.points) {
    const double x = c.px(pt.p), y = c.py(pt.q);
    if (pt.summary == "all_blowup") {
      os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"5\" fill=\"firebrick\"/>\n";
    } else if (pt.summary == "some_survive") {
      os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"5\" fill=\"none\" stroke=\"black\"/>\n";
    } else {
      os << "<path d=\"M" << x - 4 << ',' << y - 4 << " l8,8 m-8,0 l8,-8\" stroke=\"gray\"/>\n";
    }
  }
  os << "<text x=\"" << Canvas::M + 10 << "\" y=\"" << Canvas::M + 18
     << "\">filled: all blow up, open: some survive, curve: Gamma = " << format_real(g) << "</text>\n";
  os << "</svg>\n";
}

}  // namespace gdw
