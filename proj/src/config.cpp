#include "gdw/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "gdw/csv.hpp"
#include "gdw/cutoff.hpp"
#include "gdw/errors.hpp"

namespace gdw {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_real(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected a real number, got '" + t + "'");
  }
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + t + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + t + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

std::vector<double> to_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_real(key, item));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_real(v[i]);
  return s;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define GDW_REAL(sec, name, member)                                                          \
  Field {                                                                                    \
    sec, name, [](ExperimentConfig& c, const std::string& v) { c.member = to_real(name, v); }, \
        [](const ExperimentConfig& c) { return format_real(c.member); }                      \
  }
#define GDW_TEXT(sec, name, member)                                                   \
  Field {                                                                             \
    sec, name, [](ExperimentConfig& c, const std::string& v) { c.member = trim(v); }, \
        [](const ExperimentConfig& c) { return c.member; }                            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      GDW_TEXT("graph", "kind", graph.kind),
      {"graph", "dim",
       [](ExperimentConfig& c, const std::string& v) { c.graph.dim = static_cast<int>(to_integer("dim", v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.graph.dim); }},
      {"graph", "radius",
       [](ExperimentConfig& c, const std::string& v) {
         c.graph.radius = static_cast<int>(to_integer("radius", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.graph.radius); }},
      GDW_TEXT("graph", "file", graph.file),
      GDW_TEXT("graph", "x0", graph.x0),
      GDW_TEXT("graph", "metric", graph.metric),
      GDW_REAL("graph", "nu", graph.nu),

      {"problem", "kind",
       [](ExperimentConfig& c, const std::string& v) { c.kind = parse_problem_kind(trim(v)); },
       [](const ExperimentConfig& c) {
         return c.kind == ProblemKind::scalar_double_damping ? std::string("double_damping")
                                                             : to_string(c.kind);
       }},
      GDW_REAL("problem", "p", p),
      GDW_REAL("problem", "q", q),

      GDW_TEXT("data", "shape", data.shape),
      GDW_REAL("data", "radius", data.radius),
      GDW_REAL("data", "mass", data.mass),
      GDW_REAL("data", "amplitude", data.amplitude),

      GDW_REAL("sweep", "eps_min", sweep.eps_min),
      GDW_REAL("sweep", "eps_max", sweep.eps_max),
      {"sweep", "eps_count",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep.eps_count = static_cast<int>(to_integer("eps_count", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.sweep.eps_count); }},
      {"sweep", "threads",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep.threads = static_cast<int>(to_integer("threads", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.sweep.threads); }},
      {"sweep", "seed",
       [](ExperimentConfig& c, const std::string& v) {
         const auto s = to_integer("seed", v);
         if (s < 0) throw ConfigError("seed: must be nonnegative");
         c.sweep.seed = static_cast<std::uint64_t>(s);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.sweep.seed); }},
      {"sweep", "auto_retry",
       [](ExperimentConfig& c, const std::string& v) { c.sweep.auto_retry = to_bool("auto_retry", v); },
       [](const ExperimentConfig& c) { return std::string(c.sweep.auto_retry ? "true" : "false"); }},

      GDW_REAL("solver", "rtol", solver.rtol),
      GDW_REAL("solver", "atol", solver.atol),
      GDW_REAL("solver", "dt_initial", solver.dt_initial),
      GDW_REAL("solver", "dt_min", solver.dt_min),
      GDW_REAL("solver", "dt_max", solver.dt_max),
      {"solver", "thresholds",
       [](ExperimentConfig& c, const std::string& v) { c.solver.thresholds = to_reals("thresholds", v); },
       [](const ExperimentConfig& c) { return join(c.solver.thresholds); }},
      GDW_REAL("solver", "t_max", solver.t_max),
      GDW_REAL("solver", "boundary_tolerance", solver.boundary_tolerance),
      GDW_REAL("solver", "growth_cap", solver.growth_cap),
      GDW_REAL("solver", "snapshot_interval", solver.snapshot_interval),
      GDW_REAL("solver", "snapshot_until", solver.snapshot_until),
      {"solver", "max_steps",
       [](ExperimentConfig& c, const std::string& v) {
         const auto s = to_integer("max_steps", v);
         if (s <= 0) throw ConfigError("max_steps: must be positive");
         c.solver.max_steps = static_cast<std::size_t>(s);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.solver.max_steps); }},

      GDW_REAL("cutoff", "beta_margin", beta_margin),
      {"cutoff", "R_ladder",
       [](ExperimentConfig& c, const std::string& v) { c.R_ladder = to_reals("R_ladder", v); },
       [](const ExperimentConfig& c) { return join(c.R_ladder); }},
      {"cutoff", "quad_points",
       [](ExperimentConfig& c, const std::string& v) {
         const auto s = to_integer("quad_points", v);
         if (s < 2) throw ConfigError("quad_points: must be at least 2");
         c.quad_points = static_cast<std::size_t>(s);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.quad_points); }},

      GDW_TEXT("fit", "model", fit_model),

      {"curve", "pairs",
       [](ExperimentConfig& c, const std::string& v) {
         c.curve_pairs.clear();
         for (const auto& item : split(v, ',')) {
           const auto pq = split(item, ':');
           if (pq.size() != 2) throw ConfigError("pairs: expected p:q items, got '" + item + "'");
           c.curve_pairs.emplace_back(to_real("pairs", pq[0]), to_real("pairs", pq[1]));
         }
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.curve_pairs.size(); ++i) {
           s += (i ? ", " : "") + format_real(c.curve_pairs[i].first) + ":" +
                format_real(c.curve_pairs[i].second);
         }
         return s;
       }},

      GDW_TEXT("output", "dir", output_dir),
  };
  return table;
}

#undef GDW_REAL
#undef GDW_TEXT

}  // namespace

void ExperimentConfig::validate() const {
  if (graph.kind != "lattice" && graph.kind != "file") {
    throw ConfigError("graph.kind: expected lattice or file, got '" + graph.kind + "'");
  }
  if (graph.kind == "lattice") {
    if (graph.dim < 1) throw ConfigError("graph.dim: must be at least 1");
    if (graph.radius < 1) throw ConfigError("graph.radius: must be at least 1");
  } else if (graph.file.empty()) {
    throw ConfigError("graph.file: required when graph.kind = file");
  }
  if (graph.metric != "hop" && graph.metric != "euclidean") {
    throw ConfigError("graph.metric: expected hop or euclidean, got '" + graph.metric + "'");
  }
  if (!(graph.nu >= 0.0 && graph.nu <= 1.0)) throw ConfigError("graph.nu: must lie in [0, 1]");
  if (!(p > 1.0)) throw ConfigError("problem.p: must exceed 1");
  if (kind == ProblemKind::system && !(q > 1.0)) throw ConfigError("problem.q: must exceed 1");
  if (data.shape != "bump" && data.shape != "indicator" && data.shape != "random") {
    throw ConfigError("data.shape: expected bump, indicator or random, got '" + data.shape + "'");
  }
  if (!(data.radius >= 0.0)) throw ConfigError("data.radius: must be nonnegative");
  if (!(data.mass > 0.0)) throw ConfigError("data.mass: must be positive");
  if (!(data.amplitude > 0.0)) throw ConfigError("data.amplitude: must be positive");
  if (sweep.eps_count < 1) throw ConfigError("sweep.eps_count: the epsilon grid is empty");
  if (!(sweep.eps_min > 0.0)) throw ConfigError("sweep.eps_min: must be positive");
  if (!(sweep.eps_max >= sweep.eps_min)) throw ConfigError("sweep.eps_max: must be >= eps_min");
  if (sweep.eps_count == 1 && sweep.eps_max != sweep.eps_min) {
    throw ConfigError("sweep.eps_count: a one-point grid needs eps_min = eps_max");
  }
  if (sweep.threads < 0) throw ConfigError("sweep.threads: must be nonnegative");
  if (!(beta_margin >= 0.0)) throw ConfigError("cutoff.beta_margin: must be nonnegative");
  for (double R : R_ladder) {
    if (!(R > 0.0)) throw ConfigError("cutoff.R_ladder: radii must be positive");
  }
  if (fit_model != "auto" && fit_model != "power" && fit_model != "exponential") {
    throw ConfigError("fit.model: expected auto, power or exponential");
  }
  for (const auto& [a, b] : curve_pairs) {
    if (!(a > 1.0 && b > 1.0)) throw ConfigError("curve.pairs: powers must exceed 1");
  }
  try {
    solver.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
}

std::vector<double> ExperimentConfig::epsilon_grid() const {
  std::vector<double> out;
  if (sweep.eps_count == 1) return {sweep.eps_min};
  const double lo = std::log(sweep.eps_min);
  const double hi = std::log(sweep.eps_max);
  for (int i = 0; i < sweep.eps_count; ++i) {
    if (i == 0) {
      out.push_back(sweep.eps_min);
    } else if (i + 1 == sweep.eps_count) {
      out.push_back(sweep.eps_max);
    } else {
      out.push_back(std::exp(lo + (hi - lo) * i / (sweep.eps_count - 1)));
    }
  }
  return out;
}

double ExperimentConfig::beta() const {
  const std::optional<double> qq = kind == ProblemKind::system ? std::optional<double>(q) : std::nullopt;
  return default_beta(p, qq) - 1.0 + beta_margin;
}

ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : body) {
      const auto& table = fields();
      const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == table.end()) throw ConfigError("unknown key [" + section + "] " + key);
      try {
        it->set(config, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError("[" + section + "] " + e.what());
      }
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

std::string render_config(const ExperimentConfig& config) {
  std::ostringstream os;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) os << '\n';
      os << '[' << f.section << "]\n";
      current = f.section;
    }
    os << f.key << " = " << f.get(config) << '\n';
  }
  return os.str();
}

}  // namespace gdw
