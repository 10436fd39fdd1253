#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gdw/config.hpp"
#include "gdw/cutoff.hpp"
#include "gdw/errors.hpp"
#include "gdw/experiments.hpp"
#include "gdw/functionals.hpp"
#include "gdw/graph.hpp"
#include "gdw/metric.hpp"
#include "gdw/solver.hpp"

namespace py = pybind11;
using namespace gdw;

namespace {

ExperimentConfig config_from(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

py::dict record_dict(const LifespanRecord& r) {
  py::dict d;
  d["epsilon"] = r.epsilon;
  d["T_est"] = r.T_est ? py::object(py::float_(*r.T_est)) : py::object(py::none());
  d["verdict"] = to_string(r.verdict);
  py::list ladder;
  for (const auto& pt : r.threshold_ladder) ladder.append(py::make_tuple(pt.threshold, pt.time));
  d["threshold_ladder"] = ladder;
  d["ladder_converged"] = r.ladder_converged;
  d["low_confidence"] = r.low_confidence;
  d["fitted_ladder_exponent"] = r.fitted_ladder_exponent;
  d["t_end"] = r.t_end;
  d["steps"] = r.steps;
  d["settings_hash"] = r.settings_hash;
  d["note"] = r.note;
  return d;
}

py::dict fit_dict(const ScalingFit& f) {
  py::dict d;
  d["model"] = to_string(f.model);
  d["kappa"] = f.kappa;
  d["slope"] = f.slope;
  d["intercept"] = f.intercept;
  d["r_squared"] = f.r_squared;
  d["predicted_slope"] = f.predicted_slope;
  d["relative_error"] = f.relative_error;
  d["agreement"] = f.agreement;
  d["points"] = f.points;
  py::list ex;
  for (const auto& e : f.excluded) ex.append(py::make_tuple(e.epsilon, e.reason));
  d["excluded"] = ex;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Damped wave blow-up experiments on weighted graphs";

  // translators run newest first, so register bases before subclasses
  const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  const auto domain = py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NoPredictionError>(m, "NoPredictionError", domain.ptr());

  py::class_<WeightedGraph>(m, "Graph")
      .def_property_readonly("size", &WeightedGraph::size)
      .def_property_readonly("lattice_dim", &WeightedGraph::lattice_dim)
      .def("id", &WeightedGraph::id)
      .def("index_of", &WeightedGraph::index_of)
      .def("mu", &WeightedGraph::mu)
      .def("is_boundary", &WeightedGraph::is_boundary)
      .def(
          "laplacian",
          [](const WeightedGraph& g, py::array_t<double, py::array::c_style | py::array::forcecast> f) {
            if (f.ndim() != 1 || static_cast<std::size_t>(f.shape(0)) != g.size()) {
              throw DomainError("expected a vector with one value per vertex");
            }
            py::array_t<double> out(f.shape(0));
            g.dirichlet_laplacian(std::span<const double>(f.data(), g.size()),
                                  std::span<double>(out.mutable_data(), g.size()));
            return out;
          },
          py::arg("f"), "Laplacian with zero values outside the stored patch.")
      .def("to_text", [](const WeightedGraph& g) {
        std::ostringstream os;
        write_graph(os, g);
        return os.str();
      });

  m.def("build_lattice", [](int n, int radius) { return build_lattice(n, radius); }, py::arg("n"),
        py::arg("radius"));
  m.def("read_graph", [](const std::string& text) {
    std::istringstream in(text);
    return read_graph(in);
  });
  m.def(
      "distances",
      [](const WeightedGraph& g, std::size_t x0, const std::string& metric) {
        const auto gm = metric == "euclidean" ? euclidean_metric(g, x0) : compute_metric(g, x0);
        return py::make_tuple(gm.dist, gm.jump_size, gm.trusted_radius);
      },
      py::arg("graph"), py::arg("x0"), py::arg("metric") = "hop",
      "(distance list, jump size, trusted radius) from x0.");

  m.def("gamma", &gamma_pq, py::arg("p"), py::arg("q"));
  m.def("fujita", &fujita, py::arg("n"));
  m.def(
      "predicted_lifespan_model",
      [](const std::string& kind, double n, double nu, double p, std::optional<double> q) {
        const auto lm = predicted_lifespan_model(parse_problem_kind(kind), n, nu, p, q);
        py::dict d;
        d["model"] = to_string(lm.model);
        d["predicted_slope"] = lm.predicted_slope;
        d["kappa"] = lm.kappa;
        d["critical"] = lm.critical;
        return d;
      },
      py::arg("kind"), py::arg("n"), py::arg("nu"), py::arg("p"), py::arg("q") = py::none());

  m.def("phi", &phi, py::arg("r"));
  m.def("phi_star", &phi_star, py::arg("r"));
  m.def("default_beta", &default_beta, py::arg("p"), py::arg("q") = py::none());

  m.def("default_config", [] { return render_config(ExperimentConfig{}); });
  m.def(
      "normalize_config", [](const std::string& text) { return render_config(config_from(text)); },
      "Parse a config and render it with every key.");
  m.def(
      "config_hash", [](const std::string& text) { return config_hash(config_from(text)); });

  m.def(
      "estimate_lifespan",
      [](const std::string& config_text, double epsilon) {
        const auto config = config_from(config_text);
        const auto ex = build_experiment(config);
        ProblemSpec spec = ex.problem;
        spec.epsilon = epsilon;
        LifespanRecord rec;
        {
          py::gil_scoped_release release;
          rec = estimate_lifespan(ex.graph, spec, config.solver);
        }
        return record_dict(rec);
      },
      py::arg("config"), py::arg("epsilon"));

  m.def(
      "lifespan_sweep",
      [](const std::string& config_text, const std::string& manifest) {
        const auto config = config_from(config_text);
        SweepOptions opt;
        opt.manifest_path = manifest;
        SweepResult result;
        {
          py::gil_scoped_release release;
          result = lifespan_sweep(config, opt);
        }
        py::list out;
        for (const auto& s : result.records) {
          auto d = record_dict(s.record);
          d["radius"] = s.radius;
          d["retried"] = s.retried;
          d["excluded"] = s.excluded;
          d["exclusion_reason"] = s.exclusion_reason;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("manifest") = "");

  m.def(
      "fit_scaling",
      [](const std::vector<std::pair<double, double>>& points, const std::string& model, double kappa,
         std::optional<double> predicted_slope, std::size_t min_points) {
        std::vector<LifespanRecord> recs;
        for (const auto& [eps, T] : points) {
          LifespanRecord r;
          r.epsilon = eps;
          r.T_est = T;
          r.t_end = T;
          r.verdict = Verdict::blowup;
          recs.push_back(r);
        }
        return fit_dict(fit_scaling(recs, parse_fit_model(model), kappa, predicted_slope, min_points));
      },
      py::arg("points"), py::arg("model") = "power", py::arg("kappa") = 0.0,
      py::arg("predicted_slope") = py::none(), py::arg("min_points") = 5,
      "Least-squares fit of (epsilon, T) pairs.");
}
