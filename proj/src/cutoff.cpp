#include "gdw/cutoff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "gdw/csv.hpp"
#include "gdw/errors.hpp"

namespace gdw {

namespace {

// exp(-1/x) and its first two derivatives; below 2e-3 everything is 0 in
// double precision.
constexpr double kFlat = 2e-3;

double e0(double x) { return x > kFlat ? std::exp(-1.0 / x) : 0.0; }
double e1(double x) { return x > kFlat ? std::exp(-1.0 / x) / (x * x) : 0.0; }
double e2(double x) {
  if (x <= kFlat) return 0.0;
  const double inv = 1.0 / x;
  return std::exp(-inv) * (inv * inv * inv * inv - 2.0 * inv * inv * inv);
}

struct Step {
  double g, dg, d2g;
};

// g(s) = e(1-s) / (e(1-s) + e(s)) on (0, 1) with derivatives.
Step step(double s) {
  const double a = e0(1.0 - s);
  const double b = e0(s);
  const double da = -e1(1.0 - s);
  const double db = e1(s);
  const double d2a = e2(1.0 - s);
  const double d2b = e2(s);
  const double D = a + b;
  const double N = da * b - a * db;
  const double dN = d2a * b - a * d2b;
  const double dD = da + db;
  return {a / D, N / (D * D), (dN * D - 2.0 * N * dD) / (D * D * D)};
}

void check_radius(double r) {
  if (!(r >= 0.0)) throw DomainError("cutoff argument must be nonnegative");
}

}  // namespace

double phi(double r) {
  check_radius(r);
  if (r <= 0.5) return 1.0;
  if (r >= 1.0) return 0.0;
  return step(2.0 * r - 1.0).g;
}

double phi_prime(double r) {
  check_radius(r);
  if (r <= 0.5 || r >= 1.0) return 0.0;
  return 2.0 * step(2.0 * r - 1.0).dg;
}

double phi_second(double r) {
  check_radius(r);
  if (r <= 0.5 || r >= 1.0) return 0.0;
  return 4.0 * step(2.0 * r - 1.0).d2g;
}

double phi_star(double r) {
  check_radius(r);
  return r < 0.5 ? 0.0 : phi(r);
}

double alpha_for_nu(double nu) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("nu must lie in [0, 1]");
  return 2.0 * (1.0 - nu) / (1.0 + nu);
}

double default_beta(double p, std::optional<double> q) {
  const double m = q ? std::min(p, *q) : p;
  if (!(m > 1.0)) throw DomainError("powers must exceed 1");
  return std::ceil(2.0 / (m - 1.0) - 1e-12) + 1.0;
}

CutoffParams CutoffParams::automatic(double nu, double R, std::size_t x0, double p,
                                     std::optional<double> q) {
  CutoffParams params;
  params.nu = nu;
  params.alpha = alpha_for_nu(nu);
  params.beta = default_beta(p, q);
  params.R = R;
  params.x0 = x0;
  return params;
}

// --------------------------------------------------------------------------

SpaceTimeCutoff::SpaceTimeCutoff(const CutoffParams& params, const GraphMetric& metric)
    : params_(params), metric_(&metric) {
  if (!(params.R > 0.0)) throw DomainError("cutoff radius R must be positive");
  if (!(params.alpha >= 0.0) || !(params.beta >= 0.0)) {
    throw DomainError("cutoff exponents alpha and beta must be nonnegative");
  }
  if (params.x0 != metric.base) throw DomainError("cutoff centre differs from the metric base");
  const double R2 = params.R * params.R;
  inv_R4_ = 1.0 / (R2 * R2);
}

double SpaceTimeCutoff::argument(double t, std::size_t x) const {
  if (!(t >= 0.0)) throw DomainError("time must be nonnegative");
  const double d = metric_->dist.at(x);
  const double d2 = d * d;
  return (std::pow(t, params_.alpha + 2.0) + d2 * d2) * inv_R4_;
}

double SpaceTimeCutoff::value(double t, std::size_t x) const {
  const double f = phi(argument(t, x));
  return f == 1.0 ? 1.0 : std::pow(f, params_.beta + 2.0);
}

double SpaceTimeCutoff::star(double t, std::size_t x) const {
  return std::pow(phi_star(argument(t, x)), params_.beta + 2.0);
}

std::array<double, 2> SpaceTimeCutoff::time_derivatives(double t, std::size_t x) const {
  const double s = argument(t, x);
  const double dphi = phi_prime(s);
  if (dphi == 0.0 && phi_second(s) == 0.0) return {0.0, 0.0};
  const double a = params_.alpha;
  const double b = params_.beta;
  const double f = phi(s);
  const double d2phi = phi_second(s);
  const double fb = std::pow(f, b);
  const double fb1 = fb * f;
  const double first = (a + 2.0) * (b + 2.0) * std::pow(t, a + 1.0) * inv_R4_ * fb1 * dphi;
  const double t_a = std::pow(t, a);
  const double t_2a2 = std::pow(t, 2.0 * a + 2.0);
  const double inv_R8 = inv_R4_ * inv_R4_;
  const double second = (a + 2.0) * (a + 1.0) * (b + 2.0) * t_a * inv_R4_ * fb1 * dphi +
                        (a + 2.0) * (a + 2.0) * (b + 1.0) * (b + 2.0) * t_2a2 * inv_R8 * fb *
                            dphi * dphi +
                        (a + 2.0) * (a + 2.0) * (b + 2.0) * t_2a2 * inv_R8 * fb1 * d2phi;
  return {first, second};
}

double SpaceTimeCutoff::laplacian(const WeightedGraph& graph, double t, std::size_t x) const {
  const double fx = value(t, x);
  double acc = 0.0;
  for (const auto& nb : graph.neighbors(x)) acc += nb.weight * (value(t, nb.index) - fx);
  return acc / graph.mu(x);
}

double SpaceTimeCutoff::time_support() const {
  return std::pow(params_.R, 4.0 / (params_.alpha + 2.0));
}

// --------------------------------------------------------------------------

CutoffBoundsReport verify_cutoff_bounds(const CutoffParams& params, const WeightedGraph& graph,
                             const GraphMetric& metric, std::span<const double> t_samples,
                             std::span<const std::size_t> vertex_samples) {
  if (!(params.R > metric.jump_size)) throw DomainError("verification needs R > L");
  const SpaceTimeCutoff cutoff(params, metric);
  const double a = params.alpha;
  const double b = params.beta;
  const double R = params.R;
  const double R4 = std::pow(R, 4.0);
  const double R8 = R4 * R4;
  const double scale1 = std::pow(R, 4.0 / (a + 2.0));
  const double scale2 = std::pow(R, 8.0 / (a + 2.0));
  const double scale3 = std::pow(R, 1.0 + params.nu);

  CutoffBoundsReport report;
  report.R = R;
  auto record = [](BoundResult& bound, double ratio, double t, std::size_t x) {
    ++bound.counted;
    if (ratio > bound.sup_ratio || bound.counted == 1) {
      bound.sup_ratio = ratio;
      bound.argmax_t = t;
      bound.argmax_vertex = x;
    }
  };

  for (std::size_t x : vertex_samples) {
    if (x >= graph.size()) throw DomainError("vertex sample out of range");
    if (graph.is_boundary(x)) {
      throw DomainError("vertex '" + graph.id(x) + "' has an incomplete neighbourhood");
    }
  }

  for (double t : t_samples) {
    for (std::size_t x : vertex_samples) {
      ++report.samples;
      const double s = cutoff.argument(t, x);
      const auto [dt, dtt] = cutoff.time_derivatives(t, x);
      report.sup_abs_dt = std::max(report.sup_abs_dt, std::abs(dt));
      const bool on_support = s >= 0.5 && s < 1.0;
      const double f = phi(s);

      if (on_support && f > 0.0) {
        // Ratios with the common power of phi cancelled analytically.
        const double fp = phi_prime(s);
        const double fpp = phi_second(s);
        const double ratio1 =
            (a + 2.0) * (b + 2.0) * std::pow(t, a + 1.0) / R4 * std::abs(fp) * scale1;
        const double t2 = std::pow(t, 2.0 * a + 2.0);
        const double ratio2 =
            std::abs((a + 2.0) * (a + 1.0) * (b + 2.0) * std::pow(t, a) / R4 * f * fp +
                     (a + 2.0) * (a + 2.0) * (b + 1.0) * (b + 2.0) * t2 / R8 * fp * fp +
                     (a + 2.0) * (a + 2.0) * (b + 2.0) * t2 / R8 * f * fpp) *
            scale2;
        record(report.bounds[0], ratio1, t, x);
        record(report.bounds[1], ratio2, t, x);

        // -Delta Phi_R(x) / phi(s_x)^{beta+1}
        //   = (1/mu) sum omega (phi_x - phi_y (phi_y/phi_x)^{beta+1})
        double scaled = 0.0;
        double lap_sign = 0.0;
        for (const auto& nb : graph.neighbors(x)) {
          const double fy = phi(cutoff.argument(t, nb.index));
          scaled += nb.weight * (f - fy * std::pow(fy / f, b + 1.0));
          lap_sign += nb.weight * (cutoff.value(t, nb.index) - cutoff.value(t, x));
        }
        scaled *= scale3 / graph.mu(x);
        record(report.bounds[2], std::max(scaled, 0.0), t, x);
        report.laplacian.abs_sup_ratio = std::max(report.laplacian.abs_sup_ratio, std::abs(scaled));
        if (lap_sign > 0.0) ++report.laplacian.sign_anomalies;
      } else {
        if (dt != 0.0) ++report.bounds[0].violations;
        if (dtt != 0.0) ++report.bounds[1].violations;
        if (!on_support) {
          const double lap = cutoff.laplacian(graph, t, x);
          if (lap != 0.0) {
            ++report.laplacian.off_support;
            report.laplacian.off_support_max_abs =
                std::max(report.laplacian.off_support_max_abs, std::abs(lap));
          }
        }
      }
    }
  }
  if (report.bounds[0].counted == 0) {
    throw InsufficientDataError("no sample lies in the support of Phi*_R");
  }
  return report;
}

CutoffBoundsReport verify_cutoff_bounds_grid(const CutoffParams& params, const WeightedGraph& graph,
                                  const GraphMetric& metric, std::size_t time_count) {
  if (time_count < 2) throw DomainError("need at least two time samples");
  const double reach = params.R + metric.jump_size;
  if (reach >= metric.trusted_radius) {
    throw RangeError("B(x0, R + L) does not fit inside the stored truncation");
  }
  std::vector<std::size_t> vertices;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (metric.dist[v] <= reach && !graph.is_boundary(v)) vertices.push_back(v);
  }
  const double horizon = std::pow(params.R, 4.0 / (params.alpha + 2.0));
  std::vector<double> times(time_count);
  for (std::size_t i = 0; i < time_count; ++i) {
    times[i] = horizon * static_cast<double>(i) / static_cast<double>(time_count - 1);
  }
  return verify_cutoff_bounds(params, graph, metric, times, vertices);
}

bool monotone_growth(std::span<const double> values, double tolerance) {
  if (values.size() < 2) return false;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[i - 1]) return false;
  }
  return values.back() > (1.0 + tolerance) * values.front();
}

void write_cutoff_bounds_csv(std::ostream& os, const WeightedGraph& graph,
                       std::span<const CutoffBoundsReport> reports) {
  CsvWriter csv(os);
  csv.row({"R", "bound_id", "sup_ratio", "argmax_t", "argmax_vertex", "violations",
           "abs_sup_ratio", "sign_anomalies", "off_support"});
  for (const auto& rep : reports) {
    for (std::size_t k = 0; k < rep.bounds.size(); ++k) {
      const auto& b = rep.bounds[k];
      const bool lap = k == 2;
      csv.row({format_real(rep.R), std::to_string(k + 1), format_real(b.sup_ratio),
               format_real(b.argmax_t), graph.id(b.argmax_vertex), std::to_string(b.violations),
               lap ? format_real(rep.laplacian.abs_sup_ratio) : "",
               lap ? std::to_string(rep.laplacian.sign_anomalies) : "",
               lap ? std::to_string(rep.laplacian.off_support) : ""});
    }
  }
}

}  // namespace gdw
