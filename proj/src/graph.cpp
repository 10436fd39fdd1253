#include "gdw/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

#include "gdw/csv.hpp"
#include "gdw/errors.hpp"

namespace gdw {

// --------------------------------------------------------------------------
// WeightedGraph

const std::string& WeightedGraph::id(std::size_t v) const { return ids_.at(v); }

std::optional<std::size_t> WeightedGraph::find(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t WeightedGraph::index_of(std::string_view id) const {
  if (auto v = find(id)) return *v;
  throw DomainError("unknown vertex '" + std::string(id) + "'");
}

std::span<const Neighbor> WeightedGraph::neighbors(std::size_t v) const {
  if (v >= size()) throw DomainError("vertex index out of range");
  return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

double WeightedGraph::weight(std::size_t a, std::size_t b) const {
  for (const auto& nb : neighbors(a)) {
    if (nb.index == b) return nb.weight;
  }
  return 0.0;
}

bool WeightedGraph::has_boundary() const noexcept {
  return std::any_of(exterior_.begin(), exterior_.end(), [](double w) { return w > 0.0; });
}

std::span<const int> WeightedGraph::coords(std::size_t v) const {
  if (lattice_dim_ == 0) throw DomainError("graph is not a lattice patch");
  if (v >= size()) throw DomainError("vertex index out of range");
  const auto n = static_cast<std::size_t>(lattice_dim_);
  return {coords_.data() + v * n, n};
}

double WeightedGraph::laplacian(std::span<const double> f, std::size_t x) const {
  const double fx = f[x];
  double acc = 0.0;
  for (std::size_t k = offsets_[x]; k < offsets_[x + 1]; ++k) {
    acc += adjacency_[k].weight * (f[adjacency_[k].index] - fx);
  }
  return acc / mu_[x];
}

void WeightedGraph::dirichlet_laplacian(std::span<const double> f, std::span<double> out) const {
  const std::size_t n = size();
  for (std::size_t x = 0; x < n; ++x) {
    const double fx = f[x];
    double acc = -exterior_[x] * fx;
    for (std::size_t k = offsets_[x]; k < offsets_[x + 1]; ++k) {
      acc += adjacency_[k].weight * (f[adjacency_[k].index] - fx);
    }
    out[x] = acc / mu_[x];
  }
}

// --------------------------------------------------------------------------
// GraphBuilder

std::size_t GraphBuilder::add_vertex(std::string id, double mu) {
  if (id.empty() || id.find_first_of(" \t\r\n#") != std::string::npos) {
    throw DomainError("vertex identifiers must be non-empty and free of whitespace and '#'");
  }
  const std::size_t index = ids_.size();
  auto [it, inserted] = lookup_.emplace(id, index);
  if (!inserted) throw DomainError("duplicate vertex '" + id + "'");
  ids_.push_back(std::move(id));
  mu_.push_back(mu);
  exterior_.push_back(0.0);
  return index;
}

std::size_t GraphBuilder::index_of(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) throw DomainError("unknown vertex '" + std::string(id) + "'");
  return it->second;
}

void GraphBuilder::add_edge(std::size_t a, std::size_t b, double omega) {
  if (a >= size() || b >= size()) throw DomainError("edge endpoint out of range");
  if (a == b) throw DomainError("self loop at vertex '" + ids_[a] + "'");
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    throw DomainError("edge weights must be finite and nonnegative");
  }
  const auto key = std::minmax(a, b);
  auto it = directed_.find(key);
  if (it != directed_.end()) {
    throw DomainError("duplicate edge '" + ids_[a] + "' - '" + ids_[b] + "'");
  }
  directed_[{a, b}] = omega;
  directed_[{b, a}] = omega;
}

void GraphBuilder::add_edge(std::string_view a, std::string_view b, double omega) {
  add_edge(index_of(a), index_of(b), omega);
}

void GraphBuilder::add_directed_weight(std::size_t from, std::size_t to, double omega) {
  if (from >= size() || to >= size()) throw DomainError("edge endpoint out of range");
  directed_[{from, to}] = omega;
}

void GraphBuilder::set_exterior_weight(std::size_t v, double weight) {
  if (v >= size()) throw DomainError("vertex index out of range");
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw DomainError("exterior weight must be finite and nonnegative");
  }
  exterior_[v] = weight;
}

void GraphBuilder::set_lattice_coords(int dim, std::vector<int> coords) {
  lattice_dim_ = dim;
  coords_ = std::move(coords);
}

WeightedGraph GraphBuilder::build() && {
  for (std::size_t v = 0; v < size(); ++v) {
    if (!(mu_[v] > 0.0) || !std::isfinite(mu_[v])) {
      throw DomainError("vertex '" + ids_[v] + "' needs a positive finite measure");
    }
  }
  for (const auto& [key, w] : directed_) {
    if (key.first == key.second) throw DomainError("self loop at vertex '" + ids_[key.first] + "'");
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("edge weights must be finite and nonnegative");
    auto mirror = directed_.find({key.second, key.first});
    if (mirror == directed_.end() || mirror->second != w) {
      throw DomainError("asymmetric weight between '" + ids_[key.first] + "' and '" +
                        ids_[key.second] + "'");
    }
  }
  return assemble();
}

WeightedGraph GraphBuilder::build_unchecked() && { return assemble(); }

WeightedGraph GraphBuilder::assemble() {
  WeightedGraph g;
  const std::size_t n = ids_.size();
  g.offsets_.assign(n + 1, 0);
  for (const auto& [key, w] : directed_) {
    if (w > 0.0) ++g.offsets_[key.first + 1];
  }
  for (std::size_t v = 0; v < n; ++v) g.offsets_[v + 1] += g.offsets_[v];
  g.adjacency_.resize(g.offsets_[n]);
  std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
  std::size_t undirected = 0;
  // std::map iteration keeps each row sorted by neighbour index.
  for (const auto& [key, w] : directed_) {
    if (w <= 0.0) continue;
    g.adjacency_[fill[key.first]++] = Neighbor{key.second, w};
    if (key.first < key.second) ++undirected;
  }
  g.edge_count_ = undirected;
  g.ids_ = std::move(ids_);
  g.lookup_ = std::move(lookup_);
  g.mu_ = std::move(mu_);
  g.exterior_ = std::move(exterior_);
  g.lattice_dim_ = lattice_dim_;
  g.coords_ = std::move(coords_);
  directed_.clear();
  return g;
}

// --------------------------------------------------------------------------
// GraphFunction

double GraphFunction::operator()(std::size_t v) const {
  auto it = values.find(v);
  return it == values.end() ? fallback : it->second;
}

std::vector<double> GraphFunction::dense(std::size_t n) const {
  std::vector<double> out(n, fallback);
  for (const auto& [v, x] : values) {
    if (v < n) out[v] = x;
  }
  return out;
}

GraphFunction GraphFunction::from_dense(std::span<const double> values) {
  GraphFunction f;
  for (std::size_t v = 0; v < values.size(); ++v) {
    if (values[v] != 0.0) f.values.emplace(v, values[v]);
  }
  return f;
}

// --------------------------------------------------------------------------
// Operations

double laplacian_at(const WeightedGraph& graph, const GraphFunction& f, std::size_t x) {
  if (x >= graph.size()) throw DomainError("unknown vertex index " + std::to_string(x));
  const double fx = f(x);
  double acc = 0.0;
  for (const auto& nb : graph.neighbors(x)) acc += nb.weight * (f(nb.index) - fx);
  return acc / graph.mu(x);
}

double integration_by_parts_defect(const WeightedGraph& graph, const GraphFunction& f,
                                   const GraphFunction& g) {
  if (!f.finitely_supported() || !g.finitely_supported()) {
    throw DomainError("integration by parts needs finitely supported functions");
  }
  auto check = [&](const GraphFunction& h) {
    for (const auto& [v, value] : h.values) {
      if (v >= graph.size()) throw DomainError("support vertex outside the graph");
      if (value != 0.0 && graph.is_boundary(v)) {
        throw DomainError("support touches vertex '" + graph.id(v) +
                          "' whose neighbourhood is not fully stored");
      }
    }
  };
  check(f);
  check(g);
  // Sum each side over the support of its undifferentiated factor.
  double lhs = 0.0;
  for (const auto& [x, gx] : g.values) lhs += laplacian_at(graph, f, x) * gx * graph.mu(x);
  double rhs = 0.0;
  for (const auto& [x, fx] : f.values) rhs += fx * laplacian_at(graph, g, x) * graph.mu(x);
  return lhs - rhs;
}

std::size_t l1_ball_count(int n, int radius) {
  if (n < 1 || radius < 0) throw DomainError("l1_ball_count needs n >= 1 and radius >= 0");
  // sum_k 2^k C(n,k) C(radius,k), accumulated in floating point to detect overflow.
  long double total = 0.0L;
  long double cn = 1.0L;
  long double cr = 1.0L;
  long double pow2 = 1.0L;
  for (int k = 0; k <= std::min(n, radius); ++k) {
    total += pow2 * cn * cr;
    cn = cn * (n - k) / (k + 1);
    cr = cr * (radius - k) / (k + 1);
    pow2 *= 2.0L;
  }
  if (total > 1e18L) return static_cast<std::size_t>(-1);
  return static_cast<std::size_t>(std::llround(static_cast<double>(total)));
}

std::string lattice_id(std::span<const int> coords) {
  std::string out;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(coords[i]);
  }
  return out;
}

WeightedGraph build_lattice(int n, int radius, std::size_t max_vertices) {
  if (n < 1) throw DomainError("lattice dimension must be >= 1");
  if (radius < 1) throw DomainError("lattice radius must be >= 1");
  const std::size_t count = l1_ball_count(n, radius);
  if (count > max_vertices) {
    throw CapacityError("lattice Z^" + std::to_string(n) + " with radius " +
                        std::to_string(radius) + " has " + std::to_string(count) +
                        " vertices, above the cap of " + std::to_string(max_vertices));
  }

  GraphBuilder builder;
  std::vector<int> all_coords;
  all_coords.reserve(count * static_cast<std::size_t>(n));
  std::vector<int> point(static_cast<std::size_t>(n), 0);
  const double mu = 2.0 * n;

  // Lexicographic enumeration of the l1 ball.
  std::function<void(int, int)> enumerate = [&](int axis, int budget) {
    if (axis == n) {
      builder.add_vertex(lattice_id(point), mu);
      all_coords.insert(all_coords.end(), point.begin(), point.end());
      return;
    }
    for (int c = -budget; c <= budget; ++c) {
      point[static_cast<std::size_t>(axis)] = c;
      enumerate(axis + 1, budget - std::abs(c));
    }
    point[static_cast<std::size_t>(axis)] = 0;
  };
  enumerate(0, radius);

  for (std::size_t v = 0; v < count; ++v) {
    std::span<const int> c{all_coords.data() + v * static_cast<std::size_t>(n),
                           static_cast<std::size_t>(n)};
    int norm = 0;
    for (int x : c) norm += std::abs(x);
    std::vector<int> nb(c.begin(), c.end());
    for (int axis = 0; axis < n; ++axis) {
      nb[static_cast<std::size_t>(axis)] += 1;
      if (norm + (c[static_cast<std::size_t>(axis)] >= 0 ? 1 : -1) <= radius) {
        builder.add_edge(v, builder.index_of(lattice_id(nb)), 1.0);
      }
      nb[static_cast<std::size_t>(axis)] -= 1;
    }
    if (norm == radius) {
      // Moves that increase the l1 norm leave the ball: one per nonzero
      // coordinate, two per zero coordinate.
      int outside = 0;
      for (int axis = 0; axis < n; ++axis) {
        const int x = c[static_cast<std::size_t>(axis)];
        outside += (x == 0) ? 2 : 1;
      }
      builder.set_exterior_weight(v, static_cast<double>(outside));
    }
  }
  builder.set_lattice_coords(n, std::move(all_coords));
  return std::move(builder).build();
}

bool is_connected(const WeightedGraph& graph) {
  if (graph.size() == 0) return true;
  std::vector<char> seen(graph.size(), 0);
  std::queue<std::size_t> queue;
  queue.push(0);
  seen[0] = 1;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const auto x = queue.front();
    queue.pop();
    for (const auto& nb : graph.neighbors(x)) {
      if (!seen[nb.index]) {
        seen[nb.index] = 1;
        ++visited;
        queue.push(nb.index);
      }
    }
  }
  return visited == graph.size();
}

ValidationReport validate_structure(const WeightedGraph& graph, double c_bound) {
  ValidationReport report;
  report.c_bound = c_bound;
  for (std::size_t x = 0; x < graph.size(); ++x) {
    if (!(graph.mu(x) > 0.0)) report.positive_measure = false;
    double total = 0.0;
    for (const auto& nb : graph.neighbors(x)) {
      if (nb.index == x) report.zero_diagonal = false;
      if (graph.weight(nb.index, x) != nb.weight) report.symmetric = false;
      total += nb.weight;
    }
    const double ratio = total / graph.mu(x);
    if (ratio > report.weight_ratio) {
      report.weight_ratio = ratio;
      report.weight_ratio_argmax = x;
    }
  }
  report.connected = is_connected(graph);
  report.weight_bound_ok = report.weight_ratio <= c_bound;
  return report;
}

// --------------------------------------------------------------------------
// Text format

void write_graph(std::ostream& os, const WeightedGraph& graph) {
  os << "graph " << graph.size() << '\n';
  for (std::size_t v = 0; v < graph.size(); ++v) {
    os << "v " << graph.id(v) << ' ' << format_real(graph.mu(v)) << '\n';
  }
  for (std::size_t v = 0; v < graph.size(); ++v) {
    for (const auto& nb : graph.neighbors(v)) {
      if (nb.index > v) {
        os << "e " << graph.id(v) << ' ' << graph.id(nb.index) << ' ' << format_real(nb.weight)
           << '\n';
      }
    }
  }
  for (std::size_t v = 0; v < graph.size(); ++v) {
    if (graph.is_boundary(v)) {
      os << "b " << graph.id(v) << ' ' << format_real(graph.exterior_weight(v)) << '\n';
    }
  }
}

WeightedGraph read_graph(std::istream& is) {
  GraphBuilder builder;
  std::optional<std::size_t> declared;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("graph file line " + std::to_string(line_no) + ": " + what);
  };
  auto parse_real = [&](const std::string& token) {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      throw fail("expected a number, got '" + token + "'");
    }
    if (used != token.size()) throw fail("expected a number, got '" + token + "'");
    return value;
  };

  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream in(line);
    std::string tag;
    if (!(in >> tag)) continue;
    std::vector<std::string> args;
    for (std::string tok; in >> tok;) args.push_back(tok);
    try {
      if (tag == "graph") {
        if (args.size() != 1 || declared) throw fail("expected a single 'graph <num_vertices>' header");
        declared = static_cast<std::size_t>(parse_real(args[0]));
      } else if (tag == "v") {
        if (!declared) throw fail("vertex before 'graph' header");
        if (args.size() != 2) throw fail("expected 'v <id> <mu>'");
        builder.add_vertex(args[0], parse_real(args[1]));
      } else if (tag == "e") {
        if (args.size() != 3) throw fail("expected 'e <id1> <id2> <omega>'");
        builder.add_edge(args[0], args[1], parse_real(args[2]));
      } else if (tag == "b") {
        if (args.size() != 2) throw fail("expected 'b <id> <exterior_weight>'");
        builder.set_exterior_weight(builder.index_of(args[0]), parse_real(args[1]));
      } else {
        throw fail("unknown record '" + tag + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw fail(e.what());
    }
  }
  if (!declared) throw ParseError("graph file: missing 'graph <num_vertices>' header");
  if (*declared != builder.size()) {
    throw ParseError("graph file: header declares " + std::to_string(*declared) +
                     " vertices but " + std::to_string(builder.size()) + " were listed");
  }
  return std::move(builder).build();
}

void save_graph(const std::string& path, const WeightedGraph& graph) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write graph file '" + path + "'");
  write_graph(os, graph);
}

WeightedGraph load_graph(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open graph file '" + path + "'");
  return read_graph(is);
}

}  // namespace gdw
