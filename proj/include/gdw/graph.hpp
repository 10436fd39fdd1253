#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gdw {

struct Neighbor {
  std::size_t index;
  double weight;
};

/// A locally finite weighted graph (V, omega, mu), stored as a finite
/// truncation.
///
/// Vertices carry opaque string identifiers and are addressed internally by
/// dense indices [0, size()). Edge weights live in a CSR adjacency holding
/// both directions of every stored pair. Vertices whose neighbourhood was
/// clipped by the truncation carry a positive exterior weight: the total
/// weight of the edges that lead out of the stored region. The Dirichlet
/// Laplacian treats those missing neighbours as holding the value 0.
///
/// Immutable after construction; concurrent reads are safe.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  [[nodiscard]] std::size_t size() const noexcept { return mu_.size(); }
  [[nodiscard]] std::size_t edge_count() const noexcept { return edge_count_; }

  [[nodiscard]] const std::string& id(std::size_t v) const;
  [[nodiscard]] std::optional<std::size_t> find(std::string_view id) const;
  /// Throws DomainError for unknown identifiers.
  [[nodiscard]] std::size_t index_of(std::string_view id) const;

  [[nodiscard]] double mu(std::size_t v) const { return mu_.at(v); }
  [[nodiscard]] std::span<const double> measures() const noexcept { return mu_; }
  [[nodiscard]] std::span<const Neighbor> neighbors(std::size_t v) const;
  /// Weight stored for the directed pair (a, b); 0 when absent.
  [[nodiscard]] double weight(std::size_t a, std::size_t b) const;

  [[nodiscard]] double exterior_weight(std::size_t v) const { return exterior_.at(v); }
  [[nodiscard]] bool is_boundary(std::size_t v) const { return exterior_.at(v) > 0.0; }
  [[nodiscard]] bool has_boundary() const noexcept;

  /// Lattice dimension, or 0 for graphs that are not lattice patches.
  [[nodiscard]] int lattice_dim() const noexcept { return lattice_dim_; }
  [[nodiscard]] std::span<const int> coords(std::size_t v) const;

  /// (1/mu(x)) sum_{y~x} omega(x,y) (f(y) - f(x)) over the stored neighbours.
  [[nodiscard]] double laplacian(std::span<const double> f, std::size_t x) const;

  /// Laplacian with homogeneous Dirichlet data outside the truncation:
  /// out = Delta f - (exterior / mu) f. Equal to laplacian() on vertices
  /// with complete neighbourhoods.
  void dirichlet_laplacian(std::span<const double> f, std::span<double> out) const;

 private:
  friend class GraphBuilder;

  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<double> mu_;
  std::vector<double> exterior_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adjacency_;
  std::size_t edge_count_ = 0;
  int lattice_dim_ = 0;
  std::vector<int> coords_;
};

/// Incremental construction of a WeightedGraph.
///
/// add_edge() stores an unordered pair once and mirrors it, so symmetry holds
/// by construction. add_directed_weight() bypasses that and only exists so
/// that structural audits can be exercised on deliberately broken inputs;
/// graphs containing such entries must be finished with build_unchecked().
class GraphBuilder {
 public:
  std::size_t add_vertex(std::string id, double mu);
  void add_edge(std::size_t a, std::size_t b, double omega);
  void add_edge(std::string_view a, std::string_view b, double omega);
  void add_directed_weight(std::size_t from, std::size_t to, double omega);
  void set_exterior_weight(std::size_t v, double weight);
  void set_lattice_coords(int dim, std::vector<int> coords);

  [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
  [[nodiscard]] std::size_t index_of(std::string_view id) const;

  /// Validates mu > 0, omega >= 0, finiteness, no self loops and symmetry;
  /// throws DomainError on the first problem found.
  [[nodiscard]] WeightedGraph build() &&;
  [[nodiscard]] WeightedGraph build_unchecked() &&;

 private:
  WeightedGraph assemble();

  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<double> mu_;
  std::vector<double> exterior_;
  std::map<std::pair<std::size_t, std::size_t>, double> directed_;
  int lattice_dim_ = 0;
  std::vector<int> coords_;
};

/// A real function on the vertices: explicit values on finitely many
/// vertices plus a fallback value everywhere else (0 for compact support).
struct GraphFunction {
  std::map<std::size_t, double> values;
  double fallback = 0.0;

  [[nodiscard]] double operator()(std::size_t v) const;
  [[nodiscard]] bool finitely_supported() const noexcept { return fallback == 0.0; }
  [[nodiscard]] std::vector<double> dense(std::size_t n) const;
  static GraphFunction from_dense(std::span<const double> values);
};

/// Laplacian of f at x on the stored graph. Throws DomainError for an
/// unknown vertex.
[[nodiscard]] double laplacian_at(const WeightedGraph& graph, const GraphFunction& f,
                                  std::size_t x);

/// sum_x (Delta f)(x) g(x) mu(x) - sum_x f(x) (Delta g)(x) mu(x); zero up to
/// rounding whenever both supports sit on vertices with complete
/// neighbourhoods. Throws DomainError otherwise.
[[nodiscard]] double integration_by_parts_defect(const WeightedGraph& graph,
                                                 const GraphFunction& f,
                                                 const GraphFunction& g);

inline constexpr std::size_t kDefaultLatticeCap = 5'000'000;

/// Number of integer points with l1 norm <= radius in dimension n.
[[nodiscard]] std::size_t l1_ball_count(int n, int radius);

/// Induced subgraph of Z^n on the l1 ball of the given radius around the
/// origin: omega = 1 between nearest neighbours, mu = 2n, vertices at
/// distance exactly `radius` flagged as boundary. Throws CapacityError when
/// the ball holds more than `max_vertices` points.
[[nodiscard]] WeightedGraph build_lattice(int n, int radius,
                                          std::size_t max_vertices = kDefaultLatticeCap);

/// Identifier of the lattice vertex with the given coordinates ("1,-2,0").
[[nodiscard]] std::string lattice_id(std::span<const int> coords);

struct ValidationReport {
  bool symmetric = true;
  bool zero_diagonal = true;
  bool positive_measure = true;
  bool connected = true;
  /// sup_x sum_y omega(x,y) / mu(x)
  double weight_ratio = 0.0;
  std::size_t weight_ratio_argmax = 0;
  double c_bound = 1.0;
  bool weight_bound_ok = true;

  [[nodiscard]] bool all_pass() const noexcept {
    return symmetric && zero_diagonal && positive_measure && connected && weight_bound_ok;
  }
};

[[nodiscard]] ValidationReport validate_structure(const WeightedGraph& graph,
                                                  double c_bound = 1.0);

[[nodiscard]] bool is_connected(const WeightedGraph& graph);

/// Text format:
///   graph <num_vertices>
///   v <id> <mu>
///   e <id1> <id2> <omega>
///   b <id> <exterior_weight>      (optional, truncation boundary)
/// '#' starts a comment. Reals are written in shortest round-trip form.
void write_graph(std::ostream& os, const WeightedGraph& graph);
[[nodiscard]] WeightedGraph read_graph(std::istream& is);
void save_graph(const std::string& path, const WeightedGraph& graph);
[[nodiscard]] WeightedGraph load_graph(const std::string& path);

}  // namespace gdw
