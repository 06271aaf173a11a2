#ifndef GEOLIFT_MANIFOLD_HPP
#define GEOLIFT_MANIFOLD_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "geolift/core.hpp"

namespace geolift {

struct EpsilonRule {
  double epsilon = 0.0;
};
struct KnnRule {
  Index k = 1;
};
/// Neighbourhood rule of an existing graph.
using GraphRule = std::variant<EpsilonRule, KnnRule>;

struct WeightedEdge {
  Index i = 0;  ///< i < j
  Index j = 0;
  double weight = 0.0;
};

/// Undirected graph with Euclidean edge weights. Coincident points give
/// zero-weight edges; every other weight is strictly positive.
class NeighborhoodGraph {
 public:
  NeighborhoodGraph(Index n, std::vector<WeightedEdge> edges, GraphRule rule);

  Index size() const noexcept { return n_; }
  const std::vector<WeightedEdge>& edges() const noexcept { return edges_; }
  const GraphRule& rule() const noexcept { return rule_; }

  struct Arc {
    Index to;
    double weight;
  };
  /// Adjacency lists, neighbours sorted by index.
  const std::vector<std::vector<Arc>>& adjacency() const noexcept { return adj_; }

  /// Component label per vertex; labels are numbered by lowest member.
  std::vector<Index> component_labels() const;
  std::vector<Index> component_sizes() const;

 private:
  Index n_;
  std::vector<WeightedEdge> edges_;
  GraphRule rule_;
  std::vector<std::vector<Arc>> adj_;
};

/// Euclidean distance used for all graph construction (one code path so that
/// thresholds compare bit-identical values).
double point_distance(const PointCloud& x, Index i, Index j);

/// Smallest epsilon whose epsilon-graph is connected: the longest edge of a
/// Euclidean minimum spanning tree.
double min_connecting_epsilon(const PointCloud& x);

NeighborhoodGraph build_neighborhood_graph(const PointCloud& x, const GraphRule& rule);

/// All-pairs weighted shortest paths by repeated Dijkstra. Unreachable
/// pairs carry DistanceMatrix::unreachable.
DistanceMatrix shortest_paths(const NeighborhoodGraph& g, unsigned threads = 1);

struct CmdsResult {
  PointCloud points;
  std::vector<double> eigenvalues;  ///< used eigenvalues (descending), may be < dim
  Index deficiency = 0;             ///< zero columns padded for non-positive eigenvalues
};

/// Classical (Torgerson) MDS; negative eigenvalues are discarded.
CmdsResult cmds(const DistanceMatrix& d, Index dim, const EigenOptions& opts = {});

/// Type-7 (linear interpolation) quantile of the pairwise Euclidean distances.
/// Pair counts above `exact_limit` use a seeded sample of that many pairs.
struct DistanceQuantile {
  double value = 0.0;
  bool sampled = false;
  Index pairs_used = 0;
};
DistanceQuantile pairwise_distance_quantile(const PointCloud& x, double q,
                                            Index exact_limit = 10'000'000,
                                            Seed seed = Seed{0x9a1});

struct IsomapConfig {
  enum class Rule { epsilon_auto, epsilon, epsilon_quantile, knn };
  enum class ComponentPolicy { require_connected, largest_component };

  Rule rule = Rule::epsilon_auto;
  double epsilon = 0.0;   ///< Rule::epsilon
  double quantile = 0.05; ///< Rule::epsilon_quantile, in (0, 1)
  Index k = 10;           ///< Rule::knn
  std::optional<Index> d = 2;  ///< nullopt = auto
  Index max_d = 10;            ///< search range for auto d
  Index spectrum_size = 20;    ///< centered-geodesic eigenvalues reported
  ComponentPolicy component_policy = ComponentPolicy::require_connected;
  unsigned threads = 1;
  EigenOptions eigen{};

  void validate() const;
};

struct IsomapDiagnostics {
  std::string rule;               ///< epsilon_auto | epsilon | epsilon_quantile | knn
  std::optional<double> epsilon;  ///< realized radius for epsilon rules
  std::optional<double> quantile;
  bool quantile_sampled = false;
  std::optional<Index> k;
  Index edges = 0;
  std::vector<Index> component_sizes;  ///< descending
  std::vector<Index> dropped;          ///< input indices outside the kept component
  std::vector<double> centered_spectrum;  ///< leading eigenvalues, descending
  Index d = 0;
  bool d_auto = false;
  Index cmds_deficiency = 0;
};

struct IsomapResult {
  PointCloud embedding;
  std::vector<Index> kept;  ///< input index of each embedding row
  DistanceMatrix geodesics; ///< restricted to kept vertices
  IsomapDiagnostics diagnostics;
};

/// Neighbourhood graph, shortest paths, classical MDS.
IsomapResult isomap(const PointCloud& x, const IsomapConfig& cfg);

}  // namespace geolift

#endif  // GEOLIFT_MANIFOLD_HPP
