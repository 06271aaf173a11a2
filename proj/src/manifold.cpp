#include "geolift/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <thread>

#include "geolift/spectral.hpp"

namespace geolift {

NeighborhoodGraph::NeighborhoodGraph(Index n, std::vector<WeightedEdge> edges, GraphRule rule)
    : n_(n), edges_(std::move(edges)), rule_(rule), adj_(n) {
  std::sort(edges_.begin(), edges_.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto& e = edges_[k];
    if (e.i >= e.j || e.j >= n_) throw ValidationError("graph edge must satisfy i < j < n");
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw ValidationError("graph edge weight must be finite and nonnegative");
    }
    if (k > 0 && edges_[k - 1].i == e.i && edges_[k - 1].j == e.j) {
      throw ValidationError("duplicate graph edge");
    }
    adj_[e.i].push_back({e.j, e.weight});
    adj_[e.j].push_back({e.i, e.weight});
  }
  for (auto& list : adj_) {
    std::sort(list.begin(), list.end(), [](const Arc& a, const Arc& b) { return a.to < b.to; });
  }
}

std::vector<Index> NeighborhoodGraph::component_labels() const {
  constexpr Index unset = static_cast<Index>(-1);
  std::vector<Index> label(n_, unset);
  std::vector<Index> stack;
  for (Index s = 0; s < n_; ++s) {
    if (label[s] != unset) continue;
    label[s] = s;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (const auto& arc : adj_[v]) {
        if (label[arc.to] == unset) {
          label[arc.to] = s;
          stack.push_back(arc.to);
        }
      }
    }
  }
  return label;
}

std::vector<Index> NeighborhoodGraph::component_sizes() const {
  const auto label = component_labels();
  std::vector<Index> count(n_, 0);
  for (Index l : label) ++count[l];
  std::vector<Index> sizes;
  for (Index c : count) {
    if (c > 0) sizes.push_back(c);
  }
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

double point_distance(const PointCloud& x, Index i, Index j) {
  const Matrix& c = x.coords();
  const auto a = static_cast<Eigen::Index>(i);
  const auto b = static_cast<Eigen::Index>(j);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < c.cols(); ++k) {
    const double diff = c(a, k) - c(b, k);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

double min_connecting_epsilon(const PointCloud& x) {
  const Index n = x.size();
  if (n < 2) throw ValidationError("min_connecting_epsilon needs at least 2 points");
  // Dense Prim: O(n^2) time, O(n) memory.
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<bool> in_tree(n, false);
  double longest = 0.0;
  Index current = 0;
  in_tree[0] = true;
  for (Index step = 1; step < n; ++step) {
    Index next = n;
    double next_w = std::numeric_limits<double>::infinity();
    for (Index v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = point_distance(x, current, v);
      if (w < best[v]) best[v] = w;
      if (best[v] < next_w) {
        next_w = best[v];
        next = v;
      }
    }
    in_tree[next] = true;
    longest = std::max(longest, next_w);
    current = next;
  }
  return longest;
}

NeighborhoodGraph build_neighborhood_graph(const PointCloud& x, const GraphRule& rule) {
  const Index n = x.size();
  std::vector<WeightedEdge> edges;
  if (const auto* eps = std::get_if<EpsilonRule>(&rule)) {
    if (!(eps->epsilon >= 0.0)) throw ValidationError("epsilon must be nonnegative");
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double w = point_distance(x, i, j);
        if (w <= eps->epsilon) edges.push_back({i, j, w});
      }
    }
    return NeighborhoodGraph(n, std::move(edges), rule);
  }
  const Index k = std::get<KnnRule>(rule).k;
  if (k < 1) throw ValidationError("knn needs k >= 1");
  // Union symmetrization: keep (i, j) if either is among the other's k nearest.
  std::vector<std::vector<Index>> chosen(n);
  std::vector<std::pair<double, Index>> cand;
  for (Index i = 0; i < n; ++i) {
    cand.clear();
    for (Index j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back(point_distance(x, i, j), j);
    }
    const Index take = std::min<Index>(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    for (Index t = 0; t < take; ++t) chosen[i].push_back(cand[t].second);
  }
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < n; ++i) {
    for (Index j : chosen[i]) pairs.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  edges.reserve(pairs.size());
  for (const auto& [i, j] : pairs) edges.push_back({i, j, point_distance(x, i, j)});
  return NeighborhoodGraph(n, std::move(edges), rule);
}

namespace {

void dijkstra_rows(const NeighborhoodGraph& g, Index first, Index last, Matrix& out) {
  const Index n = g.size();
  const auto& adj = g.adjacency();
  using Item = std::pair<double, Index>;
  std::vector<double> dist(n);
  for (Index s = first; s < last; ++s) {
    std::fill(dist.begin(), dist.end(), DistanceMatrix::unreachable);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[s] = 0.0;
    heap.emplace(0.0, s);
    while (!heap.empty()) {
      const auto [d, v] = heap.top();
      heap.pop();
      if (d > dist[v]) continue;
      for (const auto& arc : adj[v]) {
        const double nd = d + arc.weight;
        if (nd < dist[arc.to]) {
          dist[arc.to] = nd;
          heap.emplace(nd, arc.to);
        }
      }
    }
    for (Index t = 0; t < n; ++t) {
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = dist[t];
    }
  }
}

}  // namespace

DistanceMatrix shortest_paths(const NeighborhoodGraph& g, unsigned threads) {
  const Index n = g.size();
  Matrix d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(n, 1));
  if (workers == 1) {
    dijkstra_rows(g, 0, n, d);
  } else {
    std::vector<std::thread> pool;
    const Index chunk = (n + workers - 1) / workers;
    for (Index w = 0; w < workers; ++w) {
      const Index first = w * chunk;
      const Index last = std::min(n, first + chunk);
      if (first >= last) break;
      pool.emplace_back([&g, &d, first, last] { dijkstra_rows(g, first, last, d); });
    }
    for (auto& t : pool) t.join();
  }
  // Forward and backward runs may differ in the last bit.
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
      const double v = std::min(d(i, j), d(j, i));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return DistanceMatrix(std::move(d));
}

namespace {

CmdsResult cmds_from_pairs(const EigenPairs& pairs, Index n, Index dim) {
  CmdsResult out;
  Matrix coords = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const double top = pairs.values.empty() ? 0.0 : std::abs(pairs.values.front());
  const double floor = 1e-12 * top;
  for (Index k = 0; k < std::min<Index>(dim, pairs.values.size()); ++k) {
    const double lambda = pairs.values[k];
    if (!(lambda > floor)) break;
    out.eigenvalues.push_back(lambda);
    coords.col(static_cast<Eigen::Index>(k)) =
        pairs.vectors.col(static_cast<Eigen::Index>(k)) * std::sqrt(lambda);
  }
  out.deficiency = dim - out.eigenvalues.size();
  out.points = PointCloud(std::move(coords));
  return out;
}

}  // namespace

CmdsResult cmds(const DistanceMatrix& d, Index dim, const EigenOptions& opts) {
  if (dim < 1) throw DimensionError("cmds needs dim >= 1");
  const Matrix b = double_center(d);
  const Index n = d.size();
  if (n == 0) throw DimensionError("cmds needs at least one point");
  EigenOptions o = opts;
  o.order = EigenOrder::algebraic;
  const EigenPairs pairs = symmetric_eigs(b, std::min(dim, n), o);
  return cmds_from_pairs(pairs, n, dim);
}

DistanceQuantile pairwise_distance_quantile(const PointCloud& x, double q, Index exact_limit,
                                            Seed seed) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("quantile must lie in (0, 1)");
  const Index n = x.size();
  if (n < 2) throw ValidationError("distance quantile needs at least 2 points");
  const Index total = n * (n - 1) / 2;
  std::vector<double> values;
  DistanceQuantile out;
  if (total <= exact_limit) {
    values.reserve(total);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) values.push_back(point_distance(x, i, j));
    }
  } else {
    out.sampled = true;
    Rng rng(seed);
    values.reserve(exact_limit);
    while (values.size() < exact_limit) {
      const auto i = static_cast<Index>(rng.below(n));
      const auto j = static_cast<Index>(rng.below(n));
      if (i != j) values.push_back(point_distance(x, i, j));
    }
  }
  out.pairs_used = values.size();
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  double v_hi = v_lo;
  if (lo + 1 < values.size()) {
    v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  }
  out.value = v_lo + (h - static_cast<double>(lo)) * (v_hi - v_lo);
  return out;
}

void IsomapConfig::validate() const {
  if (rule == Rule::epsilon && !(epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");
  if (rule == Rule::epsilon_quantile && !(quantile > 0.0 && quantile < 1.0)) {
    throw ValidationError("epsilon quantile must lie in (0, 1)");
  }
  if (rule == Rule::knn && k < 1) throw ValidationError("knn needs k >= 1");
  if (d && *d < 1) throw ValidationError("isomap output dimension must be >= 1");
  if (max_d < 1) throw ValidationError("max_d must be >= 1");
}

IsomapResult isomap(const PointCloud& x, const IsomapConfig& cfg) {
  cfg.validate();
  const Index n = x.size();
  if (n < 2) throw ValidationError("isomap needs at least 2 points");
  IsomapDiagnostics diag;

  GraphRule rule;
  switch (cfg.rule) {
    case IsomapConfig::Rule::epsilon_auto:
      diag.rule = "epsilon_auto";
      diag.epsilon = min_connecting_epsilon(x);
      rule = EpsilonRule{*diag.epsilon};
      break;
    case IsomapConfig::Rule::epsilon:
      diag.rule = "epsilon";
      diag.epsilon = cfg.epsilon;
      rule = EpsilonRule{cfg.epsilon};
      break;
    case IsomapConfig::Rule::epsilon_quantile: {
      diag.rule = "epsilon_quantile";
      const auto q = pairwise_distance_quantile(x, cfg.quantile);
      diag.quantile = cfg.quantile;
      diag.quantile_sampled = q.sampled;
      diag.epsilon = q.value;
      rule = EpsilonRule{q.value};
      break;
    }
    case IsomapConfig::Rule::knn:
      diag.rule = "knn";
      diag.k = cfg.k;
      rule = KnnRule{cfg.k};
      break;
  }

  const NeighborhoodGraph full = build_neighborhood_graph(x, rule);
  diag.component_sizes = full.component_sizes();

  std::vector<Index> kept;
  if (diag.component_sizes.size() > 1) {
    if (cfg.component_policy == IsomapConfig::ComponentPolicy::require_connected) {
      std::ostringstream os;
      os << "neighbourhood graph is disconnected; component sizes:";
      for (Index s : diag.component_sizes) os << ' ' << s;
      throw DataError(os.str());
    }
    const auto labels = full.component_labels();
    std::vector<Index> count(n, 0);
    for (Index l : labels) ++count[l];
    // Largest component; ties go to the one containing the lowest index.
    Index best = labels[0];
    for (Index l = 0; l < n; ++l) {
      if (count[l] > count[best]) best = l;
    }
    for (Index i = 0; i < n; ++i) {
      (labels[i] == best ? kept : diag.dropped).push_back(i);
    }
  } else {
    kept.resize(n);
    std::iota(kept.begin(), kept.end(), Index{0});
  }

  // Re-index onto the kept vertices.
  std::vector<Index> position(n, static_cast<Index>(-1));
  for (Index k = 0; k < kept.size(); ++k) position[kept[k]] = k;
  std::vector<WeightedEdge> sub_edges;
  for (const auto& e : full.edges()) {
    if (position[e.i] != static_cast<Index>(-1) && position[e.j] != static_cast<Index>(-1)) {
      sub_edges.push_back({position[e.i], position[e.j], e.weight});
    }
  }
  diag.edges = sub_edges.size();
  const NeighborhoodGraph graph(kept.size(), std::move(sub_edges), rule);
  DistanceMatrix geodesics = shortest_paths(graph, cfg.threads);

  const Index m = kept.size();
  const Matrix b = double_center(geodesics);
  Index want = std::max(cfg.d.value_or(1), std::min(cfg.spectrum_size, m));
  if (!cfg.d) want = std::max(want, std::min(m, cfg.max_d + 1));
  want = std::min(want, m);
  EigenOptions opts = cfg.eigen;
  opts.order = EigenOrder::algebraic;
  const EigenPairs pairs = symmetric_eigs(b, want, opts);
  diag.centered_spectrum.assign(pairs.values.begin(),
                                pairs.values.begin() +
                                    static_cast<std::ptrdiff_t>(std::min(cfg.spectrum_size, want)));

  if (cfg.d) {
    diag.d = *cfg.d;
  } else {
    diag.d_auto = true;
    std::vector<double> positive;
    for (double v : pairs.values) positive.push_back(std::max(v, 0.0));
    diag.d = positive.size() >= 2 ? select_rank(positive, cfg.max_d) : 1;
  }
  CmdsResult embedded = cmds_from_pairs(pairs, m, diag.d);
  diag.cmds_deficiency = embedded.deficiency;

  IsomapResult out{std::move(embedded.points), std::move(kept), std::move(geodesics),
                   std::move(diag)};
  return out;
}

}  // namespace geolift
