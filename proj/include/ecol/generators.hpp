#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "ecol/multigraph.hpp"
#include "ecol/rng.hpp"

namespace ecol::gen {

inline Multigraph path(int edges) {
  std::vector<Edge> es;
  for (int i = 0; i < edges; ++i) es.push_back({i, i + 1});
  return Multigraph(edges + 1, std::move(es));
}

inline Multigraph cycle(int n) {
  std::vector<Edge> es;
  for (int i = 0; i < n; ++i) es.push_back({i, (i + 1) % n});
  return Multigraph(n, std::move(es));
}

inline Multigraph triangle() { return cycle(3); }

inline Multigraph bundle(int multiplicity) {
  return Multigraph(2, std::vector<Edge>(static_cast<std::size_t>(multiplicity), Edge{0, 1}));
}

/// Same simple graph with every edge repeated `k` times.
inline Multigraph blow_up(const Multigraph& g, int k) {
  std::vector<Edge> es;
  for (const Edge& e : g.edges())
    for (int i = 0; i < k; ++i) es.push_back(e);
  return Multigraph(g.num_vertices(), std::move(es));
}

/// Connected simple graph on n vertices: a random spanning tree plus
/// `extra` further distinct pairs where available.
inline Multigraph random_connected_simple(int n, int extra, Rng& rng) {
  std::set<std::pair<int, int>> pairs;
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
  for (int i = 1; i < n; ++i) {
    int j = perm[rng.below(static_cast<std::uint64_t>(i))];
    pairs.insert(std::minmax(perm[i], j));
  }
  int max_pairs = n * (n - 1) / 2;
  for (int tries = 0; extra > 0 && static_cast<int>(pairs.size()) < max_pairs && tries < 50 * (extra + 1); ++tries) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    if (pairs.insert(std::minmax(a, b)).second) --extra;
  }
  std::vector<Edge> es;
  for (auto [a, b] : pairs) es.push_back({a, b});
  return Multigraph(n, std::move(es));
}

/// Connected multigraph on n vertices with at most max_edges edges: a
/// simple connected skeleton whose pairs are then repeated at random.
inline Multigraph random_small_multigraph(int n, int max_edges, Rng& rng) {
  int tree = n - 1;
  int budget = std::max(max_edges, tree);
  int extra = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, (budget - tree) / 2 + 1))));
  Multigraph skeleton = random_connected_simple(n, extra, rng);
  std::vector<Edge> es(skeleton.edges().begin(), skeleton.edges().end());
  int target = tree + static_cast<int>(rng.below(static_cast<std::uint64_t>(budget - tree + 1)));
  while (static_cast<int>(es.size()) < target) es.push_back(skeleton.edge(static_cast<EdgeId>(rng.below(skeleton.num_edges()))));
  return Multigraph(n, std::move(es));
}

namespace detail {

// Gives every skeleton pair a random multiplicity in [1, 2 * base], capped
// so that no vertex exceeds max_deg (one copy is reserved for every pair
// not yet processed).
inline Multigraph thicken(const Multigraph& skeleton, int max_deg, Rng& rng) {
  const int n = skeleton.num_vertices();
  int dmax = std::max(1, max_degree(skeleton));
  int base = std::max(1, max_deg / dmax);
  std::vector<int> deg(static_cast<std::size_t>(n), 0), pending(static_cast<std::size_t>(n), 0);
  for (VertexId v = 0; v < n; ++v) pending[v] = skeleton.degree(v);
  std::vector<Edge> es;
  for (const Edge& e : skeleton.edges()) {
    --pending[e.u];
    --pending[e.v];
    int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * base)));
    k = std::min({k, max_deg - deg[e.u] - pending[e.u], max_deg - deg[e.v] - pending[e.v]});
    k = std::max(k, 1);
    for (int i = 0; i < k; ++i) es.push_back(e);
    deg[e.u] += k;
    deg[e.v] += k;
  }
  return Multigraph(n, std::move(es));
}

}  // namespace detail

/// Sparse random skeleton with distinct degree around `spread`, every pair
/// repeated so that the maximum degree lands near (never above) `max_deg`.
inline Multigraph random_heavy_multigraph(int n, int spread, int max_deg, Rng& rng) {
  Multigraph skeleton = random_connected_simple(n, std::max(0, n * (spread - 2) / 2), rng);
  return detail::thicken(skeleton, max_deg, rng);
}

/// As random_heavy_multigraph, but the skeleton only joins vertices whose
/// ids differ by at most `window`: a path 0-1-...-(n-1) plus each further
/// in-window pair with probability 1/2. Bounded bandwidth keeps exact
/// hard-core computations cheap on 60-vertex instances.
inline Multigraph random_banded_multigraph(int n, int window, int max_deg, Rng& rng) {
  std::vector<Edge> es;
  for (int i = 0; i + 1 < n; ++i) {
    es.push_back({i, i + 1});
    for (int j = i + 2; j <= std::min(n - 1, i + window); ++j)
      if (rng.bernoulli(0.5)) es.push_back({i, j});
  }
  return detail::thicken(Multigraph(n, std::move(es)), max_deg, rng);
}

/// Each edge gets a uniformly random `size`-subset of [0, palette).
inline ListAssignment random_lists(const Multigraph& g, int size, int palette, Rng& rng) {
  ListAssignment lists(static_cast<std::size_t>(g.num_edges()));
  std::vector<ColorId> colors(static_cast<std::size_t>(palette));
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    std::iota(colors.begin(), colors.end(), 0);
    for (int i = 0; i < size; ++i)
      std::swap(colors[i], colors[i + rng.below(static_cast<std::uint64_t>(palette - i))]);
    lists[e].assign(colors.begin(), colors.begin() + size);
    std::sort(lists[e].begin(), lists[e].end());
  }
  return lists;
}

/// Windows of `size` consecutive colors starting at (u + v) mod size:
/// neighbouring edges overlap heavily but not completely.
inline ListAssignment shifted_window_lists(const Multigraph& g, int size) {
  ListAssignment lists(static_cast<std::size_t>(g.num_edges()));
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    int s = (g.edge(e).u + g.edge(e).v) % size;
    for (int i = 0; i < size; ++i) lists[e].push_back(s + i);
  }
  return lists;
}

}  // namespace ecol::gen
