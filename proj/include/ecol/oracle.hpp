#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "ecol/errors.hpp"
#include "ecol/multigraph.hpp"
#include "ecol/rational.hpp"

// Exhaustive reference computations for small instances. Kept independent of
// the production algorithms: nothing here calls into hardcore or fractional.

namespace ecol::oracle {

inline constexpr int kMaxEnumerationEdges = 20;
inline constexpr int kMaxColoringEdges = 14;
inline constexpr int kMaxSubsetVertices = 16;

/// Every matching of g (including the empty one), each as a sorted edge list.
inline std::vector<std::vector<EdgeId>> enumerate_matchings(const Multigraph& g) {
  if (g.num_edges() > kMaxEnumerationEdges)
    throw CapacityError("matching enumeration is limited to " + std::to_string(kMaxEnumerationEdges) + " edges");
  std::vector<std::vector<EdgeId>> out;
  std::vector<EdgeId> current;
  std::vector<char> used(static_cast<std::size_t>(g.num_vertices()), 0);
  std::function<void(EdgeId)> rec = [&](EdgeId e) {
    if (e == g.num_edges()) {
      out.push_back(current);
      return;
    }
    rec(e + 1);
    auto [u, v] = g.edge(e);
    if (!used[u] && !used[v]) {
      used[u] = used[v] = 1;
      current.push_back(e);
      rec(e + 1);
      current.pop_back();
      used[u] = used[v] = 0;
    }
  };
  rec(0);
  return out;
}

using Distribution = std::map<std::vector<EdgeId>, double>;

/// Hard-core distribution by direct weighting of every matching.
inline Distribution exact_distribution(const Multigraph& g, const std::vector<double>& lambda) {
  Distribution dist;
  double z = 0.0;
  for (auto& m : enumerate_matchings(g)) {
    double w = 1.0;
    for (EdgeId e : m) w *= lambda[e];
    z += w;
    dist[m] = w;
  }
  for (auto& [m, w] : dist) w /= z;
  return dist;
}

inline double enumerated_partition_function(const Multigraph& g, const std::vector<double>& lambda) {
  double z = 0.0;
  for (auto& m : enumerate_matchings(g)) {
    double w = 1.0;
    for (EdgeId e : m) w *= lambda[e];
    z += w;
  }
  return z;
}

inline std::vector<double> enumerated_marginals(const Multigraph& g, const std::vector<double>& lambda) {
  std::vector<double> p(static_cast<std::size_t>(g.num_edges()), 0.0);
  for (auto& [m, w] : exact_distribution(g, lambda))
    for (EdgeId e : m) p[e] += w;
  return p;
}

/// Total variation distance; keys missing from one side count as zero mass.
inline double tv_distance(const Distribution& a, const Distribution& b) {
  double sum = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      sum += std::abs(ia->second);
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      sum += std::abs(ib->second);
      ++ib;
    } else {
      sum += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return sum / 2;
}

inline Distribution empirical(const std::vector<std::vector<EdgeId>>& samples) {
  Distribution d;
  for (const auto& s : samples) d[s] += 1.0;
  for (auto& [k, v] : d) v /= static_cast<double>(samples.size());
  return d;
}

/// max(Delta, max over all vertex subsets H with |H| >= 2 of |E(H)|/floor(|H|/2)),
/// by visiting all 2^n subsets.
inline Rational brute_force_chi_star(const Multigraph& g) {
  const int n = g.num_vertices();
  if (n > kMaxSubsetVertices) throw CapacityError("subset enumeration is limited to 16 vertices");
  Rational best(0);
  for (VertexId v = 0; v < n; ++v) best = std::max(best, Rational(g.degree(v)));
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    int k = std::popcount(mask);
    if (k < 2) continue;
    int edges = 0;
    for (const Edge& e : g.edges()) edges += (mask >> e.u & 1) && (mask >> e.v & 1);
    best = std::max(best, Rational(edges, k / 2));
  }
  return best;
}

/// Backtracking edge-coloring search with forward checking. Without lists it
/// looks for a coloring with k colors; with lists, for any list-respecting one.
class ColoringSearch {
 public:
  ColoringSearch(const Multigraph& g, const ListAssignment* lists) : g_(g), lists_(lists) {
    if (g.num_edges() > kMaxColoringEdges)
      throw CapacityError("exhaustive coloring is limited to " + std::to_string(kMaxColoringEdges) + " edges");
    // most constrained edges first: high combined degree
    order_.resize(static_cast<std::size_t>(g.num_edges()));
    for (EdgeId e = 0; e < g.num_edges(); ++e) order_[e] = e;
    std::stable_sort(order_.begin(), order_.end(), [&](EdgeId a, EdgeId b) {
      auto load = [&](EdgeId e) { return g.degree(g.edge(e).u) + g.degree(g.edge(e).v); };
      return load(a) > load(b);
    });
  }

  /// Finds a coloring with colors in [0, k) (intersected with lists if any).
  std::optional<PartialColoring> solve(int k) {
    k_ = k;
    coloring_.assign(static_cast<std::size_t>(g_.num_edges()), std::nullopt);
    if (rec(0)) return coloring_;
    return std::nullopt;
  }

 private:
  bool allowed(EdgeId e, ColorId c) const {
    if (lists_ && !std::binary_search((*lists_)[e].begin(), (*lists_)[e].end(), c)) return false;
    for (VertexId x : {g_.edge(e).u, g_.edge(e).v})
      for (EdgeId f : g_.incident(x))
        if (f != e && coloring_[f] == c) return false;
    return true;
  }

  bool has_option(EdgeId e) const {
    if (lists_) {
      for (ColorId c : (*lists_)[e])
        if ((k_ < 0 || c < k_) && allowed(e, c)) return true;
      return false;
    }
    for (ColorId c = 0; c < k_; ++c)
      if (allowed(e, c)) return true;
    return false;
  }

  bool rec(std::size_t i) {
    if (i == order_.size()) return true;
    EdgeId e = order_[i];
    std::vector<ColorId> options;
    if (lists_) {
      for (ColorId c : (*lists_)[e])
        if (k_ < 0 || c < k_) options.push_back(c);
    } else {
      // colors above the largest used one are interchangeable: try one of them
      int used_max = -1;
      for (auto& c : coloring_)
        if (c) used_max = std::max(used_max, *c);
      for (ColorId c = 0; c <= std::min(used_max + 1, k_ - 1); ++c) options.push_back(c);
    }
    for (ColorId c : options) {
      if (!allowed(e, c)) continue;
      coloring_[e] = c;
      bool ok = true;
      for (VertexId x : {g_.edge(e).u, g_.edge(e).v})
        for (EdgeId f : g_.incident(x))
          if (!coloring_[f] && !has_option(f)) ok = false;
      if (ok && rec(i + 1)) return true;
      coloring_[e].reset();
    }
    return false;
  }

  const Multigraph& g_;
  const ListAssignment* lists_;
  std::vector<EdgeId> order_;
  int k_ = 0;
  PartialColoring coloring_;
};

inline int brute_force_chromatic_index(const Multigraph& g) {
  if (g.num_edges() == 0) return 0;
  ColoringSearch search(g, nullptr);
  int delta = 0;
  for (VertexId v = 0; v < g.num_vertices(); ++v) delta = std::max(delta, g.degree(v));
  for (int k = delta;; ++k)
    if (search.solve(k)) return k;
}

/// A list-respecting proper coloring if one exists.
inline std::optional<PartialColoring> brute_force_list_coloring(const Multigraph& g, const ListAssignment& lists) {
  ColoringSearch search(g, &lists);
  return search.solve(-1);
}

}  // namespace ecol::oracle
