#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "ecol/hardcore.hpp"
#include "ecol/multigraph.hpp"
#include "ecol/rng.hpp"

namespace ecol {

/// Splits one matching around a ball S = S_{<d+1}(H) given by `dist`
/// (distance from H, -1 when farther than d).
///   kept:     edges of M not induced in S, plus edges with both endpoints
///             at distance exactly d; both stay frozen
///   residual: edges of the color graph induced in S, not both at distance
///             d, whose endpoints are not covered by a kept edge
struct BallSplit {
  std::vector<EdgeId> kept;
  std::vector<EdgeId> residual;
};

inline bool in_ball(const std::vector<int>& dist, VertexId v, int d) { return dist[v] >= 0 && dist[v] <= d; }

/// `alive` restricts the residual to a subgraph of the host (nullptr: all
/// edges). `ball_edges` lists the host edges induced in S.
inline BallSplit split_ball(const Multigraph& g, const std::vector<int>& dist, int d, const Matching& m,
                            std::span<const EdgeId> ball_edges, const std::vector<char>* alive = nullptr) {
  BallSplit out;
  std::vector<char> blocked(static_cast<std::size_t>(g.num_vertices()), 0);
  for (EdgeId e : m.edges) {
    auto [u, v] = g.edge(e);
    bool induced = in_ball(dist, u, d) && in_ball(dist, v, d);
    bool rim = induced && dist[u] == d && dist[v] == d;
    if (!induced || rim) {
      out.kept.push_back(e);
      blocked[u] = blocked[v] = 1;
    }
  }
  for (EdgeId e : ball_edges) {
    if (alive && !(*alive)[e]) continue;
    auto [u, v] = g.edge(e);
    if (dist[u] == d && dist[v] == d) continue;
    if (!blocked[u] && !blocked[v]) out.residual.push_back(e);
  }
  return out;
}

/// Host edges with both endpoints within distance d of H.
inline std::vector<EdgeId> ball_edge_list(const Multigraph& g, const std::vector<int>& dist, int d) {
  std::vector<EdgeId> out;
  std::vector<char> seen(static_cast<std::size_t>(g.num_edges()), 0);
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    if (!in_ball(dist, v, d)) continue;
    for (EdgeId e : g.incident(v)) {
      if (seen[e]) continue;
      seen[e] = 1;
      if (in_ball(dist, g.other(e, v), d)) out.push_back(e);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Draws a matching of the host edges `edges` from the hard-core model with
/// the host activities restricted to them. Exact when the edge set fits the
/// exact limits, otherwise by the Markov chain.
inline Matching sample_restricted(const Multigraph& g, const std::vector<double>& lambda,
                                  const std::vector<EdgeId>& edges, Rng& rng, const ExactLimits& limits,
                                  const ChainConfig& chain) {
  if (edges.empty()) return {};
  Subgraph sub = edge_subgraph(g, edges);
  std::vector<double> local;
  local.reserve(edges.size());
  for (EdgeId e : edges) local.push_back(lambda[e]);
  Matching m;
  try {
    m = ExactMatchingModel(sub.graph, local, limits).sample(rng);
  } catch (const CapacityError&) {
    m = sample_matching(HardCoreModel(sub.graph, local), chain, rng);
  }
  std::vector<EdgeId> host;
  for (EdgeId e : m.edges) host.push_back(sub.to_host_edge[e]);
  return make_matching(std::move(host));
}

inline Matching splice(const BallSplit& split, const Matching& fresh) {
  std::vector<EdgeId> all = split.kept;
  all.insert(all.end(), fresh.edges.begin(), fresh.edges.end());
  return make_matching(std::move(all));
}

}  // namespace ecol
