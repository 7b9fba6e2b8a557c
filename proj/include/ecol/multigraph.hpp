#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ecol/errors.hpp"

namespace ecol {

using VertexId = int;
using EdgeId = int;
using ColorId = int;

struct Edge {
  VertexId u;
  VertexId v;
};

/// Undirected multigraph on dense vertex ids [0, n). Parallel edges are
/// allowed, self-loops are not. Edge ids are dense in [0, m) in insertion
/// order. Immutable after construction.
class Multigraph {
 public:
  Multigraph() = default;
  explicit Multigraph(int n) : incidence_(static_cast<std::size_t>(n)) {
    if (n < 0) throw ArgumentError("negative vertex count");
  }
  Multigraph(int n, std::vector<Edge> edges) : Multigraph(n) {
    edges_ = std::move(edges);
    for (EdgeId e = 0; e < num_edges(); ++e) {
      const auto [u, v] = edges_[e];
      if (u < 0 || v < 0 || u >= n || v >= n)
        throw ArgumentError("edge " + std::to_string(e) + " has an endpoint out of range");
      if (u == v) throw ArgumentError("edge " + std::to_string(e) + " is a self-loop");
      incidence_[u].push_back(e);
      incidence_[v].push_back(e);
    }
  }

  int num_vertices() const { return static_cast<int>(incidence_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const EdgeId> incident(VertexId v) const { return incidence_[v]; }
  int degree(VertexId v) const { return static_cast<int>(incidence_[v].size()); }
  VertexId other(EdgeId e, VertexId v) const { return edges_[e].u == v ? edges_[e].v : edges_[e].u; }
  bool adjacent_edges(EdgeId a, EdgeId b) const {
    const Edge &x = edges_[a], &y = edges_[b];
    return x.u == y.u || x.u == y.v || x.v == y.u || x.v == y.v;
  }

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> incidence_;
};

/// A graph derived from a host, with maps from local ids back to host ids.
struct Subgraph {
  Multigraph graph;
  std::vector<VertexId> to_host_vertex;  // identity when vertices are kept
  std::vector<EdgeId> to_host_edge;
};

/// Set of edge ids, kept sorted. Validity as a matching is checked against a
/// named host with `is_matching`.
struct Matching {
  std::vector<EdgeId> edges;

  bool contains(EdgeId e) const { return std::binary_search(edges.begin(), edges.end(), e); }
  std::size_t size() const { return edges.size(); }
  bool empty() const { return edges.empty(); }
  friend bool operator==(const Matching&, const Matching&) = default;
  friend auto operator<=>(const Matching&, const Matching&) = default;
};

inline Matching make_matching(std::vector<EdgeId> edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Matching{std::move(edges)};
}

inline bool is_matching(const Multigraph& g, const Matching& m) {
  std::vector<char> used(static_cast<std::size_t>(g.num_vertices()), 0);
  for (EdgeId e : m.edges) {
    if (e < 0 || e >= g.num_edges()) return false;
    const auto [u, v] = g.edge(e);
    if (used[u] || used[v]) return false;
    used[u] = used[v] = 1;
  }
  return true;
}

using PartialColoring = std::vector<std::optional<ColorId>>;  // indexed by edge id
using ListAssignment = std::vector<std::vector<ColorId>>;     // sorted lists, indexed by edge id

inline int max_degree(const Multigraph& g) {
  int best = 0;
  for (VertexId v = 0; v < g.num_vertices(); ++v) best = std::max(best, g.degree(v));
  return best;
}

// Hop distances from a vertex set; -1 for unreachable. Parallel edges are irrelevant.
inline std::vector<int> bfs_distances(const Multigraph& g, std::span<const VertexId> sources,
                                      int limit = -1) {
  std::vector<int> dist(static_cast<std::size_t>(g.num_vertices()), -1);
  std::deque<VertexId> queue;
  for (VertexId s : sources) {
    if (s < 0 || s >= g.num_vertices()) throw ArgumentError("source vertex out of range");
    if (dist[s] < 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    VertexId x = queue.front();
    queue.pop_front();
    if (limit >= 0 && dist[x] >= limit) continue;
    for (EdgeId e : g.incident(x)) {
      VertexId y = g.other(e, x);
      if (dist[y] < 0) {
        dist[y] = dist[x] + 1;
        queue.push_back(y);
      }
    }
  }
  return dist;
}

// Largest finite eccentricity over all vertices (components handled separately).
inline int diameter(const Multigraph& g) {
  int best = 0;
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    VertexId src[] = {v};
    for (int d : bfs_distances(g, src)) best = std::max(best, d);
  }
  return best;
}

inline Subgraph induced_subgraph(const Multigraph& g, std::span<const VertexId> vertices) {
  std::vector<int> local(static_cast<std::size_t>(g.num_vertices()), -1);
  Subgraph out;
  for (VertexId v : vertices) {
    if (local[v] < 0) {
      local[v] = static_cast<int>(out.to_host_vertex.size());
      out.to_host_vertex.push_back(v);
    }
  }
  std::vector<Edge> edges;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    const auto [u, v] = g.edge(e);
    if (local[u] >= 0 && local[v] >= 0) {
      edges.push_back({local[u], local[v]});
      out.to_host_edge.push_back(e);
    }
  }
  out.graph = Multigraph(static_cast<int>(out.to_host_vertex.size()), std::move(edges));
  return out;
}

// Keeps every vertex and only the given edges (ascending host order).
inline Subgraph edge_subgraph(const Multigraph& g, std::vector<EdgeId> keep) {
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  Subgraph out;
  out.to_host_vertex.resize(static_cast<std::size_t>(g.num_vertices()));
  for (VertexId v = 0; v < g.num_vertices(); ++v) out.to_host_vertex[v] = v;
  std::vector<Edge> edges;
  edges.reserve(keep.size());
  for (EdgeId e : keep) {
    if (e < 0 || e >= g.num_edges()) throw ArgumentError("edge id out of range");
    edges.push_back(g.edge(e));
  }
  out.to_host_edge = std::move(keep);
  out.graph = Multigraph(g.num_vertices(), std::move(edges));
  return out;
}

struct Ball {
  std::vector<VertexId> vertices;  // sorted host ids at distance < d
  Subgraph induced;
};

/// Vertices within distance strictly less than d of H, with the multigraph
/// they induce.
inline Ball ball_subgraph(const Multigraph& g, std::span<const VertexId> h, int d) {
  if (h.empty()) throw ArgumentError("ball center set is empty");
  if (d < 0) throw ArgumentError("negative ball radius");
  Ball ball;
  if (d > 0) {
    auto dist = bfs_distances(g, h, d - 1);
    for (VertexId v = 0; v < g.num_vertices(); ++v)
      if (dist[v] >= 0 && dist[v] < d) ball.vertices.push_back(v);
  }
  ball.induced = induced_subgraph(g, ball.vertices);
  return ball;
}

/// G minus the union of the given matchings; vertex set unchanged.
inline Subgraph delete_matchings(const Multigraph& g, std::span<const Matching> ms) {
  std::vector<char> removed(static_cast<std::size_t>(g.num_edges()), 0);
  for (const Matching& m : ms) {
    for (EdgeId e : m.edges) {
      if (e < 0 || e >= g.num_edges())
        throw ArgumentError("matching edge " + std::to_string(e) + " is not in the graph");
      removed[e] = 1;
    }
  }
  std::vector<EdgeId> keep;
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    if (!removed[e]) keep.push_back(e);
  return edge_subgraph(g, std::move(keep));
}

struct ColoringReport {
  bool proper = true;
  std::vector<std::pair<EdgeId, EdgeId>> conflicts;  // (a, b) with a < b
  std::vector<EdgeId> list_violations;
  std::vector<EdgeId> uncolored;
  int colors_used = 0;

  bool clean() const { return proper && list_violations.empty(); }
};

inline ColoringReport validate_coloring(const Multigraph& g, const PartialColoring& coloring,
                                        const ListAssignment* lists = nullptr) {
  if (static_cast<int>(coloring.size()) != g.num_edges())
    throw ArgumentError("coloring size does not match edge count");
  ColoringReport report;
  std::set<ColorId> used;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    if (!coloring[e]) {
      report.uncolored.push_back(e);
      continue;
    }
    used.insert(*coloring[e]);
    if (lists) {
      const auto& l = (*lists)[e];
      if (!std::binary_search(l.begin(), l.end(), *coloring[e])) report.list_violations.push_back(e);
    }
  }
  std::set<std::pair<EdgeId, EdgeId>> pairs;
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    std::map<ColorId, std::vector<EdgeId>> by_color;
    for (EdgeId e : g.incident(v))
      if (coloring[e]) by_color[*coloring[e]].push_back(e);
    for (auto& [c, es] : by_color)
      for (std::size_t i = 0; i < es.size(); ++i)
        for (std::size_t j = i + 1; j < es.size(); ++j)
          pairs.insert({std::min(es[i], es[j]), std::max(es[i], es[j])});
  }
  report.conflicts.assign(pairs.begin(), pairs.end());
  report.proper = report.conflicts.empty();
  report.colors_used = static_cast<int>(used.size());
  return report;
}

/// Parses the edge-list format: "p <n> <m>" then m lines "e <u> <v>".
/// Lines starting with '#' and blank lines are ignored.
inline Multigraph load_multigraph(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::optional<std::pair<int, int>> header;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string tag;
    if (!(fields >> tag) || tag[0] == '#') continue;
    if (tag == "p") {
      int n = -1, m = -1;
      if (header) throw ParseError(line_no, "duplicate problem line");
      if (!(fields >> n >> m) || n < 0 || m < 0) throw ParseError(line_no, "malformed problem line");
      header = {n, m};
    } else if (tag == "e") {
      long long u = -1, v = -1;
      if (!(fields >> u >> v)) throw ParseError(line_no, "malformed edge line");
      if (u == v) throw ParseError(line_no, "self-loop at vertex " + std::to_string(u));
      if (!header) throw ParseError(line_no, "edge line before problem line");
      if (u < 0 || v < 0 || u >= header->first || v >= header->first)
        throw ParseError(line_no, "vertex index out of range");
      edges.push_back({static_cast<VertexId>(u), static_cast<VertexId>(v)});
    } else {
      throw ParseError(line_no, "unknown line type '" + tag + "'");
    }
    std::string extra;
    if (fields >> extra && extra[0] != '#') throw ParseError(line_no, "trailing tokens");
  }
  if (!header) throw ParseError(line_no, "missing problem line");
  if (static_cast<int>(edges.size()) != header->second)
    throw ParseError(line_no, "expected " + std::to_string(header->second) + " edges, found " +
                                  std::to_string(edges.size()));
  return Multigraph(header->first, std::move(edges));
}

inline std::string serialize_multigraph(const Multigraph& g) {
  std::ostringstream out;
  out << "p " << g.num_vertices() << ' ' << g.num_edges() << '\n';
  for (const Edge& e : g.edges()) out << "e " << e.u << ' ' << e.v << '\n';
  return out.str();
}

}  // namespace ecol
