#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "ecol/multigraph.hpp"
#include "ecol/rational.hpp"

namespace ecol {

/// Connected vertex set H with its induced edge count; `ratio` is
/// |E(H)| / floor(|H|/2).
struct OddSetCertificate {
  std::vector<VertexId> vertices;  // sorted
  int edge_count = 0;
  Rational ratio;
};

struct FractionalIndex {
  Rational value;
  bool degree_witness = false;                    // Delta attains the maximum
  std::optional<OddSetCertificate> certificate;   // densest set found, if any
  bool bounded = false;                           // search was size-capped: value is a lower bound
  int max_degree = 0;
};

namespace detail {

struct MultiplicityTable {
  int n = 0;
  std::vector<int> mult;                       // n*n
  std::vector<std::vector<VertexId>> neighbors;  // distinct, ascending

  explicit MultiplicityTable(const Multigraph& g) : n(g.num_vertices()) {
    mult.assign(static_cast<std::size_t>(n) * n, 0);
    neighbors.resize(n);
    for (const Edge& e : g.edges()) {
      ++mult[e.u * n + e.v];
      ++mult[e.v * n + e.u];
    }
    for (VertexId u = 0; u < n; ++u)
      for (VertexId v = 0; v < n; ++v)
        if (mult[u * n + v] > 0) neighbors[u].push_back(v);
  }
  int at(VertexId u, VertexId v) const { return mult[u * n + v]; }
};

// Enumerates every connected vertex set of size <= max_size exactly once
// (extension-set method: sets are grown from their minimum vertex, only
// through exclusive neighbours). The visitor sees the unsorted member list
// and the induced edge count.
class ConnectedSubsetEnumerator {
 public:
  using Visitor = std::function<void(const std::vector<VertexId>&, int)>;

  ConnectedSubsetEnumerator(const MultiplicityTable& table, int max_size)
      : t_(table), max_size_(max_size), mark_(static_cast<std::size_t>(table.n), 0) {}

  void run(const Visitor& visit) {
    for (VertexId root = 0; root < t_.n; ++root) {
      root_ = root;
      std::vector<VertexId> ext;
      add(root);
      for (VertexId u : t_.neighbors[root])
        if (u > root) ext.push_back(u);
      extend(ext, 0, visit);
      remove(root);
    }
  }

 private:
  void add(VertexId w) {
    sub_.push_back(w);
    ++mark_[w];
    for (VertexId x : t_.neighbors[w]) ++mark_[x];
  }
  void remove(VertexId w) {
    sub_.pop_back();
    --mark_[w];
    for (VertexId x : t_.neighbors[w]) --mark_[x];
  }

  void extend(std::vector<VertexId> ext, int edges, const Visitor& visit) {
    visit(sub_, edges);
    if (static_cast<int>(sub_.size()) >= max_size_) return;
    while (!ext.empty()) {
      VertexId w = ext.back();
      ext.pop_back();
      std::vector<VertexId> next = ext;
      for (VertexId u : t_.neighbors[w])
        if (u > root_ && mark_[u] == 0) next.push_back(u);
      int gained = 0;
      for (VertexId x : sub_) gained += t_.at(w, x);
      add(w);
      extend(std::move(next), edges + gained, visit);
      remove(w);
    }
  }

  const MultiplicityTable& t_;
  int max_size_;
  VertexId root_ = 0;
  std::vector<VertexId> sub_;
  std::vector<int> mark_;  // >0 when in sub or adjacent to it
};

inline bool lex_less(const std::vector<VertexId>& a, const std::vector<VertexId>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

/// Fractional chromatic index max(Delta, Gamma). Gamma is searched over
/// connected vertex sets of size <= size_cap; with size_cap >= n the value is
/// exact, otherwise a lower bound flagged `bounded`.
inline FractionalIndex chi_star(const Multigraph& g, std::optional<int> size_cap = std::nullopt) {
  if (g.num_edges() == 0) throw ArgumentError("fractional chromatic index of an edgeless graph");
  const int n = g.num_vertices();
  int cap = size_cap.value_or(n);
  if (cap < 2) throw ArgumentError("size cap must be at least 2");
  FractionalIndex out;
  out.max_degree = max_degree(g);
  out.bounded = cap < n;

  detail::MultiplicityTable table(g);
  std::optional<OddSetCertificate> best;
  // Even sets of size >= 4 never exceed Delta, so only pairs and odd sets are scored.
  detail::ConnectedSubsetEnumerator(table, std::min(cap, n)).run(
      [&](const std::vector<VertexId>& members, int edges) {
        int k = static_cast<int>(members.size());
        if (k < 2 || (k % 2 == 0 && k != 2)) return;
        Rational ratio(edges, k / 2);
        if (best && ratio < best->ratio) return;
        std::vector<VertexId> sorted = members;
        std::sort(sorted.begin(), sorted.end());
        if (best && ratio == best->ratio && !detail::lex_less(sorted, best->vertices)) return;
        best = OddSetCertificate{std::move(sorted), edges, ratio};
      });

  Rational delta(out.max_degree);
  if (!best || best->ratio <= delta) {
    out.value = delta;
    out.degree_witness = true;
  } else {
    out.value = best->ratio;
  }
  out.certificate = std::move(best);
  return out;
}

/// Searches connected odd sets H with 3 <= |H| <= vertex_cap for
/// |E(H)| > ((|H|-1)/2) * c. Exhaustive within the cap; returns the
/// lexicographically smallest violator (by sorted vertex list).
inline std::optional<OddSetCertificate> find_violated_matching_constraint(const Multigraph& g,
                                                                          const Rational& c,
                                                                          int vertex_cap) {
  if (c <= 0) throw ArgumentError("matching constraint bound must be positive");
  if (vertex_cap < 3) return std::nullopt;
  detail::MultiplicityTable table(g);
  std::optional<OddSetCertificate> best;
  detail::ConnectedSubsetEnumerator(table, std::min(vertex_cap, g.num_vertices()))
      .run([&](const std::vector<VertexId>& members, int edges) {
        int k = static_cast<int>(members.size());
        if (k < 3 || k % 2 == 0) return;
        if (!(Rational(2 * edges) > Rational(k - 1) * c)) return;
        std::vector<VertexId> sorted = members;
        std::sort(sorted.begin(), sorted.end());
        if (best && !detail::lex_less(sorted, best->vertices)) return;
        best = OddSetCertificate{std::move(sorted), edges, Rational(edges, k / 2)};
      });
  return best;
}

// Recounts |E(H)| directly from the edge list.
inline int induced_edge_count(const Multigraph& g, const std::vector<VertexId>& h) {
  std::vector<char> in(static_cast<std::size_t>(g.num_vertices()), 0);
  for (VertexId v : h) in[v] = 1;
  int count = 0;
  for (const Edge& e : g.edges()) count += in[e.u] && in[e.v];
  return count;
}

}  // namespace ecol
