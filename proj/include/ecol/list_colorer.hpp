#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ecol/errors.hpp"
#include "ecol/fractional.hpp"
#include "ecol/hardcore.hpp"
#include "ecol/lll_engine.hpp"
#include "ecol/multigraph.hpp"
#include "ecol/rational.hpp"
#include "ecol/resample.hpp"
#include "ecol/rng.hpp"

namespace ecol {

struct ListConfig {
  Rational epsilon{1, 10};
  std::optional<int> colors;              // C; default: the smallest list size
  std::optional<double> alpha;            // default 1 / ln Delta
  std::optional<int> radius_tprime;       // default 2
  std::optional<int> radius_t;            // default tprime^2
  std::optional<double> edge_threshold;   // default max(0.05, 2 / (3 ln^4 Delta))
  std::optional<double> vertex_threshold; // default alpha - min(alpha / 2, 1 / ln^4 Delta)
  int vertex_min_degree = 0;              // f_v only where the uncolored degree reaches this
  double ledger_tol = 1e-2;               // how close sum_i Pr(e in M_i) must be to 1 after calibration
  int max_iterations = 50;
  std::uint64_t step_cap = 0;             // per iteration; 0: kDefaultStepCap
  std::uint64_t seed = 0;
  int odd_set_cap = 9;
  int exact_chi_vertices = 12;
  bool check_budget = true;               // require C >= ceil((1 + eps) chi*)
  bool audit_locality = true;
  ChainConfig sampler{};
  ExactLimits limits{};
  CalibrationOptions calibration{};

  void validate() const {
    if (epsilon <= 0) throw ArgumentError("epsilon must be positive");
    if (colors && *colors < 1) throw ArgumentError("color budget must be positive");
    if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) throw ArgumentError("alpha must lie in [0, 1]");
    if (radius_tprime && *radius_tprime < 1) throw ArgumentError("radius t' must be at least 1");
    if (radius_t && *radius_t < 1) throw ArgumentError("radius t must be at least 1");
    if (edge_threshold && !(*edge_threshold > 0.0)) throw ArgumentError("edge threshold must be positive");
    if (vertex_threshold && !std::isfinite(*vertex_threshold)) throw ArgumentError("vertex threshold must be finite");
    if (!(ledger_tol > 0.0)) throw ArgumentError("ledger tolerance must be positive");
    if (max_iterations < 0) throw ArgumentError("iteration cap must be non-negative");
    if (vertex_min_degree < 0) throw ArgumentError("vertex minimum degree must be non-negative");
  }
};

struct ListParams {
  int C = 0;
  int max_degree = 0;
  double alpha = 0.0;
  int tprime = 2;
  int t = 4;
  double edge_threshold = 0.05;
  double vertex_threshold = 0.0;
  int vertex_min_degree = 0;
};

inline ListParams resolve_list_params(const Multigraph& g, const ListAssignment& lists, const ListConfig& cfg) {
  ListParams p;
  p.max_degree = max_degree(g);
  int smallest = 0;
  for (const auto& l : lists) smallest = smallest == 0 ? static_cast<int>(l.size()) : std::min(smallest, static_cast<int>(l.size()));
  p.C = cfg.colors.value_or(smallest);
  double logd = std::log(std::max(p.max_degree, 2));
  double l4 = std::pow(logd, 4);
  p.alpha = cfg.alpha.value_or(std::min(1.0, 1.0 / logd));
  int diam = std::max(1, diameter(g));
  p.tprime = std::min(cfg.radius_tprime.value_or(2), diam);
  p.t = std::min(cfg.radius_t.value_or(p.tprime * p.tprime), diam);
  p.edge_threshold = cfg.edge_threshold.value_or(std::max(0.05, 2.0 / (3.0 * l4)));
  p.vertex_threshold = cfg.vertex_threshold.value_or(p.alpha - std::min(p.alpha / 2, 1.0 / l4));
  p.vertex_min_degree = cfg.vertex_min_degree;
  return p;
}

// ---------------------------------------------------------------------------
// Color subgraphs and the marginal ledger

/// G_i for every color that appears on an uncolored edge. Vertex ids are the
/// host's; edges are host ids.
struct ColorSubgraphs {
  std::vector<ColorId> colors;              // ascending
  std::vector<std::vector<EdgeId>> edges;   // per color index, ascending
  std::vector<std::vector<double>> lambda;  // per color index, host-indexed (0 off G_i)
  std::vector<std::vector<int>> colors_of;  // per host edge: color indices whose G_i holds it

  int num_colors() const { return static_cast<int>(colors.size()); }
  bool contains(int ci, EdgeId e) const {
    return std::binary_search(edges[ci].begin(), edges[ci].end(), e);
  }
  int local_index(int ci, EdgeId e) const {
    return static_cast<int>(std::lower_bound(edges[ci].begin(), edges[ci].end(), e) - edges[ci].begin());
  }
};

/// `colored` marks edges that already have a color (nullptr: none).
inline ColorSubgraphs build_color_subgraphs(const Multigraph& g, const ListAssignment& lists,
                                            const PartialColoring* colored = nullptr) {
  if (static_cast<int>(lists.size()) != g.num_edges()) throw ArgumentError("list assignment does not cover every edge");
  std::map<ColorId, std::vector<EdgeId>> by_color;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    if (colored && (*colored)[e]) continue;
    if (lists[e].empty()) throw ArgumentError("edge " + std::to_string(e) + " has an empty list");
    for (ColorId c : lists[e]) by_color[c].push_back(e);
  }
  ColorSubgraphs s;
  s.colors_of.resize(static_cast<std::size_t>(g.num_edges()));
  for (auto& [c, es] : by_color) {
    std::sort(es.begin(), es.end());
    es.erase(std::unique(es.begin(), es.end()), es.end());
    int ci = s.num_colors();
    for (EdgeId e : es) s.colors_of[e].push_back(ci);
    s.colors.push_back(c);
    s.edges.push_back(std::move(es));
    s.lambda.emplace_back(static_cast<std::size_t>(g.num_edges()), 0.0);
  }
  return s;
}

struct MarginalLedger {
  std::vector<std::vector<double>> marginal;  // per color index, host-indexed Pr(e in M_i)
  std::vector<double> sum;                    // per host edge, over the colors whose G_i holds it
  bool exact = true;
};

namespace detail {

inline HardCoreModel color_model(const Multigraph& g, const ColorSubgraphs& s, int ci, Subgraph& sub) {
  sub = edge_subgraph(g, s.edges[ci]);
  std::vector<double> local;
  local.reserve(s.edges[ci].size());
  for (EdgeId e : s.edges[ci]) local.push_back(s.lambda[ci][e]);
  return HardCoreModel(sub.graph, std::move(local));
}

}  // namespace detail

inline MarginalLedger compute_ledger(const Multigraph& g, const ColorSubgraphs& s, const ListConfig& cfg) {
  MarginalLedger L;
  L.sum.assign(static_cast<std::size_t>(g.num_edges()), 0.0);
  MarginalOptions mo = cfg.calibration.marginals;
  mo.limits = cfg.limits;
  mo.seed = cfg.seed;
  for (int ci = 0; ci < s.num_colors(); ++ci) {
    Subgraph sub;
    HardCoreModel model = detail::color_model(g, s, ci, sub);
    MarginalEstimate est = marginals_auto(model, mo, static_cast<std::uint64_t>(ci));
    L.exact = L.exact && est.exact;
    std::vector<double> host(static_cast<std::size_t>(g.num_edges()), 0.0);
    for (std::size_t k = 0; k < s.edges[ci].size(); ++k) {
      host[s.edges[ci][k]] = est.marginals[k];
      L.sum[s.edges[ci][k]] += est.marginals[k];
    }
    L.marginal.push_back(std::move(host));
  }
  return L;
}

struct InitReport {
  MarginalLedger ledger;
  double K_hat = 0.0;          // C * max lambda
  double ledger_error = 0.0;   // max |sum_i Pr(e in M_i) - 1| over uncolored edges
};

/// First iteration (`prev` empty): calibrate every lambda_i to target
/// 1/|L_e| on each of its edges, so that the ledger sums to 1. Later
/// iterations: keep the previous activities on the surviving edges.
inline InitReport init_iteration(const Multigraph& g, ColorSubgraphs& s, const ListParams& p, const ListConfig& cfg,
                                 const std::map<ColorId, std::vector<double>>* prev = nullptr) {
  InitReport r;
  CalibrationOptions co = cfg.calibration;
  co.marginals.limits = cfg.limits;
  for (int ci = 0; ci < s.num_colors(); ++ci) {
    if (prev) {
      auto it = prev->find(s.colors[ci]);
      if (it == prev->end()) throw ArgumentError("no previous activities for color " + std::to_string(s.colors[ci]));
      for (EdgeId e : s.edges[ci]) s.lambda[ci][e] = it->second[e];
      continue;
    }
    Subgraph sub = edge_subgraph(g, s.edges[ci]);
    std::vector<double> targets;
    for (EdgeId e : s.edges[ci]) targets.push_back(1.0 / static_cast<double>(s.colors_of[e].size()));
    co.marginals.seed = cfg.seed ^ splitmix64(static_cast<std::uint64_t>(s.colors[ci]));
    CalibrationResult cal = calibrate_activities(sub.graph, targets, co);
    for (std::size_t k = 0; k < s.edges[ci].size(); ++k) s.lambda[ci][s.edges[ci][k]] = cal.activities[k];
  }
  double max_lambda = 0.0;
  for (int ci = 0; ci < s.num_colors(); ++ci)
    for (EdgeId e : s.edges[ci]) max_lambda = std::max(max_lambda, s.lambda[ci][e]);
  r.K_hat = p.C * max_lambda;
  r.ledger = compute_ledger(g, s, cfg);
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    if (!s.colors_of[e].empty()) r.ledger_error = std::max(r.ledger_error, std::abs(r.ledger.sum[e] - 1.0));
  if (!prev && r.ledger_error > cfg.ledger_tol)
    throw AlgorithmFailure("calibrated ledger is off by " + std::to_string(r.ledger_error) + " (tolerance " +
                           std::to_string(cfg.ledger_tol) + ")");
  return r;
}

// ---------------------------------------------------------------------------
// One iteration: matchings, activation bits, equalizing bits

/// Pr(e colored and removed from G_i in the activation step): e in F_i, or
/// e outside M_i but in F_j for another color j. Colors are independent.
inline double step_two_removal(const ColorSubgraphs& s, const MarginalLedger& L, EdgeId e, int ci, double alpha) {
  double pi = L.marginal[ci][e];
  double none = 1.0;
  for (int cj : s.colors_of[e])
    if (cj != ci) none *= 1.0 - alpha * L.marginal[cj][e];
  return alpha * pi + (1.0 - pi) * (1.0 - none);
}

/// (alpha - q) / (1 - q): total removal probability becomes exactly alpha.
/// q > alpha cannot be corrected and returns 0; `clamped` reports it.
inline double equalizer_probability(double q, double alpha, bool* clamped = nullptr) {
  if (clamped) *clamped = false;
  if (q > alpha) {
    if (clamped) *clamped = true;
    return 0.0;
  }
  if (q >= 1.0) return 0.0;
  return std::clamp((alpha - q) / (1.0 - q), 0.0, 1.0);
}

struct ColorDraw {
  Matching matching;          // host edge ids
  std::vector<char> active;   // per local edge of G_i
  std::vector<char> equalize; // per local edge of G_i
};

struct IterationState {
  std::vector<ColorDraw> draws;  // per color index
};

/// Per color index and local edge: the equalizing probability.
inline std::vector<std::vector<double>> equalizer_table(const ColorSubgraphs& s, const MarginalLedger& L,
                                                        double alpha, int* clamped = nullptr) {
  std::vector<std::vector<double>> eq(static_cast<std::size_t>(s.num_colors()));
  if (clamped) *clamped = 0;
  for (int ci = 0; ci < s.num_colors(); ++ci)
    for (EdgeId e : s.edges[ci]) {
      bool c = false;
      eq[ci].push_back(equalizer_probability(step_two_removal(s, L, e, ci, alpha), alpha, &c));
      if (c && clamped) ++*clamped;
    }
  return eq;
}

inline Matching draw_color_matching(const Multigraph& g, const ColorSubgraphs& s, int ci, Rng& rng,
                                    const ListConfig& cfg) {
  return sample_restricted(g, s.lambda[ci], s.edges[ci], rng, cfg.limits, cfg.sampler);
}

/// Color i draws from stream (seed, iteration, color id).
inline IterationState sample_iteration(const Multigraph& g, const ColorSubgraphs& s,
                                       const std::vector<std::vector<double>>& eq, double alpha,
                                       const ListConfig& cfg, int iteration = 0) {
  IterationState st;
  for (int ci = 0; ci < s.num_colors(); ++ci) {
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(s.colors[ci]));
    ColorDraw d;
    d.matching = draw_color_matching(g, s, ci, rng, cfg);
    for (std::size_t k = 0; k < s.edges[ci].size(); ++k) {
      d.active.push_back(rng.bernoulli(alpha));
      d.equalize.push_back(rng.bernoulli(eq[ci][k]));
    }
    st.draws.push_back(std::move(d));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Outcome of a state: which edges get colored, which survive in each G_i'

struct IterationOutcome {
  std::vector<std::vector<ColorId>> colored_with;  // per host edge: colors i with e in F_i, ascending
  std::vector<std::vector<char>> survives;         // per color index, per local edge: e in G_i'
  std::size_t pairs = 0;          // (e, i) with e in G_i
  std::size_t removed_pairs = 0;  // colored and removed in the activation step, or by the equalizer
};

/// Activation step: F_i = activated edges of M_i get color i; G_i loses
/// V(F_i) and every edge outside M_i that lies in some other F_j. Then each
/// equalizing bit removes its edge from G_i unless the activation step already
/// colored and removed it.
inline IterationOutcome iteration_outcome(const Multigraph& g, const ColorSubgraphs& s, const IterationState& st) {
  IterationOutcome out;
  out.colored_with.resize(static_cast<std::size_t>(g.num_edges()));
  for (int ci = 0; ci < s.num_colors(); ++ci)
    for (EdgeId e : st.draws[ci].matching.edges)
      if (st.draws[ci].active[s.local_index(ci, e)]) out.colored_with[e].push_back(s.colors[ci]);
  std::vector<char> blocked(static_cast<std::size_t>(g.num_vertices()));
  for (int ci = 0; ci < s.num_colors(); ++ci) {
    const ColorDraw& d = st.draws[ci];
    std::fill(blocked.begin(), blocked.end(), 0);
    for (EdgeId e : d.matching.edges)
      if (d.active[s.local_index(ci, e)]) blocked[g.edge(e).u] = blocked[g.edge(e).v] = 1;
    std::vector<char> keep(s.edges[ci].size(), 0);
    for (std::size_t k = 0; k < s.edges[ci].size(); ++k) {
      EdgeId e = s.edges[ci][k];
      bool in_m = d.matching.contains(e);
      bool in_fi = in_m && d.active[k];
      bool in_other = out.colored_with[e].size() > (in_fi ? 1u : 0u);
      bool colored_removed = in_fi || (!in_m && in_other);
      bool removed = blocked[g.edge(e).u] || blocked[g.edge(e).v] || colored_removed;
      bool equalized = d.equalize[k] && !colored_removed;
      keep[k] = !(removed || equalized);
      ++out.pairs;
      if (colored_removed || equalized) ++out.removed_pairs;
    }
    out.survives.push_back(std::move(keep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flaws

struct ListFlaw {
  enum class Kind { Vertex, Edge } kind = Kind::Vertex;
  int index = 0;            // vertex or edge id
  std::vector<VertexId> H;  // footprint handed to Fix
  std::string kind_name() const { return kind == Kind::Vertex ? "f_v" : "f_e"; }
};

/// Proportion of v's uncolored edges that the outcome colors; nullopt when v
/// had fewer than `min_degree` (at least one) uncolored edges.
inline std::optional<double> colored_proportion(const Multigraph& g, const PartialColoring& before,
                                                const IterationOutcome& out, VertexId v, int min_degree = 1) {
  int total = 0, colored = 0;
  for (EdgeId e : g.incident(v)) {
    if (before[e]) continue;
    ++total;
    colored += !out.colored_with[e].empty();
  }
  if (total == 0 || total < min_degree) return std::nullopt;
  return static_cast<double>(colored) / total;
}

/// sum over colors with e in G_i' of Pr(e in Z_i), Z_i hard-core on the part
/// of G_i' induced by S_{<t'}({u, v}).
inline double conditional_ledger(const Multigraph& g, const ColorSubgraphs& s, const IterationOutcome& out, EdgeId e,
                                 int tprime, const ExactLimits& limits = {}) {
  const int r = tprime - 1;
  std::vector<VertexId> ends{g.edge(e).u, g.edge(e).v};
  auto dist = bfs_distances(g, ends, r);
  double total = 0.0;
  for (int ci : s.colors_of[e]) {
    if (!out.survives[ci][s.local_index(ci, e)]) continue;
    std::vector<EdgeId> keep;
    std::vector<double> lam;
    int local_e = -1;
    for (std::size_t k = 0; k < s.edges[ci].size(); ++k) {
      EdgeId f = s.edges[ci][k];
      if (!out.survives[ci][k] || !in_ball(dist, g.edge(f).u, r) || !in_ball(dist, g.edge(f).v, r)) continue;
      if (f == e) local_e = static_cast<int>(keep.size());
      keep.push_back(f);
      lam.push_back(s.lambda[ci][f]);
    }
    Subgraph sub = edge_subgraph(g, keep);
    total += ExactMatchingModel(sub.graph, lam, limits).edge_marginals()[local_e];
  }
  return total;
}

struct FlawContext {
  const Multigraph& g;
  const ColorSubgraphs& s;
  const MarginalLedger& ledger;
  const PartialColoring& before;
  const ListParams& p;
  ExactLimits limits;
  double budget() const { return ledger.exact ? 0.0 : p.edge_threshold / 10; }
};

inline bool has_vertex_flaw(const FlawContext& c, const IterationOutcome& out, VertexId v) {
  auto prop = colored_proportion(c.g, c.before, out, v, c.p.vertex_min_degree);
  return prop && *prop < c.p.vertex_threshold;
}

/// Only edges still uncolored after the outcome can carry f_e.
inline bool has_edge_flaw(const FlawContext& c, const IterationOutcome& out, EdgeId e) {
  if (c.before[e] || !out.colored_with[e].empty()) return false;
  double now = conditional_ledger(c.g, c.s, out, e, c.p.tprime, c.limits);
  return std::abs(now - c.ledger.sum[e]) > c.p.edge_threshold - c.budget();
}

/// All f_v in vertex order, then all f_e in edge order.
inline std::optional<ListFlaw> detect_flaw_iteration(const FlawContext& c, const IterationOutcome& out) {
  for (VertexId v = 0; v < c.g.num_vertices(); ++v)
    if (has_vertex_flaw(c, out, v)) return ListFlaw{ListFlaw::Kind::Vertex, v, {v}};
  for (EdgeId e = 0; e < c.g.num_edges(); ++e)
    if (has_edge_flaw(c, out, e)) return ListFlaw{ListFlaw::Kind::Edge, e, {c.g.edge(e).u, c.g.edge(e).v}};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Fix

/// Resample every matching in S_{<t+1}(H) and re-flip the activation and
/// equalizing bits of the G_i edges induced there. Color i draws from
/// stream (seed, iteration, color id, step).
inline IterationState fix(const Multigraph& g, const ColorSubgraphs& s, const std::vector<VertexId>& H,
                          const IterationState& st, int t, const std::vector<std::vector<double>>& eq, double alpha,
                          const ListConfig& cfg, int iteration, std::uint64_t step) {
  auto dist = bfs_distances(g, H, t);
  auto ball = ball_edge_list(g, dist, t);
  IterationState out;
  std::vector<char> alive(static_cast<std::size_t>(g.num_edges()), 0);
  for (int ci = 0; ci < s.num_colors(); ++ci) {
    const ColorDraw& d = st.draws[ci];
    for (EdgeId e : s.edges[ci]) alive[e] = 1;
    BallSplit split = split_ball(g, dist, t, d.matching, ball, &alive);
    for (EdgeId e : s.edges[ci]) alive[e] = 0;
    Rng rng = Rng::stream(cfg.seed ^ 0x666978ULL, static_cast<std::uint64_t>(iteration),
                          static_cast<std::uint64_t>(s.colors[ci]), step);
    ColorDraw nd;
    nd.matching = splice(split, sample_restricted(g, s.lambda[ci], split.residual, rng, cfg.limits, cfg.sampler));
    nd.active = d.active;
    nd.equalize = d.equalize;
    for (std::size_t k = 0; k < s.edges[ci].size(); ++k) {
      auto [u, v] = g.edge(s.edges[ci][k]);
      if (!in_ball(dist, u, t) || !in_ball(dist, v, t)) continue;
      nd.active[k] = rng.bernoulli(alpha);
      nd.equalize[k] = rng.bernoulli(eq[ci][k]);
    }
    out.draws.push_back(std::move(nd));
  }
  return out;
}

/// True when nothing outside the edges induced by S_{<t+1}(H) changed:
/// matching membership, activation and equalizing bits.
inline bool fix_is_local(const Multigraph& g, const ColorSubgraphs& s, const std::vector<VertexId>& H, int t,
                         const IterationState& before, const IterationState& after) {
  auto dist = bfs_distances(g, H, t);
  for (int ci = 0; ci < s.num_colors(); ++ci) {
    const ColorDraw &a = before.draws[ci], &b = after.draws[ci];
    for (std::size_t k = 0; k < s.edges[ci].size(); ++k) {
      EdgeId e = s.edges[ci][k];
      if (in_ball(dist, g.edge(e).u, t) && in_ball(dist, g.edge(e).v, t)) continue;
      if (a.active[k] != b.active[k] || a.equalize[k] != b.equalize[k]) return false;
      if (a.matching.contains(e) != b.matching.contains(e)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Local search within one iteration

struct SearchState {
  IterationState state;
  IterationOutcome outcome;
};

struct IterationSearch {
  SearchState final;
  RunTrace<SearchState> trace;
  std::uint64_t audits = 0;
  std::uint64_t locality_violations = 0;
};

/// Flaws are keyed vertex v -> v, edge e -> n + e, so the set order is the
/// priority order. After a Fix only flaws within t + t' + 2 of H are
/// re-detected; an empty set triggers a full rescan before success.
inline IterationSearch search_iteration(const FlawContext& ctx, const ColorSubgraphs& s, IterationState initial,
                                        const std::vector<std::vector<double>>& eq, const ListConfig& cfg,
                                        int iteration) {
  const Multigraph& g = ctx.g;
  const int n = g.num_vertices();
  std::set<int> present;
  auto detect = [&](const IterationOutcome& out, int key) {
    return key < n ? has_vertex_flaw(ctx, out, key) : has_edge_flaw(ctx, out, key - n);
  };
  auto rescan = [&](const IterationOutcome& out) {
    present.clear();
    for (int key = 0; key < n + g.num_edges(); ++key)
      if (detect(out, key)) present.insert(key);
  };
  auto flaw_of = [&](int key) {
    if (key < n) return ListFlaw{ListFlaw::Kind::Vertex, key, {key}};
    EdgeId e = key - n;
    return ListFlaw{ListFlaw::Kind::Edge, e, {g.edge(e).u, g.edge(e).v}};
  };

  IterationSearch res;
  SearchState start{std::move(initial), {}};
  start.outcome = iteration_outcome(g, s, start.state);
  rescan(start.outcome);

  auto find = [&](const SearchState& cur) -> std::optional<FoundFlaw> {
    if (present.empty()) rescan(cur.outcome);
    if (present.empty()) return std::nullopt;
    ListFlaw f = flaw_of(*present.begin());
    return FoundFlaw{*present.begin(), f.kind_name(), f.H.size()};
  };
  const int reach = ctx.p.t + ctx.p.tprime + 2;
  std::uint64_t step = 0;
  auto address = [&](SearchState& cur, const FoundFlaw& ff, Rng&) {
    ListFlaw f = flaw_of(ff.id);
    IterationState next = fix(g, s, f.H, cur.state, ctx.p.t, eq, ctx.p.alpha, cfg, iteration, ++step);
    if (cfg.audit_locality) {
      ++res.audits;
      if (!fix_is_local(g, s, f.H, ctx.p.t, cur.state, next)) ++res.locality_violations;
    }
    cur.state = std::move(next);
    cur.outcome = iteration_outcome(g, s, cur.state);
    auto dist = bfs_distances(g, f.H, reach);
    for (VertexId v = 0; v < n; ++v) {
      if (!in_ball(dist, v, reach)) continue;
      if (detect(cur.outcome, v)) present.insert(v); else present.erase(v);
    }
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
      if (!in_ball(dist, g.edge(e).u, reach) && !in_ball(dist, g.edge(e).v, reach)) continue;
      if (detect(cur.outcome, n + e)) present.insert(n + e); else present.erase(n + e);
    }
  };
  Rng unused(cfg.seed);
  std::uint64_t cap = cfg.step_cap ? cfg.step_cap : kDefaultStepCap;
  res.trace = run_search(std::move(start), find, address, cap, unused);
  res.final = res.trace.final_state;
  return res;
}

// ---------------------------------------------------------------------------
// Driver

class ListSearchFailure : public AlgorithmFailure {
 public:
  ListSearchFailure(const std::string& what, std::vector<StepRecord> trace)
      : AlgorithmFailure(what), trace_(std::move(trace)) {}
  const std::vector<StepRecord>& trace() const { return trace_; }

 private:
  std::vector<StepRecord> trace_;
};

class GreedyBlocked : public AlgorithmFailure {
 public:
  explicit GreedyBlocked(EdgeId e)
      : AlgorithmFailure("greedy completion is blocked at edge " + std::to_string(e)), edge_(e) {}
  EdgeId edge() const { return edge_; }

 private:
  EdgeId edge_;
};

struct ListIterationStats {
  int iteration = 0;
  int uncolored_before = 0;
  int colored = 0;
  // Removal fraction over (e, i) pairs with e in G_i, in the sampled state and
  // in the committed (flawless) state. The sampled one is what the equalizer
  // controls.
  double sampled_colored_fraction = 0.0;
  double colored_fraction = 0.0;
  std::size_t pairs = 0;
  std::uint64_t steps = 0;
  std::uint64_t flaws_addressed = 0;
  std::map<std::string, std::uint64_t> flaws_by_kind;
  std::uint64_t locality_audits = 0;
  std::uint64_t locality_violations = 0;
  int max_uncolored_degree = 0;  // after commit
  double ledger_error = 0.0;
  double ledger_max_drift = 0.0;  // vs. the previous iteration's ledger on still-uncolored edges
  int clamped_equalizers = 0;
};

struct ListStats {
  ListParams params;
  std::optional<Rational> chi_star;
  double K_hat = 0.0;
  std::vector<ListIterationStats> iterations;
  std::string stop_reason;
  int greedy_colored = 0;
};

struct ListResult {
  PartialColoring coloring;
  ListStats stats;
};

namespace detail {

inline std::vector<int> uncolored_degrees(const Multigraph& g, const PartialColoring& c) {
  std::vector<int> d(static_cast<std::size_t>(g.num_vertices()), 0);
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    if (!c[e]) ++d[g.edge(e).u], ++d[g.edge(e).v];
  return d;
}

// Every uncolored edge has more colors left than uncolored neighbours, so
// greedy completion in any order cannot block.
inline bool greedy_safe(const Multigraph& g, const PartialColoring& c, const ListAssignment& lists) {
  auto d = uncolored_degrees(g, c);
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    if (!c[e] && static_cast<int>(lists[e].size()) < d[g.edge(e).u] + d[g.edge(e).v] - 1) return false;
  return true;
}

}  // namespace detail

/// Smallest color of each uncolored edge's list not yet used at either
/// endpoint, in edge order.
inline int greedy_list_completion(const Multigraph& g, PartialColoring& c, const ListAssignment& lists) {
  std::vector<std::set<ColorId>> used(static_cast<std::size_t>(g.num_vertices()));
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    if (c[e]) used[g.edge(e).u].insert(*c[e]), used[g.edge(e).v].insert(*c[e]);
  int count = 0;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    if (c[e]) continue;
    auto [u, v] = g.edge(e);
    auto it = std::find_if(lists[e].begin(), lists[e].end(),
                           [&](ColorId x) { return !used[u].count(x) && !used[v].count(x); });
    if (it == lists[e].end()) throw GreedyBlocked(e);
    c[e] = *it;
    used[u].insert(*it);
    used[v].insert(*it);
    ++count;
  }
  return count;
}

inline ListResult list_edge_color(const Multigraph& g, const ListAssignment& lists_in, const ListConfig& cfg = {}) {
  cfg.validate();
  if (static_cast<int>(lists_in.size()) != g.num_edges()) throw ArgumentError("list assignment does not cover every edge");
  ListAssignment lists = lists_in;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    auto& l = lists[e];
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
    if (l.empty()) throw ArgumentError("edge " + std::to_string(e) + " has an empty list");
  }
  ListResult res;
  res.coloring.assign(static_cast<std::size_t>(g.num_edges()), std::nullopt);
  if (g.num_edges() == 0) {
    res.stats.stop_reason = "edgeless";
    return res;
  }
  ListParams p = resolve_list_params(g, lists, cfg);
  res.stats.params = p;
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    if (static_cast<int>(lists[e].size()) < p.C)
      throw ArgumentError("edge " + std::to_string(e) + " has " + std::to_string(lists[e].size()) +
                          " colors, fewer than the budget " + std::to_string(p.C));
  if (cfg.check_budget) {
    int n = g.num_vertices();
    FractionalIndex chi = n <= cfg.exact_chi_vertices ? chi_star(g) : chi_star(g, std::min(cfg.odd_set_cap, n));
    res.stats.chi_star = chi.value;
    std::int64_t need = ceil_of((1 + cfg.epsilon) * chi.value);
    if (p.C < need)
      throw ArgumentError("color budget " + std::to_string(p.C) + " is below ceil((1 + eps) chi*) = " +
                          std::to_string(need));
  }

  ListAssignment current = lists;
  std::optional<std::map<ColorId, std::vector<double>>> prev;
  std::vector<double> prev_sum;
  for (int iter = 0;; ++iter) {
    auto deg = detail::uncolored_degrees(g, res.coloring);
    int remaining = 0;
    for (EdgeId e = 0; e < g.num_edges(); ++e) remaining += !res.coloring[e];
    int max_unc = *std::max_element(deg.begin(), deg.end());
    if (remaining == 0) { res.stats.stop_reason = "all colored"; break; }
    if (iter > 0 && res.stats.K_hat > 0 && max_unc < p.max_degree / (2 * res.stats.K_hat)) {
      res.stats.stop_reason = "uncolored degree";
      break;
    }
    if (detail::greedy_safe(g, res.coloring, current)) { res.stats.stop_reason = "greedy-safe"; break; }
    if (iter == cfg.max_iterations) { res.stats.stop_reason = "iteration cap"; break; }

    ColorSubgraphs s = build_color_subgraphs(g, current, &res.coloring);
    InitReport init = init_iteration(g, s, p, cfg, prev ? &*prev : nullptr);
    if (iter == 0) res.stats.K_hat = init.K_hat;
    ListIterationStats it;
    it.iteration = iter;
    it.uncolored_before = remaining;
    it.ledger_error = init.ledger_error;
    if (iter > 0)
      for (EdgeId e = 0; e < g.num_edges(); ++e)
        if (!res.coloring[e]) it.ledger_max_drift = std::max(it.ledger_max_drift, std::abs(init.ledger.sum[e] - prev_sum[e]));
    auto eq = equalizer_table(s, init.ledger, p.alpha, &it.clamped_equalizers);
    IterationState sampled = sample_iteration(g, s, eq, p.alpha, cfg, iter);
    IterationOutcome first = iteration_outcome(g, s, sampled);
    it.pairs = first.pairs;
    it.sampled_colored_fraction = first.pairs ? static_cast<double>(first.removed_pairs) / first.pairs : 0.0;

    FlawContext ctx{g, s, init.ledger, res.coloring, p, cfg.limits};
    IterationSearch search = search_iteration(ctx, s, std::move(sampled), eq, cfg, iter);
    it.steps = search.trace.steps;
    it.flaws_addressed = search.trace.records.size();
    for (const auto& r : search.trace.records) ++it.flaws_by_kind[r.kind];
    it.locality_audits = search.audits;
    it.locality_violations = search.locality_violations;
    if (!search.trace.terminated_flawless)
      throw ListSearchFailure("iteration " + std::to_string(iter) + " hit the step cap (" +
                                  std::to_string(search.trace.steps) + " steps)",
                              search.trace.records);
    const IterationOutcome& out = search.final.outcome;
    it.colored_fraction = out.pairs ? static_cast<double>(out.removed_pairs) / out.pairs : 0.0;

    for (EdgeId e = 0; e < g.num_edges(); ++e) {
      if (res.coloring[e]) continue;
      if (!out.colored_with[e].empty()) {
        res.coloring[e] = out.colored_with[e].front();
        ++it.colored;
        continue;
      }
      std::vector<ColorId> left;
      for (int ci : s.colors_of[e])
        if (out.survives[ci][s.local_index(ci, e)]) left.push_back(s.colors[ci]);
      if (left.empty()) throw AlgorithmFailure("edge " + std::to_string(e) + " lost every color in iteration " + std::to_string(iter));
      current[e] = std::move(left);
    }
    auto after = detail::uncolored_degrees(g, res.coloring);
    it.max_uncolored_degree = *std::max_element(after.begin(), after.end());
    res.stats.iterations.push_back(std::move(it));

    prev.emplace();
    for (int ci = 0; ci < s.num_colors(); ++ci) (*prev)[s.colors[ci]] = s.lambda[ci];
    prev_sum = init.ledger.sum;
  }
  res.stats.greedy_colored = greedy_list_completion(g, res.coloring, current);
  ColoringReport report = validate_coloring(g, res.coloring, &lists);
  if (!report.clean() || !report.uncolored.empty())
    throw AlgorithmFailure("list coloring failed validation");
  return res;
}

}  // namespace ecol
