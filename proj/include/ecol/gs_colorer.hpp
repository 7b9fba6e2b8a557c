#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ecol/fractional.hpp"
#include "ecol/hardcore.hpp"
#include "ecol/lll_engine.hpp"
#include "ecol/multigraph.hpp"
#include "ecol/oracle.hpp"
#include "ecol/rational.hpp"
#include "ecol/resample.hpp"

namespace ecol {

struct GsConfig {
  Rational epsilon{1, 10};
  std::optional<int> chi0;
  std::optional<int> radius_t;
  ChainConfig sampler{};           // fallback chain for balls beyond the exact limits
  int retries = 3;
  std::uint64_t seed = 0;
  int odd_set_cap = 9;             // f_H search never looks at sets larger than this
  int exact_chi_vertices = 12;     // chi* by full search up to this many vertices
  std::uint64_t step_cap = 0;      // 0: kDefaultStepCap
  int verify_vertices = 10;        // flawless rounds re-checked exactly up to this size
  ExactLimits limits{};
  CalibrationOptions calibration{};

  void validate() const {
    if (epsilon <= 0 || epsilon > Rational(1, 10)) throw ArgumentError("epsilon must lie in (0, 1/10]");
    if (epsilon.denominator() > 10000) throw ArgumentError("epsilon denominator must be at most 10000");
    if (chi0 && *chi0 < 1) throw ArgumentError("chi0 must be positive");
    if (radius_t && *radius_t < 1) throw ArgumentError("radius t must be at least 1");
    if (retries < 0) throw ArgumentError("retry limit must be non-negative");
    if (odd_set_cap < 3) throw ArgumentError("odd set cap must be at least 3");
  }
};

/// max(64, ceil((4/eps)^4)) unless overridden.
inline std::int64_t effective_chi0(const GsConfig& cfg) {
  if (cfg.chi0) return *cfg.chi0;
  __int128 p = cfg.epsilon.numerator(), q = cfg.epsilon.denominator();
  __int128 num = 4 * q, n4 = num * num * num * num, d4 = p * p * p * p;
  __int128 c = (n4 + d4 - 1) / d4;
  return static_cast<std::int64_t>(std::max<__int128>(64, c));
}

/// Largest integer N with N^4 <= x^3, i.e. floor(x^{3/4}).
inline int floor_three_quarters(const Rational& x) {
  if (x <= 0) return 0;
  __int128 p = x.numerator(), q = x.denominator();
  __int128 p3 = p * p * p, q3 = q * q * q;
  auto fits = [&](__int128 n) { return n * n * n * n * q3 <= p3; };
  int n = static_cast<int>(std::pow(to_double(x), 0.75));
  while (n > 0 && !fits(n)) --n;
  while (fits(n + 1)) ++n;
  return n;
}

inline int largest_odd_at_most(const Rational& x) {
  std::int64_t f = floor_of(x);
  if (f % 2 == 0) --f;
  return static_cast<int>(std::max<std::int64_t>(f, -1));
}

struct RoundParams {
  Rational chi_star;
  bool chi_bounded = false;
  int max_degree = 0;
  int N = 0;
  Rational c_star;
  Rational delta;             // eps / 4
  Rational vertex_threshold;  // f_v present when d_{G_sigma}(v) exceeds this
  int t = 1;
  double K_hat = 0.0;
  int vertex_cap = 0;         // largest odd <= Delta / (delta N)
  int search_cap = 0;         // vertex_cap limited by the configured odd set cap
};

/// The round parameters that depend only on chi*, Delta and the config;
/// nullopt means chi* is below the effective chi0 (color greedily).
inline std::optional<RoundParams> round_params(const Rational& chi, int max_deg, int n, const GsConfig& cfg) {
  if (chi < Rational(effective_chi0(cfg))) return std::nullopt;
  RoundParams p;
  p.chi_star = chi;
  p.max_degree = max_deg;
  p.N = floor_three_quarters(chi);
  if (p.N < 1) return std::nullopt;
  p.delta = cfg.epsilon / Rational(4);
  p.c_star = chi - Rational(p.N) / (Rational(1) + cfg.epsilon);
  p.vertex_threshold = p.c_star - p.delta * Rational(p.N);
  p.vertex_cap = largest_odd_at_most(Rational(max_deg) / (p.delta * Rational(p.N)));
  p.search_cap = std::min({p.vertex_cap, cfg.odd_set_cap, n});
  return p;
}

/// ceil(8 (K + 1)^2 / delta + 2), clamped to [1, diameter].
inline int radius_from_charge_bound(double K_hat, const Rational& delta, int diam) {
  double t = std::ceil(8.0 * (K_hat + 1.0) * (K_hat + 1.0) / to_double(delta) + 2.0);
  return static_cast<int>(std::clamp<double>(t, 1.0, std::max(1, diam)));
}

struct RoundPlan {
  RoundParams params;
  ActivityVector activities;
  bool calibration_exact = true;
};

inline FractionalIndex round_chi_star(const Multigraph& g, const GsConfig& cfg) {
  if (g.num_vertices() <= cfg.exact_chi_vertices) return chi_star(g);
  return chi_star(g, std::min(cfg.odd_set_cap, g.num_vertices()));
}

/// chi*, N, c* and the calibrated activities for target (1 - delta)/chi*.
inline std::optional<RoundPlan> plan_round(const Multigraph& g, const GsConfig& cfg) {
  cfg.validate();
  if (g.num_edges() == 0) return std::nullopt;
  FractionalIndex chi = round_chi_star(g, cfg);
  auto params = round_params(chi.value, chi.max_degree, g.num_vertices(), cfg);
  if (!params) return std::nullopt;
  params->chi_bounded = chi.bounded;
  RoundPlan plan;
  Rational target = (Rational(1) - params->delta) / chi.value;
  std::vector<double> targets(static_cast<std::size_t>(g.num_edges()), to_double(target));
  CalibrationResult cal = calibrate_activities(g, targets, cfg.calibration);
  plan.activities = cal.activities;
  plan.calibration_exact = cal.exact;
  params->K_hat = cal.K_hat;
  params->t = cfg.radius_t ? std::clamp(*cfg.radius_t, 1, std::max(1, diameter(g)))
                           : radius_from_charge_bound(cal.K_hat, params->delta, diameter(g));
  plan.params = *params;
  return plan;
}

struct GsState {
  std::vector<Matching> matchings;
};

/// d_{G_sigma}(v): edges at v outside the union of the matchings.
inline int remaining_degree(const Multigraph& g, const GsState& s, VertexId v) {
  int used = 0;
  for (EdgeId e : g.incident(v))
    used += std::any_of(s.matchings.begin(), s.matchings.end(), [e](const Matching& m) { return m.contains(e); });
  return g.degree(v) - used;
}

inline std::uint64_t round_seed(std::uint64_t seed, int round, int attempt) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(round) * 1000003ULL + static_cast<std::uint64_t>(attempt)));
}

/// N independent draws from the calibrated hard-core distribution, color i
/// drawn from stream (seed, i).
inline GsState initial_state(const Multigraph& g, int N, const ActivityVector& lambda, std::uint64_t seed,
                             const ExactLimits& limits = {}, const ChainConfig& chain = {}) {
  GsState s;
  if (N <= 0) return s;
  std::optional<ExactMatchingModel> exact;
  try {
    exact.emplace(g, lambda, limits);
  } catch (const CapacityError&) {
  }
  for (int i = 0; i < N; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i), 0x696e6974);
    s.matchings.push_back(exact ? exact->sample(rng) : sample_matching(HardCoreModel(g, lambda), chain, rng));
  }
  return s;
}

struct GsFlaw {
  enum class Kind { Vertex, OddSet } kind = Kind::Vertex;
  std::vector<VertexId> H;  // {v} for vertex flaws
  std::string kind_name() const { return kind == Kind::Vertex ? "f_v" : "f_H"; }
};

/// Vertex flaws first, in vertex order; then the lexicographically first
/// violated odd set of G_sigma within the search cap.
inline std::optional<GsFlaw> detect_flaw(const Multigraph& g, const GsState& s, const RoundParams& p) {
  for (VertexId v = 0; v < g.num_vertices(); ++v)
    if (Rational(remaining_degree(g, s, v)) > p.vertex_threshold) return GsFlaw{GsFlaw::Kind::Vertex, {v}};
  Subgraph rest = delete_matchings(g, s.matchings);
  if (auto cert = find_violated_matching_constraint(rest.graph, p.c_star, p.search_cap))
    return GsFlaw{GsFlaw::Kind::OddSet, cert->vertices};
  return std::nullopt;
}

/// Re-draws every matching inside S_{<d+1}(H), keeping edges that leave the
/// ball or lie on its rim frozen. Color i uses stream (seed, i, step).
inline GsState resample(const Multigraph& g, const std::vector<VertexId>& H, const GsState& s, int d,
                        const ActivityVector& lambda, std::uint64_t seed, std::uint64_t step,
                        const ExactLimits& limits = {}, const ChainConfig& chain = {}) {
  if (d < 1) throw ArgumentError("resample radius must be at least 1");
  auto dist = bfs_distances(g, H, d);
  auto ball_edges = ball_edge_list(g, dist, d);
  GsState out;
  for (std::size_t i = 0; i < s.matchings.size(); ++i) {
    BallSplit split = split_ball(g, dist, d, s.matchings[i], ball_edges);
    Rng rng = Rng::stream(seed, i, step);
    out.matchings.push_back(splice(split, sample_restricted(g, lambda, split.residual, rng, limits, chain)));
  }
  return out;
}

/// Exact law of the resampled matching for a one-color state.
inline std::vector<std::pair<Matching, double>> resample_distribution(const Multigraph& g,
                                                                      const std::vector<VertexId>& H,
                                                                      const Matching& m, int d,
                                                                      const ActivityVector& lambda) {
  auto dist = bfs_distances(g, H, d);
  auto ball_edges = ball_edge_list(g, dist, d);
  BallSplit split = split_ball(g, dist, d, m, ball_edges);
  Subgraph sub = edge_subgraph(g, split.residual);
  std::vector<double> local;
  for (EdgeId e : split.residual) local.push_back(lambda[e]);
  std::vector<std::pair<Matching, double>> out;
  double z = 0.0;
  for (auto& lm : oracle::enumerate_matchings(sub.graph)) {
    double w = 1.0;
    std::vector<EdgeId> host;
    for (EdgeId e : lm) {
      w *= local[e];
      host.push_back(sub.to_host_edge[e]);
    }
    out.push_back({splice(split, make_matching(host)), w});
    z += w;
  }
  for (auto& [mm, w] : out) w /= z;
  return out;
}

struct RoundStats {
  RoundParams params;
  std::uint64_t steps = 0;
  int attempts = 0;
  std::map<std::string, int> flaws_by_kind;
};

struct RoundOutcome {
  std::vector<Matching> matchings;
  Subgraph remaining;
  RoundStats stats;
  std::vector<StepRecord> trace;
};

class RoundFailure : public AlgorithmFailure {
 public:
  RoundFailure(const std::string& what, std::vector<StepRecord> trace)
      : AlgorithmFailure(what), trace_(std::move(trace)) {}
  const std::vector<StepRecord>& trace() const { return trace_; }

 private:
  std::vector<StepRecord> trace_;
};

namespace detail {

// Tracks which vertices currently carry a vertex flaw, so that the search
// only re-examines the ball touched by the last resample.
class VertexFlawIndex {
 public:
  VertexFlawIndex(const Multigraph& g, const RoundParams& p) : g_(g), p_(p) {}

  void rebuild(const GsState& s) {
    flawed_.clear();
    for (VertexId v = 0; v < g_.num_vertices(); ++v) update(s, v);
  }
  void update(const GsState& s, VertexId v) {
    if (Rational(remaining_degree(g_, s, v)) > p_.vertex_threshold) flawed_.insert(v);
    else flawed_.erase(v);
  }
  std::optional<VertexId> first() const {
    if (flawed_.empty()) return std::nullopt;
    return *flawed_.begin();
  }

 private:
  const Multigraph& g_;
  const RoundParams& p_;
  std::set<VertexId> flawed_;
};

}  // namespace detail

/// One round: local search from N calibrated samples until no f_v or f_H
/// flaw remains; re-seeded up to cfg.retries times.
inline RoundOutcome run_round(const Multigraph& g, const RoundPlan& plan, const GsConfig& cfg, int round = 0) {
  const RoundParams& p = plan.params;
  std::uint64_t cap = cfg.step_cap ? cfg.step_cap : kDefaultStepCap;
  std::vector<StepRecord> last_trace;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    std::uint64_t rs = round_seed(cfg.seed, round, attempt);
    GsState start = initial_state(g, p.N, plan.activities, rs, cfg.limits, cfg.sampler);
    detail::VertexFlawIndex index(g, p);
    index.rebuild(start);
    std::vector<GsFlaw> pending(1);
    auto find = [&](const GsState& s) -> std::optional<FoundFlaw> {
      if (auto v = index.first()) {
        pending[0] = GsFlaw{GsFlaw::Kind::Vertex, {*v}};
        return FoundFlaw{*v, "f_v", 1};
      }
      Subgraph rest = delete_matchings(g, s.matchings);
      if (auto cert = find_violated_matching_constraint(rest.graph, p.c_star, p.search_cap)) {
        pending[0] = GsFlaw{GsFlaw::Kind::OddSet, cert->vertices};
        return FoundFlaw{g.num_vertices() + cert->vertices.front(), "f_H", cert->vertices.size()};
      }
      return std::nullopt;
    };
    std::uint64_t step = 0;
    auto address = [&](GsState& s, const FoundFlaw&, Rng&) {
      const GsFlaw& f = pending[0];
      ++step;
      s = resample(g, f.H, s, p.t, plan.activities, rs, step, cfg.limits, cfg.sampler);
      auto dist = bfs_distances(g, f.H, p.t);
      for (VertexId v = 0; v < g.num_vertices(); ++v)
        if (in_ball(dist, v, p.t)) index.update(s, v);
    };
    Rng unused(rs);
    RunTrace<GsState> trace = run_search(std::move(start), find, address, cap, unused);
    last_trace = trace.records;
    if (!trace.terminated_flawless) continue;

    RoundOutcome out;
    out.matchings = std::move(trace.final_state.matchings);
    for (const Matching& m : out.matchings)
      if (!is_matching(g, m)) throw AlgorithmFailure("round produced an invalid matching");
    out.remaining = delete_matchings(g, out.matchings);
    out.stats.params = p;
    out.stats.steps = trace.steps;
    out.stats.attempts = attempt + 1;
    out.stats.flaws_by_kind["f_v"] = 0;
    out.stats.flaws_by_kind["f_H"] = 0;
    for (const auto& r : trace.records) ++out.stats.flaws_by_kind[r.kind];
    out.trace = std::move(trace.records);
    if (g.num_vertices() <= cfg.verify_vertices && out.remaining.graph.num_edges() > 0) {
      Rational after = chi_star(out.remaining.graph).value;
      if (after > p.c_star)
        throw AlgorithmFailure("flawless round left chi* = " + to_string(after) + " above c* = " +
                               to_string(p.c_star));
    }
    return out;
  }
  throw RoundFailure("round " + std::to_string(round) + " hit the step cap on all " +
                         std::to_string(cfg.retries + 1) + " attempts",
                     std::move(last_trace));
}

inline RoundOutcome run_round(const Multigraph& g, const GsConfig& cfg, int round = 0) {
  auto plan = plan_round(g, cfg);
  if (!plan) throw ArgumentError("chi* is below the effective chi0; no round to run");
  return run_round(g, *plan, cfg, round);
}

/// Edges in id order, each taking the smallest color (from `offset` on)
/// unused at both endpoints.
inline PartialColoring greedy_edge_coloring(const Multigraph& g, int offset = 0) {
  PartialColoring out(static_cast<std::size_t>(g.num_edges()));
  std::vector<std::vector<char>> used(static_cast<std::size_t>(g.num_vertices()));
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    auto [u, v] = g.edge(e);
    int c = 0;
    while ((c < static_cast<int>(used[u].size()) && used[u][c]) || (c < static_cast<int>(used[v].size()) && used[v][c])) ++c;
    for (VertexId x : {u, v}) {
      if (static_cast<int>(used[x].size()) <= c) used[x].resize(static_cast<std::size_t>(c) + 1, 0);
      used[x][c] = 1;
    }
    out[e] = offset + c;
  }
  return out;
}

struct GsStats {
  std::vector<RoundStats> rounds;
  int colors_used = 0;
  Rational chi_star;
  bool chi_bounded = false;
  double ratio = 0.0;
  int greedy_colors = 0;
};

struct GsResult {
  PartialColoring coloring;
  GsStats stats;
};

/// Rounds of N matchings (one new color each) while chi* >= chi0, then a
/// greedy finish on what is left.
inline GsResult color_multigraph(const Multigraph& g, const GsConfig& cfg) {
  cfg.validate();
  GsResult res;
  res.coloring.assign(static_cast<std::size_t>(g.num_edges()), std::nullopt);
  if (g.num_edges() == 0) return res;
  FractionalIndex chi = round_chi_star(g, cfg);
  res.stats.chi_star = chi.value;
  res.stats.chi_bounded = chi.bounded;

  std::vector<EdgeId> alive(static_cast<std::size_t>(g.num_edges()));
  for (EdgeId e = 0; e < g.num_edges(); ++e) alive[e] = e;
  Subgraph cur = edge_subgraph(g, alive);
  int next_color = 0;
  for (int round = 0;; ++round) {
    auto plan = plan_round(cur.graph, cfg);
    if (!plan) break;
    RoundOutcome out = run_round(cur.graph, *plan, cfg, round);
    for (std::size_t i = 0; i < out.matchings.size(); ++i) {
      for (EdgeId e : out.matchings[i].edges) {
        EdgeId host = cur.to_host_edge[e];
        if (!res.coloring[host]) res.coloring[host] = next_color + static_cast<int>(i);
      }
    }
    next_color += static_cast<int>(out.matchings.size());
    std::vector<EdgeId> keep;
    for (EdgeId e : out.remaining.to_host_edge) keep.push_back(cur.to_host_edge[e]);
    cur = edge_subgraph(g, keep);
    res.stats.rounds.push_back(out.stats);
    if (cur.graph.num_edges() == 0) break;
  }
  PartialColoring rest = greedy_edge_coloring(cur.graph, next_color);
  std::set<ColorId> greedy_colors;
  for (EdgeId e = 0; e < cur.graph.num_edges(); ++e) {
    res.coloring[cur.to_host_edge[e]] = rest[e];
    greedy_colors.insert(*rest[e]);
  }
  res.stats.greedy_colors = static_cast<int>(greedy_colors.size());
  ColoringReport report = validate_coloring(g, res.coloring);
  if (!report.proper || !report.uncolored.empty()) throw AlgorithmFailure("internal error: coloring is not proper");
  res.stats.colors_used = report.colors_used;
  res.stats.ratio = res.stats.colors_used / to_double(chi.value);
  return res;
}

// ---------------------------------------------------------------------------
// One-color explicit systems for exact charge and commutativity analysis

struct ExplicitGsOptions {
  std::vector<VertexId> vertices;               // one f_v per listed vertex
  Rational vertex_threshold;                    // f_v: d_{G_sigma}(v) > threshold
  std::vector<std::vector<VertexId>> odd_sets;  // one f_H per listed set
  Rational c_star{1};
  int radius = 1;
};

struct ExplicitGs {
  ExplicitSystem system;
  std::vector<Matching> states;
};

/// State space: all matchings of g (N = 1) weighted by the hard-core
/// measure; each flaw's action is the exact resample law around its set.
inline ExplicitGs build_explicit_system(const Multigraph& g, const ActivityVector& lambda,
                                        const ExplicitGsOptions& opts) {
  ExplicitGs out;
  std::map<std::vector<EdgeId>, int> index;
  for (auto& m : oracle::enumerate_matchings(g)) {
    index[m] = static_cast<int>(out.states.size());
    out.states.push_back(Matching{m});
    double w = 1.0;
    for (EdgeId e : m) w *= lambda[e];
    out.system.mu.push_back(w);
  }
  double z = 0.0;
  for (double w : out.system.mu) z += w;
  for (double& w : out.system.mu) w /= z;
  if (out.states.size() > kMaxExplicitStates) throw CapacityError("too many matchings for an explicit system");

  auto add_flaw = [&](const std::string& name, const std::vector<VertexId>& H, auto&& present) {
    ExplicitFlaw f;
    f.name = name;
    f.member.assign(out.states.size(), 0);
    f.rho.assign(out.states.size(), {});
    for (std::size_t s = 0; s < out.states.size(); ++s) {
      if (!present(out.states[s])) continue;
      f.member[s] = 1;
      std::map<int, double> row;
      for (auto& [m, pr] : resample_distribution(g, H, out.states[s], opts.radius, lambda)) row[index.at(m.edges)] += pr;
      f.rho[s].assign(row.begin(), row.end());
    }
    out.system.flaws.push_back(std::move(f));
  };
  for (VertexId v : opts.vertices) {
    add_flaw("f_v" + std::to_string(v), {v}, [&](const Matching& m) {
      GsState s{{m}};
      return Rational(remaining_degree(g, s, v)) > opts.vertex_threshold;
    });
  }
  for (const auto& H : opts.odd_sets) {
    add_flaw("f_H", H, [&](const Matching& m) {
      std::vector<char> in(static_cast<std::size_t>(g.num_vertices()), 0);
      for (VertexId v : H) in[v] = 1;
      int edges = 0;
      for (EdgeId e = 0; e < g.num_edges(); ++e)
        if (in[g.edge(e).u] && in[g.edge(e).v] && !m.contains(e)) ++edges;
      return Rational(2 * edges) > Rational(static_cast<int>(H.size()) - 1) * opts.c_star;
    });
  }
  return out;
}

}  // namespace ecol
