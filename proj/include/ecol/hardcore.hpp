#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecol/fractional.hpp"
#include "ecol/multigraph.hpp"
#include "ecol/rational.hpp"
#include "ecol/rng.hpp"

namespace ecol {

using ActivityVector = std::vector<double>;  // indexed by edge id

inline void validate_activities(const Multigraph& g, std::span<const double> lambda) {
  if (static_cast<int>(lambda.size()) != g.num_edges())
    throw ArgumentError("activity vector size does not match edge count");
  for (std::size_t e = 0; e < lambda.size(); ++e)
    if (!(lambda[e] > 0.0) || !std::isfinite(lambda[e]))
      throw ArgumentError("activity of edge " + std::to_string(e) + " is not positive and finite");
}

struct HardCoreModel {
  Multigraph host;
  ActivityVector activities;

  HardCoreModel() = default;
  HardCoreModel(Multigraph g, ActivityVector lambda) : host(std::move(g)), activities(std::move(lambda)) {
    validate_activities(host, activities);
  }
  static HardCoreModel uniform(Multigraph g, double lambda = 1.0) {
    ActivityVector a(static_cast<std::size_t>(g.num_edges()), lambda);
    return HardCoreModel(std::move(g), std::move(a));
  }
};

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// Simple graph obtained by merging each bundle of parallel edges into one
/// pair whose activity is the bundle's sum.
struct CollapsedGraph {
  int n = 0;
  std::vector<Edge> pairs;
  std::vector<double> weight;                 // summed activity per pair
  std::vector<std::vector<EdgeId>> members;   // host edges per pair
  std::vector<int> pair_of_edge;

  CollapsedGraph(const Multigraph& g, std::span<const double> lambda) : n(g.num_vertices()) {
    std::map<std::pair<VertexId, VertexId>, int> index;
    pair_of_edge.resize(static_cast<std::size_t>(g.num_edges()));
    for (EdgeId e = 0; e < g.num_edges(); ++e) {
      auto [u, v] = g.edge(e);
      auto key = std::minmax(u, v);
      auto [it, fresh] = index.try_emplace({key.first, key.second}, static_cast<int>(pairs.size()));
      if (fresh) {
        pairs.push_back({key.first, key.second});
        weight.push_back(0.0);
        members.emplace_back();
      }
      weight[it->second] += lambda[e];
      members[it->second].push_back(e);
      pair_of_edge[e] = it->second;
    }
  }

  int num_pairs() const { return static_cast<int>(pairs.size()); }
  double max_weight() const {
    double w = 0.0;
    for (double x : weight) w = std::max(w, x);
    return w;
  }
};

struct ExactLimits {
  int max_vertices = 64;                 // non-isolated vertices after collapsing
  std::size_t max_states = std::size_t{1} << 21;
};

/// Exact hard-core computations by memoized deletion-contraction. Parallel
/// edges are merged first. The recursion pivots on the lowest remaining
/// vertex v and applies Z(G) = Z(G-e) + lambda(e) Z(G-u-v) to every pair at
/// v at once, so each memo entry is a set of surviving vertices. Vertices are
/// ordered breadth-first, which keeps the set of reachable states small on
/// sparse graphs.
class ExactMatchingModel {
 public:
  ExactMatchingModel(const Multigraph& g, std::span<const double> lambda, ExactLimits limits = {})
      : collapsed_(g, lambda), limits_(limits), num_edges_(g.num_edges()) {
    activities_.assign(lambda.begin(), lambda.end());
    build_order();
    root_ = local_count_ == 0 ? 0 : (local_count_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << local_count_) - 1);
    root_node_ = solve(root_);
  }

  double log_partition() const { return log_z_[root_node_]; }

  /// Pr[e in M] for every host edge.
  std::vector<double> edge_marginals() const {
    std::vector<double> pair_marginal(static_cast<std::size_t>(collapsed_.num_pairs()), 0.0);
    std::vector<double> weight(log_z_.size(), 0.0);
    weight[root_node_] = 1.0;
    for (auto it = post_order_.rbegin(); it != post_order_.rend(); ++it) {
      int node = *it;
      double w = weight[node];
      if (w == 0.0) continue;
      std::uint64_t s = mask_[node];
      if (s == 0) continue;
      int v = std::countr_zero(s);
      std::uint64_t rest = s & ~(std::uint64_t{1} << v);
      double lz = log_z_[node];
      int c0 = memo_.at(rest);
      weight[c0] += w * std::exp(log_z_[c0] - lz);
      for (const auto& [u, pair] : adjacency_[v]) {
        if (!(rest >> u & 1)) continue;
        int c1 = memo_.at(rest & ~(std::uint64_t{1} << u));
        double share = w * std::exp(log_weight_[pair] + log_z_[c1] - lz);
        pair_marginal[pair] += share;
        weight[c1] += share;
      }
    }
    std::vector<double> out(static_cast<std::size_t>(num_edges_), 0.0);
    for (int p = 0; p < collapsed_.num_pairs(); ++p)
      for (EdgeId e : collapsed_.members[p]) out[e] = pair_marginal[p] * activities_[e] / collapsed_.weight[p];
    return out;
  }

  /// Draws an exact sample from the hard-core distribution.
  Matching sample(Rng& rng) const {
    std::vector<EdgeId> chosen;
    std::uint64_t s = root_;
    while (s != 0) {
      int v = std::countr_zero(s);
      std::uint64_t rest = s & ~(std::uint64_t{1} << v);
      double lz = log_z_[memo_.at(s)];
      double r = rng.uniform();
      double acc = std::exp(log_z_[memo_.at(rest)] - lz);
      std::uint64_t next = rest;
      if (r >= acc) {
        for (const auto& [u, pair] : adjacency_[v]) {
          if (!(rest >> u & 1)) continue;
          std::uint64_t child = rest & ~(std::uint64_t{1} << u);
          acc += std::exp(log_weight_[pair] + log_z_[memo_.at(child)] - lz);
          if (r < acc) {
            next = child;
            chosen.push_back(lift(pair, rng));
            break;
          }
        }
      }
      s = next;
    }
    return make_matching(std::move(chosen));
  }

  std::size_t num_states() const { return log_z_.size(); }

 private:
  EdgeId lift(int pair, Rng& rng) const {
    const auto& members = collapsed_.members[pair];
    if (members.size() == 1) return members[0];
    double r = rng.uniform() * collapsed_.weight[pair];
    for (EdgeId e : members) {
      r -= activities_[e];
      if (r < 0) return e;
    }
    return members.back();
  }

  void build_order() {
    const int n = collapsed_.n;
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n));
    for (int p = 0; p < collapsed_.num_pairs(); ++p) {
      adj[collapsed_.pairs[p].u].push_back({collapsed_.pairs[p].v, p});
      adj[collapsed_.pairs[p].v].push_back({collapsed_.pairs[p].u, p});
    }
    // breadth-first order, each component started from a minimum-degree vertex
    std::vector<int> order, local(static_cast<std::size_t>(n), -1);
    std::vector<int> by_degree;
    for (int v = 0; v < n; ++v)
      if (!adj[v].empty()) by_degree.push_back(v);
    std::stable_sort(by_degree.begin(), by_degree.end(),
                     [&](int a, int b) { return adj[a].size() < adj[b].size(); });
    for (int start : by_degree) {
      if (local[start] >= 0) continue;
      std::deque<int> queue{start};
      local[start] = static_cast<int>(order.size());
      order.push_back(start);
      while (!queue.empty()) {
        int x = queue.front();
        queue.pop_front();
        auto nbrs = adj[x];
        std::sort(nbrs.begin(), nbrs.end(),
                  [&](auto a, auto b) { return adj[a.first].size() < adj[b.first].size(); });
        for (auto [y, p] : nbrs) {
          if (local[y] >= 0) continue;
          local[y] = static_cast<int>(order.size());
          order.push_back(y);
          queue.push_back(y);
        }
      }
    }
    local_count_ = static_cast<int>(order.size());
    if (local_count_ > limits_.max_vertices || local_count_ > 64)
      throw CapacityError("exact hard-core computation needs " + std::to_string(local_count_) +
                          " vertices (limit " + std::to_string(limits_.max_vertices) +
                          "); use the MCMC estimator");
    adjacency_.assign(static_cast<std::size_t>(local_count_), {});
    for (int p = 0; p < collapsed_.num_pairs(); ++p) {
      int a = local[collapsed_.pairs[p].u], b = local[collapsed_.pairs[p].v];
      adjacency_[a].push_back({b, p});
      adjacency_[b].push_back({a, p});
    }
    log_weight_.resize(collapsed_.weight.size());
    for (std::size_t p = 0; p < collapsed_.weight.size(); ++p) log_weight_[p] = std::log(collapsed_.weight[p]);
  }

  int solve(std::uint64_t s) {
    if (auto it = memo_.find(s); it != memo_.end()) return it->second;
    double value = 0.0;  // log 1 for the empty vertex set
    if (s != 0) {
      int v = std::countr_zero(s);
      std::uint64_t rest = s & ~(std::uint64_t{1} << v);
      value = log_z_[solve(rest)];
      for (const auto& [u, pair] : adjacency_[v]) {
        if (!(rest >> u & 1)) continue;
        value = log_add_exp(value, log_weight_[pair] + log_z_[solve(rest & ~(std::uint64_t{1} << u))]);
      }
    }
    if (log_z_.size() >= limits_.max_states)
      throw CapacityError("exact hard-core computation exceeded " + std::to_string(limits_.max_states) +
                          " memo states; use the MCMC estimator");
    int id = static_cast<int>(log_z_.size());
    log_z_.push_back(value);
    mask_.push_back(s);
    memo_.emplace(s, id);
    post_order_.push_back(id);
    return id;
  }

  CollapsedGraph collapsed_;
  ExactLimits limits_;
  int num_edges_;
  ActivityVector activities_;
  int local_count_ = 0;
  std::vector<std::vector<std::pair<int, int>>> adjacency_;  // (local neighbour, pair)
  std::vector<double> log_weight_;
  std::uint64_t root_ = 0;
  int root_node_ = 0;
  std::unordered_map<std::uint64_t, int> memo_;
  std::vector<double> log_z_;
  std::vector<std::uint64_t> mask_;
  std::vector<int> post_order_;
};

/// log Z, where Z sums prod lambda(e) over all matchings including the empty one.
inline double partition_function(const HardCoreModel& model, ExactLimits limits = {}) {
  return ExactMatchingModel(model.host, model.activities, limits).log_partition();
}

inline std::vector<double> exact_marginals(const HardCoreModel& model, ExactLimits limits = {}) {
  return ExactMatchingModel(model.host, model.activities, limits).edge_marginals();
}

// ---------------------------------------------------------------------------
// Markov chain sampler

struct ChainConfig {
  std::uint64_t steps = 0;  // 0: default budget
  std::uint64_t seed = 0;
  std::array<double, 3> mix{1.0 / 3, 1.0 / 3, 1.0 / 3};  // insert, delete, slide

  void validate() const {
    double total = 0.0;
    for (double p : mix) {
      if (!(p > 0.0)) throw ArgumentError("chain move probabilities must be positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("chain move probabilities must sum to 1");
  }
};

/// 10 * m^2 * ceil(max(lambda', 1)), lambda' the largest merged activity.
inline std::uint64_t default_chain_steps(const Multigraph& g, std::span<const double> lambda) {
  if (g.num_edges() == 0) return 0;
  double lp = std::max(CollapsedGraph(g, lambda).max_weight(), 1.0);
  auto m = static_cast<std::uint64_t>(g.num_edges());
  return 10 * m * m * static_cast<std::uint64_t>(std::ceil(lp));
}

/// Metropolis chain over matchings of the merged simple graph with insert,
/// delete and slide moves. Stationary distribution: the hard-core measure
/// with merged activities; samples are lifted back to parallel edges.
class MatchingChain {
 public:
  MatchingChain(const Multigraph& g, std::span<const double> lambda, std::array<double, 3> mix)
      : collapsed_(g, lambda), activities_(lambda.begin(), lambda.end()), mix_(mix) {
    mate_.assign(static_cast<std::size_t>(collapsed_.n), -1);
    in_.assign(static_cast<std::size_t>(collapsed_.num_pairs()), 0);
    insert_bias_ = mix_[1] / mix_[0];
  }

  void step(Rng& rng) {
    const int m = collapsed_.num_pairs();
    if (m == 0) return;
    double r = rng.uniform();
    int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    auto [u, v] = collapsed_.pairs[p];
    double w = collapsed_.weight[p];
    if (r < mix_[0]) {
      if (!in_[p] && mate_[u] < 0 && mate_[v] < 0 && rng.uniform() < w * insert_bias_) add(p);
    } else if (r < mix_[0] + mix_[1]) {
      if (in_[p] && rng.uniform() < 1.0 / (w * insert_bias_)) drop(p);
    } else {
      if (in_[p]) return;
      int q = -1;
      if (mate_[u] >= 0 && mate_[v] < 0) q = mate_[u];
      else if (mate_[v] >= 0 && mate_[u] < 0) q = mate_[v];
      if (q < 0) return;
      if (rng.uniform() < w / collapsed_.weight[q]) {
        drop(q);
        add(p);
      }
    }
  }

  void run(std::uint64_t steps, Rng& rng) {
    for (std::uint64_t i = 0; i < steps; ++i) step(rng);
  }

  /// Runs `steps` further steps, returning the time-averaged occupancy of
  /// every host edge.
  std::vector<double> occupancy(std::uint64_t steps, Rng& rng) {
    std::vector<double> time_in(in_.size(), 0.0);
    std::vector<std::uint64_t> since(in_.size(), 0);
    tracking_ = true;
    clock_ = 0;
    time_in_ = &time_in;
    since_ = &since;
    // since[p]: first step whose post-step state contains p
    for (int p = 0; p < collapsed_.num_pairs(); ++p) since[p] = 1;
    for (std::uint64_t i = 0; i < steps; ++i) {
      ++clock_;
      step(rng);
    }
    for (int p = 0; p < collapsed_.num_pairs(); ++p)
      if (in_[p]) time_in[p] += static_cast<double>(clock_ + 1 - since[p]);
    tracking_ = false;
    std::vector<double> out(activities_.size(), 0.0);
    for (int p = 0; p < collapsed_.num_pairs(); ++p)
      for (EdgeId e : collapsed_.members[p])
        out[e] = time_in[p] / static_cast<double>(std::max<std::uint64_t>(steps, 1)) * activities_[e] /
                 collapsed_.weight[p];
    return out;
  }

  Matching current(Rng& rng) const {
    std::vector<EdgeId> chosen;
    for (int p = 0; p < collapsed_.num_pairs(); ++p) {
      if (!in_[p]) continue;
      const auto& members = collapsed_.members[p];
      EdgeId pick = members.back();
      if (members.size() > 1) {
        double r = rng.uniform() * collapsed_.weight[p];
        for (EdgeId e : members) {
          r -= activities_[e];
          if (r < 0) {
            pick = e;
            break;
          }
        }
      } else {
        pick = members[0];
      }
      chosen.push_back(pick);
    }
    return make_matching(std::move(chosen));
  }

 private:
  void add(int p) {
    in_[p] = 1;
    mate_[collapsed_.pairs[p].u] = p;
    mate_[collapsed_.pairs[p].v] = p;
    if (tracking_) (*since_)[p] = clock_;
  }
  void drop(int p) {
    in_[p] = 0;
    mate_[collapsed_.pairs[p].u] = -1;
    mate_[collapsed_.pairs[p].v] = -1;
    if (tracking_) (*time_in_)[p] += static_cast<double>(clock_ - (*since_)[p]);
  }

  CollapsedGraph collapsed_;
  ActivityVector activities_;
  std::array<double, 3> mix_;
  double insert_bias_ = 1.0;
  std::vector<int> mate_;
  std::vector<char> in_;
  bool tracking_ = false;
  std::uint64_t clock_ = 0;
  std::vector<double>* time_in_ = nullptr;
  std::vector<std::uint64_t>* since_ = nullptr;
};

inline Matching sample_matching(const HardCoreModel& model, const ChainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (model.host.num_edges() == 0) return {};
  std::uint64_t steps = cfg.steps ? cfg.steps : default_chain_steps(model.host, model.activities);
  MatchingChain chain(model.host, model.activities, cfg.mix);
  chain.run(steps, rng);
  return chain.current(rng);
}

inline Matching sample_matching(const HardCoreModel& model, const ChainConfig& cfg) {
  Rng rng(cfg.seed);
  return sample_matching(model, cfg, rng);
}

/// MCMC estimate of all edge marginals: burn-in followed by a time average.
inline std::vector<double> estimate_marginals(const HardCoreModel& model, std::uint64_t burn_in,
                                              std::uint64_t samples, Rng& rng,
                                              std::array<double, 3> mix = {1.0 / 3, 1.0 / 3, 1.0 / 3}) {
  MatchingChain chain(model.host, model.activities, mix);
  chain.run(burn_in, rng);
  return chain.occupancy(samples, rng);
}

/// Marginals computed exactly when the instance fits the exact limits,
/// otherwise estimated by MCMC. `exact` reports which path ran.
struct MarginalEstimate {
  std::vector<double> marginals;
  bool exact = true;
};

struct MarginalOptions {
  ExactLimits limits{};
  bool allow_mcmc = true;
  std::uint64_t mcmc_steps = 0;  // 0: 4000 * m, at least 200000
  std::uint64_t seed = 0;
};

inline MarginalEstimate marginals_auto(const HardCoreModel& model, const MarginalOptions& opts,
                                       std::uint64_t stream = 0) {
  try {
    return {exact_marginals(model, opts.limits), true};
  } catch (const CapacityError&) {
    if (!opts.allow_mcmc) throw;
  }
  auto m = static_cast<std::uint64_t>(model.host.num_edges());
  std::uint64_t steps = opts.mcmc_steps ? opts.mcmc_steps : std::max<std::uint64_t>(4000 * m, 200000);
  Rng rng = Rng::stream(opts.seed, 0x6d617267, stream);
  return {estimate_marginals(model, steps / 4, steps, rng), false};
}

// ---------------------------------------------------------------------------
// Activity calibration

struct CalibrationOptions {
  double tol = 1e-6;            // exact path
  double mcmc_tol = 1e-2;       // estimated path
  int max_iters = 200000;
  int max_mcmc_iters = 200;
  MarginalOptions marginals{};
  std::optional<int> chi_star_cap;  // odd-set search cap for the feasibility check
};

struct CalibrationResult {
  ActivityVector activities;
  std::vector<double> achieved;
  double max_error = 0.0;
  int iterations = 0;
  double K_hat = 0.0;  // (1 / target) * max activity
  bool exact = true;
};

class CalibrationError : public AlgorithmFailure {
 public:
  CalibrationError(const std::string& what, CalibrationResult best)
      : AlgorithmFailure(what), best_(std::move(best)) {}
  const CalibrationResult& best() const { return best_; }

 private:
  CalibrationResult best_;
};

/// Iterative proportional fitting: lambda(e) <- lambda(e) * (target/marginal)^k
/// with k = 1, dropping to k = 1/2 once the error has risen on two
/// consecutive iterations.
inline CalibrationResult calibrate_activities(const Multigraph& g, std::span<const double> targets,
                                              const CalibrationOptions& opts = {},
                                              std::optional<ActivityVector> start = std::nullopt) {
  const int m = g.num_edges();
  if (static_cast<int>(targets.size()) != m) throw ArgumentError("target vector size mismatch");
  for (double t : targets)
    if (!(t > 0.0 && t < 1.0)) throw InfeasibleError("edge marginal targets must lie in (0, 1)");
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    double load = 0.0;
    for (EdgeId e : g.incident(v)) load += targets[e];
    if (load >= 1.0)
      throw InfeasibleError("targets at vertex " + std::to_string(v) +
                            " sum to >= 1; no hard-core distribution has these marginals");
  }
  CalibrationResult result;
  result.activities = start ? *start : ActivityVector(static_cast<std::size_t>(m), 1.0);
  if (m == 0) return result;

  bool exact = true;
  try {
    ExactMatchingModel probe(g, result.activities, opts.marginals.limits);
  } catch (const CapacityError&) {
    if (!opts.marginals.allow_mcmc) throw;
    exact = false;
  }
  const double tol = exact ? opts.tol : opts.mcmc_tol;
  const int max_iters = exact ? opts.max_iters : opts.max_mcmc_iters;

  auto marginals_of = [&](const ActivityVector& lambda, int iter) {
    HardCoreModel model(g, lambda);
    if (exact) return exact_marginals(model, opts.marginals.limits);
    MarginalOptions mo = opts.marginals;
    mo.allow_mcmc = true;
    auto est = [&] {
      auto mm = static_cast<std::uint64_t>(m);
      std::uint64_t steps = mo.mcmc_steps ? mo.mcmc_steps : std::max<std::uint64_t>(4000 * mm, 200000);
      Rng rng = Rng::stream(mo.seed, 0x63616c69, static_cast<std::uint64_t>(iter));
      return estimate_marginals(model, steps / 4, steps, rng);
    };
    return est();
  };

  CalibrationResult best;
  best.max_error = std::numeric_limits<double>::infinity();
  // Plain scaling can oscillate with growing amplitude near the feasibility
  // boundary. Two non-improving iterations halve the update exponent and
  // restart from the best point seen.
  int stalls = 0;
  double damping = 1.0;
  for (int iter = 1; iter <= max_iters; ++iter) {
    auto p = marginals_of(result.activities, iter);
    double err = 0.0;
    for (int e = 0; e < m; ++e) err = std::max(err, std::abs(p[e] - targets[e]));
    result.achieved = p;
    result.max_error = err;
    result.iterations = iter;
    if (err < best.max_error) {
      best = result;
      stalls = 0;
    } else if (++stalls >= 2 && damping > 1.0 / 64) {
      damping *= 0.5;
      stalls = 0;
      result.activities = best.activities;
      p = best.achieved;
    }
    if (err <= tol) break;
    if (iter == max_iters) break;
    for (int e = 0; e < m; ++e) {
      double ratio = targets[e] / std::max(p[e], 1e-300);
      result.activities[e] *= damping == 1.0 ? ratio : std::pow(ratio, damping);
    }
  }
  result.exact = exact;
  double max_target_inv = 0.0;
  double max_lambda = 0.0;
  for (int e = 0; e < m; ++e) {
    max_lambda = std::max(max_lambda, result.activities[e]);
    max_target_inv = std::max(max_target_inv, 1.0 / targets[e]);
  }
  result.K_hat = max_lambda * max_target_inv;
  if (result.max_error > tol) {
    best.exact = exact;
    best.K_hat = result.K_hat;
    throw CalibrationError("calibration did not reach tolerance " + std::to_string(tol) + " in " +
                               std::to_string(max_iters) + " iterations (best error " +
                               std::to_string(best.max_error) + ")",
                           std::move(best));
  }
  return result;
}

/// Uniform target: requires target < 1/chi*, the existence condition for a
/// hard-core distribution with all marginals equal to target.
inline CalibrationResult calibrate_activities(const Multigraph& g, const Rational& target,
                                              const CalibrationOptions& opts = {}) {
  if (g.num_edges() == 0) return {};
  if (target <= 0 || target >= 1) throw InfeasibleError("target marginal must lie in (0, 1)");
  FractionalIndex chi = chi_star(g, opts.chi_star_cap);
  if (target * chi.value >= 1)
    throw InfeasibleError("target " + to_string(target) + " is not below 1/chi* = 1/" +
                          to_string(chi.value) +
                          "; a hard-core distribution with these marginals exists only if chi* < 1/target");
  std::vector<double> targets(static_cast<std::size_t>(g.num_edges()), to_double(target));
  return calibrate_activities(g, targets, opts);
}

// ---------------------------------------------------------------------------
// Conditioning and correlation decay

/// Marginal of e under the hard-core model restricted to the compatibility
/// graph: edges with both endpoints in `ball` and no endpoint covered by a
/// frozen edge.
inline double conditional_marginal(const HardCoreModel& model, EdgeId e, const Matching& frozen,
                                   std::span<const VertexId> ball, ExactLimits limits = {}) {
  const Multigraph& g = model.host;
  if (e < 0 || e >= g.num_edges()) throw ArgumentError("edge id out of range");
  std::vector<char> in_ball(static_cast<std::size_t>(g.num_vertices()), 0), blocked(in_ball);
  for (VertexId v : ball) in_ball[v] = 1;
  if (!in_ball[g.edge(e).u] || !in_ball[g.edge(e).v]) throw ArgumentError("edge lies outside the ball");
  if (!is_matching(g, frozen)) throw ArgumentError("frozen edge set is not a matching");
  for (EdgeId f : frozen.edges) blocked[g.edge(f).u] = blocked[g.edge(f).v] = 1;
  if (blocked[g.edge(e).u] || blocked[g.edge(e).v]) return 0.0;
  std::vector<EdgeId> keep;
  for (EdgeId f = 0; f < g.num_edges(); ++f) {
    auto [u, v] = g.edge(f);
    if (in_ball[u] && in_ball[v] && !blocked[u] && !blocked[v]) keep.push_back(f);
  }
  Subgraph sub = edge_subgraph(g, keep);
  std::vector<double> lambda;
  lambda.reserve(keep.size());
  int local_e = -1;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    lambda.push_back(model.activities[keep[i]]);
    if (keep[i] == e) local_e = static_cast<int>(i);
  }
  return ExactMatchingModel(sub.graph, lambda, limits).edge_marginals()[local_e];
}

struct DecayMeasurement {
  double max_deviation = 0.0;
  double unconditional = 0.0;
  int trials = 0;
  int distinct_conditionings = 0;
};

/// Samples matchings M, keeps Q = edges of M with both endpoints at distance
/// >= t from e, and compares Pr[e in M | Q] with Pr[e in M]. Returns the
/// largest relative deviation seen.
inline DecayMeasurement measure_correlation_decay(const HardCoreModel& model, EdgeId e, int t, int trials,
                                                  std::uint64_t seed, ExactLimits limits = {}) {
  const Multigraph& g = model.host;
  if (e < 0 || e >= g.num_edges()) throw ArgumentError("edge id out of range");
  if (t < 1) throw ArgumentError("distance must be at least 1");
  ExactMatchingModel full(g, model.activities, limits);
  DecayMeasurement out;
  out.unconditional = full.edge_marginals()[e];
  VertexId ends[] = {g.edge(e).u, g.edge(e).v};
  auto dist = bfs_distances(g, ends);
  auto near = [&](VertexId v) { return dist[v] >= 0 && dist[v] < t; };

  std::map<std::vector<char>, double> seen;
  Rng rng = Rng::stream(seed, 0x64656361, static_cast<std::uint64_t>(t));
  for (int trial = 0; trial < trials; ++trial) {
    Matching m = full.sample(rng);
    std::vector<char> covered(static_cast<std::size_t>(g.num_vertices()), 0);
    for (EdgeId f : m.edges) {
      auto [u, v] = g.edge(f);
      if (!near(u) && !near(v)) covered[u] = covered[v] = 1;
    }
    // only coverage of vertices adjacent to the near region matters
    std::vector<char> key;
    for (VertexId v = 0; v < g.num_vertices(); ++v)
      if (dist[v] == t) key.push_back(covered[v]);
    auto it = seen.find(key);
    if (it == seen.end()) {
      std::vector<EdgeId> keep;
      int local_e = -1;
      for (EdgeId f = 0; f < g.num_edges(); ++f) {
        auto [u, v] = g.edge(f);
        if ((near(u) || near(v)) && !covered[u] && !covered[v]) {
          if (f == e) local_e = static_cast<int>(keep.size());
          keep.push_back(f);
        }
      }
      Subgraph sub = edge_subgraph(g, keep);
      std::vector<double> lambda;
      for (EdgeId f : keep) lambda.push_back(model.activities[f]);
      double cond = ExactMatchingModel(sub.graph, lambda, limits).edge_marginals()[local_e];
      it = seen.emplace(std::move(key), cond).first;
    }
    out.max_deviation = std::max(out.max_deviation, std::abs(it->second / out.unconditional - 1.0));
  }
  out.trials = trials;
  out.distinct_conditionings = static_cast<int>(seen.size());
  return out;
}

}  // namespace ecol
