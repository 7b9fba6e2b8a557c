#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ecol/errors.hpp"
#include "ecol/rng.hpp"

namespace ecol {

// ---------------------------------------------------------------------------
// Local search

/// One flaw of a generic local search. `footprint` holds the identifiers the
/// detector reads; `touches` the identifiers the action may write (defaults
/// to the footprint). After an action, only flaws whose footprint meets its
/// `touches` set are re-tested.
template <class State>
struct FlawSpec {
  int id = 0;
  std::string kind;
  std::function<bool(const State&)> detect;
  std::function<void(State&, Rng&)> address;
  std::vector<int> footprint;
  std::vector<int> touches;
};

struct StepRecord {
  std::uint64_t step = 0;
  int flaw = 0;
  std::string kind;
  std::size_t footprint_size = 0;
};

template <class State>
struct RunTrace {
  std::uint64_t steps = 0;
  std::vector<StepRecord> records;
  bool terminated_flawless = false;
  State final_state{};

  std::vector<int> addressed() const {
    std::vector<int> out;
    for (const auto& r : records) out.push_back(r.flaw);
    return out;
  }
};

inline void write_trace_jsonl(std::ostream& out, const std::vector<StepRecord>& records) {
  for (const auto& r : records) {
    nlohmann::json j{{"step", r.step}, {"flaw", r.flaw}, {"kind", r.kind}, {"footprint_size", r.footprint_size}};
    out << j.dump() << '\n';
  }
}

inline constexpr std::uint64_t kDefaultStepCap = 1000000;
inline constexpr int kFullRescanPeriod = 1024;

/// Addresses the lowest-indexed present flaw until none is present or the
/// step cap is reached. Flaws are given in priority order.
template <class State>
RunTrace<State> run_local_search(State initial, const std::vector<FlawSpec<State>>& flaws,
                                 std::uint64_t step_cap, Rng& rng) {
  if (flaws.empty()) throw ArgumentError("flaw list is empty");
  const std::size_t m = flaws.size();
  std::unordered_map<int, std::vector<std::size_t>> readers;
  for (std::size_t i = 0; i < m; ++i)
    for (int x : flaws[i].footprint) readers[x].push_back(i);

  RunTrace<State> trace;
  State state = std::move(initial);
  std::vector<char> present(m, 0);
  auto rescan = [&] {
    for (std::size_t i = 0; i < m; ++i) present[i] = flaws[i].detect(state);
  };
  rescan();
  std::uint64_t since_rescan = 0;
  while (true) {
    auto first = std::find(present.begin(), present.end(), 1);
    if (first == present.end()) {
      rescan();  // never declare success on stale flags
      first = std::find(present.begin(), present.end(), 1);
      if (first == present.end()) {
        trace.terminated_flawless = true;
        break;
      }
    }
    if (trace.steps >= step_cap) break;
    const auto& f = flaws[static_cast<std::size_t>(first - present.begin())];
    f.address(state, rng);
    ++trace.steps;
    trace.records.push_back({trace.steps, f.id, f.kind, f.footprint.size()});
    if (++since_rescan >= kFullRescanPeriod) {
      rescan();
      since_rescan = 0;
      continue;
    }
    std::set<std::size_t> dirty{static_cast<std::size_t>(first - present.begin())};
    for (int x : f.touches.empty() ? f.footprint : f.touches)
      if (auto it = readers.find(x); it != readers.end()) dirty.insert(it->second.begin(), it->second.end());
    for (std::size_t i : dirty) present[i] = flaws[i].detect(state);
  }
  trace.final_state = std::move(state);
  return trace;
}

/// Lower-level loop for flaw families too large to list: `find` returns the
/// lowest-priority present flaw (or nothing), `address` acts on it.
struct FoundFlaw {
  int id = 0;
  std::string kind;
  std::size_t footprint_size = 0;
};

template <class State, class Find, class Address>
RunTrace<State> run_search(State initial, Find&& find, Address&& address, std::uint64_t step_cap, Rng& rng) {
  RunTrace<State> trace;
  State state = std::move(initial);
  while (true) {
    std::optional<FoundFlaw> f = find(state);
    if (!f) {
      trace.terminated_flawless = true;
      break;
    }
    if (trace.steps >= step_cap) break;
    address(state, *f, rng);
    ++trace.steps;
    trace.records.push_back({trace.steps, f->id, f->kind, f->footprint_size});
  }
  trace.final_state = std::move(state);
  return trace;
}

// ---------------------------------------------------------------------------
// Exact analysis on enumerable state spaces

inline constexpr std::size_t kMaxExplicitStates = 100000;
inline constexpr std::size_t kMaxLopsidependencyFlaws = 12;

using SparseRow = std::vector<std::pair<int, double>>;  // (target state, probability)

struct ExplicitFlaw {
  std::string name;
  std::vector<char> member;   // member[s]: flaw present in state s
  std::vector<SparseRow> rho;  // rho[s]: action distribution, used only where member[s]
};

struct ExplicitSystem {
  std::vector<double> mu;  // measure over states
  std::vector<ExplicitFlaw> flaws;

  std::size_t num_states() const { return mu.size(); }

  void validate() const {
    if (mu.size() > kMaxExplicitStates)
      throw CapacityError("explicit state space has " + std::to_string(mu.size()) + " states (limit " +
                          std::to_string(kMaxExplicitStates) + ")");
    for (const auto& f : flaws)
      if (f.member.size() != mu.size() || f.rho.size() != mu.size())
        throw ArgumentError("flaw " + f.name + " is not defined on every state");
  }

  double measure(const ExplicitFlaw& f) const {
    double s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x)
      if (f.member[x]) s += mu[x];
    return s;
  }
};

/// Neighbourhoods Gamma(i) of the undirected causality graph. Gamma(i)
/// contains i exactly when i can cause itself.
struct CausalityGraph {
  std::vector<std::set<int>> neighbors;

  bool related(int i, int j) const { return neighbors[i].count(j) > 0; }
  int max_neighborhood() const {
    std::size_t d = 0;
    for (const auto& s : neighbors) d = std::max(d, s.size());
    return static_cast<int>(d);
  }
  bool symmetric() const {
    for (std::size_t i = 0; i < neighbors.size(); ++i)
      for (int j : neighbors[i])
        if (!neighbors[j].count(static_cast<int>(i))) return false;
    return true;
  }
};

/// i causes j when some transition sigma -> tau of i's action lands in f_j
/// with i == j or sigma outside f_j. The relation is symmetrized.
inline CausalityGraph derive_causality(const ExplicitSystem& sys) {
  sys.validate();
  const int m = static_cast<int>(sys.flaws.size());
  CausalityGraph g;
  g.neighbors.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& fi = sys.flaws[i];
    for (std::size_t s = 0; s < sys.num_states(); ++s) {
      if (!fi.member[s]) continue;
      for (auto [t, p] : fi.rho[s]) {
        if (p <= 0.0) continue;
        for (int j = 0; j < m; ++j) {
          const auto& fj = sys.flaws[j];
          if (fj.member[t] && (i == j || !fj.member[s])) {
            g.neighbors[i].insert(j);
            g.neighbors[j].insert(i);
          }
        }
      }
    }
  }
  return g;
}

struct ChargeReport {
  std::vector<double> gamma;
  std::vector<double> distortion;  // d_i, with gamma_i = d_i * mu(f_i)
  std::vector<double> measure;     // mu(f_i)
  std::vector<double> x;
  double epsilon = 0.0;
  double theta_ratio = 1.0;  // max theta/mu over the state space
  double T0 = 0.0;
  double identity_error = 0.0;  // max |gamma_i - d_i mu(f_i)|
};

inline double compute_T0(double theta_ratio, const std::vector<double>& x) {
  double t = std::log2(theta_ratio);
  for (double xj : x) t += std::log2(1.0 / (1.0 - xj));
  return t;
}

/// Charges gamma_i = max_tau sum_{sigma in f_i} mu(sigma)/mu(tau) rho_i(sigma, tau),
/// and independently the distortion d_i = max_tau nu_i(tau)/mu(tau), where
/// nu_i is the law of the state reached from mu conditioned on f_i.
/// `x` defaults to the uniform 1/(1 + max |Gamma|) choice; `theta` to mu.
inline ChargeReport estimate_charges_exact(const ExplicitSystem& sys, const CausalityGraph& causality,
                                           double epsilon, std::optional<std::vector<double>> x = std::nullopt,
                                           std::optional<std::vector<double>> theta = std::nullopt) {
  sys.validate();
  const std::size_t n = sys.num_states();
  const std::size_t m = sys.flaws.size();
  ChargeReport r;
  r.epsilon = epsilon;
  for (const auto& f : sys.flaws) {
    std::vector<double> inflow(n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
      if (f.member[s])
        for (auto [t, p] : f.rho[s]) inflow[t] += sys.mu[s] * p;
    double gamma = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      if (sys.mu[t] > 0.0) gamma = std::max(gamma, inflow[t] / sys.mu[t]);
    double mf = sys.measure(f);
    double d = 0.0;
    if (mf > 0.0) {
      std::vector<double> nu(n, 0.0);
      for (std::size_t s = 0; s < n; ++s)
        if (f.member[s])
          for (auto [t, p] : f.rho[s]) nu[t] += (sys.mu[s] / mf) * p;
      for (std::size_t t = 0; t < n; ++t)
        if (sys.mu[t] > 0.0) d = std::max(d, nu[t] / sys.mu[t]);
    }
    r.gamma.push_back(gamma);
    r.distortion.push_back(d);
    r.measure.push_back(mf);
    r.identity_error = std::max(r.identity_error, std::abs(gamma - d * mf));
  }
  if (x) {
    if (x->size() != m) throw ArgumentError("x vector size mismatch");
    r.x = *x;
  } else {
    // an edgeless causality graph would give x = 1; use 1/2 instead
    r.x.assign(m, 1.0 / (1.0 + std::max(1, causality.max_neighborhood())));
  }
  for (double xi : r.x)
    if (!(xi > 0.0 && xi < 1.0)) throw ArgumentError("x values must lie in (0, 1)");
  if (theta) {
    if (theta->size() != n) throw ArgumentError("initial distribution size mismatch");
    r.theta_ratio = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if ((*theta)[s] <= 0.0) continue;
      if (sys.mu[s] <= 0.0) {
        r.theta_ratio = std::numeric_limits<double>::infinity();
        break;
      }
      r.theta_ratio = std::max(r.theta_ratio, (*theta)[s] / sys.mu[s]);
    }
  }
  r.T0 = compute_T0(r.theta_ratio, r.x);
  return r;
}

struct LLLCheck {
  bool holds = false;
  double margin = std::numeric_limits<double>::infinity();  // min RHS / gamma_i
  bool symmetric_holds = false;
  double symmetric_margin = std::numeric_limits<double>::infinity();  // (1 - zeta/2) / (gamma (1+D) e)
  int max_neighborhood = 0;
};

/// gamma_i <= (1 - eps) x_i prod_{j in Gamma(i)} (1 - x_j) for every i, and
/// the symmetric form gamma (1 + D) e <= 1 - zeta/2 with D = max |Gamma|.
inline LLLCheck check_lll_condition(const ChargeReport& r, const CausalityGraph& causality, double zeta = 0.0) {
  LLLCheck c;
  c.max_neighborhood = causality.max_neighborhood();
  const std::size_t m = r.gamma.size();
  c.holds = true;
  for (std::size_t i = 0; i < m; ++i) {
    double rhs = (1.0 - r.epsilon) * r.x[i];
    for (int j : causality.neighbors[i]) rhs *= 1.0 - r.x[j];
    if (r.gamma[i] > rhs) c.holds = false;
    if (r.gamma[i] > 0.0) c.margin = std::min(c.margin, rhs / r.gamma[i]);
  }
  double gmax = 0.0;
  for (double g : r.gamma) gmax = std::max(gmax, g);
  double lhs = gmax * (1.0 + c.max_neighborhood) * std::exp(1.0);
  double bound = 1.0 - zeta / 2;
  c.symmetric_holds = lhs <= bound * (1.0 + 1e-12);
  if (lhs > 0.0) c.symmetric_margin = bound / lhs;
  return c;
}

/// Default step cap: (T0 + 64) / eps when charges are known.
inline std::uint64_t default_step_cap(const std::optional<ChargeReport>& r) {
  if (!r || r->epsilon <= 0.0) return kDefaultStepCap;
  double cap = std::ceil((r->T0 + 64.0) / r->epsilon);
  return cap > 1e15 ? kDefaultStepCap : static_cast<std::uint64_t>(cap);
}

namespace detail {

inline std::map<std::pair<int, int>, double> operator_product(const ExplicitSystem& sys, int a, int b) {
  std::map<std::pair<int, int>, double> out;
  const auto& fa = sys.flaws[a];
  const auto& fb = sys.flaws[b];
  for (std::size_t s = 0; s < sys.num_states(); ++s) {
    if (!fa.member[s]) continue;
    for (auto [mid, p] : fa.rho[s]) {
      if (!fb.member[mid]) continue;
      for (auto [t, q] : fb.rho[mid]) out[{static_cast<int>(s), t}] += p * q;
    }
  }
  return out;
}

}  // namespace detail

struct CommutativityCheck {
  bool commute = false;
  double max_difference = 0.0;
};

/// Compares A_i A_j with A_j A_i entrywise, where A_i[s, t] = rho_i(s, t)
/// on s in f_i and 0 elsewhere.
inline CommutativityCheck check_commutativity(const ExplicitSystem& sys, int i, int j, double tol = 1e-12) {
  sys.validate();
  if (i == j) throw ArgumentError("commutativity is checked for distinct flaws");
  auto ij = detail::operator_product(sys, i, j);
  auto ji = detail::operator_product(sys, j, i);
  CommutativityCheck c;
  for (auto& [k, v] : ij) {
    auto it = ji.find(k);
    c.max_difference = std::max(c.max_difference, std::abs(v - (it == ji.end() ? 0.0 : it->second)));
  }
  for (auto& [k, v] : ji)
    if (!ij.count(k)) c.max_difference = std::max(c.max_difference, std::abs(v));
  c.commute = c.max_difference <= tol;
  return c;
}

struct LopsidependencyCheck {
  bool holds = true;
  int checked = 0;
  std::vector<std::pair<int, std::vector<int>>> skipped;  // (flaw, S) with mu(intersection of complements) = 0
  double worst_slack = std::numeric_limits<double>::infinity();  // min gamma_i - mu(f_i | F_S)
};

/// For every flaw i and every S disjoint from Gamma(i) and {i}, checks
/// mu(f_i | no flaw of S) <= gamma_i exactly.
inline LopsidependencyCheck verify_lopsidependency(const ExplicitSystem& sys, const CausalityGraph& causality,
                                                   const std::vector<double>& gamma, double tol = 1e-12) {
  sys.validate();
  const int m = static_cast<int>(sys.flaws.size());
  if (static_cast<std::size_t>(m) > kMaxLopsidependencyFlaws)
    throw CapacityError("lopsidependency check is limited to 12 flaws");
  LopsidependencyCheck out;
  for (int i = 0; i < m; ++i) {
    std::vector<int> outside;
    for (int j = 0; j < m; ++j)
      if (j != i && !causality.related(i, j)) outside.push_back(j);
    for (std::uint32_t mask = 0; mask < (1u << outside.size()); ++mask) {
      std::vector<int> s;
      for (std::size_t k = 0; k < outside.size(); ++k)
        if (mask >> k & 1) s.push_back(outside[k]);
      double denom = 0.0, numer = 0.0;
      for (std::size_t st = 0; st < sys.num_states(); ++st) {
        bool clear = std::none_of(s.begin(), s.end(), [&](int j) { return sys.flaws[j].member[st]; });
        if (!clear) continue;
        denom += sys.mu[st];
        if (sys.flaws[i].member[st]) numer += sys.mu[st];
      }
      if (denom <= 0.0) {
        out.skipped.push_back({i, s});
        continue;
      }
      ++out.checked;
      double slack = gamma[i] - numer / denom;
      out.worst_slack = std::min(out.worst_slack, slack);
      if (slack < -tol) out.holds = false;
    }
  }
  return out;
}

/// Runs the explicit system's own local search from state `start`, with
/// flaws prioritised by `order`. Used to compare output laws across orders.
inline RunTrace<int> run_explicit(const ExplicitSystem& sys, const std::vector<int>& order, int start,
                                  std::uint64_t step_cap, Rng& rng) {
  std::vector<FlawSpec<int>> specs;
  for (int i : order) {
    const ExplicitFlaw* f = &sys.flaws[i];
    FlawSpec<int> spec;
    spec.id = i;
    spec.kind = f->name;
    spec.detect = [f](const int& s) { return f->member[s] != 0; };
    spec.address = [f](int& s, Rng& r) {
      double u = r.uniform();
      const SparseRow& row = f->rho[s];
      for (auto [t, p] : row) {
        u -= p;
        if (u < 0) {
          s = t;
          return;
        }
      }
      s = row.back().first;
    };
    spec.footprint = {0};  // single shared identifier: every action re-tests every flaw
    specs.push_back(std::move(spec));
  }
  return run_local_search<int>(start, specs, step_cap, rng);
}

}  // namespace ecol
