// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset (10 implies 8 and 9).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ecol/fractional.hpp"
#include "ecol/generators.hpp"
#include "ecol/gs_colorer.hpp"
#include "ecol/hardcore.hpp"
#include "ecol/io.hpp"
#include "ecol/list_colorer.hpp"
#include "ecol/lll_engine.hpp"
#include "ecol/oracle.hpp"

using namespace ecol;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// ---------------------------------------------------------------------------

Verdict chi_star_exactness() {
  int graphs = 0, mismatches = 0, bound_violations = 0, most_edges = 0, most_vertices = 0;
  for (std::uint64_t s = 0; graphs < 600; ++s) {
    Rng rng = Rng::stream(1, s);
    int n = 2 + static_cast<int>(rng.below(7));
    Multigraph g = gen::random_small_multigraph(n, 14, rng);
    if (g.num_edges() > 14 || g.num_edges() == 0) continue;
    ++graphs;
    most_edges = std::max(most_edges, g.num_edges());
    most_vertices = std::max(most_vertices, g.num_vertices());
    Rational fast = chi_star(g).value;
    Rational brute = oracle::brute_force_chi_star(g);
    if (fast != brute) ++mismatches;
    int chi_e = oracle::brute_force_chromatic_index(g);
    if (chi_e < ceil_of(brute) || chi_e > 2 * max_degree(g) - 1) ++bound_violations;
  }
  return {mismatches == 0 && bound_violations == 0,
          std::to_string(graphs) + " graphs (up to " + std::to_string(most_vertices) + " vertices, " +
              std::to_string(most_edges) + " edges), " + std::to_string(mismatches) + " value mismatches, " +
              std::to_string(bound_violations) + " chromatic index bound violations"};
}

Verdict hard_core_correctness() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng = Rng::stream(2, s);
    Multigraph g = gen::random_small_multigraph(2 + static_cast<int>(rng.below(8)), 12, rng);
    std::vector<double> lambda(static_cast<std::size_t>(g.num_edges()));
    for (double& x : lambda) x = 0.1 + 9.9 * rng.uniform();
    double z_enum = oracle::enumerated_partition_function(g, lambda);
    double z_dc = std::exp(partition_function(HardCoreModel(g, lambda)));
    worst = std::max(worst, std::abs(z_dc - z_enum) / z_enum);
  }
  return {worst <= 1e-10, "200 graphs, worst relative error " + fmt("%.2e", worst)};
}

Verdict sampler_fidelity() {
  struct Case {
    std::string name;
    Multigraph g;
  };
  std::vector<Case> cases{{"K3", gen::triangle()}, {"P5", gen::path(5)}, {"double edge", gen::bundle(2)}};
  const int samples = 100000;
  double worst = 0.0;
  std::string where;
  for (const auto& c : cases) {
    for (int random = 0; random < 2; ++random) {
      Rng lr = Rng::stream(3, random, c.g.num_edges());
      std::vector<double> lambda(static_cast<std::size_t>(c.g.num_edges()), 1.0);
      if (random)
        for (double& x : lambda) x = 0.1 + 9.9 * lr.uniform();
      HardCoreModel model(c.g, lambda);
      std::vector<std::vector<EdgeId>> draws;
      draws.reserve(samples);
      for (int i = 0; i < samples; ++i) {
        Rng rng = Rng::stream(3, 100 + random, static_cast<std::uint64_t>(i));
        draws.push_back(sample_matching(model, ChainConfig{}, rng).edges);
      }
      double tv = oracle::tv_distance(oracle::exact_distribution(c.g, lambda), oracle::empirical(draws));
      if (tv >= worst) {
        worst = tv;
        where = c.name + (random ? " (random activities)" : " (unit activities)");
      }
    }
  }
  return {worst <= 0.02, "6 cases x 1e5 samples, worst TV " + fmt("%.4f", worst) + " on " + where};
}

Verdict calibration() {
  int converged = 0, graphs = 0;
  double worst = 0.0, worst_recheck = 0.0;
  for (std::uint64_t s = 0; graphs < 50; ++s) {
    Rng rng = Rng::stream(4, s);
    Multigraph g = gen::random_small_multigraph(3 + static_cast<int>(rng.below(6)), 12, rng);
    ++graphs;
    Rational target = Rational(39, 40) / chi_star(g).value;
    try {
      CalibrationResult r = calibrate_activities(g, target, CalibrationOptions{});
      if (!r.exact) continue;
      auto achieved = oracle::enumerated_marginals(g, r.activities);
      double recheck = 0.0;
      for (double p : achieved) recheck = std::max(recheck, std::abs(p - to_double(target)));
      worst = std::max(worst, r.max_error);
      worst_recheck = std::max(worst_recheck, recheck);
      if (r.max_error <= 1e-6 && recheck <= 1e-6) ++converged;
    } catch (const std::exception&) {
    }
  }
  struct Closed {
    Multigraph g;
    Rational target;
  };
  std::vector<Closed> closed{{gen::triangle(), Rational(1, 4)}, {gen::path(2), Rational(1, 3)}, {gen::path(1), Rational(1, 2)}};
  double closed_err = 0.0;
  for (const auto& c : closed)
    for (double x : calibrate_activities(c.g, c.target, CalibrationOptions{}).activities)
      closed_err = std::max(closed_err, std::abs(x - 1.0));
  return {converged == graphs && closed_err <= 1e-9,
          std::to_string(converged) + "/" + std::to_string(graphs) + " converged, worst error " + fmt("%.2e", worst) +
              " (enumeration recheck " + fmt("%.2e", worst_recheck) + "), closed forms off by " + fmt("%.1e", closed_err)};
}

Verdict correlation_decay() {
  auto model = HardCoreModel::uniform(gen::path(20));
  std::vector<double> dev;
  bool monotone = true;
  for (int t = 1; t <= 6; ++t) {
    dev.push_back(measure_correlation_decay(model, 10, t, 2000, 5).max_deviation);
    if (t > 1 && dev[t - 1] > dev[t - 2] + 1e-12) monotone = false;
  }
  std::string list;
  for (double d : dev) list += (list.empty() ? "" : " ") + fmt("%.4f", d);
  return {monotone && dev.back() <= 0.05, "deviation by t=1..6: " + list};
}

struct ExplicitCase {
  std::string name;
  Multigraph g;
  std::vector<std::vector<VertexId>> odd_sets;
  Rational c_star{1};
};

std::vector<ExplicitCase> explicit_cases() {
  return {
      {"P2", gen::path(2), {}},
      {"P3", gen::path(3), {}},
      {"P4", gen::path(4), {}},
      {"K3", gen::triangle(), {{0, 1, 2}}, Rational(2)},
      {"double edge", gen::bundle(2), {}},
      {"C4", gen::cycle(4), {}},
      {"star", Multigraph(4, {{0, 1}, {0, 2}, {0, 3}}), {}},
      {"K3 + pendant", Multigraph(4, {{0, 1}, {1, 2}, {0, 2}, {2, 3}}), {{0, 1, 2}}, Rational(3, 2)},
      {"two components", Multigraph(4, {{0, 1}, {2, 3}}), {}},
      {"triple edge + tail", Multigraph(3, {{0, 1}, {0, 1}, {0, 1}, {1, 2}}), {}},
  };
}

Verdict charge_identity() {
  int systems = 0, identity_failures = 0, lop_failures = 0, conditionings = 0;
  double worst_identity = 0.0, worst_slack = 1e9;
  for (const auto& c : explicit_cases()) {
    for (int radius = 1; radius <= 2; ++radius) {
      for (int variant = 0; variant < 2; ++variant) {
        Rng rng = Rng::stream(6, systems);
        std::vector<double> lambda(static_cast<std::size_t>(c.g.num_edges()), 1.0);
        if (variant)
          for (double& x : lambda) x = 0.2 + 4.8 * rng.uniform();
        ExplicitGsOptions opts;
        for (VertexId v = 0; v < c.g.num_vertices(); ++v) opts.vertices.push_back(v);
        opts.vertex_threshold = Rational(variant);
        opts.odd_sets = c.odd_sets;
        opts.c_star = c.c_star;
        opts.radius = radius;
        ExplicitGs x = build_explicit_system(c.g, lambda, opts);
        auto causality = derive_causality(x.system);
        ChargeReport r = estimate_charges_exact(x.system, causality, 0.1);
        ++systems;
        worst_identity = std::max(worst_identity, r.identity_error);
        if (r.identity_error > 1e-12) ++identity_failures;
        auto lop = verify_lopsidependency(x.system, causality, r.gamma);
        conditionings += lop.checked;
        if (!lop.holds) ++lop_failures;
        if (lop.checked > 0) worst_slack = std::min(worst_slack, lop.worst_slack);
      }
    }
  }
  return {identity_failures == 0 && lop_failures == 0,
          std::to_string(systems) + " systems, worst identity gap " + fmt("%.1e", worst_identity) + ", " +
              std::to_string(conditionings) + " conditionings checked, worst slack " + fmt("%.2e", worst_slack) +
              ", " + std::to_string(lop_failures) + " systems violating"};
}

Verdict commutativity() {
  int far_pairs = 0, far_failures = 0, adjacent_pairs = 0, adjacent_fail = 0;
  double worst_far = 0.0;
  auto check_pair = [&](const Multigraph& g, VertexId a, VertexId b, int radius, bool far) {
    ExplicitGsOptions opts;
    opts.vertices = {a, b};
    opts.vertex_threshold = Rational(1);
    opts.radius = radius;
    std::vector<double> lambda(static_cast<std::size_t>(g.num_edges()), 1.3);
    ExplicitGs x = build_explicit_system(g, lambda, opts);
    auto c = check_commutativity(x.system, 0, 1);
    if (far) {
      ++far_pairs;
      worst_far = std::max(worst_far, c.max_difference);
      if (!c.commute) ++far_failures;
    } else {
      ++adjacent_pairs;
      if (!c.commute) ++adjacent_fail;
    }
  };
  for (int radius = 1; radius <= 2; ++radius) {
    int gap = 2 * radius + 2;
    Multigraph p = gen::path(12);
    for (VertexId a = 0; a <= 12; ++a)
      for (VertexId b = a + gap + 1; b <= 12; b += 2) check_pair(p, a, b, radius, true);
    Multigraph c = gen::cycle(14);
    for (VertexId b = gap + 1; b <= 14 - gap - 1; ++b) check_pair(c, 0, b, radius, true);
  }
  Multigraph p = gen::path(6);
  for (VertexId a = 1; a + 1 <= 5; ++a) check_pair(p, a, a + 1, 1, false);
  check_pair(gen::cycle(5), 0, 1, 1, false);
  return {far_pairs >= 20 && far_failures == 0 && adjacent_fail >= 3,
          std::to_string(far_pairs) + " far pairs (worst difference " + fmt("%.1e", worst_far) + ", " +
              std::to_string(far_failures) + " failing), " + std::to_string(adjacent_fail) + "/" +
              std::to_string(adjacent_pairs) + " adjacent pairs fail to commute"};
}

// ---------------------------------------------------------------------------
// End-to-end colorers. Each run's coloring and stats are serialized so the
// determinism criterion can compare two sweeps byte for byte.

struct Sweep {
  Verdict verdict;
  std::vector<std::string> outputs;
};

Multigraph gs_instance(int s) {
  Rng rng(static_cast<std::uint64_t>(s));
  int n = s < 10 ? 6 + s % 5 : 11 + (s * 7) % 50;
  return gen::random_banded_multigraph(n, 3, 30 + s % 11, rng);
}

GsConfig gs_config(int s) {
  GsConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(s);
  cfg.epsilon = Rational(1, 10);
  cfg.chi0 = 28;
  cfg.radius_t = 2;
  cfg.step_cap = 40000;
  cfg.retries = 2;
  return cfg;
}

Sweep gs_end_to_end() {
  Sweep out;
  int ok = 0, over_budget = 0, small_rounds = 0, small_violations = 0;
  std::vector<int> failed;
  double max_ratio = 0.0;
  for (int s = 0; s < 50; ++s) {
    Multigraph g = gs_instance(s);
    try {
      GsResult r = color_multigraph(g, gs_config(s));
      ColoringReport rep = validate_coloring(g, r.coloring);
      bool proper = rep.proper && rep.uncolored.empty();
      if (rep.colors_used > 2 * max_degree(g) - 1) ++over_budget;
      if (proper) ++ok;
      max_ratio = std::max(max_ratio, r.stats.ratio);
      if (g.num_vertices() <= 10) {
        // rebuild G' after each round from the colors the round handed out
        int used = 0;
        for (const auto& round : r.stats.rounds) {
          used += round.params.N;
          std::vector<EdgeId> keep;
          for (EdgeId e = 0; e < g.num_edges(); ++e)
            if (*r.coloring[e] >= used) keep.push_back(e);
          ++small_rounds;
          Subgraph rest = edge_subgraph(g, keep);
          if (rest.graph.num_edges() > 0 && oracle::brute_force_chi_star(rest.graph) > round.params.c_star) ++small_violations;
        }
      }
      out.outputs.push_back(io::coloring_json(r.coloring).dump() + io::gs_stats_json(r.stats).dump());
    } catch (const std::exception& e) {
      failed.push_back(s);
      out.outputs.push_back(std::string("failure: ") + e.what());
    }
  }
  std::string fails;
  for (int s : failed) fails += (fails.empty() ? "" : ",") + std::to_string(s);
  out.verdict.pass = ok == 50 && over_budget == 0 && small_violations == 0;
  out.verdict.detail = std::to_string(ok) + "/50 colored properly";
  if (!failed.empty()) out.verdict.detail += " (step cap exhausted on seeds " + fails + ")";
  out.verdict.detail += ", " + std::to_string(over_budget) + " over 2D-1, worst ratio " + fmt("%.3f", max_ratio) +
                        ", " + std::to_string(small_rounds) + " rounds on n<=10 rechecked with " +
                        std::to_string(small_violations) + " violations";
  return out;
}

struct ListInstance {
  Multigraph g;
  ListAssignment lists;
};

ListInstance list_instance(int s, bool adversarial) {
  Rng rng(static_cast<std::uint64_t>(s));
  int n = 8 + (s * 7) % 33;
  Multigraph g = gen::random_banded_multigraph(n, 3, 16 + s % 10, rng);
  int C = static_cast<int>(ceil_of(Rational(6, 5) * chi_star(g, std::min(9, n)).value));
  ListAssignment lists = adversarial ? gen::shifted_window_lists(g, C) : gen::random_lists(g, C, C + C / 2, rng);
  return {std::move(g), std::move(lists)};
}

ListConfig list_config(const Multigraph& g, int s) {
  ListConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(s);
  cfg.radius_tprime = 3;
  cfg.radius_t = 3;
  cfg.edge_threshold = 0.4;
  cfg.vertex_threshold = 0.5 / std::log(max_degree(g));
  cfg.vertex_min_degree = 8;
  cfg.max_iterations = 2;
  cfg.step_cap = 5000;
  return cfg;
}

Sweep list_end_to_end() {
  Sweep out;
  bool all = true;
  std::string detail;
  for (int adversarial = 0; adversarial < 2; ++adversarial) {
    int ok = 0, iterations = 0, audits = 0, violations = 0;
    std::vector<double> gaps;
    for (int s = 0; s < 30; ++s) {
      ListInstance inst = list_instance(s, adversarial);
      try {
        ListResult r = list_edge_color(inst.g, inst.lists, list_config(inst.g, s));
        ColoringReport rep = validate_coloring(inst.g, r.coloring, &inst.lists);
        if (rep.clean() && rep.uncolored.empty()) ++ok;
        for (const auto& it : r.stats.iterations) {
          ++iterations;
          audits += it.locality_audits;
          violations += it.locality_violations;
          gaps.push_back(it.sampled_colored_fraction - r.stats.params.alpha);
        }
        out.outputs.push_back(io::coloring_json(r.coloring).dump() + io::list_stats_json(r.stats).dump());
      } catch (const std::exception& e) {
        out.outputs.push_back(std::string("failure: ") + e.what());
      }
    }
    double mean = 0.0, var = 0.0;
    for (double d : gaps) mean += d;
    mean /= std::max<std::size_t>(1, gaps.size());
    for (double d : gaps) var += (d - mean) * (d - mean);
    double se = gaps.size() > 1 ? std::sqrt(var / (gaps.size() - 1) / gaps.size()) : 0.0;
    bool fraction_ok = gaps.size() > 1 && std::abs(mean) <= 3 * se;
    bool pass = ok == 30 && fraction_ok && violations == 0 && audits > 0;
    all = all && pass;
    detail += std::string(detail.empty() ? "" : "; ") + (adversarial ? "adversarial" : "uniform") + " lists " +
              std::to_string(ok) + "/30 proper, colored fraction minus alpha " + fmt("%+.4f", mean) + " (s.e. " +
              fmt("%.4f", se) + ", " + std::to_string(iterations) + " iterations), " + std::to_string(violations) +
              " locality violations in " + std::to_string(audits) + " audited steps";
  }
  out.verdict = {all, detail};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int k) { return wanted.empty() || wanted.count(k); };

  int failures = 0;
  auto report = [&](int k, const std::string& name, const Verdict& v, double secs, double limit) {
    bool pass = v.pass && (limit <= 0 || secs < limit);
    if (!pass) ++failures;
    std::string timing = fmt("%.1f s", secs);
    if (limit > 0 && secs >= limit) timing += ", over the " + fmt("%.0f s", limit) + " limit";
    std::cout << "criterion " << k << " " << (pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail << " ["
              << timing << "]" << std::endl;
  };
  auto timed = [](auto&& f) {
    auto start = std::chrono::steady_clock::now();
    auto r = f();
    return std::make_pair(r, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  };

  struct Simple {
    int k;
    const char* name;
    std::function<Verdict()> run;
    double limit;
  };
  std::vector<Simple> simple{
      {1, "chi* exactness", chi_star_exactness, 120},
      {2, "hard-core partition function", hard_core_correctness, 60},
      {3, "sampler fidelity", sampler_fidelity, 300},
      {4, "calibration", calibration, 0},
      {5, "correlation decay", correlation_decay, 0},
      {6, "charge identity", charge_identity, 60},
      {7, "commutativity", commutativity, 0},
  };
  for (const auto& c : simple) {
    if (!want(c.k)) continue;
    auto [v, secs] = timed(c.run);
    report(c.k, c.name, v, secs, c.limit);
  }

  std::optional<Sweep> gs, list;
  if (want(8) || want(10)) {
    auto [sw, secs] = timed(gs_end_to_end);
    gs = sw;
    if (want(8)) report(8, "GS colorer end to end", sw.verdict, secs, 900);
  }
  if (want(9) || want(10)) {
    auto [sw, secs] = timed(list_end_to_end);
    list = sw;
    if (want(9)) report(9, "list colorer end to end", sw.verdict, secs, 1200);
  }
  if (want(10)) {
    auto [v, secs] = timed([&] {
      Sweep gs2 = gs_end_to_end(), list2 = list_end_to_end();
      int differ = 0;
      for (std::size_t i = 0; i < gs2.outputs.size(); ++i) differ += gs2.outputs[i] != gs->outputs[i];
      for (std::size_t i = 0; i < list2.outputs.size(); ++i) differ += list2.outputs[i] != list->outputs[i];
      std::size_t runs = gs2.outputs.size() + list2.outputs.size();
      return Verdict{differ == 0, std::to_string(runs - differ) + "/" + std::to_string(runs) +
                                      " reruns byte-identical (colorings, stats and failure messages)"};
    });
    report(10, "determinism", v, secs, 0);
  }
  return failures == 0 ? 0 : 1;
}
