#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "ecol/fractional.hpp"
#include "ecol/generators.hpp"
#include "ecol/gs_colorer.hpp"
#include "ecol/oracle.hpp"

using namespace ecol;

namespace {

RoundParams hand_params(int N, Rational c_star, Rational threshold, int search_cap = 3, int t = 1) {
  RoundParams p;
  p.N = N;
  p.c_star = c_star;
  p.vertex_threshold = threshold;
  p.search_cap = search_cap;
  p.vertex_cap = search_cap;
  p.t = t;
  return p;
}

std::vector<EdgeId> outside(const std::vector<EdgeId>& m, const std::vector<EdgeId>& ball) {
  std::vector<EdgeId> out;
  for (EdgeId e : m)
    if (!std::binary_search(ball.begin(), ball.end(), e)) out.push_back(e);
  return out;
}

}  // namespace

TEST(Plan, SixteenGivesEightMatchings) {
  GsConfig cfg;
  cfg.chi0 = 10;
  auto p = round_params(Rational(16), 16, 20, cfg);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->N, 8);
  EXPECT_EQ(p->c_star, Rational(96, 11));
  EXPECT_EQ(p->delta, Rational(1, 40));
  EXPECT_EQ(p->vertex_threshold, Rational(96, 11) - Rational(1, 5));
}

TEST(Plan, SmallChiGoesGreedy) {
  GsConfig cfg;
  EXPECT_FALSE(round_params(Rational(1), 1, 2, cfg));
  EXPECT_FALSE(plan_round(gen::bundle(1), cfg));
  EXPECT_FALSE(plan_round(Multigraph(3), cfg));
}

TEST(Plan, VertexCap) {
  GsConfig cfg;
  cfg.chi0 = 1;
  // chi* = 16 gives N = 8; Delta = 100 gives 100 / (0.025 * 8) = 500.
  auto p = round_params(Rational(16), 100, 1000, cfg);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->vertex_cap, 499);
  EXPECT_EQ(p->search_cap, 9);
}

TEST(Plan, EffectiveChi0AndRoots) {
  GsConfig cfg;
  EXPECT_EQ(effective_chi0(cfg), 2560000);
  cfg.epsilon = Rational(1, 10);
  cfg.chi0 = 7;
  EXPECT_EQ(effective_chi0(cfg), 7);
  EXPECT_EQ(floor_three_quarters(Rational(16)), 8);
  EXPECT_EQ(floor_three_quarters(Rational(81)), 27);
  EXPECT_EQ(floor_three_quarters(Rational(80)), 26);
  EXPECT_EQ(largest_odd_at_most(Rational(500)), 499);
  EXPECT_EQ(largest_odd_at_most(Rational(7, 2)), 3);
}

TEST(Plan, ConfigValidation) {
  GsConfig cfg;
  cfg.epsilon = Rational(1, 5);
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg.epsilon = Rational(1, 20);
  cfg.radius_t = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

TEST(Plan, CalibratedActivitiesHitTarget) {
  GsConfig cfg;
  cfg.chi0 = 4;
  Multigraph g = gen::blow_up(gen::cycle(5), 3);
  auto plan = plan_round(g, cfg);
  ASSERT_TRUE(plan);
  EXPECT_TRUE(plan->calibration_exact);
  double target = to_double((Rational(1) - plan->params.delta) / plan->params.chi_star);
  for (double p : exact_marginals(HardCoreModel(g, plan->activities))) EXPECT_NEAR(p, target, 1e-6);
  EXPECT_GE(plan->params.t, 1);
  EXPECT_LE(plan->params.t, diameter(g));
}

TEST(InitialState, Degenerate) {
  EXPECT_TRUE(initial_state(gen::triangle(), 0, {1, 1, 1}, 3).matchings.empty());
  auto s = initial_state(Multigraph(4), 3, {}, 3);
  ASSERT_EQ(s.matchings.size(), 3u);
  for (const auto& m : s.matchings) EXPECT_TRUE(m.edges.empty());
}

TEST(InitialState, SeedDeterminesState) {
  Multigraph k3 = gen::triangle();
  auto a = initial_state(k3, 2, {1, 1, 1}, 11);
  auto b = initial_state(k3, 2, {1, 1, 1}, 11);
  ASSERT_EQ(a.matchings.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(a.matchings[i].edges, b.matchings[i].edges);
    EXPECT_TRUE(is_matching(k3, a.matchings[i]));
  }
}

TEST(DetectFlaw, VertexFlawAtLowestIndex) {
  Multigraph g = gen::blow_up(gen::triangle(), 2);
  GsState empty{{Matching{}}};
  auto f = detect_flaw(g, empty, hand_params(1, Rational(3), Rational(3)));
  ASSERT_TRUE(f);
  EXPECT_EQ(f->kind, GsFlaw::Kind::Vertex);
  EXPECT_EQ(f->H, std::vector<VertexId>{0});
  EXPECT_EQ(f->kind_name(), "f_v");
}

TEST(DetectFlaw, OnlyTheTriangleViolates) {
  // Degrees 4 stay under the vertex threshold, but 6 edges > (3-1)/2 * 5.
  Multigraph g = gen::blow_up(gen::triangle(), 2);
  GsState empty{{Matching{}}};
  auto f = detect_flaw(g, empty, hand_params(1, Rational(5), Rational(9, 2)));
  ASSERT_TRUE(f);
  EXPECT_EQ(f->kind, GsFlaw::Kind::OddSet);
  EXPECT_EQ(f->H, (std::vector<VertexId>{0, 1, 2}));
  // Removing one edge brings the triangle to 5 <= 5.
  GsState one{{make_matching({0})}};
  EXPECT_FALSE(detect_flaw(g, one, hand_params(1, Rational(5), Rational(9, 2))));
}

TEST(DetectFlaw, RemainingDegreeCountsDistinctEdges) {
  Multigraph g = gen::bundle(3);
  GsState s{{make_matching({0}), make_matching({0}), make_matching({1})}};
  EXPECT_EQ(remaining_degree(g, s, 0), 1);
}

TEST(Resample, PathHandExample) {
  // Path a-b-c-d, M = {e3}, H = {a}, d = 1: e3 frozen, e1 redrawn alone.
  Multigraph g = gen::path(3);
  const double lambda = 2.5;
  auto law = resample_distribution(g, {0}, make_matching({2}), 1, {lambda, lambda, lambda});
  ASSERT_EQ(law.size(), 2u);
  for (auto& [m, p] : law) {
    if (m.contains(0)) {
      EXPECT_EQ(m.edges, (std::vector<EdgeId>{0, 2}));
      EXPECT_NEAR(p, lambda / (1 + lambda), 1e-12);
    } else {
      EXPECT_EQ(m.edges, std::vector<EdgeId>{2});
      EXPECT_NEAR(p, 1 / (1 + lambda), 1e-12);
    }
  }
}

TEST(Resample, RimEdgesStayFrozen) {
  // Ball of radius 1 around vertex 1 on a triangle: {0, 2} is the rim.
  Multigraph g = gen::triangle();
  Matching rim;
  for (EdgeId e = 0; e < 3; ++e)
    if (g.edge(e).u != 1 && g.edge(e).v != 1) rim = make_matching({e});
  auto law = resample_distribution(g, {1}, rim, 1, {1, 1, 1});
  ASSERT_EQ(law.size(), 1u);
  EXPECT_EQ(law[0].first.edges, rim.edges);
}

TEST(Resample, AbsentRimEdgeStaysAbsent) {
  Multigraph g = gen::triangle();
  auto law = resample_distribution(g, {1}, Matching{}, 1, {1, 1, 1});
  for (auto& [m, p] : law)
    for (EdgeId e : m.edges) EXPECT_TRUE(g.edge(e).u == 1 || g.edge(e).v == 1);
}

// Resampling a ball keeps the hard-core law stationary.
TEST(Resample, PreservesTheLaw) {
  Multigraph g = gen::cycle(6);
  std::vector<double> lambda{0.5, 1.0, 2.0, 0.7, 1.3, 0.9};
  auto mu = oracle::exact_distribution(g, lambda);
  for (int d = 1; d <= 2; ++d) {
    std::map<std::vector<EdgeId>, double> pushed;
    for (auto& [m, p] : mu)
      for (auto& [next, q] : resample_distribution(g, {0}, make_matching(m), d, lambda)) pushed[next.edges] += p * q;
    for (auto& [m, p] : mu) EXPECT_NEAR(pushed[m], p, 1e-12) << "radius " << d;
  }
}

TEST(Resample, LargeRadiusIsFullRedraw) {
  Multigraph g = gen::cycle(5);
  std::vector<double> lambda(5, 1.7);
  auto law = resample_distribution(g, {0}, make_matching({0, 2}), 10, lambda);
  auto exact = oracle::exact_distribution(g, lambda);
  ASSERT_EQ(law.size(), exact.size());
  for (auto& [m, p] : law) EXPECT_NEAR(p, exact.at(m.edges), 1e-12);
}

TEST(Resample, LocalAndValid) {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Multigraph g = gen::random_heavy_multigraph(12, 3, 9, rng);
    std::vector<double> lambda(static_cast<std::size_t>(g.num_edges()), 0.3);
    GsState s = initial_state(g, 3, lambda, static_cast<std::uint64_t>(seed));
    VertexId v = static_cast<VertexId>(rng.below(static_cast<std::uint64_t>(g.num_vertices())));
    for (int d = 1; d <= 3; ++d) {
      GsState t = resample(g, {v}, s, d, lambda, 5, static_cast<std::uint64_t>(d));
      auto ball = ball_edge_list(g, bfs_distances(g, std::vector<VertexId>{v}, d), d);
      for (std::size_t i = 0; i < s.matchings.size(); ++i) {
        EXPECT_TRUE(is_matching(g, t.matchings[i]));
        EXPECT_EQ(outside(s.matchings[i].edges, ball), outside(t.matchings[i].edges, ball));
      }
    }
  }
  EXPECT_THROW(resample(gen::triangle(), {0}, GsState{}, 0, {1, 1, 1}, 0, 0), ArgumentError);
}

TEST(RunRound, EdgelessIsFlawlessImmediately) {
  Multigraph g(3);
  RoundPlan plan{hand_params(2, Rational(1), Rational(0)), {}, true};
  auto out = run_round(g, plan, GsConfig{});
  EXPECT_EQ(out.stats.steps, 0u);
  EXPECT_EQ(out.matchings.size(), 2u);
}

TEST(RunRound, InfeasibleConfigExhaustsRetries) {
  Multigraph g = gen::path(3);
  RoundPlan plan{hand_params(1, Rational(1), Rational(-1)), {1, 1, 1}, true};
  GsConfig cfg;
  cfg.step_cap = 5;
  cfg.retries = 2;
  try {
    run_round(g, plan, cfg);
    FAIL() << "expected a round failure";
  } catch (const RoundFailure& f) {
    EXPECT_EQ(f.trace().size(), 5u);
    EXPECT_NE(std::string(f.what()).find("3 attempts"), std::string::npos);
  }
}

TEST(RunRound, FlawlessRoundMeetsTarget) {
  GsConfig cfg;
  cfg.chi0 = 8;
  cfg.step_cap = 20000;
  Multigraph g = gen::blow_up(gen::triangle(), 6);
  auto plan = plan_round(g, cfg);
  ASSERT_TRUE(plan);
  auto out = run_round(g, *plan, cfg);
  ASSERT_EQ(static_cast<int>(out.matchings.size()), plan->params.N);
  for (const auto& m : out.matchings) EXPECT_TRUE(is_matching(g, m));
  int union_edges = 0;
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    union_edges += std::any_of(out.matchings.begin(), out.matchings.end(), [e](const Matching& m) { return m.contains(e); });
  EXPECT_EQ(out.remaining.graph.num_edges() + union_edges, g.num_edges());
  EXPECT_LE(chi_star(out.remaining.graph).value, plan->params.c_star);
}

TEST(Greedy, SmallExamples) {
  auto k3 = greedy_edge_coloring(gen::triangle());
  EXPECT_EQ(k3, (PartialColoring{0, 1, 2}));
  EXPECT_EQ(greedy_edge_coloring(gen::bundle(1)), (PartialColoring{0}));
  EXPECT_EQ(greedy_edge_coloring(gen::bundle(2)), (PartialColoring{0, 1}));
  EXPECT_EQ(greedy_edge_coloring(gen::bundle(2), 5), (PartialColoring{5, 6}));
}

TEST(Greedy, WithinTwoDeltaMinusOne) {
  for (int seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    Multigraph g = gen::random_heavy_multigraph(15, 4, 12, rng);
    auto col = greedy_edge_coloring(g);
    auto report = validate_coloring(g, col);
    EXPECT_TRUE(report.clean());
    for (const auto& c : col) EXPECT_LE(*c, 2 * max_degree(g) - 2);
  }
}

TEST(ColorMultigraph, GreedyPathBelowChi0) {
  GsConfig cfg;
  cfg.chi0 = 10;
  auto r = color_multigraph(gen::triangle(), cfg);
  EXPECT_TRUE(r.stats.rounds.empty());
  EXPECT_EQ(r.stats.colors_used, 3);
  EXPECT_TRUE(validate_coloring(gen::triangle(), r.coloring).clean());
}

TEST(ColorMultigraph, ProperWithRounds) {
  for (int seed = 0; seed < 6; ++seed) {
    Rng rng(seed);
    Multigraph g = gen::random_heavy_multigraph(10, 3, 14, rng);
    GsConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.chi0 = 8;
    cfg.radius_t = 2;
    cfg.step_cap = 20000;
    auto r = color_multigraph(g, cfg);
    EXPECT_FALSE(r.stats.rounds.empty());
    EXPECT_TRUE(validate_coloring(g, r.coloring).clean());
    EXPECT_LE(r.stats.colors_used, 2 * max_degree(g) - 1);
    EXPECT_DOUBLE_EQ(r.stats.ratio, r.stats.colors_used / to_double(r.stats.chi_star));
  }
}

TEST(ColorMultigraph, EdgelessGraph) {
  auto r = color_multigraph(Multigraph(5), GsConfig{});
  EXPECT_EQ(r.stats.colors_used, 0);
  EXPECT_EQ(r.coloring.size(), 0u);
}
