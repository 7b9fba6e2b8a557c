#include <gtest/gtest.h>

#include "ecol/fractional.hpp"
#include "ecol/generators.hpp"
#include "ecol/oracle.hpp"

using namespace ecol;

TEST(ChiStar, Triangle) {
  auto r = chi_star(gen::triangle());
  EXPECT_EQ(r.value, Rational(3));
  ASSERT_TRUE(r.certificate);
  EXPECT_EQ(r.certificate->vertices, (std::vector<VertexId>{0, 1, 2}));
  EXPECT_EQ(r.certificate->ratio, Rational(3));
  EXPECT_FALSE(r.degree_witness);
}

TEST(ChiStar, DoubleEdgeTiesWithDegree) {
  auto r = chi_star(gen::bundle(2));
  EXPECT_EQ(r.value, Rational(2));
  EXPECT_TRUE(r.degree_witness);
  ASSERT_TRUE(r.certificate);
  EXPECT_EQ(r.certificate->vertices, (std::vector<VertexId>{0, 1}));
  EXPECT_EQ(r.certificate->ratio, Rational(2));
}

TEST(ChiStar, FiveCycle) {
  auto r = chi_star(gen::cycle(5));
  EXPECT_EQ(r.value, Rational(5, 2));
  ASSERT_TRUE(r.certificate);
  EXPECT_EQ(r.certificate->vertices.size(), 5u);
}

TEST(ChiStar, EdgelessRejected) { EXPECT_THROW(chi_star(Multigraph(3)), ArgumentError); }

TEST(ChiStar, BoundedSearchFlagged) {
  auto r = chi_star(gen::cycle(5), 3);
  EXPECT_TRUE(r.bounded);
  EXPECT_EQ(r.value, Rational(2));
}

TEST(ChiStar, MatchesSubsetEnumeration) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 2 + static_cast<int>(rng.below(8));
    Multigraph g = gen::random_small_multigraph(n, 14, rng);
    auto r = chi_star(g);
    EXPECT_EQ(r.value, oracle::brute_force_chi_star(g)) << serialize_multigraph(g);
    EXPECT_GE(r.value, Rational(max_degree(g)));
    if (r.certificate) EXPECT_EQ(induced_edge_count(g, r.certificate->vertices), r.certificate->edge_count);
  }
}

TEST(ChiStar, EdgeDeletionNeverIncreases) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    Multigraph g = gen::random_small_multigraph(2 + static_cast<int>(rng.below(7)), 12, rng);
    if (g.num_edges() < 2) continue;
    EdgeId drop = static_cast<EdgeId>(rng.below(g.num_edges()));
    std::vector<Edge> es;
    for (EdgeId e = 0; e < g.num_edges(); ++e)
      if (e != drop) es.push_back(g.edge(e));
    EXPECT_LE(chi_star(Multigraph(g.num_vertices(), es)).value, chi_star(g).value);
  }
}

TEST(Violation, Examples) {
  auto k3 = gen::triangle();
  auto hit = find_violated_matching_constraint(k3, Rational(2), 3);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->vertices, (std::vector<VertexId>{0, 1, 2}));
  EXPECT_FALSE(find_violated_matching_constraint(k3, Rational(3), 3));
  auto c5 = find_violated_matching_constraint(gen::cycle(5), Rational(2), 5);
  ASSERT_TRUE(c5);
  EXPECT_EQ(c5->vertices.size(), 5u);
  EXPECT_THROW(find_violated_matching_constraint(k3, Rational(0), 3), ArgumentError);
}

TEST(Violation, NoneAtChiStarAndCertificatesRecount) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 3 + static_cast<int>(rng.below(8));
    Multigraph g = gen::random_small_multigraph(n, 16, rng);
    Rational chi = chi_star(g).value;
    EXPECT_FALSE(find_violated_matching_constraint(g, chi, n));
    Rational lower = chi * Rational(3, 4);
    if (auto cert = find_violated_matching_constraint(g, lower, n)) {
      int k = static_cast<int>(cert->vertices.size());
      EXPECT_EQ(k % 2, 1);
      int edges = induced_edge_count(g, cert->vertices);
      EXPECT_EQ(edges, cert->edge_count);
      EXPECT_GT(Rational(2 * edges), Rational(k - 1) * lower);
    }
  }
}
