#include <doctest.h>

#include <map>
#include <random>

#include "qrmux/matching.hpp"
#include "support/oracles.hpp"

using namespace qrmux;

namespace {

// slots 1,3,4 filled on the left, 0,1,5 on the right
BandedGraph example(int w) { return BandedGraph(6, w, 0b011010, 0b100011); }

bool in_band(const BandedGraph& g, const Matching& mt) {
  for (const Edge& e : mt)
    if (std::abs(e.left - e.right) > g.band()) return false;
  return true;
}

}  // namespace

TEST_CASE("maximum cardinality on the six-slot example") {
  CHECK(max_cardinality(example(1)) == 2);
  CHECK(max_cardinality(example(5)) == 3);
  CHECK(max_cardinality(BandedGraph(4, 3, 0, 0b1111)) == 0);
}

TEST_CASE("canonical matching") {
  CHECK(canonical_matching(example(1)) == Matching{{1, 0}, {4, 5}});
  CHECK(canonical_matching(BandedGraph(3, 0, 0b010, 0b010)) == Matching{{1, 1}});
  CHECK(canonical_matching(BandedGraph(2, 1, 0b01, 0b11)) == Matching{{0, 0}});
  CHECK(lex_greatest_matching(example(1)) == Matching{{1, 1}, {4, 5}});
}

TEST_CASE("min and max weight matchings on two-by-two examples") {
  BandedGraph g(2, 1, 0b11, 0b11);
  // left ages {5, 0}, right ages {0, 0}
  g.set_weight(0, 0, 5);
  g.set_weight(0, 1, 5);
  g.set_weight(1, 0, 0);
  g.set_weight(1, 1, 0);
  CHECK(min_weight_max_matching(g) == Matching{{0, 0}, {1, 1}});

  BandedGraph h(2, 1, 0b11, 0b11);
  // left ages {5, 0}, right ages {0, 3}
  h.set_weight(0, 0, 5);
  h.set_weight(0, 1, 2);
  h.set_weight(1, 0, 0);
  h.set_weight(1, 1, 3);
  CHECK(max_weight_max_matching(h) == Matching{{0, 0}, {1, 1}});
  CHECK(min_weight_max_matching(h) == Matching{{0, 1}, {1, 0}});

  BandedGraph single(3, 2, 0b100, 0b001);
  single.set_weight(2, 0, 17);
  CHECK(min_weight_max_matching(single) == Matching{{2, 0}});
  CHECK(max_weight_max_matching(single) == Matching{{2, 0}});
}

TEST_CASE("constant weights reduce to the canonical matching") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    BandedGraph g = oracle::random_graph(rng, 6, false);
    for (const Edge& e : g.edges()) g.set_weight(e.left, e.right, 3);
    const auto c = canonical_matching(g);
    CHECK(min_weight_max_matching(g) == c);
    CHECK(max_weight_max_matching(g) == c);
  }
}

TEST_CASE("weighted strategies reject missing weights") {
  BandedGraph g(2, 1, 0b11, 0b11);
  g.set_weight(0, 0, 1);
  CHECK_THROWS_AS(min_weight_max_matching(g), std::invalid_argument);
  CHECK_THROWS_AS(max_weight_max_matching(g), std::invalid_argument);
  CHECK_THROWS_AS(g.set_weight(0, 0, -1), std::invalid_argument);
  BandedGraph h(3, 0, 0b001, 0b010);
  CHECK_THROWS_AS(h.set_weight(0, 1, 1), std::invalid_argument);
}

TEST_CASE("enumeration of maximum matchings") {
  CHECK(enumerate_max_matchings(BandedGraph(3, 1, 0, 0)) == std::vector<Matching>{Matching{}});
  CHECK(enumerate_max_matchings(example(1)) ==
        std::vector<Matching>{{{1, 0}, {4, 5}}, {{1, 1}, {4, 5}}});
  CHECK(enumerate_max_matchings(BandedGraph(2, 1, 0b11, 0b11)).size() == 2);
  CHECK_THROWS_AS(enumerate_max_matchings(BandedGraph(9, 1, 1, 1)), std::invalid_argument);
}

TEST_CASE("full range leaves one array empty") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    auto g = oracle::random_graph(rng, 8, false);
    g = BandedGraph(g.slots(), g.slots() - 1, g.left(), g.right());
    CHECK(max_cardinality(g) == std::min(std::popcount(g.left()), std::popcount(g.right())));
  }
}

TEST_CASE("all matchings agree with exhaustive search and respect the band") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 3000; ++trial) {
    const BandedGraph g = oracle::random_graph(rng, 6, true);
    const int best = oracle::max_cardinality(g);
    CHECK(max_cardinality(g) == best);

    const auto expected = oracle::maximum_matchings(g);
    CHECK(enumerate_max_matchings(g) == expected);
    CHECK(canonical_matching(g) == expected.front());
    CHECK(lex_greatest_matching(g) == expected.back());

    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = -1;
    for (const auto& mt : expected) {
      lo = std::min(lo, oracle::weight(g, mt));
      hi = std::max(hi, oracle::weight(g, mt));
    }
    const auto s1 = min_weight_max_matching(g);
    const auto s2 = max_weight_max_matching(g);
    for (const auto* mt : {&s1, &s2}) {
      CHECK(static_cast<int>(mt->size()) == best);
      CHECK(is_valid_matching(g, *mt));
      CHECK(in_band(g, *mt));
    }
    CHECK(matching_weight(g, s1) == lo);
    CHECK(matching_weight(g, s2) == hi);
    // lexicographic tie-break among the optima
    for (const auto& mt : expected) {
      if (oracle::weight(g, mt) == lo) {
        CHECK(s1 == mt);
        break;
      }
    }
    for (const auto& mt : expected) {
      if (oracle::weight(g, mt) == hi) {
        CHECK(s2 == mt);
        break;
      }
    }
  }
}

TEST_CASE("large graphs stay valid beyond the enumeration limit") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    BandedGraph g = oracle::random_graph(rng, 16, true, 1000);
    const int best = max_cardinality(g);
    for (const auto& mt : {canonical_matching(g), min_weight_max_matching(g), max_weight_max_matching(g)}) {
      CHECK(static_cast<int>(mt.size()) == best);
      CHECK(is_valid_matching(g, mt));
      CHECK(in_band(g, mt));
    }
  }
}

TEST_CASE("strategy 0 is uniform over the maximum matchings") {
  SUBCASE("unique matching consumes no randomness") {
    std::mt19937_64 a(3), b(3);
    const BandedGraph g(4, 0, 0b0101, 0b0111);
    CHECK(uniform_random_max_matching(g, a) == canonical_matching(g));
    CHECK(a() == b());
  }
  SUBCASE("chi-square over 1e5 draws") {
    const std::vector<BandedGraph> graphs{BandedGraph(2, 1, 0b01, 0b11), example(1),
                                          BandedGraph(4, 1, 0b1111, 0b1111),
                                          BandedGraph(5, 2, 0b11011, 0b10111)};
    std::mt19937_64 rng(99);
    for (const auto& g : graphs) {
      const auto all = enumerate_max_matchings(g);
      REQUIRE(all.size() > 1);
      std::map<Matching, int> hits;
      const int draws = 100000;
      for (int i = 0; i < draws; ++i) hits[uniform_random_max_matching(g, rng)] += 1;
      CHECK(hits.size() == all.size());
      const double expected = static_cast<double>(draws) / static_cast<double>(all.size());
      double chi2 = 0.0;
      for (const auto& mt : all) {
        const double d = hits[mt] - expected;
        chi2 += d * d / expected;
      }
      // Wilson-Hilferty upper 0.001 quantile of chi-square with k dof
      const double k = static_cast<double>(all.size() - 1);
      const double z = 3.0902323061678132;
      const double crit = k * std::pow(1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k)), 3);
      CHECK(chi2 < crit);
    }
  }
}
