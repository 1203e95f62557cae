#pragma once

#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "qrmux/model.hpp"

namespace qrmux {

/// Upper slot count for exhaustive enumeration of maximum matchings.
inline constexpr int kEnumerationMaxSlots = 8;
inline constexpr std::int64_t kNoWeight = -1;

/// A BSM connection between left memory `left` and right memory `right`.
struct Edge {
  int left = 0;
  int right = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Disjoint set of edges, always kept sorted by (left, right).
using Matching = std::vector<Edge>;

/// Bipartite graph of allowed BSMs: an edge (i, j) exists iff left memory i
/// and right memory j are both filled and |i - j| <= w.  Edges optionally
/// carry an integer weight (arrival-time difference in time-bins).
class BandedGraph {
 public:
  BandedGraph(int m, int w, std::uint64_t left, std::uint64_t right);
  static BandedGraph from_config(const MemoryConfig& c, int w);

  int slots() const { return m_; }
  int band() const { return w_; }
  std::uint64_t left() const { return left_; }
  std::uint64_t right() const { return right_; }

  bool has_edge(int i, int j) const;
  /// Right memories adjacent to left memory i, as a bitmask.
  std::uint64_t neighbours(int i) const;
  /// All edges in lexicographic order.
  std::vector<Edge> edges() const;
  bool empty() const;

  void set_weight(int i, int j, std::int64_t delta);
  std::int64_t weight(int i, int j) const;
  bool has_weights() const { return !weights_.empty(); }
  /// Throws std::invalid_argument if some edge carries no weight.
  void require_weights() const;

 private:
  int m_;
  int w_;
  std::uint64_t left_;
  std::uint64_t right_;
  std::vector<std::int64_t> weights_;  // m*m, kNoWeight where unset
};

/// Sum of edge weights of a matching.
std::int64_t matching_weight(const BandedGraph& g, const Matching& mt);
/// Disjointness plus every edge present in `g`.
bool is_valid_matching(const BandedGraph& g, const Matching& mt);

/// Size of a maximum matching (Hopcroft-Karp).
int max_cardinality(const BandedGraph& g);

/// Lexicographically least maximum matching.
Matching canonical_matching(const BandedGraph& g);
/// Lexicographically greatest maximum matching.
Matching lex_greatest_matching(const BandedGraph& g);

/// Strategy 1: maximum cardinality first, then least total weight; ties go
/// to the lexicographically least edge list.
Matching min_weight_max_matching(const BandedGraph& g);
/// Strategy 2: maximum cardinality first, then greatest total weight.
Matching max_weight_max_matching(const BandedGraph& g);

/// Every maximum matching, in lexicographic order.  Requires m <= 8.
std::vector<Matching> enumerate_max_matchings(const BandedGraph& g);

/// Strategy 0: uniform draw from enumerate_max_matchings(g).  No random
/// number is consumed when the maximum matching is unique.
template <class URBG>
Matching uniform_random_max_matching(const BandedGraph& g, URBG& rng) {
  auto all = enumerate_max_matchings(g);
  if (all.size() == 1) return std::move(all.front());
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  return std::move(all[pick(rng)]);
}

}  // namespace qrmux
