#include "qrmux/matching.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <queue>
#include <unordered_map>

namespace qrmux {

namespace {

std::uint64_t slot_range(int lo, int hi) {
  if (hi < lo) return 0;
  const std::uint64_t upto = (hi >= 63) ? ~std::uint64_t{0} : ((std::uint64_t{1} << (hi + 1)) - 1);
  return upto & ~((std::uint64_t{1} << lo) - 1);
}

}  // namespace

BandedGraph::BandedGraph(int m, int w, std::uint64_t left, std::uint64_t right)
    : m_(m), w_(w), left_(left), right_(right) {
  if (m < 1 || m > kMaxSlots) throw std::invalid_argument("slot count out of range");
  if (w < 0 || w > m - 1) throw std::invalid_argument("band width must lie in [0, m-1]");
  const std::uint64_t mask = slot_range(0, m - 1);
  if ((left & ~mask) || (right & ~mask))
    throw std::invalid_argument("filled slot beyond slot count");
}

BandedGraph BandedGraph::from_config(const MemoryConfig& c, int w) {
  return {c.slots(), w, c.left(), c.right()};
}

bool BandedGraph::has_edge(int i, int j) const {
  if (i < 0 || j < 0 || i >= m_ || j >= m_) return false;
  return ((left_ >> i) & 1u) && ((right_ >> j) & 1u) && std::abs(i - j) <= w_;
}

std::uint64_t BandedGraph::neighbours(int i) const {
  if (!((left_ >> i) & 1u)) return 0;
  return right_ & slot_range(std::max(0, i - w_), std::min(m_ - 1, i + w_));
}

std::vector<Edge> BandedGraph::edges() const {
  std::vector<Edge> out;
  for (int i = 0; i < m_; ++i) {
    for (std::uint64_t nb = neighbours(i); nb; nb &= nb - 1) out.push_back({i, std::countr_zero(nb)});
  }
  return out;
}

bool BandedGraph::empty() const {
  for (int i = 0; i < m_; ++i)
    if (neighbours(i)) return false;
  return true;
}

void BandedGraph::set_weight(int i, int j, std::int64_t delta) {
  if (!has_edge(i, j)) throw std::invalid_argument("weight assigned to a non-existent edge");
  if (delta < 0) throw std::invalid_argument("edge weights must be non-negative");
  if (weights_.empty()) weights_.assign(static_cast<std::size_t>(m_) * m_, kNoWeight);
  weights_[static_cast<std::size_t>(i) * m_ + j] = delta;
}

std::int64_t BandedGraph::weight(int i, int j) const {
  if (weights_.empty() || !has_edge(i, j)) return kNoWeight;
  return weights_[static_cast<std::size_t>(i) * m_ + j];
}

void BandedGraph::require_weights() const {
  for (const Edge& e : edges())
    if (weight(e.left, e.right) == kNoWeight)
      throw std::invalid_argument("edge (" + std::to_string(e.left) + "," +
                                  std::to_string(e.right) + ") has no weight");
}

std::int64_t matching_weight(const BandedGraph& g, const Matching& mt) {
  std::int64_t sum = 0;
  for (const Edge& e : mt) sum += std::max<std::int64_t>(0, g.weight(e.left, e.right));
  return sum;
}

bool is_valid_matching(const BandedGraph& g, const Matching& mt) {
  std::uint64_t used_l = 0, used_r = 0;
  for (const Edge& e : mt) {
    if (!g.has_edge(e.left, e.right)) return false;
    const std::uint64_t bl = std::uint64_t{1} << e.left, br = std::uint64_t{1} << e.right;
    if ((used_l & bl) || (used_r & br)) return false;
    used_l |= bl;
    used_r |= br;
  }
  return true;
}

// Hopcroft-Karp on the m x m banded graph.
int max_cardinality(const BandedGraph& g) {
  const int m = g.slots();
  constexpr int kFree = -1;
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> match_l(m, kFree), match_r(m, kFree), dist(m);
  std::vector<std::uint64_t> adj(m);
  for (int i = 0; i < m; ++i) adj[i] = g.neighbours(i);

  auto bfs = [&] {
    std::queue<int> q;
    bool reachable_free = false;
    for (int i = 0; i < m; ++i) {
      if (adj[i] && match_l[i] == kFree) {
        dist[i] = 0;
        q.push(i);
      } else {
        dist[i] = kInf;
      }
    }
    while (!q.empty()) {
      const int i = q.front();
      q.pop();
      for (std::uint64_t nb = adj[i]; nb; nb &= nb - 1) {
        const int j = std::countr_zero(nb);
        const int k = match_r[j];
        if (k == kFree) {
          reachable_free = true;
        } else if (dist[k] == kInf) {
          dist[k] = dist[i] + 1;
          q.push(k);
        }
      }
    }
    return reachable_free;
  };

  auto dfs = [&](auto&& self, int i) -> bool {
    for (std::uint64_t nb = adj[i]; nb; nb &= nb - 1) {
      const int j = std::countr_zero(nb);
      const int k = match_r[j];
      if (k == kFree || (dist[k] == dist[i] + 1 && self(self, k))) {
        match_l[i] = j;
        match_r[j] = i;
        return true;
      }
    }
    dist[i] = kInf;
    return false;
  };

  int size = 0;
  while (bfs()) {
    for (int i = 0; i < m; ++i)
      if (adj[i] && match_l[i] == kFree && dfs(dfs, i)) ++size;
  }
  return size;
}

namespace {

enum class Objective { Cardinality, MinWeight, MaxWeight };

struct Score {
  int card = 0;
  std::int64_t weight = 0;
  friend bool operator==(const Score&, const Score&) = default;
};

// Exact optimisation over matchings by dynamic programming on the left
// memories in index order; the state is the set of right memories already
// taken.  Reconstruction walks forward preferring (i, smallest j) over
// skipping i, which yields the lexicographically least optimal edge list.
class MatchingDp {
 public:
  MatchingDp(const BandedGraph& g, Objective obj) : g_(g), obj_(obj) {
    for (int i = 0; i < g.slots(); ++i) {
      if (const std::uint64_t nb = g.neighbours(i)) {
        rows_.push_back(i);
        nbrs_.push_back(nb);
      }
    }
    const std::size_t levels = rows_.size() + 1;
    if (g.slots() <= 14) {
      dense_ = true;
      stride_ = std::size_t{1} << g.slots();
      auto& buf = buffer();
      if (buf.scores.size() < levels * stride_) {
        buf.scores.resize(levels * stride_);
        buf.stamps.assign(levels * stride_, 0);
      }
      if (++buf.stamp == 0) {
        std::fill(buf.stamps.begin(), buf.stamps.end(), 0);
        buf.stamp = 1;
      }
    }
  }

  Matching solve() {
    Matching out;
    std::uint64_t used = 0;
    for (std::size_t level = 0; level < rows_.size(); ++level) {
      const Score target = best(level, used);
      const int i = rows_[level];
      for (std::uint64_t nb = nbrs_[level] & ~used; nb; nb &= nb - 1) {
        const int j = std::countr_zero(nb);
        const std::uint64_t bit = std::uint64_t{1} << j;
        Score s = best(level + 1, used | bit);
        s.card += 1;
        s.weight += edge_weight(i, j);
        if (s == target) {
          out.push_back({i, j});
          used |= bit;
          break;
        }
      }
    }
    return out;
  }

 private:
  struct Buffer {
    std::vector<Score> scores;
    std::vector<std::uint32_t> stamps;
    std::uint32_t stamp = 0;
  };
  static Buffer& buffer() {
    thread_local Buffer buf;
    return buf;
  }

  std::int64_t edge_weight(int i, int j) const {
    return obj_ == Objective::Cardinality ? 0 : g_.weight(i, j);
  }

  bool better(const Score& a, const Score& b) const {
    if (a.card != b.card) return a.card > b.card;
    switch (obj_) {
      case Objective::MinWeight: return a.weight < b.weight;
      case Objective::MaxWeight: return a.weight > b.weight;
      case Objective::Cardinality: return false;
    }
    return false;
  }

  Score best(std::size_t level, std::uint64_t used) {
    if (level == rows_.size()) return {};
    Score* slot = nullptr;
    if (dense_) {
      auto& buf = buffer();
      const std::size_t key = level * stride_ + used;
      if (buf.stamps[key] == buf.stamp) return buf.scores[key];
      slot = &buf.scores[key];
    } else {
      const std::uint64_t key = (static_cast<std::uint64_t>(level) << 32) | used;
      if (auto it = sparse_.find(key); it != sparse_.end()) return it->second;
    }

    Score result = best(level + 1, used);
    const int i = rows_[level];
    for (std::uint64_t nb = nbrs_[level] & ~used; nb; nb &= nb - 1) {
      const int j = std::countr_zero(nb);
      Score s = best(level + 1, used | (std::uint64_t{1} << j));
      s.card += 1;
      s.weight += edge_weight(i, j);
      if (better(s, result)) result = s;
    }

    if (dense_) {
      auto& buf = buffer();
      const std::size_t key = level * stride_ + used;
      buf.stamps[key] = buf.stamp;
      *slot = result;
    } else {
      sparse_.emplace((static_cast<std::uint64_t>(level) << 32) | used, result);
    }
    return result;
  }

  const BandedGraph& g_;
  Objective obj_;
  std::vector<int> rows_;
  std::vector<std::uint64_t> nbrs_;
  bool dense_ = false;
  std::size_t stride_ = 0;
  std::unordered_map<std::uint64_t, Score> sparse_;
};

void enumerate_rec(const std::vector<int>& rows, const std::vector<std::uint64_t>& nbrs,
                   std::size_t level, std::uint64_t used, int target, Matching& current,
                   std::vector<Matching>& out) {
  const int remaining = static_cast<int>(rows.size() - level);
  if (static_cast<int>(current.size()) + remaining < target) return;
  if (static_cast<int>(current.size()) == target) {
    out.push_back(current);
    return;
  }
  for (std::uint64_t nb = nbrs[level] & ~used; nb; nb &= nb - 1) {
    const int j = std::countr_zero(nb);
    current.push_back({rows[level], j});
    enumerate_rec(rows, nbrs, level + 1, used | (std::uint64_t{1} << j), target, current, out);
    current.pop_back();
  }
  enumerate_rec(rows, nbrs, level + 1, used, target, current, out);
}

}  // namespace

Matching canonical_matching(const BandedGraph& g) {
  return MatchingDp(g, Objective::Cardinality).solve();
}

Matching lex_greatest_matching(const BandedGraph& g) {
  return enumerate_max_matchings(g).back();
}

Matching min_weight_max_matching(const BandedGraph& g) {
  g.require_weights();
  return MatchingDp(g, Objective::MinWeight).solve();
}

Matching max_weight_max_matching(const BandedGraph& g) {
  g.require_weights();
  return MatchingDp(g, Objective::MaxWeight).solve();
}

std::vector<Matching> enumerate_max_matchings(const BandedGraph& g) {
  if (g.slots() > kEnumerationMaxSlots)
    throw std::invalid_argument("enumeration of maximum matchings requires m <= " +
                                std::to_string(kEnumerationMaxSlots));
  std::vector<int> rows;
  std::vector<std::uint64_t> nbrs;
  for (int i = 0; i < g.slots(); ++i) {
    if (const std::uint64_t nb = g.neighbours(i)) {
      rows.push_back(i);
      nbrs.push_back(nb);
    }
  }
  const int target = max_cardinality(g);
  std::vector<Matching> out;
  Matching current;
  enumerate_rec(rows, nbrs, 0, 0, target, current, out);
  return out;
}

}  // namespace qrmux
