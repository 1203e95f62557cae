#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qrmux {

/// Largest slot count accepted by the exact (4^m state) engine.
inline constexpr int kAnalyticMaxSlots = 8;
/// Largest slot count accepted anywhere (occupancy masks are 64-bit words,
/// the canonical index needs 2m bits).
inline constexpr int kMaxSlots = 31;

/// Rule used at t_2 to pick one of the maximum matchings.
enum class Strategy {
  Uniform,    // strategy 0: uniform over all maximum matchings
  MinWeight,  // strategy 1: minimise the summed arrival-time differences
  MaxWeight,  // strategy 2: maximise the summed arrival-time differences
  Canonical,  // lexicographically least maximum matching (analytic engine)
};

std::string_view to_string(Strategy s);
/// Accepts "0", "1", "2", "s0".."s2" and "canonical" (case-insensitive).
Strategy parse_strategy(std::string_view text);

struct ExperimentParams {
  int m = 5;
  int w = 1;
  double p = 0.001;
  double pbsm = 1.0;
  double nu = 1000.0;  // source repetition rate, pairs per second
  std::int64_t tmax = 12800;
  Strategy strategy = Strategy::MinWeight;
  std::optional<double> tau;  // coherence time in time-bins
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on any violated range constraint.
  void validate() const;
  /// Additionally enforces m <= kAnalyticMaxSlots.
  void validate_analytic() const;
};

/// Occupancy of the two memory arrays.  Bit i of `a` (`b`) is set iff the
/// Alice-side (Bob-side) memory i holds a photon.
class MemoryConfig {
 public:
  MemoryConfig() = default;
  MemoryConfig(int m, std::uint64_t a, std::uint64_t b);

  /// Inverse of index(): index = a * 2^m + b.
  static MemoryConfig from_index(int m, std::uint64_t index);
  static MemoryConfig empty(int m) { return {m, 0, 0}; }
  static MemoryConfig full(int m);

  int slots() const { return m_; }
  std::uint64_t left() const { return a_; }
  std::uint64_t right() const { return b_; }
  std::uint64_t index() const { return (a_ << m_) | b_; }

  bool left_filled(int i) const { return (a_ >> i) & 1u; }
  bool right_filled(int j) const { return (b_ >> j) & 1u; }

  /// Number of configurations for m slots, 4^m.
  static std::uint64_t count(int m) { return std::uint64_t{1} << (2 * m); }

  friend bool operator==(const MemoryConfig&, const MemoryConfig&) = default;

 private:
  int m_ = 0;
  std::uint64_t a_ = 0;
  std::uint64_t b_ = 0;
};

std::string to_string(const MemoryConfig& c);

/// Probability vector over all 4^m configurations, indexed by
/// MemoryConfig::index().
class ConfigDistribution {
 public:
  ConfigDistribution() = default;
  explicit ConfigDistribution(int m);
  ConfigDistribution(int m, std::vector<double> probs);

  static ConfigDistribution point_mass(const MemoryConfig& c);

  int slots() const { return m_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double& operator[](std::size_t i) { return probs_[i]; }
  double at(const MemoryConfig& c) const { return probs_[c.index()]; }
  const std::vector<double>& probs() const { return probs_; }
  std::vector<double>& probs() { return probs_; }

  double total() const;

 private:
  int m_ = 0;
  std::vector<double> probs_;
};

/// Single-photon survival probability of a fibre, 10^(-alpha D / 10).
double transmission_probability(double distance_km, double alpha_db_per_km);

/// Prob[after | before] for one memory slot during storage.
double slot_storage_prob(bool before, bool after, double p);

/// Product of the 2m slot factors; zero as soon as a filled slot empties.
double config_storage_prob(const MemoryConfig& before, const MemoryConfig& after,
                           double p);

inline std::pair<int, int> count_filled(const MemoryConfig& c) {
  return {std::popcount(c.left()), std::popcount(c.right())};
}

}  // namespace qrmux
