#include "qrmux/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qrmux {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Uniform: return "0";
    case Strategy::MinWeight: return "1";
    case Strategy::MaxWeight: return "2";
    case Strategy::Canonical: return "canonical";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "0" || t == "s0") return Strategy::Uniform;
  if (t == "1" || t == "s1") return Strategy::MinWeight;
  if (t == "2" || t == "s2") return Strategy::MaxWeight;
  if (t == "canonical" || t == "c") return Strategy::Canonical;
  throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

void ExperimentParams::validate() const {
  if (m < 1 || m > kMaxSlots)
    throw std::invalid_argument("m must lie in [1, " + std::to_string(kMaxSlots) + "]");
  if (w < 0 || w > m - 1) throw std::invalid_argument("w must lie in [0, m-1]");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  if (!(pbsm >= 0.0 && pbsm <= 1.0)) throw std::invalid_argument("pbsm must lie in [0, 1]");
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
  if (tmax < 1) throw std::invalid_argument("tmax must be >= 1");
  if (tau && !(*tau > 0.0)) throw std::invalid_argument("tau must be positive");
}

void ExperimentParams::validate_analytic() const {
  validate();
  if (m > kAnalyticMaxSlots)
    throw std::invalid_argument("analytic engine supports m <= " +
                                std::to_string(kAnalyticMaxSlots));
}

MemoryConfig::MemoryConfig(int m, std::uint64_t a, std::uint64_t b) : m_(m), a_(a), b_(b) {
  if (m < 0 || m > kMaxSlots) throw std::invalid_argument("slot count out of range");
  const std::uint64_t mask = (std::uint64_t{1} << m) - 1;
  if ((a & ~mask) || (b & ~mask))
    throw std::invalid_argument("occupancy bit set beyond slot count");
}

MemoryConfig MemoryConfig::from_index(int m, std::uint64_t index) {
  const std::uint64_t mask = (std::uint64_t{1} << m) - 1;
  if (index >> (2 * m)) throw std::invalid_argument("configuration index out of range");
  return {m, index >> m, index & mask};
}

MemoryConfig MemoryConfig::full(int m) {
  const std::uint64_t mask = (std::uint64_t{1} << m) - 1;
  return {m, mask, mask};
}

std::string to_string(const MemoryConfig& c) {
  std::string s = "(";
  for (int i = 0; i < c.slots(); ++i) s += c.left_filled(i) ? '1' : '0';
  s += ',';
  for (int j = 0; j < c.slots(); ++j) s += c.right_filled(j) ? '1' : '0';
  s += ')';
  return s;
}

ConfigDistribution::ConfigDistribution(int m) : m_(m) {
  if (m < 1 || m > kAnalyticMaxSlots)
    throw std::invalid_argument("distribution slot count out of range");
  probs_.assign(MemoryConfig::count(m), 0.0);
}

ConfigDistribution::ConfigDistribution(int m, std::vector<double> probs)
    : m_(m), probs_(std::move(probs)) {
  if (m < 1 || m > kAnalyticMaxSlots)
    throw std::invalid_argument("distribution slot count out of range");
  if (probs_.size() != MemoryConfig::count(m))
    throw std::invalid_argument("distribution length must be 4^m");
}

ConfigDistribution ConfigDistribution::point_mass(const MemoryConfig& c) {
  ConfigDistribution d(c.slots());
  d.probs_[c.index()] = 1.0;
  return d;
}

double ConfigDistribution::total() const {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

double transmission_probability(double distance_km, double alpha_db_per_km) {
  if (distance_km < 0.0 || alpha_db_per_km < 0.0)
    throw std::invalid_argument("distance and attenuation must be non-negative");
  return std::pow(10.0, -alpha_db_per_km * distance_km / 10.0);
}

double slot_storage_prob(bool before, bool after, double p) {
  const double a = before ? 1.0 : 0.0;
  const double a2 = after ? 1.0 : 0.0;
  return (1.0 - p) * (1.0 - a2) * (1.0 - a) + p * a2 * (1.0 - a) + a2 * a;
}

double config_storage_prob(const MemoryConfig& before, const MemoryConfig& after, double p) {
  if (before.slots() != after.slots())
    throw std::invalid_argument("configurations have different slot counts");
  double prob = 1.0;
  for (int i = 0; i < before.slots(); ++i) {
    prob *= slot_storage_prob(before.left_filled(i), after.left_filled(i), p);
    prob *= slot_storage_prob(before.right_filled(i), after.right_filled(i), p);
  }
  return prob;
}

}  // namespace qrmux
