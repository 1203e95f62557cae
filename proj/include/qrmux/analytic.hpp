#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qrmux/model.hpp"

namespace qrmux {

/// Which maximum matching the deterministic measurement map removes.
enum class TieBreak { LexLeast, LexGreatest };

/// Prob[Lambda = l] for l = 0..m: distribution of the number of BSMs
/// attempted at t_2.
struct LambdaDistribution {
  std::vector<double> probs;

  double mean() const;
  double total() const;
};

/// The measurement map tabulated over all 4^m configurations: number of
/// attempted BSMs and the configuration left behind.
class MeasurementMap {
 public:
  MeasurementMap(int m, int w, TieBreak tie_break = TieBreak::LexLeast);

  int slots() const { return m_; }
  int band() const { return w_; }
  int connections(std::uint64_t index) const { return ell_[index]; }
  std::uint64_t after(std::uint64_t index) const { return after_[index]; }

 private:
  int m_;
  int w_;
  std::vector<std::uint32_t> after_;
  std::vector<std::uint8_t> ell_;
};

/// Photon arrivals during one bin (t_0 -> t_1), one slot at a time.
ConfigDistribution storage_evolve(const ConfigDistribution& dist, double p);
void storage_evolve_in_place(std::span<double> probs, int m, double p);

struct MeasurementOutcome {
  ConfigDistribution after;   // at (t+1)_0
  LambdaDistribution lambda;  // at t_2
};

MeasurementOutcome measurement_evolve(const ConfigDistribution& dist, const MeasurementMap& map);
MeasurementOutcome measurement_evolve(const ConfigDistribution& dist, int w);

/// Prob[Sigma = l]: binomial thinning of Lambda by the BSM success rate.
std::vector<double> sigma_distribution(const LambdaDistribution& lambda, double pbsm);
/// <l>(t_2), the mean number of successful BSMs.
double expected_successes(const LambdaDistribution& lambda, double pbsm);

/// Exact bin-by-bin evolution of the configuration distribution starting
/// from empty memories.
class ConfigEvolution {
 public:
  explicit ConfigEvolution(const ExperimentParams& params, TieBreak tie_break = TieBreak::LexLeast);

  /// Runs one full time-bin and returns Lambda at its t_2.
  const LambdaDistribution& step();

  std::int64_t bins_done() const { return t_; }
  const ConfigDistribution& current() const { return dist_; }
  /// Configuration distribution at t_1 of the last completed bin.
  const ConfigDistribution& stored() const { return stored_; }
  const LambdaDistribution& lambda() const { return lambda_; }

 private:
  ExperimentParams params_;
  MeasurementMap map_;
  ConfigDistribution dist_;
  ConfigDistribution stored_;
  LambdaDistribution lambda_;
  std::int64_t t_ = 0;
};

struct RateSeries {
  std::vector<double> expected_successes;  // <l>(t_2) for t = 1..tmax
  std::vector<double> instantaneous;       // <l>(t_2) / m
  std::vector<double> cumulative;          // running average R(t)
};

RateSeries rate_series(const ExperimentParams& params, TieBreak tie_break = TieBreak::LexLeast);

/// Row-stochastic one-bin transition matrix, stored by rows.  Protocol
/// kernels live on the t_0 configurations reachable from empty memories,
/// listed by ascending canonical index in states().
class TransitionKernel {
 public:
  struct Entry {
    std::uint32_t col;
    double prob;
  };

  static TransitionKernel from_dense(std::size_t n, std::span<const double> row_major);

  std::size_t size() const { return row_start_.size() - 1; }
  int slots() const { return m_; }
  const std::vector<std::uint64_t>& states() const { return states_; }
  std::span<const Entry> row(std::size_t i) const {
    return {entries_.data() + row_start_[i], entries_.data() + row_start_[i + 1]};
  }
  double operator()(std::size_t i, std::size_t j) const;
  std::vector<double> dense() const;
  std::size_t nonzeros() const { return entries_.size(); }

 private:
  friend TransitionKernel build_transition_kernel(const ExperimentParams&, TieBreak);

  int m_ = 0;
  std::vector<std::uint64_t> states_;
  std::vector<std::size_t> row_start_{0};
  std::vector<Entry> entries_;
};

TransitionKernel build_transition_kernel(const ExperimentParams& params,
                                         TieBreak tie_break = TieBreak::LexLeast);

/// Raised when a chain has no unique stationary distribution.
class DegenerateChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stationary vector by successive elimination of states 0, 1, ..., n-2:
/// K_k(x', x) = K_{k-1}(x', x) + K_{k-1}(x', k-1) K_{k-1}(k-1, x) / (1 - K_{k-1}(k-1, k-1)),
/// then f(x) = K(n-1, x) / sum_x' K(n-1, x').
std::vector<double> steady_state_appendix(const TransitionKernel& kernel);

/// Stationary vector from a dense LU solve of (I - q^T) f = 0 with one
/// equation replaced by sum f = 1.
std::vector<double> steady_state_dense(const TransitionKernel& kernel);

/// Lifts a stationary vector on kernel states to a full 4^m distribution.
ConfigDistribution to_config_distribution(const TransitionKernel& kernel,
                                          std::span<const double> stationary);

struct AsymptoticResult {
  double rate = 0.0;                 // R_inf per memory per bin
  double expected_successes = 0.0;   // <l> per bin
  LambdaDistribution lambda;
  ConfigDistribution stationary;     // at t_0
};

AsymptoticResult asymptotic_rate(const ExperimentParams& params);

}  // namespace qrmux
