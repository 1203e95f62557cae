#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "qrmux/matching.hpp"
#include "qrmux/model.hpp"
#include "qrmux/qkd.hpp"

namespace qrmux {

inline constexpr std::int64_t kEmptySlot = -1;

/// Arrival time-bin of the photon held by each memory (kEmptySlot if none).
struct TimedState {
  explicit TimedState(int m)
      : left_arrival(static_cast<std::size_t>(m), kEmptySlot),
        right_arrival(static_cast<std::size_t>(m), kEmptySlot) {}

  std::vector<std::int64_t> left_arrival;
  std::vector<std::int64_t> right_arrival;
  std::int64_t now = 0;

  int slots() const { return static_cast<int>(left_arrival.size()); }
  MemoryConfig occupancy() const;
  /// Banded graph with weights |arrival_left - arrival_right|.
  BandedGraph graph(int w) const;
};

/// One attempted BSM.
struct Connection {
  std::int64_t bin = 0;
  Edge edge;
  std::int64_t left_arrival = 0;
  std::int64_t right_arrival = 0;
  bool success = false;

  std::int64_t delta() const {
    return left_arrival > right_arrival ? left_arrival - right_arrival : right_arrival - left_arrival;
  }
};

/// Random streams of a single trajectory.  Arrivals and matching/BSM
/// decisions draw from separate engines, so two strategies fed the same
/// seed see the same arrival draws.
struct TrajectoryStreams {
  std::mt19937_64 arrivals;
  std::mt19937_64 choices;

  /// Streams derived from (master seed, trajectory index) only, so results
  /// do not depend on how trajectories are split across batches or threads.
  static TrajectoryStreams for_trajectory(std::uint64_t master_seed, std::uint64_t index);
};

struct TrajectoryRecord {
  std::vector<Connection> connections;  // ordered by bin
  std::vector<MemoryConfig> snapshots;  // occupancy after t_3 of each requested bin
};

/// Runs the protocol for params.tmax bins.  Bins without arrivals are
/// skipped with a geometric jump, which leaves the law of the trajectory
/// unchanged because nothing can happen in them.
TrajectoryRecord simulate_trajectory(const ExperimentParams& params, TrajectoryStreams& streams,
                                     std::span<const std::int64_t> snapshot_bins = {});

/// Age differences of successful connections, grouped by the checkpoint
/// interval (checkpoints[k-1], checkpoints[k]] in which they happened.
class DeltaHistogram {
 public:
  DeltaHistogram() = default;
  explicit DeltaHistogram(std::vector<std::int64_t> checkpoints);

  void record(std::int64_t bin, std::int64_t delta);
  void merge(const DeltaHistogram& other);

  const std::vector<std::int64_t>& checkpoints() const { return checkpoints_; }
  std::size_t checkpoint_index(std::int64_t t) const;
  /// Counts by delta of all connections with bin <= checkpoints[k].
  std::vector<std::uint64_t> cumulative(std::size_t k) const;
  std::uint64_t total() const;

 private:
  std::vector<std::int64_t> checkpoints_;
  std::vector<std::vector<std::uint64_t>> buckets_;
};

/// Evenly spaced checkpoints step, 2 step, ..., always ending at tmax.
std::vector<std::int64_t> linear_checkpoints(std::int64_t tmax, std::int64_t step);

struct BatchStats {
  std::uint64_t trials = 0;
  std::uint64_t attempts = 0;
  DeltaHistogram deltas;
  std::vector<std::uint64_t> success_sum;  // index t-1
  std::vector<std::uint64_t> success_sq;

  void merge(const BatchStats& other);
};

struct EnsembleOptions {
  std::vector<std::int64_t> checkpoints;  // defaults to {tmax}
  int batches = 20;
  int threads = 0;  // 0: QRMUX_THREADS, else hardware concurrency
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct Ensemble {
  ExperimentParams params;
  std::vector<BatchStats> batches;

  BatchStats pooled() const;
  /// Mean successful BSMs in bin t (1-based) with its standard error.
  Estimate mean_successes(std::int64_t t) const;
};

/// params.trials trajectories in params.strategy, merged per batch.
Ensemble simulate_ensemble(const ExperimentParams& params, const EnsembleOptions& options);

/// e(T) from counts by delta; nullopt when no connection happened yet.
std::optional<double> qber_from_counts(std::span<const std::uint64_t> counts, double tau);

/// Smallest tau with e(T; tau) <= threshold, by bisection to the given
/// relative precision.  0 if even tau -> 0 satisfies it; nullopt without
/// connections.
std::optional<double> minimal_tau_from_counts(std::span<const std::uint64_t> counts,
                                              double threshold = kQberThreshold,
                                              double rel_precision = 1e-7);

struct QberPoint {
  std::int64_t t = 0;
  std::uint64_t connections = 0;
  std::optional<double> qber;
};

/// Running QBER at every checkpoint of the histogram.
std::vector<QberPoint> qber_series(const DeltaHistogram& hist, double tau);

std::optional<double> minimal_tau(const DeltaHistogram& hist, std::int64_t t,
                                  double threshold = kQberThreshold);

/// Pooled estimate with a batch-means standard error.
std::optional<Estimate> minimal_tau_estimate(const Ensemble& ens, std::int64_t t,
                                             double threshold = kQberThreshold);
std::optional<Estimate> qber_estimate(const Ensemble& ens, std::int64_t t, double tau);
/// tau_min(a) - tau_min(b) with the standard error of batch-paired differences.
std::optional<Estimate> minimal_tau_difference(const Ensemble& a, const Ensemble& b, std::int64_t t,
                                               double threshold = kQberThreshold);

/// Simulates and returns tau_min at t_target.
std::optional<double> minimal_tau(const ExperimentParams& params, std::int64_t t_target);

int default_thread_count();

}  // namespace qrmux
