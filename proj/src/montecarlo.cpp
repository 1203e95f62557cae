#include "qrmux/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace qrmux {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::optional<double> mean_and_sem(const std::vector<double>& xs, double& sem) {
  if (xs.empty()) return std::nullopt;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sem = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                                  static_cast<double>(xs.size()))
                      : 0.0;
  return mean;
}

}  // namespace

MemoryConfig TimedState::occupancy() const {
  std::uint64_t a = 0, b = 0;
  for (int i = 0; i < slots(); ++i) {
    if (left_arrival[i] != kEmptySlot) a |= std::uint64_t{1} << i;
    if (right_arrival[i] != kEmptySlot) b |= std::uint64_t{1} << i;
  }
  return {slots(), a, b};
}

BandedGraph TimedState::graph(int w) const {
  const MemoryConfig c = occupancy();
  BandedGraph g = BandedGraph::from_config(c, w);
  for (int i = 0; i < slots(); ++i) {
    for (std::uint64_t nb = g.neighbours(i); nb; nb &= nb - 1) {
      const int j = std::countr_zero(nb);
      g.set_weight(i, j, std::abs(left_arrival[i] - right_arrival[j]));
    }
  }
  return g;
}

TrajectoryStreams TrajectoryStreams::for_trajectory(std::uint64_t master_seed, std::uint64_t index) {
  const std::uint64_t base = splitmix64(master_seed ^ splitmix64(index));
  return {std::mt19937_64(splitmix64(base ^ 0x61727269ULL)),
          std::mt19937_64(splitmix64(base ^ 0x63686f69ULL))};
}

TrajectoryRecord simulate_trajectory(const ExperimentParams& params, TrajectoryStreams& streams,
                                     std::span<const std::int64_t> snapshot_bins) {
  params.validate();
  if (params.strategy == Strategy::Uniform && params.m > kEnumerationMaxSlots)
    throw std::invalid_argument("strategy 0 requires m <= " + std::to_string(kEnumerationMaxSlots));
  const int m = params.m;
  const double p = params.p;

  TrajectoryRecord rec;
  rec.snapshots.reserve(snapshot_bins.size());
  std::size_t next_snapshot = 0;
  TimedState state(m);

  auto take_snapshots_before = [&](std::int64_t bin) {
    while (next_snapshot < snapshot_bins.size() && snapshot_bins[next_snapshot] < bin) {
      rec.snapshots.push_back(state.occupancy());
      ++next_snapshot;
    }
  };

  if (p <= 0.0) {
    take_snapshots_before(params.tmax + 1);
    return rec;
  }

  // any_arrival[k]: probability that at least one of k empty slots fills.
  std::vector<double> any_arrival(2 * m + 1, 0.0);
  for (int k = 1; k <= 2 * m; ++k)
    any_arrival[k] = p >= 1.0 ? 1.0 : -std::expm1(k * std::log1p(-p));
  std::vector<std::geometric_distribution<std::int64_t>> gaps;
  gaps.reserve(any_arrival.size());
  gaps.emplace_back(0.5);  // unused, k = 0 never occurs
  for (int k = 1; k <= 2 * m; ++k) gaps.emplace_back(std::min(any_arrival[k], 0.999999999999));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::int64_t*> empties;
  empties.reserve(2 * m);

  while (true) {
    empties.clear();
    for (auto& t : state.left_arrival)
      if (t == kEmptySlot) empties.push_back(&t);
    for (auto& t : state.right_arrival)
      if (t == kEmptySlot) empties.push_back(&t);
    const int k = static_cast<int>(empties.size());
    if (k == 0) throw std::logic_error("both memory arrays full after measurement");

    const std::int64_t gap = any_arrival[k] >= 1.0 ? 1 : gaps[k](streams.arrivals) + 1;
    const std::int64_t bin = state.now + gap;
    if (bin > params.tmax) break;
    take_snapshots_before(bin);
    state.now = bin;

    // Arrivals in this bin, conditioned on at least one.
    bool any = false;
    for (int r = 0; r < k; ++r) {
      const double prob = any ? p : p / any_arrival[k - r];
      if (prob >= 1.0 || unit(streams.arrivals) < prob) {
        *empties[r] = bin;
        any = true;
      }
    }

    BandedGraph g = state.graph(params.w);
    if (g.empty()) continue;

    Matching mt;
    switch (params.strategy) {
      case Strategy::Uniform: mt = uniform_random_max_matching(g, streams.choices); break;
      case Strategy::MinWeight: mt = min_weight_max_matching(g); break;
      case Strategy::MaxWeight: mt = max_weight_max_matching(g); break;
      case Strategy::Canonical: mt = canonical_matching(g); break;
    }

    for (const Edge& e : mt) {
      Connection c;
      c.bin = bin;
      c.edge = e;
      c.left_arrival = state.left_arrival[e.left];
      c.right_arrival = state.right_arrival[e.right];
      c.success = params.pbsm >= 1.0 || unit(streams.choices) < params.pbsm;
      rec.connections.push_back(c);
      state.left_arrival[e.left] = kEmptySlot;
      state.right_arrival[e.right] = kEmptySlot;
    }
  }
  state.now = params.tmax;
  take_snapshots_before(params.tmax + 1);
  return rec;
}

DeltaHistogram::DeltaHistogram(std::vector<std::int64_t> checkpoints)
    : checkpoints_(std::move(checkpoints)) {
  if (checkpoints_.empty()) throw std::invalid_argument("histogram needs at least one checkpoint");
  for (std::size_t k = 0; k < checkpoints_.size(); ++k) {
    if (checkpoints_[k] < 1 || (k > 0 && checkpoints_[k] <= checkpoints_[k - 1]))
      throw std::invalid_argument("checkpoints must be positive and strictly increasing");
  }
  buckets_.resize(checkpoints_.size());
  for (std::size_t k = 0; k < checkpoints_.size(); ++k)
    buckets_[k].assign(static_cast<std::size_t>(checkpoints_[k]) + 1, 0);
}

void DeltaHistogram::record(std::int64_t bin, std::int64_t delta) {
  const auto it = std::lower_bound(checkpoints_.begin(), checkpoints_.end(), bin);
  if (it == checkpoints_.end()) return;  // beyond the last checkpoint
  if (delta < 0 || delta > bin) throw std::invalid_argument("delta out of range for its bin");
  buckets_[static_cast<std::size_t>(it - checkpoints_.begin())][static_cast<std::size_t>(delta)] += 1;
}

void DeltaHistogram::merge(const DeltaHistogram& other) {
  if (checkpoints_.empty()) {
    *this = other;
    return;
  }
  if (other.checkpoints_ != checkpoints_) throw std::invalid_argument("histogram checkpoints differ");
  for (std::size_t k = 0; k < buckets_.size(); ++k)
    for (std::size_t d = 0; d < buckets_[k].size(); ++d) buckets_[k][d] += other.buckets_[k][d];
}

std::size_t DeltaHistogram::checkpoint_index(std::int64_t t) const {
  const auto it = std::lower_bound(checkpoints_.begin(), checkpoints_.end(), t);
  if (it == checkpoints_.end() || *it != t)
    throw std::invalid_argument("t = " + std::to_string(t) + " is not a recorded checkpoint");
  return static_cast<std::size_t>(it - checkpoints_.begin());
}

std::vector<std::uint64_t> DeltaHistogram::cumulative(std::size_t k) const {
  std::vector<std::uint64_t> out(buckets_.at(k).size(), 0);
  for (std::size_t b = 0; b <= k; ++b)
    for (std::size_t d = 0; d < buckets_[b].size(); ++d) out[d] += buckets_[b][d];
  return out;
}

std::uint64_t DeltaHistogram::total() const {
  std::uint64_t s = 0;
  for (const auto& b : buckets_)
    for (auto c : b) s += c;
  return s;
}

std::vector<std::int64_t> linear_checkpoints(std::int64_t tmax, std::int64_t step) {
  if (tmax < 1 || step < 1) throw std::invalid_argument("checkpoint spacing must be positive");
  std::vector<std::int64_t> out;
  for (std::int64_t t = step; t < tmax; t += step) out.push_back(t);
  out.push_back(tmax);
  return out;
}

void BatchStats::merge(const BatchStats& other) {
  trials += other.trials;
  attempts += other.attempts;
  deltas.merge(other.deltas);
  if (success_sum.empty()) {
    success_sum = other.success_sum;
    success_sq = other.success_sq;
    return;
  }
  for (std::size_t t = 0; t < success_sum.size(); ++t) {
    success_sum[t] += other.success_sum[t];
    success_sq[t] += other.success_sq[t];
  }
}

BatchStats Ensemble::pooled() const {
  BatchStats out;
  for (const auto& b : batches) out.merge(b);
  return out;
}

Estimate Ensemble::mean_successes(std::int64_t t) const {
  if (t < 1 || t > params.tmax) throw std::invalid_argument("bin outside simulated range");
  double n = 0.0, s = 0.0, sq = 0.0;
  for (const auto& b : batches) {
    n += static_cast<double>(b.trials);
    s += static_cast<double>(b.success_sum[t - 1]);
    sq += static_cast<double>(b.success_sq[t - 1]);
  }
  const double mean = s / n;
  const double var = n > 1 ? (sq - n * mean * mean) / (n - 1) : 0.0;
  return {mean, std::sqrt(std::max(var, 0.0) / n)};
}

int default_thread_count() {
  if (const char* env = std::getenv("QRMUX_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Ensemble simulate_ensemble(const ExperimentParams& params, const EnsembleOptions& options) {
  params.validate();
  if (params.trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::vector<std::int64_t> checkpoints =
      options.checkpoints.empty() ? std::vector<std::int64_t>{params.tmax} : options.checkpoints;
  if (checkpoints.back() > params.tmax)
    throw std::invalid_argument("checkpoint beyond tmax");

  const auto n_batches = static_cast<std::uint64_t>(
      std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::max(options.batches, 1)), 1, params.trials));
  Ensemble ens;
  ens.params = params;
  ens.batches.resize(n_batches);

  auto run_batch = [&](std::uint64_t b) {
    BatchStats& stats = ens.batches[b];
    stats.deltas = DeltaHistogram(checkpoints);
    stats.success_sum.assign(static_cast<std::size_t>(params.tmax), 0);
    stats.success_sq.assign(static_cast<std::size_t>(params.tmax), 0);
    const std::uint64_t begin = b * params.trials / n_batches;
    const std::uint64_t end = (b + 1) * params.trials / n_batches;
    for (std::uint64_t i = begin; i < end; ++i) {
      TrajectoryStreams streams = TrajectoryStreams::for_trajectory(params.seed, i);
      const TrajectoryRecord rec = simulate_trajectory(params, streams);
      stats.trials += 1;
      stats.attempts += rec.connections.size();
      std::int64_t bin = -1;
      std::uint64_t in_bin = 0;
      auto flush = [&] {
        if (bin > 0 && in_bin > 0) {
          stats.success_sum[bin - 1] += in_bin;
          stats.success_sq[bin - 1] += in_bin * in_bin;
        }
      };
      for (const Connection& c : rec.connections) {
        if (c.bin != bin) {
          flush();
          bin = c.bin;
          in_bin = 0;
        }
        if (!c.success) continue;
        ++in_bin;
        stats.deltas.record(c.bin, c.delta());
      }
      flush();
    }
  };

  const int threads = std::min<int>(options.threads > 0 ? options.threads : default_thread_count(),
                                    static_cast<int>(n_batches));
  if (threads <= 1) {
    for (std::uint64_t b = 0; b < n_batches; ++b) run_batch(b);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::uint64_t b; (b = next.fetch_add(1)) < n_batches;) run_batch(b);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return ens;
}

std::optional<double> qber_from_counts(std::span<const std::uint64_t> counts, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  double n = 0.0, surviving = 0.0;
  const double factor = std::exp(-1.0 / tau);
  double decay = 1.0;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    if ((d & 1023) == 0) decay = std::exp(-static_cast<double>(d) / tau);
    const auto c = static_cast<double>(counts[d]);
    n += c;
    surviving += c * decay;
    decay *= factor;
  }
  if (n == 0.0) return std::nullopt;
  return 2.0 / 3.0 * (1.0 - surviving / n);
}

std::optional<double> minimal_tau_from_counts(std::span<const std::uint64_t> counts, double threshold,
                                              double rel_precision) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) return std::nullopt;
  // tau -> 0 leaves only the delta = 0 pairs error free.
  const double e0 = 2.0 / 3.0 * (1.0 - static_cast<double>(counts[0]) / static_cast<double>(n));
  if (e0 <= threshold) return 0.0;

  auto ok = [&](double tau) { return *qber_from_counts(counts, tau) <= threshold; };
  double lo = 0.0, hi = 1.0;
  while (!ok(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw std::runtime_error("no finite coherence time reaches the threshold");
  }
  while (hi - lo > rel_precision * hi) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::vector<QberPoint> qber_series(const DeltaHistogram& hist, double tau) {
  std::vector<QberPoint> out;
  std::vector<std::uint64_t> running;
  for (std::size_t k = 0; k < hist.checkpoints().size(); ++k) {
    const auto counts = hist.cumulative(k);
    QberPoint pt;
    pt.t = hist.checkpoints()[k];
    for (auto c : counts) pt.connections += c;
    pt.qber = qber_from_counts(counts, tau);
    out.push_back(pt);
  }
  return out;
}

std::optional<double> minimal_tau(const DeltaHistogram& hist, std::int64_t t, double threshold) {
  return minimal_tau_from_counts(hist.cumulative(hist.checkpoint_index(t)), threshold);
}

std::optional<Estimate> minimal_tau_estimate(const Ensemble& ens, std::int64_t t, double threshold) {
  const BatchStats pooled = ens.pooled();
  const auto value = minimal_tau(pooled.deltas, t, threshold);
  if (!value) return std::nullopt;
  std::vector<double> per_batch;
  for (const auto& b : ens.batches)
    if (auto v = minimal_tau(b.deltas, t, threshold)) per_batch.push_back(*v);
  double sem = 0.0;
  mean_and_sem(per_batch, sem);
  return Estimate{*value, sem};
}

std::optional<Estimate> qber_estimate(const Ensemble& ens, std::int64_t t, double tau) {
  const BatchStats pooled = ens.pooled();
  const std::size_t k = pooled.deltas.checkpoint_index(t);
  const auto value = qber_from_counts(pooled.deltas.cumulative(k), tau);
  if (!value) return std::nullopt;
  std::vector<double> per_batch;
  for (const auto& b : ens.batches)
    if (auto v = qber_from_counts(b.deltas.cumulative(k), tau)) per_batch.push_back(*v);
  double sem = 0.0;
  mean_and_sem(per_batch, sem);
  return Estimate{*value, sem};
}

std::optional<Estimate> minimal_tau_difference(const Ensemble& a, const Ensemble& b, std::int64_t t,
                                               double threshold) {
  if (a.batches.size() != b.batches.size())
    throw std::invalid_argument("paired ensembles need the same batch count");
  const auto va = minimal_tau(a.pooled().deltas, t, threshold);
  const auto vb = minimal_tau(b.pooled().deltas, t, threshold);
  if (!va || !vb) return std::nullopt;
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.batches.size(); ++i) {
    const auto x = minimal_tau(a.batches[i].deltas, t, threshold);
    const auto y = minimal_tau(b.batches[i].deltas, t, threshold);
    if (x && y) diffs.push_back(*x - *y);
  }
  double sem = 0.0;
  mean_and_sem(diffs, sem);
  return Estimate{*va - *vb, sem};
}

std::optional<double> minimal_tau(const ExperimentParams& params, std::int64_t t_target) {
  ExperimentParams run = params;
  run.tmax = t_target;
  const Ensemble ens = simulate_ensemble(run, {{t_target}, 1, 0});
  return minimal_tau(ens.pooled().deltas, t_target);
}

}  // namespace qrmux
