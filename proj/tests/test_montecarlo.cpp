#include <doctest.h>

#include <cmath>
#include <map>

#include "qrmux/analytic.hpp"
#include "qrmux/montecarlo.hpp"

using namespace qrmux;

namespace {

ExperimentParams mc_params(int m, int w, double p, std::int64_t tmax, Strategy s = Strategy::MinWeight) {
  ExperimentParams prm;
  prm.m = m;
  prm.w = w;
  prm.p = p;
  prm.tmax = tmax;
  prm.strategy = s;
  return prm;
}

std::vector<std::pair<std::int64_t, int>> cardinalities(const TrajectoryRecord& rec) {
  std::vector<std::pair<std::int64_t, int>> out;
  for (const auto& c : rec.connections) {
    if (out.empty() || out.back().first != c.bin) out.emplace_back(c.bin, 0);
    out.back().second += 1;
  }
  return out;
}

}  // namespace

TEST_CASE("saturated and silent channels") {
  for (int m : {1, 3, 5}) {
    auto prm = mc_params(m, 0, 1.0, 50);
    auto streams = TrajectoryStreams::for_trajectory(1, 0);
    const auto rec = simulate_trajectory(prm, streams);
    REQUIRE(rec.connections.size() == static_cast<std::size_t>(m * 50));
    for (const auto& c : rec.connections) {
      CHECK(c.delta() == 0);
      CHECK(c.success);
    }
    prm.p = 0.0;
    streams = TrajectoryStreams::for_trajectory(1, 0);
    CHECK(simulate_trajectory(prm, streams).connections.empty());
  }
}

TEST_CASE("every connection involves a fresh photon and respects the band") {
  for (Strategy s : {Strategy::Uniform, Strategy::MinWeight, Strategy::MaxWeight, Strategy::Canonical}) {
    for (int w = 0; w < 5; ++w) {
      auto prm = mc_params(5, w, 0.05, 2000, s);
      prm.pbsm = 0.7;
      for (std::uint64_t i = 0; i < 50; ++i) {
        auto streams = TrajectoryStreams::for_trajectory(9, i);
        std::int64_t last_bin = 0;
        for (const auto& c : simulate_trajectory(prm, streams).connections) {
          CHECK(c.bin >= last_bin);
          last_bin = c.bin;
          CHECK(std::min(c.bin - c.left_arrival, c.bin - c.right_arrival) == 0);
          CHECK(c.left_arrival <= c.bin);
          CHECK(c.right_arrival <= c.bin);
          CHECK(c.delta() == c.bin - std::min(c.left_arrival, c.right_arrival));
          CHECK(std::abs(c.edge.left - c.edge.right) <= w);
        }
      }
    }
  }
}

TEST_CASE("strategy 0 needs enumerable arrays") {
  auto prm = mc_params(9, 1, 0.1, 10, Strategy::Uniform);
  auto streams = TrajectoryStreams::for_trajectory(1, 0);
  CHECK_THROWS_AS(simulate_trajectory(prm, streams), std::invalid_argument);
  prm.strategy = Strategy::MinWeight;
  prm.m = 12;
  CHECK_NOTHROW(simulate_trajectory(prm, streams));
}

TEST_CASE("strategies share per-bin connection counts without a choice of survivors") {
  // For w = 0 the matching is unique; for w = m-1 every maximum matching
  // leaves the same number of photons on each side, and the arrival draws are
  // assigned by count, so the paths coincide bin by bin.
  for (int w : {0, 4}) {
    for (std::uint64_t i = 0; i < 300; ++i) {
      std::vector<std::vector<std::pair<std::int64_t, int>>> seqs;
      for (Strategy s : {Strategy::Uniform, Strategy::MinWeight, Strategy::MaxWeight, Strategy::Canonical}) {
        auto streams = TrajectoryStreams::for_trajectory(5, i);
        seqs.push_back(cardinalities(simulate_trajectory(mc_params(5, w, 0.02, 3000, s), streams)));
      }
      for (std::size_t k = 1; k < seqs.size(); ++k) CHECK(seqs[k] == seqs[0]);
    }
  }
}

TEST_CASE("strategies share the mean connection count for intermediate ranges") {
  // Which photons survive a measurement differs between strategies, so paths
  // diverge, but the expected number of BSMs is the exact one for all of them.
  for (int w : {1, 2, 3}) {
    auto prm = mc_params(5, w, 0.02, 300);
    const auto exact = rate_series(prm).expected_successes;
    double expected_total = 0.0;
    for (double v : exact) expected_total += v;
    for (Strategy s : {Strategy::Uniform, Strategy::MinWeight, Strategy::MaxWeight, Strategy::Canonical}) {
      prm.strategy = s;
      const std::uint64_t n = 20000;
      double sum = 0.0, sq = 0.0;
      for (std::uint64_t i = 0; i < n; ++i) {
        auto streams = TrajectoryStreams::for_trajectory(13, i);
        const auto count = static_cast<double>(simulate_trajectory(prm, streams).connections.size());
        sum += count;
        sq += count * count;
      }
      const double mean = sum / n;
      const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
      INFO("w=" << w << " strategy=" << to_string(s));
      CHECK(std::abs(mean - expected_total) < 4 * se);
    }
  }
}

TEST_CASE("occupancy matches the exact distribution") {
  const std::vector<std::int64_t> bins{1, 10, 100};
  const std::uint64_t n = 200000;
  for (int m = 1; m <= 4; ++m) {
    for (int w = 0; w < m; ++w) {
      const auto prm = mc_params(m, w, 0.3, 100, Strategy::Canonical);
      std::vector<std::map<std::uint64_t, double>> freq(bins.size());
      for (std::uint64_t i = 0; i < n; ++i) {
        auto streams = TrajectoryStreams::for_trajectory(77, i);
        const auto rec = simulate_trajectory(prm, streams, bins);
        REQUIRE(rec.snapshots.size() == bins.size());
        for (std::size_t k = 0; k < bins.size(); ++k) freq[k][rec.snapshots[k].index()] += 1.0 / n;
      }
      ConfigEvolution ev(prm);
      for (std::size_t k = 0; k < bins.size(); ++k) {
        while (ev.bins_done() < bins[k]) ev.step();
        double tv = 0.0, se = 0.0;
        for (std::size_t c = 0; c < ev.current().size(); ++c) {
          const double pi = ev.current()[c];
          const double f = freq[k].count(c) ? freq[k][c] : 0.0;
          if (pi == 0.0) CHECK(f == 0.0);
          tv += 0.5 * std::abs(f - pi);
          se += 0.5 * std::sqrt(pi * (1 - pi) / n);
        }
        INFO("m=" << m << " w=" << w << " t=" << bins[k]);
        CHECK(tv < 5 * se);
      }
    }
  }
}

TEST_CASE("mean successes match the exact series") {
  auto prm = mc_params(3, 1, 0.05, 200);
  prm.pbsm = 0.6;
  prm.trials = 100000;
  prm.seed = 3;
  const auto ens = simulate_ensemble(prm, {{200}, 20, 1});
  const auto exact = rate_series(prm).expected_successes;
  for (std::int64_t t : {1, 5, 20, 100, 200}) {
    const auto est = ens.mean_successes(t);
    INFO("t=" << t);
    CHECK(std::abs(est.value - exact[t - 1]) < 4 * est.std_error);
  }
}

TEST_CASE("ensembles are reproducible and independent of batching") {
  auto prm = mc_params(4, 1, 0.01, 1500);
  prm.trials = 3000;
  const auto cps = linear_checkpoints(1500, 500);
  const auto a = simulate_ensemble(prm, {cps, 10, 1}).pooled();
  const auto b = simulate_ensemble(prm, {cps, 10, 1}).pooled();
  const auto c = simulate_ensemble(prm, {cps, 7, 3}).pooled();
  for (const auto* other : {&b, &c}) {
    CHECK(other->attempts == a.attempts);
    CHECK(other->success_sum == a.success_sum);
    CHECK(other->success_sq == a.success_sq);
    for (std::size_t k = 0; k < cps.size(); ++k) CHECK(other->deltas.cumulative(k) == a.deltas.cumulative(k));
  }
  prm.seed = 2;
  CHECK(simulate_ensemble(prm, {cps, 10, 1}).pooled().success_sum != a.success_sum);
}

TEST_CASE("histogram counts successful connections only") {
  auto prm = mc_params(3, 2, 0.05, 1000);
  prm.pbsm = 0.5;
  prm.trials = 200;
  const auto pooled = simulate_ensemble(prm, {{1000}, 4, 1}).pooled();
  std::uint64_t successes = 0;
  for (auto s : pooled.success_sum) successes += s;
  CHECK(pooled.deltas.total() == successes);
  CHECK(successes < pooled.attempts);
}

TEST_CASE("delta histogram bookkeeping") {
  DeltaHistogram h({10, 20});
  h.record(3, 1);
  h.record(10, 0);
  h.record(15, 7);
  h.record(25, 2);  // beyond the last checkpoint
  CHECK(h.total() == 3);
  CHECK(h.cumulative(0)[0] == 1);
  CHECK(h.cumulative(0)[1] == 1);
  CHECK(h.cumulative(1)[7] == 1);
  CHECK(h.checkpoint_index(20) == 1);
  CHECK_THROWS_AS(h.checkpoint_index(15), std::invalid_argument);
  CHECK_THROWS_AS(h.record(5, 6), std::invalid_argument);
  CHECK_THROWS_AS(DeltaHistogram({5, 5}), std::invalid_argument);
  CHECK(linear_checkpoints(1000, 400) == std::vector<std::int64_t>{400, 800, 1000});
}

TEST_CASE("qber from age differences") {
  std::vector<std::uint64_t> fresh{42, 0, 0};
  CHECK(*qber_from_counts(fresh, 3.0) == 0.0);
  CHECK(!qber_from_counts(std::vector<std::uint64_t>{0, 0}, 1.0));

  std::vector<std::uint64_t> single(11, 0);
  single[10] = 1;
  CHECK(*qber_from_counts(single, 10.0 / std::log(2.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(*qber_from_counts(single, 1e15) < 1e-12);

  // matches a direct sum over the elementary errors
  std::vector<std::uint64_t> counts(5000);
  for (std::size_t d = 0; d < counts.size(); ++d) counts[d] = (d * 7919) % 13;
  double num = 0.0, den = 0.0;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    num += counts[d] * elementary_qber(static_cast<double>(d), 700.0);
    den += counts[d];
  }
  CHECK(*qber_from_counts(counts, 700.0) == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("minimal coherence time") {
  CHECK(*minimal_tau_from_counts(std::vector<std::uint64_t>{10, 0, 0}) == 0.0);
  CHECK(!minimal_tau_from_counts(std::vector<std::uint64_t>{0, 0}));

  std::vector<std::uint64_t> counts(3000);
  for (std::size_t d = 0; d < counts.size(); ++d) counts[d] = 1 + (d % 5);
  const double tau = *minimal_tau_from_counts(counts);
  CHECK(*qber_from_counts(counts, tau) <= kQberThreshold);
  CHECK(*qber_from_counts(counts, tau * (1 - 1e-4)) > kQberThreshold);

  SUBCASE("saturated channel needs no coherence") {
    auto prm = mc_params(3, 0, 1.0, 100);
    prm.trials = 10;
    CHECK(*minimal_tau(prm, 100) == 0.0);
  }
}

TEST_CASE("paired strategy difference") {
  auto prm = mc_params(5, 4, 0.001, 2000);
  prm.trials = 20000;
  const auto s1 = simulate_ensemble(prm, {{2000}, 20, 1});
  prm.strategy = Strategy::MaxWeight;
  const auto s2 = simulate_ensemble(prm, {{2000}, 20, 1});
  const auto diff = minimal_tau_difference(s2, s1, 2000);
  REQUIRE(diff);
  CHECK(diff->value == doctest::Approx(minimal_tau_estimate(s2, 2000)->value -
                                       minimal_tau_estimate(s1, 2000)->value));
  CHECK(diff->value > 3 * diff->std_error);
}
