#include "qrmux/analytic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "qrmux/matching.hpp"

namespace qrmux {

double LambdaDistribution::mean() const {
  double s = 0.0;
  for (std::size_t l = 0; l < probs.size(); ++l) s += static_cast<double>(l) * probs[l];
  return s;
}

double LambdaDistribution::total() const {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

MeasurementMap::MeasurementMap(int m, int w, TieBreak tie_break) : m_(m), w_(w) {
  if (m < 1 || m > kAnalyticMaxSlots)
    throw std::invalid_argument("measurement table supports 1 <= m <= " +
                                std::to_string(kAnalyticMaxSlots));
  if (w < 0 || w > m - 1) throw std::invalid_argument("w must lie in [0, m-1]");
  const std::uint64_t n = MemoryConfig::count(m);
  after_.resize(n);
  ell_.resize(n);
  for (std::uint64_t idx = 0; idx < n; ++idx) {
    const MemoryConfig c = MemoryConfig::from_index(m, idx);
    const BandedGraph g = BandedGraph::from_config(c, w);
    if (g.empty()) {
      after_[idx] = static_cast<std::uint32_t>(idx);
      ell_[idx] = 0;
      continue;
    }
    const Matching mt =
        tie_break == TieBreak::LexLeast ? canonical_matching(g) : lex_greatest_matching(g);
    std::uint64_t a = c.left(), b = c.right();
    for (const Edge& e : mt) {
      a &= ~(std::uint64_t{1} << e.left);
      b &= ~(std::uint64_t{1} << e.right);
    }
    after_[idx] = static_cast<std::uint32_t>(MemoryConfig(m, a, b).index());
    ell_[idx] = static_cast<std::uint8_t>(mt.size());
  }
}

void storage_evolve_in_place(std::span<double> probs, int m, double p) {
  const std::size_t n = probs.size();
  const double q = 1.0 - p;
  for (int bit = 0; bit < 2 * m; ++bit) {
    const std::size_t step = std::size_t{1} << bit;
    for (std::size_t base = 0; base < n; base += 2 * step) {
      for (std::size_t idx = base; idx < base + step; ++idx) {
        const double mass = probs[idx];
        if (mass == 0.0) continue;
        probs[idx | step] += p * mass;
        probs[idx] = q * mass;
      }
    }
  }
}

ConfigDistribution storage_evolve(const ConfigDistribution& dist, double p) {
  ConfigDistribution out = dist;
  storage_evolve_in_place(out.probs(), out.slots(), p);
  return out;
}

MeasurementOutcome measurement_evolve(const ConfigDistribution& dist, const MeasurementMap& map) {
  if (dist.slots() != map.slots())
    throw std::invalid_argument("distribution and measurement map differ in m");
  MeasurementOutcome out{ConfigDistribution(dist.slots()), {}};
  out.lambda.probs.assign(dist.slots() + 1, 0.0);
  for (std::size_t idx = 0; idx < dist.size(); ++idx) {
    const double mass = dist[idx];
    if (mass == 0.0) continue;
    out.after[map.after(idx)] += mass;
    out.lambda.probs[map.connections(idx)] += mass;
  }
  return out;
}

MeasurementOutcome measurement_evolve(const ConfigDistribution& dist, int w) {
  return measurement_evolve(dist, MeasurementMap(dist.slots(), w));
}

std::vector<double> sigma_distribution(const LambdaDistribution& lambda, double pbsm) {
  if (!(pbsm >= 0.0 && pbsm <= 1.0)) throw std::invalid_argument("pbsm must lie in [0, 1]");
  const std::size_t n = lambda.probs.size();
  std::vector<double> sigma(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double li = lambda.probs[i];
    if (li == 0.0) continue;
    double binom = 1.0;  // C(i, l)
    for (std::size_t l = 0; l <= i; ++l) {
      sigma[l] += binom * li * std::pow(pbsm, static_cast<double>(l)) *
                  std::pow(1.0 - pbsm, static_cast<double>(i - l));
      binom = binom * static_cast<double>(i - l) / static_cast<double>(l + 1);
    }
  }
  return sigma;
}

double expected_successes(const LambdaDistribution& lambda, double pbsm) {
  const auto sigma = sigma_distribution(lambda, pbsm);
  double s = 0.0;
  for (std::size_t l = 0; l < sigma.size(); ++l) s += static_cast<double>(l) * sigma[l];
  return s;
}

namespace {

const ExperimentParams& checked_analytic(const ExperimentParams& params) {
  params.validate_analytic();
  return params;
}

}  // namespace

ConfigEvolution::ConfigEvolution(const ExperimentParams& params, TieBreak tie_break)
    : params_(checked_analytic(params)),
      map_(params.m, params.w, tie_break),
      dist_(ConfigDistribution::point_mass(MemoryConfig::empty(params.m))),
      stored_(dist_) {
  lambda_.probs.assign(params.m + 1, 0.0);
  lambda_.probs[0] = 1.0;
}

const LambdaDistribution& ConfigEvolution::step() {
  stored_ = dist_;
  storage_evolve_in_place(stored_.probs(), params_.m, params_.p);
  auto outcome = measurement_evolve(stored_, map_);
  dist_ = std::move(outcome.after);
  lambda_ = std::move(outcome.lambda);
  ++t_;
  return lambda_;
}

RateSeries rate_series(const ExperimentParams& params, TieBreak tie_break) {
  ConfigEvolution evo(params, tie_break);
  RateSeries out;
  const auto n = static_cast<std::size_t>(params.tmax);
  out.expected_successes.reserve(n);
  out.instantaneous.reserve(n);
  out.cumulative.reserve(n);
  double running = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    const double succ = expected_successes(evo.step(), params.pbsm);
    const double inst = succ / params.m;
    running += inst;
    out.expected_successes.push_back(succ);
    out.instantaneous.push_back(inst);
    out.cumulative.push_back(running / static_cast<double>(t));
  }
  return out;
}

TransitionKernel TransitionKernel::from_dense(std::size_t n, std::span<const double> row_major) {
  if (n == 0 || row_major.size() != n * n)
    throw std::invalid_argument("dense kernel must be a non-empty n x n matrix");
  TransitionKernel k;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = row_major[i * n + j];
      if (v < 0.0) throw std::invalid_argument("kernel entries must be non-negative");
      if (v != 0.0) k.entries_.push_back({static_cast<std::uint32_t>(j), v});
    }
    k.row_start_.push_back(k.entries_.size());
  }
  return k;
}

double TransitionKernel::operator()(std::size_t i, std::size_t j) const {
  for (const Entry& e : row(i))
    if (e.col == j) return e.prob;
  return 0.0;
}

std::vector<double> TransitionKernel::dense() const {
  const std::size_t n = size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const Entry& e : row(i)) out[i * n + e.col] = e.prob;
  return out;
}

TransitionKernel build_transition_kernel(const ExperimentParams& params, TieBreak tie_break) {
  params.validate_analytic();
  const int m = params.m;
  const double p = params.p;
  const MeasurementMap map(m, params.w, tie_break);
  const std::uint64_t all_bits = MemoryConfig::count(m) - 1;

  // Rows keyed by configuration index, discovered breadth-first from the
  // empty configuration.
  std::map<std::uint64_t, std::map<std::uint64_t, double>> rows;
  std::vector<std::uint64_t> frontier{0};
  rows[0];
  while (!frontier.empty()) {
    std::vector<std::uint64_t> next;
    for (const std::uint64_t s : frontier) {
      auto& row = rows[s];
      const std::uint64_t empty_bits = all_bits & ~s;
      const int n_empty = std::popcount(empty_bits);
      for (std::uint64_t sub = empty_bits;; sub = (sub - 1) & empty_bits) {
        const int k = std::popcount(sub);
        const double prob = std::pow(p, k) * std::pow(1.0 - p, n_empty - k);
        if (prob != 0.0) {
          const std::uint64_t target = map.after(s | sub);
          row[target] += prob;
        }
        if (sub == 0) break;
      }
      for (const auto& [target, prob] : row) {
        (void)prob;
        if (!rows.contains(target)) {
          rows[target];
          next.push_back(target);
        }
      }
    }
    frontier = std::move(next);
  }

  TransitionKernel k;
  k.m_ = m;
  std::unordered_map<std::uint64_t, std::uint32_t> position;
  for (const auto& [state, row] : rows) {
    (void)row;
    position.emplace(state, static_cast<std::uint32_t>(k.states_.size()));
    k.states_.push_back(state);
  }
  for (const auto& [state, row] : rows) {
    (void)state;
    for (const auto& [target, prob] : row) k.entries_.push_back({position.at(target), prob});
    k.row_start_.push_back(k.entries_.size());
  }
  return k;
}

std::vector<double> steady_state_appendix(const TransitionKernel& kernel) {
  const std::size_t n = kernel.size();
  std::vector<double> K = kernel.dense();
  auto at = [&](std::size_t r, std::size_t c) -> double& { return K[r * n + c]; };

  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double pivot = 1.0 - at(k, k);
    if (std::abs(pivot) < 1e-14)
      throw DegenerateChainError("state " + std::to_string(k) +
                                 " is absorbing among the remaining states");
    const double* pivot_row = &K[k * n];
    for (std::size_t r = k + 1; r < n; ++r) {
      const double factor = at(r, k) / pivot;
      if (factor == 0.0) continue;
      double* row = &K[r * n];
      for (std::size_t x = 0; x < n; ++x) row[x] += factor * pivot_row[x];
    }
  }

  const double* last = &K[(n - 1) * n];
  const double norm = std::accumulate(last, last + n, 0.0);
  if (!(norm > 0.0)) throw DegenerateChainError("stationary vector has zero norm");
  std::vector<double> f(last, last + n);
  for (double& v : f) v /= norm;
  return f;
}

std::vector<double> steady_state_dense(const TransitionKernel& kernel) {
  const auto n = static_cast<Eigen::Index>(kernel.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (const auto& e : kernel.row(static_cast<std::size_t>(i))) A(e.col, i) -= e.prob;
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw DegenerateChainError("stationary system is singular");
  const Eigen::VectorXd f = lu.solve(rhs);
  return {f.data(), f.data() + n};
}

ConfigDistribution to_config_distribution(const TransitionKernel& kernel,
                                          std::span<const double> stationary) {
  if (kernel.slots() == 0) throw std::invalid_argument("kernel has no configuration states");
  if (stationary.size() != kernel.size())
    throw std::invalid_argument("stationary vector length differs from kernel size");
  ConfigDistribution d(kernel.slots());
  for (std::size_t i = 0; i < stationary.size(); ++i) d[kernel.states()[i]] = stationary[i];
  return d;
}

AsymptoticResult asymptotic_rate(const ExperimentParams& params) {
  const TransitionKernel kernel = build_transition_kernel(params);
  const auto f = steady_state_appendix(kernel);
  AsymptoticResult out;
  out.stationary = to_config_distribution(kernel, f);
  const ConfigDistribution stored = storage_evolve(out.stationary, params.p);
  out.lambda = measurement_evolve(stored, MeasurementMap(params.m, params.w)).lambda;
  out.expected_successes = expected_successes(out.lambda, params.pbsm);
  out.rate = out.expected_successes / params.m;
  return out;
}

}  // namespace qrmux
