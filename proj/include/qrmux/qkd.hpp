#pragma once

#include <cstdint>

namespace qrmux {

/// QBER below which the asymptotic BB84 secret fraction is positive.
inline constexpr double kQberThreshold = 0.11;

/// Shannon binary entropy in bits; h(0) = h(1) = 0.
double binary_entropy(double x);

/// BB84 asymptotic secret fraction for symmetric errors, 1 - 2 h(e).
/// The signed value is returned; callers clamp.
double secret_fraction(double e);

/// QBER of a swapped pair whose older memory decohered for `delta` bins
/// under depolarisation exp(-delta / tau).
double elementary_qber(double delta, double tau);

/// Fidelity after swapping two depolarised pairs of fidelities f0 and f1.
double swap_fidelity(double f0, double f1);

/// K = R * max(0, r_inf(e)).
double secret_key_rate(double rate, double e);

struct KeyRateResult {
  std::int64_t t = 0;
  double repeater_rate = 0.0;
  double qber = 0.0;
  double secret_fraction = 0.0;
  double key_rate = 0.0;
  double key_rate_hz = 0.0;
};

KeyRateResult make_key_rate(std::int64_t t, double repeater_rate, double qber, int m, double nu);

}  // namespace qrmux
