#include "qrmux/qkd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qrmux {

double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("binary entropy needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double secret_fraction(double e) {
  if (!(e >= 0.0 && e <= 0.5)) throw std::invalid_argument("QBER must lie in [0, 0.5]");
  return 1.0 - 2.0 * binary_entropy(e);
}

double elementary_qber(double delta, double tau) {
  if (delta < 0.0) throw std::invalid_argument("delta must be non-negative");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  return 2.0 / 3.0 * (1.0 - std::exp(-delta / tau));
}

double swap_fidelity(double f0, double f1) {
  auto in_range = [](double f) { return f >= 0.25 && f <= 1.0; };
  if (!in_range(f0) || !in_range(f1)) throw std::invalid_argument("fidelities must lie in [1/4, 1]");
  return (1.0 - f1 - f0 + 4.0 * f0 * f1) / 3.0;
}

double secret_key_rate(double rate, double e) {
  if (rate < 0.0) throw std::invalid_argument("rate must be non-negative");
  return rate * std::max(0.0, secret_fraction(e));
}

KeyRateResult make_key_rate(std::int64_t t, double repeater_rate, double qber, int m, double nu) {
  KeyRateResult r;
  r.t = t;
  r.repeater_rate = repeater_rate;
  r.qber = qber;
  // Past e = 1/2 the fraction formula is outside its domain; no key either way.
  r.secret_fraction = 1.0 - 2.0 * binary_entropy(qber);
  r.key_rate = qber <= 0.5 ? secret_key_rate(repeater_rate, qber) : 0.0;
  r.key_rate_hz = r.key_rate * nu * m;
  return r;
}

}  // namespace qrmux
