#include "xlg/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "xlg/error.hpp"

namespace xlg::dist {

double log_normal_sf(double z) {
  if (std::isnan(z)) throw InvalidArgument("log_normal_sf: NaN");
  if (z < 0.0) return std::log1p(-0.5 * std::erfc(-z / std::numbers::sqrt2));
  if (z < 5.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  // Mills ratio R(z) = Q(z) / phi(z) by its continued fraction
  // 1 / (z + 1 / (z + 2 / (z + 3 / ...))), evaluated from the tail.
  double tail = z;
  for (int k = 300; k >= 1; --k) tail = z + k / tail;
  const double log_phi = -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
  return log_phi - std::log(tail);
}

double log_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw InvalidArgument("log_gamma_q: shape must be positive");
  if (std::isnan(x)) throw InvalidArgument("log_gamma_q: NaN");
  if (x <= 0.0) return 0.0;
  constexpr double eps = 1e-16;
  constexpr double tiny = 1e-300;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, term = 1.0 / a, sum = term;
    for (int i = 0; i < 10000; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * eps) break;
    }
    const double p = std::exp(std::log(sum) + log_prefix);
    return std::log1p(-std::min(p, 1.0));
  }
  // Modified Lentz evaluation of the continued fraction for Q.
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return std::log(h) + log_prefix;
}

double log_chi2_sf(double x, double df) {
  if (!(df > 0.0)) throw InvalidArgument("log_chi2_sf: df must be positive");
  return log_gamma_q(0.5 * df, 0.5 * x);
}

double kolmogorov_sf(double d, std::size_t n) {
  if (n == 0) throw InvalidArgument("kolmogorov_sf: empty sample");
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_statistic_uniform(std::vector<double> sample) {
  if (sample.empty()) throw InvalidArgument("ks_statistic_uniform: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = std::clamp(sample[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

}  // namespace xlg::dist
