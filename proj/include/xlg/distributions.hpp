#pragma once

#include <cstddef>
#include <vector>

namespace xlg::dist {

/// Natural log of the standard normal upper tail P(Z > z). Finite for every
/// finite z, including far tails where the probability underflows.
double log_normal_sf(double z);

/// Natural log of the chi-square upper tail with `df` degrees of freedom.
double log_chi2_sf(double x, double df);

/// Natural log of the regularized upper incomplete gamma Q(a, x).
double log_gamma_q(double a, double x);

/// Asymptotic Kolmogorov p-value for the one-sample KS statistic `d` on `n`
/// observations.
double kolmogorov_sf(double d, std::size_t n);

/// One-sample KS statistic against Uniform(0, 1).
double ks_statistic_uniform(std::vector<double> sample);

}  // namespace xlg::dist
