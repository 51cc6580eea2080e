#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace brw {

// Standard normal CDF.
double norm_cdf(double x);

// Inverse of the standard normal CDF (Wichura's PPND16 rational
// approximation, relative error below 1e-15 away from the endpoints).
double inv_norm_cdf(double p);

// Kolmogorov distribution complement Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 lambda^2}.
double kolmogorov_q(double lambda);

// One-sample KS statistic against the standard normal, plus asymptotic p-value.
struct KsResult {
  double d = 0.0;
  double p_value = 0.0;
};
KsResult ks_test_normal(std::span<const double> sample);

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // unbiased
double covariance(std::span<const double> xs, std::span<const double> ys);
double pearson(std::span<const double> xs, std::span<const double> ys);

// Least squares y ~ a + b x.
struct LinFit {
  double a = 0.0;
  double b = 0.0;
  double max_abs_residual = 0.0;
};
LinFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace brw
