#pragma once

#include <span>

namespace poisclt {

double normal_pdf(double x);
/// Standard normal CDF through the complementary error function.
double normal_cdf(double x);
double normal_quantile(double p);

/// sup_t |F_n(t) - Phi(t)| for the empirical CDF of the samples.
double kolmogorov_to_normal(std::span<const double> samples);
/// int |F_n(t) - Phi(t)| dt, integrated piecewise in closed form.
double wasserstein_to_normal(std::span<const double> samples);

}  // namespace poisclt
