#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "poisclt/rng.hpp"

namespace poisclt {

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double intercept_se = 0.0;
    double rss = 0.0;
    std::size_t n = 0;
    /// 95% interval on the slope (Student t quantile).
    double slope_lo() const;
    double slope_hi() const;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);
/// Weighted least squares with weights w_i (inverse variances).
LinearFit fit_line_weighted(std::span<const double> x, std::span<const double> y, std::span<const double> w);

/// Two-sided Student t quantile at 97.5%.
double student_t975(std::size_t dof);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Wilson score interval for k successes in n trials, z = 1.96 by default.
Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

/// Asymptotic Kolmogorov p-value P(sqrt(n) D_n > ...), with the Stephens correction.
double kolmogorov_pvalue(double d, std::size_t n);

/// Percentile bootstrap interval of a statistic computed from resampled indices.
template <class Stat>
Interval bootstrap_interval(std::size_t n, std::size_t reps, RandomStream rng, Stat&& stat, double level = 0.95);

}  // namespace poisclt

#include <algorithm>

namespace poisclt {

template <class Stat>
Interval bootstrap_interval(std::size_t n, std::size_t reps, RandomStream rng, Stat&& stat, double level) {
    std::vector<double> vals;
    vals.reserve(reps);
    std::vector<std::size_t> idx(n);
    for (std::size_t b = 0; b < reps; ++b) {
        for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
        vals.push_back(stat(std::span<const std::size_t>(idx)));
    }
    std::sort(vals.begin(), vals.end());
    double a = 0.5 * (1.0 - level);
    auto at = [&](double q) {
        double pos = q * static_cast<double>(reps - 1);
        auto i = static_cast<std::size_t>(pos);
        double f = pos - static_cast<double>(i);
        return i + 1 < reps ? vals[i] * (1 - f) + vals[i + 1] * f : vals[i];
    };
    return {at(a), at(1.0 - a)};
}

}  // namespace poisclt
