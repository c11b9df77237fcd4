#include "poisclt/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "poisclt/errors.hpp"

namespace poisclt {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw InputError("normal_quantile: p must lie in [0, 1]");
    }
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double kolmogorov_to_normal(std::span<const double> samples) {
    if (samples.empty()) throw InputError("kolmogorov_to_normal needs at least one sample");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double f = normal_cdf(x[i]);
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)});
    }
    return d;
}

namespace {

// Antiderivative of Phi vanishing at -infinity.
double psi(double t) { return t * normal_cdf(t) + normal_pdf(t); }

// int_a^b |c - Phi(t)| dt for a <= b.
double abs_gap(double c, double a, double b) {
    if (!(b > a)) return 0.0;
    auto signed_part = [&](double lo, double hi) { return c * (hi - lo) - (psi(hi) - psi(lo)); };
    double q = c <= 0.0 ? -std::numeric_limits<double>::infinity()
               : c >= 1.0 ? std::numeric_limits<double>::infinity()
                          : normal_quantile(c);
    if (q <= a || q >= b) return std::abs(signed_part(a, b));
    return std::abs(signed_part(a, q)) + std::abs(signed_part(q, b));
}

}  // namespace

double wasserstein_to_normal(std::span<const double> samples) {
    if (samples.size() < 2) throw InputError("wasserstein_to_normal needs at least two samples");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double total = psi(x.front()) + psi(-x.back());
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        total += abs_gap(static_cast<double>(i + 1) / n, x[i], x[i + 1]);
    return total;
}

}  // namespace poisclt
