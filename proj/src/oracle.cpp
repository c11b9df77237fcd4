#include "poisclt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "poisclt/errors.hpp"

namespace poisclt::oracle {

OracleReport OracleReport::make(std::string instance, double primary, double reference, double tolerance) {
    OracleReport r;
    r.instance = std::move(instance);
    r.primary = primary;
    r.reference = reference;
    r.tolerance = tolerance;
    r.discrepancy = std::abs(primary - reference);
    r.agree = r.discrepancy <= tolerance;
    return r;
}

double naive_ustat(const Space& space, const Kernel& kernel, std::span<const Point> pts,
                   std::span<const char> in_window) {
    const std::size_t n = pts.size();
    if (n > kUstatCap) throw InputError("naive_ustat: too many points");
    if (in_window.size() != n) throw InputError("naive_ustat: window flags do not match the points");
    if (kernel.order < 2 || kernel.order > 4) throw InputError("naive_ustat: order must be 2..4");
    const int k = kernel.order;

    auto value = [&](const std::vector<std::size_t>& t) {
        double len = 0.0;
        for (std::size_t a = 0; a < t.size(); ++a)
            for (std::size_t b = a + 1; b < t.size(); ++b) {
                double d = distance(space, pts[t[a]], pts[t[b]]);
                if (!(d < kernel.delta)) return 0.0;
                len += d;
            }
        return kernel.kind == Kernel::Kind::Indicator ? kernel.weight : kernel.weight * std::pow(len, kernel.alpha);
    };

    double total = 0.0;
    std::vector<std::size_t> t(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        if (!in_window[i]) continue;
        t[0] = i;
        // odometer over ordered (k-1)-tuples of indices, skipping repeats
        std::vector<std::size_t> c(static_cast<std::size_t>(k - 1), 0);
        while (true) {
            bool distinct = true;
            for (int a = 0; a < k - 1 && distinct; ++a) {
                if (c[static_cast<std::size_t>(a)] == i) distinct = false;
                for (int b = 0; b < a && distinct; ++b)
                    if (c[static_cast<std::size_t>(a)] == c[static_cast<std::size_t>(b)]) distinct = false;
            }
            if (distinct) {
                for (int a = 0; a < k - 1; ++a) t[static_cast<std::size_t>(a) + 1] = c[static_cast<std::size_t>(a)];
                total += value(t);
            }
            int pos = k - 2;
            while (pos >= 0 && ++c[static_cast<std::size_t>(pos)] == n) c[static_cast<std::size_t>(pos--)] = 0;
            if (pos < 0) break;
        }
    }
    return total;
}

std::vector<char> naive_birth_growth(const Space& space, std::span<const GrowthSeed> seeds, double t0) {
    const std::size_t n = seeds.size();
    if (n > kGrowthCap) throw InputError("naive_birth_growth: too many seeds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return seeds[a].time < seeds[b].time; });
    for (std::size_t i = 1; i < n; ++i)
        if (seeds[order[i]].time == seeds[order[i - 1]].time)
            throw InputError("naive_birth_growth: birth times must be distinct");

    std::vector<char> accepted(n, 0);
    std::vector<std::size_t> alive;
    for (std::size_t j : order) {
        if (seeds[j].time > t0) break;
        bool covered = false;
        for (std::size_t i : alive) {
            double reach = (seeds[j].time - seeds[i].time) * seeds[i].speed;
            if (distance(space, seeds[i].loc, seeds[j].loc) < reach) {
                covered = true;
                break;
            }
        }
        if (!covered) {
            accepted[j] = 1;
            alive.push_back(j);
        }
    }
    return accepted;
}

std::vector<char> boundary_scan_1d(std::span<const double> x, std::span<const double> h, double t) {
    const std::size_t n = x.size();
    if (n > kLaguerreCap) throw InputError("boundary_scan_1d: too many points");
    if (h.size() != n) throw InputError("boundary_scan_1d: weights do not match the points");
    if (!(t > 0.0)) throw InputError("boundary_scan_1d: t must be > 0");
    auto f = [&](std::size_t p, double w) { return (w - x[p]) * (w - x[p]) / (2.0 * t) + h[p]; };

    double span = 1.0;
    for (std::size_t i = 0; i < n; ++i) span = std::max(span, std::abs(x[i]) + std::abs(h[i]) * t);
    std::vector<char> keep(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<double> cand = {x[p], -1e3 * span, 1e3 * span};
        for (std::size_t z = 0; z < n; ++z) {
            if (z == p || x[z] == x[p]) continue;
            // f_p(w) = f_z(w) is linear in w
            double w = (x[z] * x[z] - x[p] * x[p] + 2.0 * t * (h[z] - h[p])) / (2.0 * (x[z] - x[p]));
            cand.push_back(w);
        }
        for (double w : cand) {
            double fp = f(p, w);
            double lowest = std::numeric_limits<double>::infinity();
            for (std::size_t z = 0; z < n; ++z)
                if (z != p) lowest = std::min(lowest, f(z, w));
            if (fp <= lowest + 1e-9 * std::max(1.0, std::abs(lowest))) {
                keep[p] = 1;
                break;
            }
        }
    }
    return keep;
}

double isolated_mean(int dim, double rho, double nu_w, double intensity) {
    return intensity * nu_w * std::exp(-intensity * unit_ball_volume(dim) * std::pow(rho, dim));
}

double edge_mean(int dim, double delta, double nu_w, double intensity) {
    return 0.5 * intensity * intensity * nu_w * unit_ball_volume(dim) * std::pow(delta, dim);
}

double normal_cdf_reference(double x) {
    if (std::isnan(x)) return x;
    const double inv_sqrt_2pi = 0.398942280401432677939946059934;
    double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
    double ax = std::abs(x);
    if (ax < 3.0) {
        // Phi(x) = 1/2 + pdf(x) * sum x^{2n+1} / (2n+1)!!
        double term = x, sum = x, x2 = x * x;
        for (int k = 1; k < 500; ++k) {
            term *= x2 / (2.0 * k + 1.0);
            double next = sum + term;
            if (next == sum) break;
            sum = next;
        }
        return 0.5 + pdf * sum;
    }
    if (ax > 40.0) return x > 0 ? 1.0 : 0.0;
    // Mills ratio R = 1/(x+ 1/(x+ 2/(x+ 3/(x+ ...)))), modified Lentz.
    const double tiny = 1e-300;
    double fval = ax, c = ax, d = 0.0;
    for (int k = 1; k < 5000; ++k) {
        double a = k;
        d = ax + a * d;
        if (d == 0.0) d = tiny;
        c = ax + a / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        double delta = c * d;
        fval *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    double tail = pdf / fval;
    return x > 0 ? 1.0 - tail : tail;
}

}  // namespace poisclt::oracle
