#pragma once

#include <span>
#include <string>
#include <vector>

#include "poisclt/geometry.hpp"

// Brute-force reference implementations. Nothing here uses the score,
// growth or Laguerre code paths; inputs are plain geometry.

namespace poisclt::oracle {

struct OracleReport {
    std::string instance;
    double primary = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    double discrepancy = 0.0;
    bool agree = false;

    static OracleReport make(std::string instance, double primary, double reference, double tolerance);
};

struct Kernel {
    enum class Kind { Indicator, PowerLength };
    int order = 2;
    double delta = 1.0;
    Kind kind = Kind::Indicator;
    double weight = 0.5;
    double alpha = 1.0;
};

inline constexpr std::size_t kUstatCap = 300;
inline constexpr std::size_t kGrowthCap = 500;
inline constexpr std::size_t kLaguerreCap = 300;

/// Sum over points flagged in_window of the sum over ordered tuples of
/// distinct other points of the kernel. Size cap kUstatCap.
double naive_ustat(const Space& space, const Kernel& kernel, std::span<const Point> pts,
                   std::span<const char> in_window);

struct GrowthSeed {
    Point loc;
    double time = 0.0;
    double speed = 1.0;
};

/// Acceptance flags by a plain chronological sweep; birth times must be distinct.
std::vector<char> naive_birth_growth(const Space& space, std::span<const GrowthSeed> seeds, double t0);

/// d = 1 Laguerre retention: p is kept iff its parabola |w-x_p|^2/(2t) + h_p
/// touches the lower envelope, checked at every pairwise crossing and far out.
std::vector<char> boundary_scan_1d(std::span<const double> x, std::span<const double> h, double t);

/// E[# isolated points] = intensity nu(W) exp(-intensity kappa_d rho^d).
double isolated_mean(int dim, double rho, double nu_w, double intensity = 1.0);
/// E[# pairs at distance < delta] = intensity^2 nu(W) kappa_d delta^d / 2.
double edge_mean(int dim, double delta, double nu_w, double intensity = 1.0);

/// Phi(x): power series for |x| < 3, continued fraction for the Mills ratio beyond.
double normal_cdf_reference(double x);

}  // namespace poisclt::oracle
