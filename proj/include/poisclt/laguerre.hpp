#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "poisclt/process.hpp"
#include "poisclt/scores.hpp"

namespace poisclt {

struct WeightedPoint {
    Point x;
    double h = 0.0;
    std::int64_t id = 0;
};

struct LaguerreConfig {
    double t = 0.5;
    double beta = 0.0;
    int dim = 1;
    double margin = 0.0;
    double h_max = 1.0;
    std::uint64_t lp_seed = 0x1a6e77e;

    void validate() const;
};

/// Feasibility slack used by every retention test.
inline constexpr double kLaguerreTol = 1e-9;

/// 1 iff the closed Laguerre cell of p against chi is nonempty:
/// exists w with (z-x).w <= (|z|^2-|x|^2)/2 + t(h_z-h) for every z in chi.
bool is_retained(const WeightedPoint& p, std::span<const WeightedPoint> chi, const LaguerreConfig& cfg);

/// Short-range variant: constraints only from z with |z-x| < r, and w restricted
/// to the open ball |w-x| < r. r = infinity gives is_retained.
bool is_retained_within(const WeightedPoint& p, std::span<const WeightedPoint> chi, double r,
                        const LaguerreConfig& cfg);

/// Retention flags of every point of chi against the others.
std::vector<char> retained_flags(std::span<const WeightedPoint> chi, const LaguerreConfig& cfg);

/// N = number of retained points with location in the window.
std::size_t count_thinned(std::span<const WeightedPoint> chi, const Space& space, const Window& window,
                          const LaguerreConfig& cfg);

std::vector<WeightedPoint> weighted_points(const Configuration& chi);

/// Domain for the thinning model: Euclidean box W_lambda plus margin, weights h^beta dh on (0, h_max].
DomainPtr laguerre_domain(const LaguerreConfig& cfg, double lambda);

class LaguerreScore final : public ScoreFamily {
public:
    explicit LaguerreScore(LaguerreConfig cfg);
    std::string name() const override { return "laguerre"; }
    std::vector<double> evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const override;
    /// Cylinder variant: competitors and w both within distance r of p.
    double evaluate_space_restricted(const MarkedPoint& p, const Configuration& chi, double r) const override;
    std::optional<double> moment_hint() const override { return 1.0; }
    std::optional<double> bound() const override { return 1.0; }
    const LaguerreConfig& config() const { return cfg_; }

private:
    LaguerreConfig cfg_;
};

}  // namespace poisclt
