#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisclt/geometry.hpp"
#include "poisclt/rng.hpp"

namespace poisclt {

/// Ids at or above this value are reserved for externally added points
/// (augment, difference operators) so they never collide with sampled ones.
inline constexpr std::int64_t kExtraIdBase = std::int64_t{1} << 40;

struct MarkedPoint {
    Point loc;
    std::optional<double> time;
    double mark = 0.0;
    std::int64_t id = 0;
};

/// Time measure mu. None is the Dirac mass at 0 (space-only models, no time
/// coordinate stored); Lebesgue is dt on [0, horizon]; PowerDensity is
/// h^beta dh on (0, horizon].
struct TimeMeasure {
    enum class Kind { None, Lebesgue, PowerDensity };
    Kind kind = Kind::None;
    double horizon = 0.0;
    double beta = 0.0;

    static TimeMeasure none() { return {}; }
    static TimeMeasure lebesgue(double horizon);
    static TimeMeasure power_density(double beta, double h_max);

    double total_mass() const;
    double sample(RandomStream& rng) const;
    /// mu((-inf, s)) for the truncated measure.
    double mass_below(double s) const;
};

/// Mark law Q.
struct MarkLaw {
    enum class Kind { PointMass, ShiftedExponential, Table };
    Kind kind = Kind::PointMass;
    double value = 1.0;      ///< point mass location
    double rho_min = 0.0;    ///< shifted exponential: lower bound
    double rate = 1.0;       ///< shifted exponential: rate C
    std::vector<double> values;
    std::vector<double> cumulative;  ///< table: normalized cumulative weights

    static MarkLaw point_mass(double m);
    static MarkLaw shifted_exponential(double rho_min, double rate);
    static MarkLaw table(std::vector<double> values, std::vector<double> weights);

    double sample(RandomStream& rng) const;
    /// P(M >= r).
    double tail(double r) const;
};

struct SpaceTimeDomain {
    Space space = Space::euclidean_box(1, 1.0);
    Window window;   ///< W, the observation window
    Window carrier;  ///< X, where the process lives (W within X)
    TimeMeasure time;
    MarkLaw marks;

    bool is_space_time() const { return time.kind != TimeMeasure::Kind::None; }
    double window_volume() const;
    double carrier_volume() const;
    /// Throws InputError/ConfigError on violated invariants.
    void validate() const;
};

using DomainPtr = std::shared_ptr<const SpaceTimeDomain>;

DomainPtr make_domain(SpaceTimeDomain d);

/// Finite marked configuration, points kept sorted by id.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(DomainPtr domain) : domain_(std::move(domain)) {}
    /// Sorts by id; duplicate ids raise InputError.
    Configuration(DomainPtr domain, std::vector<MarkedPoint> points);

    const DomainPtr& domain_ptr() const { return domain_; }
    const SpaceTimeDomain& domain() const { return *domain_; }
    const Space& space() const { return domain_->space; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const MarkedPoint& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<MarkedPoint>& points() const { return points_; }
    auto begin() const { return points_.begin(); }
    auto end() const { return points_.end(); }

    /// Position of the point with this id, or -1.
    std::ptrdiff_t find(std::int64_t id) const;
    bool contains_id(std::int64_t id) const { return find(id) >= 0; }
    std::vector<Point> locations() const;
    std::vector<std::int64_t> ids() const;

private:
    DomainPtr domain_;
    std::vector<MarkedPoint> points_;
};

/// One point from the normalized nu|region x mu x Q.
MarkedPoint sample_marked_point(const SpaceTimeDomain& domain, const Window& region, std::int64_t id,
                                RandomStream& rng);

/// Poisson process with intensity nu x mu x Q restricted to `region`; ids 0..N-1.
Configuration sample_poisson(const DomainPtr& domain, const Window& region, RandomStream& rng);
/// Same on the domain's carrier.
Configuration sample_poisson(const DomainPtr& domain, RandomStream& rng);

Configuration augment(const Configuration& config, std::span<const MarkedPoint> extra);
Configuration augment(const Configuration& config, const MarkedPoint& extra);
/// Points with distance(center, loc) < r.
Configuration restrict_space(const Configuration& config, const Point& center, double r);
/// Points with time < s. Space-only domains raise DomainError.
Configuration restrict_time(const Configuration& config, double s);

class ScoreFamily;

struct MeckeResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double lhs_stderr = 0.0;
    double rhs_stderr = 0.0;
    double combined_stderr() const { return lhs_stderr + rhs_stderr; }
};

/// Monte Carlo check of E sum_{z in P cap W} xi(z, P) = int_W E xi(z, P + z) nu(dz).
/// The left side averages n_outer configurations; the right side draws
/// n_outer marked points from W and evaluates each on n_inner configurations.
MeckeResult mecke_check(const DomainPtr& domain, const ScoreFamily& score, std::size_t n_outer,
                        std::size_t n_inner, RandomStream rng);

}  // namespace poisclt
