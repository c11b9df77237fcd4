#include "poisclt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "poisclt/errors.hpp"

namespace poisclt {

namespace {

constexpr double kHyperboloidTol = 1e-9;

double sq(double v) { return v * v; }

void check_dim_match(const Space& space, const Point& p) {
    if (p.n != space.coord_count())
        throw InputError("point has " + std::to_string(p.n) + " coordinates, space expects " +
                         std::to_string(space.coord_count()));
}

double spatial_norm(const Point& p) {
    double s = 0.0;
    for (int i = 1; i < p.n; ++i) s += sq(p[i]);
    return std::sqrt(s);
}

double wrap(double diff, double side) { return diff - side * std::nearbyint(diff / side); }

// Circular distance from coordinate v to the arc [lo, hi] of a circle of length `side`.
double circle_distance_to_arc(double v, double lo, double hi, double side) {
    if (hi - lo >= side) return 0.0;
    double rel = v - lo;
    rel -= side * std::floor(rel / side);
    double len = hi - lo;
    if (rel <= len) return 0.0;
    return std::min(rel - len, side - rel);
}

}  // namespace

std::string to_string(SpaceKind kind) {
    switch (kind) {
        case SpaceKind::EuclideanBox: return "euclidean";
        case SpaceKind::FlatTorus: return "torus";
        case SpaceKind::HyperbolicBall: return "hyperbolic";
    }
    return "?";
}

SpaceKind space_kind_from_string(const std::string& name) {
    if (name == "euclidean" || name == "EuclideanBox") return SpaceKind::EuclideanBox;
    if (name == "torus" || name == "FlatTorus") return SpaceKind::FlatTorus;
    if (name == "hyperbolic" || name == "HyperbolicBall") return SpaceKind::HyperbolicBall;
    throw ConfigError("unknown space kind '" + name + "'");
}

Point::Point(std::initializer_list<double> coords) {
    if (coords.size() > kMaxCoords) throw InputError("too many coordinates");
    n = static_cast<int>(coords.size());
    std::copy(coords.begin(), coords.end(), x.begin());
}

Space::Space(SpaceKind kind, int dim, double extent) : kind_(kind), dim_(dim), extent_(extent) {
    if (dim < 1) throw InputError("space dimension must be >= 1");
    if (!(extent > 0.0)) throw InputError("space extent must be > 0");
    int max_dim = kind == SpaceKind::HyperbolicBall ? kMaxCoords - 1 : kMaxCoords;
    if (dim > max_dim) throw UnsupportedError("dimension " + std::to_string(dim) + " not supported");
}

Space Space::euclidean_box(int dim, double side) { return Space(SpaceKind::EuclideanBox, dim, side); }
Space Space::flat_torus(int dim, double side) { return Space(SpaceKind::FlatTorus, dim, side); }
Space Space::hyperbolic_ball(int dim, double radius) {
    return Space(SpaceKind::HyperbolicBall, dim, radius);
}

Point Space::origin() const {
    Point p;
    p.n = coord_count();
    if (is_hyperbolic()) p[0] = 1.0;
    return p;
}

Point Space::polar_point(double r, std::span<const double> direction) const {
    if (static_cast<int>(direction.size()) != dim_) throw InputError("direction has wrong dimension");
    Point p = origin();
    if (is_hyperbolic()) {
        double s = std::sinh(r);
        p[0] = std::cosh(r);
        for (int i = 0; i < dim_; ++i) p[i + 1] = s * direction[static_cast<std::size_t>(i)];
    } else {
        for (int i = 0; i < dim_; ++i) p[i] = r * direction[static_cast<std::size_t>(i)];
    }
    return p;
}

double Space::radius_of(const Point& p) const {
    check_dim_match(*this, p);
    if (is_hyperbolic()) return std::asinh(spatial_norm(p));
    if (kind_ == SpaceKind::FlatTorus) {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += sq(wrap(p[i], extent_));
        return std::sqrt(s);
    }
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += sq(p[i]);
    return std::sqrt(s);
}

bool Space::contains(const Point& p) const {
    if (p.n != coord_count()) return false;
    for (int i = 0; i < p.n; ++i)
        if (!std::isfinite(p[i])) return false;
    if (is_hyperbolic()) {
        if (p[0] < 1.0 - kHyperboloidTol) return false;
        double mink = -sq(p[0]);
        for (int i = 1; i < p.n; ++i) mink += sq(p[i]);
        // relative check: coordinates grow like e^r, so absolute 1e-9 is unattainable far out
        if (std::abs(mink + 1.0) > kHyperboloidTol * std::max(1.0, sq(p[0]))) return false;
        return std::asinh(spatial_norm(p)) <= extent_ * (1.0 + 1e-12);
    }
    double half = 0.5 * extent_;
    for (int i = 0; i < dim_; ++i)
        if (p[i] < -half || p[i] > half) return false;
    return true;
}

Point Space::to_poincare(const Point& p) const {
    if (!is_hyperbolic()) throw DomainError("poincare coordinates only exist for hyperbolic space");
    check_dim_match(*this, p);
    Point q;
    q.n = dim_;
    for (int i = 0; i < dim_; ++i) q[i] = p[i + 1] / (1.0 + p[0]);
    return q;
}

Point Space::from_poincare(const Point& q) const {
    if (!is_hyperbolic()) throw DomainError("poincare coordinates only exist for hyperbolic space");
    if (q.n != dim_) throw InputError("poincare point has wrong dimension");
    double n2 = 0.0;
    for (int i = 0; i < dim_; ++i) n2 += sq(q[i]);
    if (n2 >= 1.0) throw InputError("poincare point outside the unit ball");
    Point p = origin();
    double denom = 1.0 - n2;
    p[0] = (1.0 + n2) / denom;
    for (int i = 0; i < dim_; ++i) p[i + 1] = 2.0 * q[i] / denom;
    return p;
}

Window Window::box(std::span<const double> lo, std::span<const double> hi) {
    if (lo.size() != hi.size() || lo.empty() || lo.size() > kMaxCoords)
        throw InputError("box bounds must have matching dimension");
    Window w;
    w.kind = Kind::Box;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!(lo[i] <= hi[i])) throw InputError("box must have lo <= hi in every coordinate");
        w.lo[i] = lo[i];
        w.hi[i] = hi[i];
    }
    return w;
}

Window Window::centered_cube(int dim, double side) {
    if (dim < 1 || dim > kMaxCoords) throw InputError("bad cube dimension");
    if (!(side > 0.0)) throw InputError("cube side must be > 0");
    Window w;
    w.kind = Kind::Box;
    for (int i = 0; i < dim; ++i) {
        w.lo[static_cast<std::size_t>(i)] = -0.5 * side;
        w.hi[static_cast<std::size_t>(i)] = 0.5 * side;
    }
    return w;
}

Window Window::ball(double radius) {
    if (!(radius >= 0.0)) throw InputError("ball radius must be >= 0");
    Window w;
    w.kind = Kind::Ball;
    w.radius = radius;
    return w;
}

Window Window::dilated(const Space& space, double lambda) {
    if (!(lambda > 0.0)) throw InputError("window parameter must be > 0");
    if (space.is_hyperbolic()) return ball(lambda);
    return centered_cube(space.dim(), std::pow(lambda, 1.0 / space.dim()));
}

double unit_ball_volume(int d) {
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double distance(const Space& space, const Point& a, const Point& b) {
    check_dim_match(space, a);
    check_dim_match(space, b);
    switch (space.kind()) {
        case SpaceKind::EuclideanBox: {
            double s = 0.0;
            for (int i = 0; i < a.n; ++i) s += sq(a[i] - b[i]);
            return std::sqrt(s);
        }
        case SpaceKind::FlatTorus: {
            double s = 0.0;
            for (int i = 0; i < a.n; ++i) s += sq(wrap(a[i] - b[i], space.extent()));
            return std::sqrt(s);
        }
        case SpaceKind::HyperbolicBall: {
            // cosh d - 1 = |a-b|_Mink^2 / 2, and cosh d - 1 = 2 sinh^2(d/2)
            double m = -sq(a[0] - b[0]);
            for (int i = 1; i < a.n; ++i) m += sq(a[i] - b[i]);
            return 2.0 * std::asinh(0.5 * std::sqrt(std::max(0.0, m)));
        }
    }
    return 0.0;
}

double sinh_power_integral(int n, double r) {
    if (r <= 0.0) return 0.0;
    if (n == 0) return r;
    if (n == 1) return 2.0 * sq(std::sinh(0.5 * r));
    if (n == 2) return 0.25 * std::sinh(2.0 * r) - 0.5 * r;
    auto f = [n](double u) { return std::pow(std::sinh(u), n); };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, r, 20, 1e-13, &err);
}

double ball_volume(const Space& space, double r) {
    if (!(r >= 0.0)) throw InputError("radius must be >= 0");
    int d = space.dim();
    if (r == 0.0) return 0.0;
    if (!space.is_hyperbolic()) return unit_ball_volume(d) * std::pow(r, d);
    if (std::isinf(r)) return r;
    return d * unit_ball_volume(d) * sinh_power_integral(d - 1, r);
}

double window_volume(const Space& space, const Window& window) {
    int d = space.dim();
    switch (window.kind) {
        case Window::Kind::Whole:
            if (space.is_hyperbolic()) return ball_volume(space, space.extent());
            return std::pow(space.extent(), d);
        case Window::Kind::Box: {
            if (space.is_hyperbolic()) throw UnsupportedError("box windows in hyperbolic space");
            double v = 1.0;
            for (int i = 0; i < d; ++i) {
                auto k = static_cast<std::size_t>(i);
                double len = window.hi[k] - window.lo[k];
                if (space.kind() == SpaceKind::FlatTorus) len = std::min(len, space.extent());
                v *= len;
            }
            return v;
        }
        case Window::Kind::Ball:
            return ball_volume(space, window.radius);
    }
    return 0.0;
}

bool window_contains(const Space& space, const Window& window, const Point& p) {
    check_dim_match(space, p);
    switch (window.kind) {
        case Window::Kind::Whole: return true;
        case Window::Kind::Box:
            if (space.is_hyperbolic()) throw UnsupportedError("box windows in hyperbolic space");
            for (int i = 0; i < space.dim(); ++i) {
                auto k = static_cast<std::size_t>(i);
                if (space.kind() == SpaceKind::FlatTorus) {
                    if (circle_distance_to_arc(p[i], window.lo[k], window.hi[k], space.extent()) > 0.0)
                        return false;
                } else if (p[i] < window.lo[k] || p[i] > window.hi[k]) {
                    return false;
                }
            }
            return true;
        case Window::Kind::Ball: return space.radius_of(p) <= window.radius;
    }
    return false;
}

bool window_within(const Space& space, const Window& inner, const Window& outer) {
    if (inner.kind == Window::Kind::Whole && outer.kind == Window::Kind::Whole) return true;
    if (outer.kind == Window::Kind::Whole) {
        Window carrier = space.is_hyperbolic() ? Window::ball(space.extent())
                                               : Window::centered_cube(space.dim(), space.extent());
        return window_within(space, inner, carrier);
    }
    if (inner.kind == Window::Kind::Whole) {
        if (space.is_hyperbolic()) return outer.kind == Window::Kind::Ball && outer.radius >= space.extent();
        Window carrier = Window::centered_cube(space.dim(), space.extent());
        return window_within(space, carrier, outer);
    }
    if (inner.kind == Window::Kind::Ball && outer.kind == Window::Kind::Ball)
        return inner.radius <= outer.radius;
    if (inner.kind == Window::Kind::Box && outer.kind == Window::Kind::Box) {
        for (int i = 0; i < space.dim(); ++i) {
            auto k = static_cast<std::size_t>(i);
            if (inner.lo[k] < outer.lo[k] || inner.hi[k] > outer.hi[k]) return false;
        }
        return true;
    }
    if (inner.kind == Window::Kind::Box && outer.kind == Window::Kind::Ball) {
        double s = 0.0;
        for (int i = 0; i < space.dim(); ++i) {
            auto k = static_cast<std::size_t>(i);
            s += sq(std::max(std::abs(inner.lo[k]), std::abs(inner.hi[k])));
        }
        return std::sqrt(s) <= outer.radius;
    }
    // ball inside box
    for (int i = 0; i < space.dim(); ++i) {
        auto k = static_cast<std::size_t>(i);
        if (outer.lo[k] > -inner.radius || outer.hi[k] < inner.radius) return false;
    }
    return true;
}

double distance_to_window(const Space& space, const Point& p, const Window& window) {
    check_dim_match(space, p);
    switch (window.kind) {
        case Window::Kind::Whole: return 0.0;
        case Window::Kind::Box: {
            if (space.is_hyperbolic()) throw UnsupportedError("box windows in hyperbolic space");
            double s = 0.0;
            for (int i = 0; i < space.dim(); ++i) {
                auto k = static_cast<std::size_t>(i);
                double g = 0.0;
                if (space.kind() == SpaceKind::FlatTorus)
                    g = circle_distance_to_arc(p[i], window.lo[k], window.hi[k], space.extent());
                else
                    g = std::max({0.0, window.lo[k] - p[i], p[i] - window.hi[k]});
                s += g * g;
            }
            return std::sqrt(s);
        }
        case Window::Kind::Ball: return std::max(0.0, space.radius_of(p) - window.radius);
    }
    return 0.0;
}

std::array<double, kMaxCoords> random_direction(int d, RandomStream& rng) {
    std::array<double, kMaxCoords> u{};
    if (d == 1) {
        u[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        return u;
    }
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (int i = 0; i < d; ++i) {
            u[static_cast<std::size_t>(i)] = rng.normal();
            n2 += sq(u[static_cast<std::size_t>(i)]);
        }
    } while (n2 < 1e-300);
    double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i < d; ++i) u[static_cast<std::size_t>(i)] *= inv;
    return u;
}

HyperbolicRadialLaw::HyperbolicRadialLaw(int dim, double radius) : dim_(dim), radius_(radius) {
    if (dim < 1) throw InputError("dimension must be >= 1");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw InputError("radius must be finite and > 0");
    if (dim <= 2) {
        total_ = sinh_power_integral(dim - 1, radius);
        return;
    }
    // Cumulative integral of sinh^{d-1} on a uniform knot grid, 8-point Gauss
    // per cell (the integrand is smooth so this is at round-off level).
    static constexpr std::array<double, 4> gx = {0.1834346424956498, 0.5255324099163290,
                                                 0.7966664774136267, 0.9602898564975363};
    static constexpr std::array<double, 4> gw = {0.3626837833783620, 0.3137066458778873,
                                                 0.2223810344533745, 0.1012285362903763};
    knots_cdf_.assign(kKnots + 1, 0.0);
    double h = radius / kKnots;
    for (int k = 0; k < kKnots; ++k) {
        double mid = (k + 0.5) * h;
        double s = 0.0;
        for (std::size_t j = 0; j < gx.size(); ++j) {
            s += gw[j] * (std::pow(std::sinh(mid - 0.5 * h * gx[j]), dim - 1) +
                          std::pow(std::sinh(mid + 0.5 * h * gx[j]), dim - 1));
        }
        knots_cdf_[static_cast<std::size_t>(k) + 1] = knots_cdf_[static_cast<std::size_t>(k)] + 0.5 * h * s;
    }
    total_ = knots_cdf_.back();
}

double HyperbolicRadialLaw::tabulated_cdf(std::size_t k, double r) const {
    // cubic Hermite on [r_k, r_{k+1}] using the exact density as derivative
    double h = radius_ / kKnots;
    double a = static_cast<double>(k) * h;
    double t = (r - a) / h;
    double f0 = knots_cdf_[k], f1 = knots_cdf_[k + 1];
    double d0 = std::pow(std::sinh(a), dim_ - 1) * h;
    double d1 = std::pow(std::sinh(a + h), dim_ - 1) * h;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * d0 + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * d1;
}

double HyperbolicRadialLaw::cdf(double r) const {
    if (r <= 0.0) return 0.0;
    if (r >= radius_) return 1.0;
    if (dim_ <= 2) return sinh_power_integral(dim_ - 1, r) / total_;
    double pos = r / radius_ * kKnots;
    auto k = std::min(static_cast<std::size_t>(pos), static_cast<std::size_t>(kKnots - 1));
    return tabulated_cdf(k, r) / total_;
}

double HyperbolicRadialLaw::quantile(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return radius_;
    if (dim_ == 1) return u * radius_;
    if (dim_ == 2) {
        // cosh r - 1 = u (cosh R - 1)  ->  sinh(r/2) = sqrt(u) sinh(R/2)
        return 2.0 * std::asinh(std::sqrt(u) * std::sinh(0.5 * radius_));
    }
    double target = u * total_;
    auto it = std::upper_bound(knots_cdf_.begin(), knots_cdf_.end(), target);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - knots_cdf_.begin() - 1));
    k = std::min(k, static_cast<std::size_t>(kKnots - 1));
    double h = radius_ / kKnots;
    double lo = static_cast<double>(k) * h, hi = lo + h;
    // Hermite cubic is monotone on the cell for a positive density; bisection then Newton polish
    for (int it2 = 0; it2 < 60 && hi - lo > 1e-15 * std::max(1.0, hi); ++it2) {
        double mid = 0.5 * (lo + hi);
        if (tabulated_cdf(k, mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

const HyperbolicRadialLaw& cached_radial_law(int dim, double radius) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::unique_ptr<HyperbolicRadialLaw>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{dim, radius}];
    if (!slot) slot = std::make_unique<HyperbolicRadialLaw>(dim, radius);
    return *slot;
}

}  // namespace

std::vector<Point> sample_uniform(const Space& space, const Window& window, std::size_t n,
                                  RandomStream& rng) {
    int d = space.dim();
    std::vector<Point> out;
    if (window.kind == Window::Kind::Ball && !(window.radius > 0.0)) throw InputError("empty region");
    if (window.kind == Window::Kind::Box)
        for (int i = 0; i < d; ++i)
            if (!(window.lo[static_cast<std::size_t>(i)] < window.hi[static_cast<std::size_t>(i)]))
                throw InputError("empty region");
    if (n == 0) return out;
    out.reserve(n);
    if (space.is_hyperbolic()) {
        double radius = space.extent();
        if (window.kind == Window::Kind::Ball) radius = std::min(radius, window.radius);
        else if (window.kind == Window::Kind::Box)
            throw UnsupportedError("box windows in hyperbolic space");
        const HyperbolicRadialLaw& law = cached_radial_law(d, radius);
        for (std::size_t i = 0; i < n; ++i) {
            double r = law.quantile(rng.uniform());
            auto u = random_direction(d, rng);
            out.push_back(space.polar_point(r, std::span<const double>(u.data(), static_cast<std::size_t>(d))));
        }
        return out;
    }
    std::array<double, kMaxCoords> lo{}, hi{};
    double half = 0.5 * space.extent();
    for (int i = 0; i < d; ++i) {
        auto k = static_cast<std::size_t>(i);
        lo[k] = -half;
        hi[k] = half;
        if (window.kind == Window::Kind::Box) {
            lo[k] = window.lo[k];
            hi[k] = window.hi[k];
            if (space.kind() == SpaceKind::EuclideanBox) {
                lo[k] = std::max(lo[k], -half);
                hi[k] = std::min(hi[k], half);
            }
            if (!(lo[k] < hi[k])) throw InputError("empty region");
        } else if (window.kind == Window::Kind::Ball) {
            lo[k] = std::max(-window.radius, -half);
            hi[k] = std::min(window.radius, half);
        }
    }
    while (out.size() < n) {
        Point p;
        p.n = d;
        for (int i = 0; i < d; ++i) {
            auto k = static_cast<std::size_t>(i);
            p[i] = rng.uniform(lo[k], hi[k]);
            if (space.kind() == SpaceKind::FlatTorus) p[i] = wrap(p[i], space.extent());
        }
        if (window.kind == Window::Kind::Ball && space.radius_of(p) > window.radius) continue;
        out.push_back(p);
    }
    return out;
}

}  // namespace poisclt
