#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "poisclt/rng.hpp"

namespace poisclt {

inline constexpr int kMaxCoords = 4;

enum class SpaceKind { EuclideanBox, FlatTorus, HyperbolicBall };

std::string to_string(SpaceKind kind);
SpaceKind space_kind_from_string(const std::string& name);

/// A location. Euclidean and torus points store d coordinates; hyperbolic
/// points store d+1 hyperboloid coordinates (x0, x1..xd) with
/// x0^2 - sum xi^2 = 1 and x0 >= 1.
struct Point {
    std::array<double, kMaxCoords> x{};
    int n = 0;

    Point() = default;
    Point(std::initializer_list<double> coords);

    double operator[](int i) const { return x[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return x[static_cast<std::size_t>(i)]; }
    bool operator==(const Point& other) const = default;
};

/// Metric measure space. EuclideanBox and FlatTorus occupy [-L/2, L/2]^d with
/// L = extent (torus: periodic identification); HyperbolicBall is the ball of
/// radius extent around the origin of the curvature -1 hyperboloid model.
class Space {
public:
    static Space euclidean_box(int dim, double side);
    static Space flat_torus(int dim, double side);
    static Space hyperbolic_ball(int dim, double radius);

    SpaceKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double extent() const { return extent_; }
    int coord_count() const { return kind_ == SpaceKind::HyperbolicBall ? dim_ + 1 : dim_; }
    bool is_hyperbolic() const { return kind_ == SpaceKind::HyperbolicBall; }

    Point origin() const;
    /// Point at geodesic distance r from the origin along the unit vector `direction` (d entries).
    Point polar_point(double r, std::span<const double> direction) const;
    /// Distance from the origin.
    double radius_of(const Point& p) const;
    /// True when p is a valid point of the carrier (inside the box / ball, on the hyperboloid).
    bool contains(const Point& p) const;
    /// Poincare-ball coordinates of a hyperbolic point (export only).
    Point to_poincare(const Point& p) const;
    /// Hyperbolic point from Poincare-ball coordinates.
    Point from_poincare(const Point& q) const;

    bool operator==(const Space& other) const = default;

private:
    Space(SpaceKind kind, int dim, double extent);
    SpaceKind kind_ = SpaceKind::EuclideanBox;
    int dim_ = 1;
    double extent_ = 1.0;
};

/// Region of a space: the whole carrier, an axis-aligned box (Euclidean or
/// torus coordinates) or a ball around the origin.
struct Window {
    enum class Kind { Whole, Box, Ball };
    Kind kind = Kind::Whole;
    std::array<double, kMaxCoords> lo{};
    std::array<double, kMaxCoords> hi{};
    double radius = 0.0;

    static Window whole() { return {}; }
    static Window box(std::span<const double> lo, std::span<const double> hi);
    /// [-side/2, side/2]^dim
    static Window centered_cube(int dim, double side);
    static Window ball(double radius);
    /// Window W_lambda of volume lambda: a centered cube in Euclidean space,
    /// the ball of hyperbolic radius lambda in hyperbolic space.
    static Window dilated(const class Space& space, double lambda);

    bool operator==(const Window& other) const = default;
};

/// Volume of the d-dimensional Euclidean unit ball.
double unit_ball_volume(int d);

double distance(const Space& space, const Point& a, const Point& b);
/// Volume of an (unclipped) ball of radius r in the model space.
double ball_volume(const Space& space, double r);
/// nu(W); Whole means the carrier.
double window_volume(const Space& space, const Window& window);
bool window_contains(const Space& space, const Window& window, const Point& p);
/// True when `inner` lies inside `outer` (checked on the defining shapes).
bool window_within(const Space& space, const Window& inner, const Window& outer);
double distance_to_window(const Space& space, const Point& p, const Window& window);
/// i.i.d. points from nu restricted to the window, normalized.
std::vector<Point> sample_uniform(const Space& space, const Window& window, std::size_t n,
                                  RandomStream& rng);
/// Uniform unit vector in R^d.
std::array<double, kMaxCoords> random_direction(int d, RandomStream& rng);

/// Radial law of the uniform distribution on a hyperbolic ball of radius R:
/// density proportional to sinh^{d-1}(r) on [0, R].
class HyperbolicRadialLaw {
public:
    HyperbolicRadialLaw(int dim, double radius);
    double cdf(double r) const;
    double quantile(double u) const;
    int dim() const { return dim_; }
    double radius() const { return radius_; }

    static constexpr int kKnots = 1 << 14;

private:
    double tabulated_cdf(std::size_t k, double r) const;
    int dim_;
    double radius_;
    std::vector<double> knots_cdf_;  // unnormalized cumulative integral at knots
    double total_ = 0.0;
};

/// Integral of sinh^{n}(u) over [0, r]; closed form for n <= 1, quadrature otherwise.
double sinh_power_integral(int n, double r);

}  // namespace poisclt
