#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "poisclt/errors.hpp"
#include "poisclt/geometry.hpp"
#include "poisclt/spatial_index.hpp"
#include "poisclt/stats.hpp"

using namespace poisclt;
using std::numbers::pi;

namespace {

std::array<double, kMaxCoords> e(int i) {
    std::array<double, kMaxCoords> u{};
    u[static_cast<std::size_t>(i)] = 1.0;
    return u;
}

std::vector<Space> all_spaces() {
    return {Space::euclidean_box(1, 10), Space::euclidean_box(2, 10), Space::euclidean_box(3, 5),
            Space::flat_torus(2, 6),     Space::flat_torus(3, 4),     Space::hyperbolic_ball(2, 4),
            Space::hyperbolic_ball(3, 3)};
}

}  // namespace

TEST_CASE("distance examples") {
    auto s = Space::euclidean_box(2, 20);
    CHECK(distance(s, Point{0, 0}, Point{3, 4}) == 5.0);
    auto h = Space::hyperbolic_ball(2, 5);
    auto u = e(0);
    Point p = h.polar_point(1.0, std::span<const double>(u.data(), 2));
    CHECK(distance(h, h.origin(), p) == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& sp : all_spaces()) {
        RandomStream r(1);
        auto pts = sample_uniform(sp, Window::whole(), 3, r);
        CHECK(distance(sp, pts[0], pts[0]) == 0.0);
    }
    CHECK_THROWS_AS(distance(s, Point{0, 0}, Point{1}), InputError);
}

TEST_CASE("torus distance wraps around") {
    auto t = Space::flat_torus(2, 10);
    CHECK(distance(t, Point{-4.5, 0}, Point{4.5, 0}) == doctest::Approx(1.0));
    CHECK(distance(t, Point{-4.9, -4.9}, Point{4.9, 4.9}) == doctest::Approx(0.2 * std::sqrt(2.0)));
}

TEST_CASE("metric axioms on random triples") {
    for (const auto& sp : all_spaces()) {
        RandomStream r(7);
        auto pts = sample_uniform(sp, Window::whole(), 3 * 10000, r);
        for (std::size_t i = 0; i < pts.size(); i += 3) {
            double ab = distance(sp, pts[i], pts[i + 1]);
            double bc = distance(sp, pts[i + 1], pts[i + 2]);
            double ac = distance(sp, pts[i], pts[i + 2]);
            REQUIRE(ab == distance(sp, pts[i + 1], pts[i]));
            REQUIRE(ac <= ab + bc + 1e-9);
            REQUIRE(ab > 0.0);
        }
    }
}

TEST_CASE("hyperboloid points satisfy the Minkowski constraint") {
    auto h = Space::hyperbolic_ball(3, 6);
    RandomStream r(3);
    for (const auto& p : sample_uniform(h, Window::whole(), 1000, r)) {
        double m = -p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3];
        REQUIRE(std::abs(m + 1.0) <= 1e-9 * std::max(1.0, p[0] * p[0]));
        REQUIRE(p[0] >= 1.0);
        REQUIRE(h.contains(p));
    }
}

TEST_CASE("ball volumes") {
    CHECK(ball_volume(Space::euclidean_box(3, 10), 1.0) == doctest::Approx(4.0 * pi / 3).epsilon(1e-14));
    for (const auto& sp : all_spaces()) CHECK(ball_volume(sp, 0.0) == 0.0);
    auto h2 = Space::hyperbolic_ball(2, 10);
    CHECK(std::abs(ball_volume(h2, 1.0) - 2 * pi * (std::cosh(1.0) - 1)) < 1e-9);
    CHECK(ball_volume(h2, 1.0) == doctest::Approx(3.41228).epsilon(1e-5));
    // d = 3: 4 pi int_0^r sinh^2 = pi (sinh 2r - 2r)
    auto h3 = Space::hyperbolic_ball(3, 10);
    for (double r : {0.3, 1.0, 2.5})
        CHECK(ball_volume(h3, r) == doctest::Approx(pi * (std::sinh(2 * r) - 2 * r)).epsilon(1e-10));
}

TEST_CASE("hyperbolic volume grows like exp((d-1) r)") {
    // brackets from the closed forms: d=2 ratio -> pi, d=3 ratio -> pi/2
    for (double r = 3.0; r <= 10.0; r += 0.5) {
        double q2 = ball_volume(Space::hyperbolic_ball(2, 20), r) / std::exp(r);
        double q3 = ball_volume(Space::hyperbolic_ball(3, 20), r) / std::exp(2 * r);
        CHECK(q2 >= 2.4);
        CHECK(q2 <= pi);
        CHECK(q3 >= 1.2);
        CHECK(q3 <= pi / 2);
    }
}

TEST_CASE("hyperbolic radial sampler matches the analytic CDF") {
    auto h = Space::hyperbolic_ball(2, 2.0);
    RandomStream r(12);
    auto pts = sample_uniform(h, Window::whole(), 100000, r);
    std::vector<double> u;
    for (const auto& p : pts) u.push_back((std::cosh(h.radius_of(p)) - 1) / (std::cosh(2.0) - 1));
    std::sort(u.begin(), u.end());
    double d = 0;
    double n = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        d = std::max({d, (static_cast<double>(i) + 1) / n - u[i], u[i] - static_cast<double>(i) / n});
    CHECK(kolmogorov_pvalue(d, u.size()) > 0.01);
}

TEST_CASE("tabulated radial law in d = 3") {
    HyperbolicRadialLaw law(3, 4.0);
    double total = sinh_power_integral(2, 4.0);
    for (double r : {0.01, 0.5, 1.7, 3.2, 3.999}) {
        CHECK(std::abs(law.cdf(r) - sinh_power_integral(2, r) / total) < 1e-8);
        CHECK(law.quantile(law.cdf(r)) == doctest::Approx(r).epsilon(1e-6));
    }
}

TEST_CASE("uniform box sampling is centred") {
    auto s = Space::euclidean_box(2, 10);
    auto w = Window::box(std::array<double, 2>{1, -3}, std::array<double, 2>{3, -1});
    RandomStream r(4);
    auto pts = sample_uniform(s, w, 100000, r);
    double mx = 0, my = 0;
    for (const auto& p : pts) {
        REQUIRE(window_contains(s, w, p));
        mx += p[0];
        my += p[1];
    }
    double sigma = 2.0 / std::sqrt(12.0) / std::sqrt(100000.0);
    CHECK(std::abs(mx / 1e5 - 2.0) < 3 * sigma);
    CHECK(std::abs(my / 1e5 + 2.0) < 3 * sigma);
    CHECK(sample_uniform(s, w, 0, r).empty());
}

TEST_CASE("distance to windows") {
    auto s = Space::euclidean_box(2, 10);
    auto box = Window::centered_cube(2, 2.0);
    CHECK(distance_to_window(s, Point{0.5, 0.5}, box) == 0.0);
    CHECK(distance_to_window(s, Point{2, 0}, box) == doctest::Approx(1.0));
    CHECK(distance_to_window(s, Point{2, 2}, box) == doctest::Approx(std::sqrt(2.0)));
    auto h = Space::hyperbolic_ball(2, 8);
    auto u = e(1);
    Point p = h.polar_point(3.0 + 1.25, std::span<const double>(u.data(), 2));
    CHECK(distance_to_window(h, p, Window::ball(3.0)) == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("window volume and dilation") {
    auto s = Space::euclidean_box(2, 100);
    CHECK(window_volume(s, Window::dilated(s, 50.0)) == doctest::Approx(50.0));
    auto t = Space::flat_torus(3, 2.0);
    CHECK(window_volume(t, Window::whole()) == doctest::Approx(8.0));
    auto h = Space::hyperbolic_ball(2, 5);
    CHECK(window_volume(h, Window::ball(1.0)) == doctest::Approx(ball_volume(h, 1.0)));
}

TEST_CASE("Poincare round trip") {
    auto h = Space::hyperbolic_ball(2, 5);
    RandomStream r(8);
    for (const auto& p : sample_uniform(h, Window::whole(), 100, r)) {
        Point q = h.from_poincare(h.to_poincare(p));
        CHECK(distance(h, p, q) < 1e-7);
    }
}

TEST_CASE("spatial index equals a brute-force scan") {
    for (const auto& sp : {Space::euclidean_box(2, 10), Space::flat_torus(2, 10), Space::flat_torus(3, 5),
                           Space::hyperbolic_ball(2, 3)}) {
        RandomStream r(21);
        for (int trial = 0; trial < 60; ++trial) {
            auto pts = sample_uniform(sp, Window::whole(), 1000, r);
            std::vector<std::int64_t> ids(pts.size());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(999 - i);
            double rad = r.uniform(0.05, 2.0);
            SpatialIndex idx(sp, pts, ids, rad);
            for (int q = 0; q < 17; ++q) {
                Point c = pts[r.below(pts.size())];
                std::vector<std::int64_t> brute;
                for (std::size_t i = 0; i < pts.size(); ++i)
                    if (distance(sp, c, pts[i]) < rad) brute.push_back(ids[i]);
                std::sort(brute.begin(), brute.end());
                REQUIRE(idx.neighbors_within(c, rad) == brute);
            }
        }
    }
}

TEST_CASE("spatial index edge cases and nearest neighbours") {
    auto sp = Space::euclidean_box(1, 10);
    SpatialIndex empty(sp, {}, {}, 1.0);
    CHECK(empty.neighbors_within(Point{0}, 5.0).empty());
    std::vector<Point> pts = {Point{0}, Point{1}, Point{3}, Point{-1}};
    SpatialIndex idx(sp, pts, {}, 0.0);
    CHECK(idx.neighbors_within(Point{0}, 0.0).empty());
    auto nn = idx.nearest(Point{0}, 2, 0);
    REQUIRE(nn.size() == 2);
    // tie at distance 1 broken by id: position 1 (id 1) before position 3 (id 3)
    CHECK(nn[0].second == 1);
    CHECK(nn[1].second == 3);
    CHECK(idx.nearest(Point{0}, 10, 0).size() == 3);
    CHECK(idx.any_within(Point{0}, 1.0, 0) == false);
    CHECK(idx.any_within(Point{0}, 1.01, 0) == true);
}
