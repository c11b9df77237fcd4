#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "poisclt/errors.hpp"
#include "poisclt/parallel.hpp"
#include "poisclt/process.hpp"
#include "poisclt/scores.hpp"

using namespace poisclt;

namespace {

DomainPtr torus(double side, int dim = 2) {
    SpaceTimeDomain d;
    d.space = Space::flat_torus(dim, side);
    return make_domain(d);
}

DomainPtr space_time(double side, double horizon) {
    SpaceTimeDomain d;
    d.space = Space::euclidean_box(2, side);
    d.time = TimeMeasure::lebesgue(horizon);
    d.marks = MarkLaw::shifted_exponential(0.1, 2.0);
    return make_domain(d);
}

}  // namespace

TEST_CASE("domain validation") {
    SpaceTimeDomain d;
    d.space = Space::euclidean_box(2, 4);
    d.window = Window::centered_cube(2, 6);
    CHECK_THROWS(make_domain(d));
    d.window = Window::centered_cube(2, 2);
    CHECK_THROWS(TimeMeasure::power_density(-1.5, 1.0));
    d.time = TimeMeasure::power_density(-0.5, 1.0);
    CHECK_NOTHROW(make_domain(d));
}

TEST_CASE("Poisson counts have the right mean") {
    auto dom = torus(10);
    RandomStream r(1);
    double s = 0;
    for (std::uint32_t i = 0; i < 10000; ++i) {
        auto rr = r.substream(i);
        s += static_cast<double>(sample_poisson(dom, rr).size());
    }
    CHECK(std::abs(s / 1e4 - 100.0) < 0.3);
}

TEST_CASE("empty region and point-mass marks") {
    SpaceTimeDomain h;
    h.space = Space::hyperbolic_ball(2, 3);
    RandomStream r(2);
    CHECK(sample_poisson(make_domain(h), Window::ball(0.0), r).empty());
    CHECK_THROWS_AS(sample_uniform(h.space, Window::ball(0.0), 1, r), InputError);
    SpaceTimeDomain d;
    d.space = Space::euclidean_box(2, 4);
    d.marks = MarkLaw::point_mass(2.5);
    auto dom = make_domain(d);
    auto full = sample_poisson(dom, r);
    for (const auto& p : full) {
        CHECK(p.mark == 2.5);
        CHECK(!p.time.has_value());
    }
}

TEST_CASE("space-time points carry times inside the horizon and marks above rho_min") {
    auto dom = space_time(5, 3.0);
    RandomStream r(3);
    auto chi = sample_poisson(dom, r);
    REQUIRE(!chi.empty());
    for (const auto& p : chi) {
        REQUIRE(p.time.has_value());
        CHECK(*p.time >= 0.0);
        CHECK(*p.time <= 3.0);
        CHECK(p.mark >= 0.1);
    }
}

TEST_CASE("configurations are sorted, ids unique") {
    auto dom = torus(3);
    MarkedPoint a{Point{0, 0}, std::nullopt, 1.0, 5}, b{Point{1, 1}, std::nullopt, 1.0, 2};
    Configuration c(dom, {a, b});
    CHECK(c[0].id == 2);
    CHECK(c.find(5) == 1);
    CHECK(c.find(7) == -1);
    CHECK_THROWS_AS(Configuration(dom, {a, a}), InputError);
}

TEST_CASE("augment") {
    auto dom = torus(5);
    RandomStream r(4);
    auto chi = sample_poisson(dom, r);
    CHECK(augment(chi, std::span<const MarkedPoint>{}).points().size() == chi.size());
    std::vector<MarkedPoint> extra;
    for (int k = 0; k < 6; ++k) extra.push_back(sample_marked_point(*dom, dom->window, kExtraIdBase + k, r));
    auto once = augment(chi, extra);
    CHECK(once.size() == chi.size() + 6);
    auto twice = augment(augment(chi, std::span<const MarkedPoint>(extra.data(), 2)),
                         std::span<const MarkedPoint>(extra.data() + 2, 4));
    CHECK(twice.ids() == once.ids());
    CHECK(twice.locations() == once.locations());
    CHECK(chi.size() + 6 == once.size());  // value semantics
}

TEST_CASE("restrict_space") {
    auto dom = torus(6);
    RandomStream r(5);
    for (int t = 0; t < 50; ++t) {
        auto chi = sample_poisson(dom, r);
        Point c{r.uniform(-3, 3), r.uniform(-3, 3)};
        double rad = r.uniform(0, 3);
        auto sub = restrict_space(chi, c, rad);
        std::vector<std::int64_t> brute;
        for (const auto& p : chi)
            if (distance(dom->space, c, p.loc) < rad) brute.push_back(p.id);
        CHECK(sub.ids() == brute);
        double r2 = r.uniform(0, 3);
        CHECK(restrict_space(sub, c, r2).ids() == restrict_space(chi, c, std::min(rad, r2)).ids());
    }
    auto chi = sample_poisson(dom, r);
    CHECK(restrict_space(chi, Point{0, 0}, INFINITY).size() == chi.size());
    CHECK(restrict_space(chi, Point{0, 0}, 0.0).empty());
}

TEST_CASE("restrict_time") {
    auto dom = space_time(5, 4.0);
    RandomStream r(6);
    auto chi = sample_poisson(dom, r);
    CHECK(restrict_time(chi, -INFINITY).empty());
    CHECK(restrict_time(chi, INFINITY).size() == chi.size());
    auto sub = restrict_time(chi, 2.0);
    std::size_t k = 0;
    for (const auto& p : chi) k += *p.time < 2.0;
    CHECK(sub.size() == k);
    for (const auto& p : sub) CHECK(*p.time < 2.0);
    RandomStream r2(7);
    CHECK_THROWS_AS(restrict_time(sample_poisson(torus(3), r2), 1.0), DomainError);
}

TEST_CASE("sampling is bit-identical regardless of threads") {
    auto dom = torus(8);
    auto run = [&](unsigned th) {
        set_thread_count(th);
        std::vector<std::vector<Point>> out(40);
        parallel_for(40, [&](std::size_t i) {
            RandomStream r = RandomStream(9).substream(static_cast<std::uint32_t>(i));
            out[i] = sample_poisson(dom, r).locations();
        });
        return out;
    };
    auto a = run(1), b = run(4);
    set_thread_count(0);
    CHECK(a == b);
}

TEST_CASE("Mecke identity for simple scores") {
    auto dom = torus(std::sqrt(50.0));
    ConstantScore one(1.0);
    auto m = mecke_check(dom, one, 4000, 1, RandomStream(10));
    CHECK(m.rhs == doctest::Approx(50.0));
    CHECK(std::abs(m.lhs - 50.0) <= 4 * m.combined_stderr() + 1e-12);

    IsolatedScore iso(0.3);
    auto mi = mecke_check(dom, iso, 20000, 1, RandomStream(11));
    CHECK(std::abs(mi.lhs - mi.rhs) <= 4 * mi.combined_stderr());
    double expect = 50.0 * std::exp(-M_PI * 0.09);
    CHECK(std::abs(mi.lhs - expect) <= 4 * mi.lhs_stderr);
}
