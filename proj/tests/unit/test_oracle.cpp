#include <cmath>

#include "doctest.h"
#include "poisclt/errors.hpp"
#include "poisclt/oracle.hpp"

using namespace poisclt;
using namespace poisclt::oracle;

TEST_CASE("reference normal CDF") {
    CHECK(normal_cdf_reference(0.0) == 0.5);
    CHECK(std::abs(normal_cdf_reference(1.96) - 0.9750021048517795) <= 1e-15);
    for (double x = 0.0; x <= 8.0; x += 0.125)
        CHECK(std::abs(normal_cdf_reference(-x) - (1.0 - normal_cdf_reference(x))) <= 1e-15);
    double prev = 0.0;
    for (double x = -9.0; x <= 9.0; x += 0.01) {
        double v = normal_cdf_reference(x);
        REQUIRE(v >= prev);
        prev = v;
    }
    // continued-fraction branch against the series branch near the switch
    CHECK(normal_cdf_reference(3.0) == doctest::Approx(0.9986501019683699).epsilon(1e-15));
    CHECK(normal_cdf_reference(-5.0) == doctest::Approx(2.866515718791939e-07).epsilon(1e-13));
}

TEST_CASE("closed-form means") {
    CHECK(isolated_mean(2, 1e-9, 100.0) == doctest::Approx(100.0));
    CHECK(isolated_mean(2, 0.3, 100.0) == doctest::Approx(100 * std::exp(-M_PI * 0.09)));
    CHECK(std::abs(isolated_mean(2, 0.3, 100.0) - 75.36) < 0.02);
    CHECK(edge_mean(2, 0.0, 100.0) == 0.0);
    CHECK(edge_mean(2, 0.2, 100.0) == doctest::Approx(50 * M_PI * 0.04));
}

TEST_CASE("naive U-statistic") {
    auto sp = Space::euclidean_box(2, 10);
    Kernel k{2, 1.0, Kernel::Kind::Indicator, 0.5};
    CHECK(naive_ustat(sp, k, {}, {}) == 0.0);
    std::vector<Point> pts = {Point{0, 0}, Point{0.5, 0}};
    std::vector<char> in = {1, 1};
    CHECK(naive_ustat(sp, k, pts, in) == 1.0);
    std::vector<Point> many(301, Point{0, 0});
    std::vector<char> flags(301, 1);
    CHECK_THROWS_AS(naive_ustat(sp, k, many, flags), InputError);
}

TEST_CASE("naive birth-growth") {
    auto sp = Space::euclidean_box(1, 10);
    std::vector<GrowthSeed> one = {{Point{0}, 2.0, 1.0}};
    CHECK(naive_birth_growth(sp, one, INFINITY) == std::vector<char>{1});
    std::vector<GrowthSeed> two = {{Point{0}, 0.0, 1.0}, {Point{0.5}, 1.0, 1.0}};
    CHECK(naive_birth_growth(sp, two, INFINITY) == std::vector<char>{1, 0});
    std::vector<GrowthSeed> tie = {{Point{0}, 1.0, 1.0}, {Point{3}, 1.0, 1.0}};
    CHECK_THROWS_AS(naive_birth_growth(sp, tie, INFINITY), InputError);
    std::vector<GrowthSeed> big(501, GrowthSeed{Point{0}, 0.0, 1.0});
    CHECK_THROWS_AS(naive_birth_growth(sp, big, INFINITY), InputError);
}

TEST_CASE("boundary scan") {
    CHECK(boundary_scan_1d(std::vector<double>{0.0}, std::vector<double>{1.0}, 0.5) == std::vector<char>{1});
    CHECK(boundary_scan_1d(std::vector<double>{0.0, 0.0}, std::vector<double>{5.0, 0.0}, 0.5) ==
          std::vector<char>{0, 1});
    CHECK(boundary_scan_1d(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 0.0}, 0.5) ==
          std::vector<char>{1, 1});
}

TEST_CASE("reports") {
    auto a = OracleReport::make("x", 1.0, 1.0 + 1e-10, 1e-9);
    CHECK(a.agree);
    auto b = OracleReport::make("x", 1.0, 1.1, 1e-9);
    CHECK_FALSE(b.agree);
    CHECK(b.discrepancy == doctest::Approx(0.1));
}
