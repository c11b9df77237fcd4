#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "poisclt/errors.hpp"
#include "poisclt/growth.hpp"
#include "poisclt/oracle.hpp"

using namespace poisclt;

namespace {

std::vector<Seed> random_seeds(const Space& sp, std::size_t n, RandomStream& r) {
    auto pts = sample_uniform(sp, Window::whole(), n, r);
    std::vector<Seed> s;
    for (std::size_t i = 0; i < n; ++i)
        s.push_back(Seed{pts[i], r.uniform(0, 5), 0.1 + r.exponential(2.0), static_cast<std::int64_t>(i)});
    return s;
}

std::vector<char> via_oracle(const Space& sp, const std::vector<Seed>& s, double t0) {
    std::vector<oracle::GrowthSeed> g;
    for (const auto& x : s) g.push_back({x.loc, x.time, x.speed});
    return oracle::naive_birth_growth(sp, g, t0);
}

}  // namespace

TEST_CASE("single seed is accepted") {
    auto sp = Space::euclidean_box(2, 10);
    std::vector<Seed> s = {Seed{Point{1, 1}, 3.0, 0.5, 0}};
    auto acc = simulate_acceptance(sp, s);
    CHECK(acc.accepted[0] == 1);
    CHECK(acc.count == 1);
}

TEST_CASE("covered seed is rejected, uncovered one accepted") {
    auto sp = Space::euclidean_box(2, 10);
    std::vector<Seed> s = {Seed{Point{0, 0}, 0.0, 1.0, 0}, Seed{Point{1, 0}, 2.0, 1.0, 1},
                           Seed{Point{3, 0}, 2.0 + 1e-3, 1.0, 2}};
    auto acc = simulate_acceptance(sp, s);
    CHECK(acc.accepted == std::vector<char>{1, 0, 1});
    CHECK(simulate_acceptance(sp, s, 1.0).accepted == std::vector<char>{1, 0, 0});
}

TEST_CASE("negative times are rejected") {
    auto sp = Space::euclidean_box(1, 10);
    std::vector<Seed> s = {Seed{Point{0}, -1.0, 1.0, 0}};
    CHECK_THROWS_AS(simulate_acceptance(sp, s), InputError);
}

TEST_CASE("sweep matches the naive oracle") {
    RandomStream r(3);
    for (const auto& sp : {Space::euclidean_box(2, 6), Space::flat_torus(2, 6), Space::hyperbolic_ball(2, 2.5)}) {
        for (int trial = 0; trial < 100; ++trial) {
            auto seeds = random_seeds(sp, 1 + r.below(200), r);
            double t0 = trial % 3 == 0 ? 2.5 : INFINITY;
            auto acc = simulate_acceptance(sp, seeds, t0);
            REQUIRE(acc.accepted == via_oracle(sp, seeds, t0));
            REQUIRE(verify_acceptance(sp, seeds, acc.accepted, t0));
        }
    }
}

TEST_CASE("acceptance does not depend on input order") {
    auto sp = Space::flat_torus(2, 5);
    RandomStream r(4);
    auto seeds = random_seeds(sp, 150, r);
    auto base = simulate_acceptance(sp, seeds).accepted;
    for (int k = 0; k < 10; ++k) {
        std::vector<std::size_t> perm(seeds.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), r);
        std::vector<Seed> shuffled;
        for (auto i : perm) shuffled.push_back(seeds[i]);
        auto acc = simulate_acceptance(sp, shuffled).accepted;
        for (std::size_t i = 0; i < perm.size(); ++i) CHECK(acc[i] == base[perm[i]]);
    }
}

TEST_CASE("ties are broken deterministically") {
    std::vector<Seed> s = {Seed{Point{0}, 1.0, 1.0, 4}, Seed{Point{5}, 1.0, 1.0, 2}};
    std::size_t ties = 0;
    auto t = effective_times(s, &ties);
    CHECK(ties == 1);
    CHECK(t[1] < t[0]);
}

TEST_CASE("score form") {
    SpaceTimeDomain d;
    d.space = Space::euclidean_box(2, 10);
    d.time = TimeMeasure::lebesgue(5.0);
    d.marks = MarkLaw::shifted_exponential(0.1, 1.0);
    auto dom = make_domain(d);
    BirthGrowthScore score(BirthGrowthConfig::make(0.1, 1.0));
    Configuration chi(dom, {MarkedPoint{Point{0, 0}, 1.0, 1.0, 0}, MarkedPoint{Point{4, 4}, 3.0, 0.5, 1}});
    MarkedPoint early{Point{0.1, 0}, 0.5, 1.0, kExtraIdBase};
    CHECK(score.evaluate(early, chi) == 1.0);
    CHECK(score.evaluate_time_restricted(early, chi, 0.5) == 0.0);
    MarkedPoint late{Point{0.1, 0}, 2.0, 1.0, kExtraIdBase};
    CHECK(score.evaluate(late, chi) == 0.0);
}

TEST_CASE("time truncation") {
    CHECK(pick_time_truncation(1e3, 1e300, 1.0) == 4.0);
    CHECK(pick_time_truncation(1e3, 1e-3, 1.0) == doctest::Approx(std::log(1e6)));
    CHECK(pick_time_truncation(1e3, 1e-3, 1.0) == doctest::Approx(13.8).epsilon(1e-2));
    CHECK_THROWS_AS(pick_time_truncation(1e3, 1e-3, 0.0), ConfigError);
}

TEST_CASE("speed law tail") {
    auto cfg = BirthGrowthConfig::make(0.2, 2.0);
    CHECK(check_speed_tail(cfg.speed_law(), 0.2, 2.0, 100000, RandomStream(5)));
    CHECK_THROWS(BirthGrowthConfig::make(-0.1, 1.0));
}
