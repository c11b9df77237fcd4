#include <cmath>

#include "doctest.h"
#include "poisclt/errors.hpp"
#include "poisclt/malliavin.hpp"

using namespace poisclt;

namespace {

DomainPtr torus(double side) {
    SpaceTimeDomain d;
    d.space = Space::flat_torus(2, side);
    return make_domain(d);
}

ScoreSumFunctional pair_count(double delta) {
    return ScoreSumFunctional(std::make_shared<UStatScore>(UStatKernel{2, delta, UStatKernel::Kind::Indicator, 0.5}));
}

}  // namespace

TEST_CASE("add-one cost examples") {
    auto dom = torus(5);
    RandomStream r(1);
    auto chi = sample_poisson(dom, r);
    auto p = sample_marked_point(*dom, dom->window, kExtraIdBase, r);
    LinearFunctional count([](const MarkedPoint&) { return 1.0; });
    CHECK(diff1(count, chi, p) == 1.0);
    LinearFunctional g([](const MarkedPoint& m) { return m.loc[0] * m.loc[0]; });
    CHECK(diff1(g, chi, p) == doctest::Approx(p.loc[0] * p.loc[0]));

    auto pc = pair_count(0.9);
    std::size_t near = 0;
    for (const auto& z : chi) near += distance(dom->space, p.loc, z.loc) < 0.9;
    CHECK(diff1(pc, chi, p) == doctest::Approx(static_cast<double>(near)).epsilon(1e-12));
}

TEST_CASE("second differences") {
    auto dom = torus(5);
    RandomStream r(2);
    auto pc = pair_count(1.0);
    LinearFunctional lin([](const MarkedPoint& m) { return 1.0 + m.loc[1]; });
    for (int t = 0; t < 200; ++t) {
        auto chi = sample_poisson(dom, r);
        auto p = sample_marked_point(*dom, dom->window, kExtraIdBase, r);
        auto q = sample_marked_point(*dom, dom->window, kExtraIdBase + 1, r);
        double dpq = diff2(pc, chi, p, q);
        CHECK(dpq == diff2(pc, chi, q, p));
        CHECK(dpq == doctest::Approx(distance(dom->space, p.loc, q.loc) < 1.0 ? 1.0 : 0.0));
        CHECK(dpq == doctest::Approx(diff2_four_term(pc, chi, p, q)).epsilon(1e-12));
        CHECK(diff2(lin, chi, p, q) == doctest::Approx(0.0).epsilon(1e-12));
    }
    auto chi = sample_poisson(dom, r);
    auto p = sample_marked_point(*dom, dom->window, kExtraIdBase, r);
    CHECK_THROWS_AS(diff2(pc, chi, p, p), InputError);
}

TEST_CASE("incremental add-one matches full evaluation") {
    auto dom = torus(6);
    RandomStream r(3);
    for (auto s : std::vector<ScorePtr>{std::make_shared<IsolatedScore>(0.5),
                                        std::make_shared<UStatScore>(UStatKernel{3, 0.8})}) {
        ScoreSumFunctional f(s);
        f.set_debug_check(true);
        for (int t = 0; t < 50; ++t) {
            auto chi = sample_poisson(dom, r);
            auto p = sample_marked_point(*dom, dom->window, kExtraIdBase, r);
            CHECK_NOTHROW(f.add_one(chi, p));
        }
    }
}

TEST_CASE("gamma pattern of a linear functional") {
    double lambda = 100.0;
    auto dom = torus(10);
    LinearFunctional count([](const MarkedPoint&) { return 1.0; });
    GammaBudgets b{100, 20, 20, 1000};
    auto g = estimate_gammas(count, dom, b, RandomStream(4));
    for (int i : {1, 2, 5, 6}) CHECK(g.gamma[static_cast<std::size_t>(i)].value == 0.0);
    CHECK(g.gamma[3].value == doctest::Approx(2.0 * lambda).epsilon(1e-12));
    CHECK(g.gamma[4].value == doctest::Approx(2.0 * std::sqrt(lambda)).epsilon(1e-12));
    CHECK(std::abs(g.var_f.value - lambda) <= 4 * g.var_f.std_error);
    for (const auto& e : g.gamma) CHECK(e.value >= 0.0);
    GammaBudgets tiny{5, 20, 20, 1000};
    CHECK_THROWS_AS(estimate_gammas(count, dom, tiny, RandomStream(4)), ConfigError);
}

TEST_CASE("bound assembly") {
    double lambda = 64.0;
    GammaEstimates g;
    g.gamma[4] = {2.0 * std::sqrt(lambda), 0.0};
    g.var_f = {lambda, 0.0};
    auto b = assemble_poincare_bounds(g);
    CHECK(b.d_k.value == doctest::Approx(2.0 / std::sqrt(lambda)));
    GammaEstimates z;
    z.var_f = {3.0, 0.0};
    auto bz = assemble_poincare_bounds(z);
    CHECK(bz.d_k.value == 0.0);
    CHECK(bz.d_w.value == 0.0);
    z.var_f = {0.0, 0.0};
    CHECK_THROWS_AS(assemble_poincare_bounds(z), NumericalDiagnostic);
}
