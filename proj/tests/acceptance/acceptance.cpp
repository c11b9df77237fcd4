// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is the number of failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "poisclt/experiments.hpp"
#include "poisclt/growth.hpp"
#include "poisclt/laguerre.hpp"
#include "poisclt/localization.hpp"
#include "poisclt/malliavin.hpp"
#include "poisclt/oracle.hpp"
#include "poisclt/stats.hpp"

using namespace poisclt;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

DomainPtr torus2(double side) {
    SpaceTimeDomain d;
    d.space = Space::flat_torus(2, side);
    return make_domain(d);
}

ScorePtr edge_score(double delta) {
    return std::make_shared<UStatScore>(UStatKernel{2, delta, UStatKernel::Kind::Indicator, 0.5});
}

// Mecke results are shared by criteria 1 and 2.
struct MeckeRuns {
    MeckeResult isolated, edge, knn;
};
MeckeRuns& mecke_runs() {
    static MeckeRuns runs = [] {
        auto dom = torus2(10.0);
        const std::size_t n = 100000;
        MeckeRuns m;
        m.isolated = mecke_check(dom, IsolatedScore(0.3), n, 1, RandomStream(101));
        m.edge = mecke_check(dom, *edge_score(0.2), n, 1, RandomStream(102));
        m.knn = mecke_check(dom, KnnScore(KnnScoreConfig{1, 1.0}), n, 1, RandomStream(103));
        return m;
    }();
    return runs;
}

Outcome criterion1() {
    auto& m = mecke_runs();
    Outcome o{true, ""};
    auto one = [&](const char* name, const MeckeResult& r) {
        double z = std::abs(r.lhs - r.rhs) / r.combined_stderr();
        o.pass = o.pass && std::abs(r.lhs - r.rhs) <= 4.0 * r.combined_stderr();
        o.detail += fmt("%s lhs %.4f rhs %.4f (%.2f se); ", name, r.lhs, r.rhs, z);
    };
    one("isolated", m.isolated);
    one("edge", m.edge);
    one("knn", m.knn);
    return o;
}

Outcome criterion2() {
    auto& m = mecke_runs();
    double iso = oracle::isolated_mean(2, 0.3, 100.0);
    double edge = oracle::edge_mean(2, 0.2, 100.0);
    double zi = std::abs(m.isolated.lhs - iso) / m.isolated.lhs_stderr;
    double ze = std::abs(m.edge.lhs - edge) / m.edge.lhs_stderr;
    return {zi <= 3.0 && ze <= 3.0, fmt("isolated %.4f vs %.4f (%.2f sigma); edges %.4f vs %.4f (%.2f sigma)",
                                        m.isolated.lhs, iso, zi, m.edge.lhs, edge, ze)};
}

Outcome criterion3() {
    const double R = 4.0;
    auto h = Space::hyperbolic_ball(2, R);
    RandomStream rng(301);
    auto pts = sample_uniform(h, Window::whole(), 100000, rng);
    std::vector<double> u;
    u.reserve(pts.size());
    for (const auto& p : pts) u.push_back((std::cosh(h.radius_of(p)) - 1.0) / (std::cosh(R) - 1.0));
    std::sort(u.begin(), u.end());
    double n = static_cast<double>(u.size()), d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
    double pval = kolmogorov_pvalue(d, u.size());
    double vol_err = std::abs(ball_volume(h, 1.0) - 2.0 * pi * (std::cosh(1.0) - 1.0));
    return {pval > 0.01 && vol_err <= 1e-9, fmt("KS D %.5f p %.3f; volume error %.2e", d, pval, vol_err)};
}

Outcome criterion4() {
    auto dom = torus2(5.0);
    // integer and half-integer valued functionals, where every sum is exact
    std::vector<std::shared_ptr<Functional>> exact = {
        std::make_shared<ScoreSumFunctional>(edge_score(0.8)),
        std::make_shared<ScoreSumFunctional>(std::make_shared<IsolatedScore>(0.5)),
        std::make_shared<ScoreSumFunctional>(std::make_shared<KnnScore>(KnnScoreConfig{2, 0.0})),
    };
    ScoreSumFunctional knn_len(std::make_shared<KnnScore>(KnnScoreConfig{1, 1.0}));
    RandomStream rng(401);
    std::size_t mismatched = 0, asymmetric = 0;
    const std::size_t cases = 1000;
    for (std::size_t c = 0; c < cases; ++c) {
        auto r = rng.substream(static_cast<std::uint32_t>(c));
        auto chi = sample_poisson(dom, r);
        auto p = sample_marked_point(*dom, dom->window, kExtraIdBase, r);
        // close pairs exercise the interaction terms
        auto q = c % 2 == 0 ? sample_marked_point(*dom, dom->window, kExtraIdBase + 1, r)
                            : MarkedPoint{Point{p.loc[0] + r.uniform(-0.5, 0.5), p.loc[1] + r.uniform(-0.5, 0.5)},
                                          std::nullopt, 1.0, kExtraIdBase + 1};
        q.loc[0] = std::remainder(q.loc[0], 5.0);
        q.loc[1] = std::remainder(q.loc[1], 5.0);
        const auto& f = *exact[c % exact.size()];
        double a = diff2(f, chi, p, q);
        if (a != diff2_four_term(f, chi, p, q)) ++mismatched;
        if (a != diff2(f, chi, q, p)) ++asymmetric;
        if (diff2(knn_len, chi, p, q) != diff2(knn_len, chi, q, p)) ++asymmetric;
    }

    const double lambda = 100.0;
    LinearFunctional count([](const MarkedPoint&) { return 1.0; });
    auto g = estimate_gammas(count, torus2(10.0), GammaBudgets{100, 20, 20, 1000}, RandomStream(402));
    bool zeros = true;
    for (int i : {1, 2, 5, 6}) {
        const auto& e = g.gamma[static_cast<std::size_t>(i)];
        zeros = zeros && std::abs(e.value) <= 5.0 * e.std_error;
    }
    const auto& g4 = g.gamma[4];
    bool four = std::abs(g4.value - 2.0 * std::sqrt(lambda)) <= 3.0 * g4.std_error;
    return {mismatched == 0 && asymmetric == 0 && zeros && four,
            fmt("%zu cases: %zu four-term mismatches, %zu asymmetric; g1 %.3g g2 %.3g g5 %.3g g6 %.3g g4 %.6g (target %.6g)",
                cases, mismatched, asymmetric, g.gamma[1].value, g.gamma[2].value, g.gamma[5].value,
                g.gamma[6].value, g4.value, 2.0 * std::sqrt(lambda))};
}

Outcome criterion5() {
    Outcome o{true, ""};
    for (const char* model : {"poisson_count", "isolated"}) {
        Json j = {{"model", model},
                  {"lambdas", {64, 128, 256, 512, 1024, 2048, 4096}},
                  {"n", 20000},
                  {"bootstrap_reps", 200},
                  {"seed", 1}};
        if (std::string(model) == "isolated") j["params"] = {{"rho", 0.3}};
        auto cfg = ExperimentConfig::from_json(j);
        cfg.validate();
        auto t0 = std::chrono::steady_clock::now();
        auto res = run_clt_study(cfg);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double s = res.slope_fit.slope;
        bool ok = s >= -0.75 && s <= -0.30 && res.slope_bootstrap.hi < 0.0;
        o.pass = o.pass && ok;
        o.detail += fmt("%s slope %.3f CI [%.3f, %.3f] (%.0fs); ", model, s, res.slope_bootstrap.lo,
                        res.slope_bootstrap.hi, secs);
    }
    return o;
}

Outcome criterion6() {
    RandomStream rng(601);
    std::size_t growth_bad = 0, lag_bad = 0;
    const std::vector<Space> spaces = {Space::euclidean_box(1, 20), Space::euclidean_box(2, 8), Space::flat_torus(2, 8),
                                       Space::hyperbolic_ball(2, 3)};
    for (std::size_t c = 0; c < 1000; ++c) {
        auto r = rng.substream(static_cast<std::uint32_t>(c));
        const auto& sp = spaces[c % spaces.size()];
        std::size_t n = 1 + r.below(200);
        auto locs = sample_uniform(sp, Window::whole(), n, r);
        std::vector<Seed> seeds;
        std::vector<oracle::GrowthSeed> og;
        for (std::size_t i = 0; i < n; ++i) {
            double t = r.uniform(0, 10), v = 0.05 + r.exponential(3.0);
            seeds.push_back(Seed{locs[i], t, v, static_cast<std::int64_t>(i)});
            og.push_back({locs[i], t, v});
        }
        double t0 = c % 4 == 0 ? 5.0 : INFINITY;
        if (simulate_acceptance(sp, seeds, t0).accepted != oracle::naive_birth_growth(sp, og, t0)) ++growth_bad;
    }
    for (std::size_t c = 0; c < 1000; ++c) {
        auto r = rng.stream(1).substream(static_cast<std::uint32_t>(c));
        std::size_t n = 1 + r.below(100);
        LaguerreConfig cfg;
        cfg.dim = 1;
        cfg.t = r.uniform(0.05, 3.0);
        double hmax = r.uniform(0.1, 20.0);
        std::vector<WeightedPoint> pts;
        std::vector<double> x, h;
        for (std::size_t i = 0; i < n; ++i) {
            pts.push_back(WeightedPoint{Point{r.uniform(-10, 10)}, r.uniform(0, hmax), static_cast<std::int64_t>(i)});
            x.push_back(pts.back().x[0]);
            h.push_back(pts.back().h);
        }
        auto ref = oracle::boundary_scan_1d(x, h, cfg.t);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<WeightedPoint> others;
            for (std::size_t k = 0; k < n; ++k)
                if (k != i) others.push_back(pts[k]);
            if (is_retained(pts[i], others, cfg) != static_cast<bool>(ref[i])) {
                ++lag_bad;
                break;
            }
        }
    }
    return {growth_bad == 0 && lag_bad == 0,
            fmt("birth-growth: %zu/1000 instances differ; Laguerre: %zu/1000 instances differ", growth_bad, lag_bad)};
}

Outcome criterion7() {
    Outcome o{true, ""};
    SpaceTimeDomain d;
    d.space = Space::euclidean_box(2, 14);
    d.window = Window::centered_cube(2, 10);
    auto dom = make_domain(d);
    auto zero_from = [&](const ScoreFamily& s, double cutoff, const char* name) {
        std::vector<double> radii = {0.25 * cutoff, 0.5 * cutoff, cutoff, 1.5 * cutoff, 3.0 * cutoff};
        auto psi = estimate_psi(s, dom, radii, 1000, PanelOptions{}, RandomStream(701));
        bool ok = true;
        std::size_t hits = 0;
        for (const auto& p : psi)
            if (p.r >= cutoff) {
                ok = ok && p.estimate == 0.0;
                hits += p.hits;
            }
        o.pass = o.pass && ok;
        o.detail += fmt("%s: %zu mismatches beyond the range (psi(%.3g) = %.3f); ", name, hits, psi[0].r,
                        psi[0].estimate);
    };
    zero_from(IsolatedScore(0.5), 0.5, "isolated");
    zero_from(UStatScore(UStatKernel{2, 0.6}), 0.6, "ustat k=2");
    zero_from(UStatScore(UStatKernel{3, 0.6, UStatKernel::Kind::PowerLength}), 0.6, "ustat k=3");

    // Birth-growth at lambda = 1000 in d = 1, centre of the window only.
    auto cfg = ExperimentConfig::from_json(Json{{"model", "birth_growth"},
                                                {"params", {{"rho_min", 0.02}, {"rate", 50.0}, {"horizon", 10.0}}},
                                                {"space", {{"kind", "euclidean"}, {"dim", 1}, {"margin", 0.0}}},
                                                {"lambdas", {1000}}});
    cfg.validate();
    auto model = make_model(cfg, 1000.0);
    PanelOptions panel;
    panel.placements = {Placement::Empty, Placement::Clustered};
    panel.base_points = {Point{0.0}};
    panel.midpoint_time = false;
    std::vector<double> times = {2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto phi = estimate_phi(*model.score, model.domain, times, 1000, panel, RandomStream(702));
    bool decreasing = true;
    std::vector<double> s, lg;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (i > 0) decreasing = decreasing && phi[i].estimate < phi[i - 1].estimate;
        if (phi[i].estimate > 0.0) {
            s.push_back(phi[i].r);
            lg.push_back(std::log(phi[i].estimate));
        }
    }
    bool rate_ok = false;
    LinearFit fit;
    if (s.size() >= 3) {
        fit = fit_line(s, lg);
        rate_ok = fit.slope_hi() < 0.0;
    }
    o.pass = o.pass && decreasing && rate_ok;
    o.detail += fmt("birth-growth phi(2) %.3f phi(10) %.3f, log-slope %.3f CI [%.3f, %.3f]%s", phi.front().estimate,
                    phi.back().estimate, fit.slope, fit.slope_lo(), fit.slope_hi(),
                    decreasing ? "" : ", not strictly decreasing");
    return o;
}

// Random bounded couplings on a finite probability space. The mismatch part
// has mass alpha; E min(2, |X - X'|) over the coupling bounds d_BL from above.
Outcome criterion8() {
    RandomStream rng(801);
    std::size_t violations = 0, total = 0;
    double worst = 0.0;
    for (std::size_t c = 0; c < 10000; ++c) {
        auto r = rng.substream(static_cast<std::uint32_t>(c));
        int q = 1 + static_cast<int>(c % 4);
        double L = (c / 4) % 2 == 0 ? 1.0 : 2.0;
        double alpha = std::array<double, 3>{0.0, 0.05, 0.2}[(c / 8) % 3];
        std::array<int, 4> pw{};
        for (int k = 0; k < q; ++k) ++pw[r.below(4)];

        std::size_t n_match = 1 + r.below(6), n_miss = 1 + r.below(4);
        std::vector<double> prob;
        std::vector<std::array<double, 4>> X, Y;
        auto weights = [&](std::size_t n, double mass) {
            std::vector<double> w(n);
            double s = 0;
            for (auto& x : w) s += (x = r.exponential());
            for (auto& x : w) prob.push_back(mass * x / s);
        };
        auto vec = [&](bool extreme) {
            std::array<double, 4> v{};
            for (auto& x : v) x = extreme ? (r.below(2) ? L : -L) : r.uniform(-L, L);
            return v;
        };
        weights(n_match, 1.0 - alpha);
        for (std::size_t i = 0; i < n_match; ++i) {
            X.push_back(vec(r.below(3) == 0));
            Y.push_back(X.back());
        }
        weights(n_miss, alpha);
        for (std::size_t i = 0; i < n_miss; ++i) {
            X.push_back(vec(r.below(2) == 0));
            Y.push_back(vec(r.below(2) == 0));
        }
        double ex = 0.0, ey = 0.0, dbl = 0.0;
        for (std::size_t i = 0; i < prob.size(); ++i) {
            double px = 1.0, py = 1.0, dist2 = 0.0;
            for (int k = 0; k < 4; ++k) {
                auto ku = static_cast<std::size_t>(k);
                px *= std::pow(X[i][ku], pw[ku]);
                py *= std::pow(Y[i][ku], pw[ku]);
                dist2 += (X[i][ku] - Y[i][ku]) * (X[i][ku] - Y[i][ku]);
            }
            ex += prob[i] * px;
            ey += prob[i] * py;
            dbl += prob[i] * std::min(2.0, std::sqrt(dist2));
        }
        double gap = std::abs(ex - ey);
        double bound = mixed_moment_gap_bound(q, L, std::min(2.0, 2.0 * alpha), true);
        double sharp = mixed_moment_gap_bound(q, L, dbl, true);
        ++total;
        if (gap > bound * (1 + 1e-12) + 1e-15 || gap > sharp * (1 + 1e-12) + 1e-15) ++violations;
        if (bound > 0) worst = std::max(worst, gap / bound);
    }
    return {violations == 0, fmt("%zu violations in %zu couplings; largest gap/bound %.3f", violations, total, worst)};
}

Outcome criterion9() {
    auto e = Exponents::defaults(false);
    double worst = 0.0;
    for (double lambda : {1.0, 7.0, 100.0, 1e4, 1e6}) {
        BoundInputs in;
        in.I_psi = {{e.theta_k, 1.0}, {e.theta_w, 1.0}};
        in.I_phi = {{e.theta_prime_k, 1.0}, {e.theta_prime_w, 1.0}};
        in.G = {{e.q_k, lambda}, {e.q_w, lambda}};
        in.M5 = 1.0;
        in.var_h = lambda;
        for (auto form : {BoundForm::SpaceTime, BoundForm::SpaceOnly}) {
            auto rep = assemble_theorem_bound(in, form);
            worst = std::max(worst, std::abs(rep.d_k - 1.0 / std::sqrt(lambda)) * std::sqrt(lambda));
        }
    }
    double worst_x = 0.0;
    RandomStream rng(901);
    for (int k = 0; k < 100; ++k) {
        BoundInputs in;
        in.c = rng.uniform(0.1, 10);
        in.I_psi = {{e.theta_k, rng.uniform(1, 5)}, {e.theta_w, rng.uniform(1, 5)}};
        in.M5 = rng.uniform(1, 100);
        in.var_h = rng.uniform(1, 1e4);
        in.nu_w = rng.uniform(1, 1e4);
        auto rep = assemble_theorem_bound(in, BoundForm::XEqualsW);
        double ck = in.c * std::pow(in.I_psi[e.theta_k], 3);
        double expect = ck * std::pow(*in.M5, 0.4) * std::sqrt(*in.nu_w) / *in.var_h;
        worst_x = std::max(worst_x, std::abs(rep.d_k - expect) / expect);
    }
    return {worst <= 1e-15 && worst_x <= 1e-12,
            fmt("max relative error %.2e (lambda^-1/2 form), %.2e (X = W form)", worst, worst_x)};
}

Outcome criterion10() {
    const double theta = 1.0 / 240;
    auto h = Space::hyperbolic_ball(2, 10.0);
    auto sq = hyperbolic_condition([](double r) { return r * r; }, 2, theta);
    auto lin = hyperbolic_condition([](double r) { return r; }, 2, theta);
    auto i_sq = integral_I_psi(Profile::from_log([](double r) { return -r * r; }), h, theta);
    auto i_lin = integral_I_psi(Profile::from_log([](double r) { return -r; }), h, theta);
    bool ok = sq.holds && !lin.holds && i_sq.finite == sq.holds && i_lin.finite == lin.holds;
    return {ok, fmt("tau=r^2: condition %s, I_psi %s (%.6g); tau=r: condition %s (liminf %.4g), I_psi %s",
                    sq.holds ? "holds" : "fails", i_sq.finite ? "finite" : "infinite", i_sq.value,
                    lin.holds ? "holds" : "fails", lin.liminf_ratio, i_lin.finite ? "finite" : "infinite")};
}

}  // namespace

int main() {
    std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"Mecke identity", criterion1},
        {"closed-form means", criterion2},
        {"hyperbolic sampler", criterion3},
        {"difference-operator algebra", criterion4},
        {"CLT rate law", criterion5},
        {"oracle equivalence", criterion6},
        {"localization profiles", criterion7},
        {"mixed-moment lemma", criterion8},
        {"bound assembly", criterion9},
        {"hyperbolic condition", criterion10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed;
}
