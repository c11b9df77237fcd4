#include "poisclt/malliavin.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "poisclt/errors.hpp"
#include "poisclt/parallel.hpp"

namespace poisclt {

double Functional::add_one(const Configuration& chi, const MarkedPoint& p) const {
    return evaluate(augment(chi, p)) - evaluate(chi);
}

ScoreSumFunctional::ScoreSumFunctional(ScorePtr score, double shift, double scale)
    : score_(std::move(score)), shift_(shift), scale_(scale) {
    if (!score_) throw InputError("null score");
    if (!(scale_ > 0.0)) throw InputError("scale must be > 0");
}

double ScoreSumFunctional::evaluate(const Configuration& chi) const {
    return (score_sum(*score_, chi) - shift_) / scale_;
}

double ScoreSumFunctional::add_one(const Configuration& chi, const MarkedPoint& p) const {
    if (chi.contains_id(p.id)) throw InputError("added point id already present");
    const double radius = score_->interaction_radius();
    if (!std::isfinite(radius)) return Functional::add_one(chi, p);

    const auto& dom = chi.domain();
    Configuration grown = augment(chi, p);
    std::vector<std::size_t> old_pos, new_pos;
    const bool p_in_w = window_contains(dom.space, dom.window, p.loc);
    if (p_in_w) new_pos.push_back(static_cast<std::size_t>(grown.find(p.id)));
    for (std::size_t i = 0; i < chi.size(); ++i) {
        const auto& z = chi[i];
        if (distance(dom.space, z.loc, p.loc) < radius && window_contains(dom.space, dom.window, z.loc)) {
            old_pos.push_back(i);
            new_pos.push_back(static_cast<std::size_t>(grown.find(z.id)));
        }
    }
    double delta = 0.0;
    if (!new_pos.empty()) {
        auto nv = score_->evaluate_many(grown, new_pos);
        auto ov = old_pos.empty() ? std::vector<double>{} : score_->evaluate_many(chi, old_pos);
        std::size_t off = p_in_w ? 1 : 0;
        if (p_in_w) delta = nv[0];
        for (std::size_t k = 0; k < ov.size(); ++k) delta += nv[k + off] - ov[k];
    }
    delta /= scale_;
    if (debug_check_) {
        double full = evaluate(grown) - evaluate(chi);
        if (std::abs(full - delta) > 1e-9 * (1.0 + std::abs(full)))
            throw std::logic_error("incremental add-one cost disagrees with full evaluation");
    }
    return delta;
}

double LinearFunctional::evaluate(const Configuration& chi) const {
    std::vector<double> v;
    for (auto pos : window_positions(chi)) v.push_back(g_(chi[pos]));
    return pairwise_sum(v);
}

double LinearFunctional::add_one(const Configuration& chi, const MarkedPoint& p) const {
    const auto& dom = chi.domain();
    return window_contains(dom.space, dom.window, p.loc) ? g_(p) : 0.0;
}

double diff1(const Functional& f, const Configuration& chi, const MarkedPoint& p) { return f.add_one(chi, p); }

double diff2(const Functional& f, const Configuration& chi, const MarkedPoint& p, const MarkedPoint& q) {
    if (p.id == q.id) throw InputError("diff2 needs two distinct points");
    const MarkedPoint& a = p.id < q.id ? p : q;
    const MarkedPoint& b = p.id < q.id ? q : p;
    return f.add_one(augment(chi, b), a) - f.add_one(chi, a);
}

double diff2_four_term(const Functional& f, const Configuration& chi, const MarkedPoint& p, const MarkedPoint& q) {
    if (p.id == q.id) throw InputError("diff2 needs two distinct points");
    const MarkedPoint pq[2] = {p, q};
    return f.evaluate(augment(chi, pq)) - f.evaluate(augment(chi, p)) - f.evaluate(augment(chi, q)) +
           f.evaluate(chi);
}

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// mean(a)^pa * mean(b)^pb with delete-one jackknife bias correction (paired samples).
double jack_prod(std::span<const double> a, std::span<const double> b, double pa, double pb, bool correct) {
    const auto n = a.size();
    double sa = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sa += a[k];
        sb += b.empty() ? 0.0 : b[k];
    }
    auto theta = [&](double ma, double mb) {
        double v = std::pow(std::max(ma, 0.0), pa);
        if (!b.empty()) v *= std::pow(std::max(mb, 0.0), pb);
        return v;
    };
    double nn = static_cast<double>(n);
    double full = theta(sa / nn, sb / nn);
    if (!correct || n < 2) return full;
    double loo = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        loo += theta((sa - a[k]) / (nn - 1), (sb - (b.empty() ? 0.0 : b[k])) / (nn - 1));
    return std::max(0.0, nn * full - (nn - 1) * loo / nn);
}

// Value and delete-one jackknife standard error of g(mean of v).
template <class G>
Estimate jack_outer(std::span<const double> v, G&& g) {
    const auto n = v.size();
    double s = 0.0;
    for (double x : v) s += x;
    double nn = static_cast<double>(n);
    Estimate e;
    e.value = g(s / nn);
    if (n < 2) return e;
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) loo[i] = g((s - v[i]) / (nn - 1));
    double m = mean_of(loo), acc = 0.0;
    for (double x : loo) acc += (x - m) * (x - m);
    e.std_error = std::sqrt((nn - 1) / nn * acc);
    return e;
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericalDiagnostic(std::string("non-finite ") + what + " moment");
}

}  // namespace

GammaEstimates estimate_gammas(const Functional& f, const DomainPtr& domain, const GammaBudgets& budgets,
                               RandomStream rng, const OuterProposal& proposal) {
    if (budgets.n_outer_x < 10 || budgets.n_outer_y < 10 || budgets.n_inner < 10 || budgets.n_var < 10)
        throw ConfigError("gamma budgets must all be >= 10");
    const double mass = domain->carrier_volume() * domain->time.total_mass();
    if (!std::isfinite(mass)) throw ConfigError("outer sampling needs a carrier of finite mass");
    const std::size_t nx = budgets.n_outer_x, ny = budgets.n_outer_y, nk = budgets.n_inner;
    const bool correct = nk < 1000;

    auto outer = [&](RandomStream& r, std::int64_t id, double& w) {
        if (proposal) return proposal(r, id, w);
        w = mass;
        return sample_marked_point(*domain, domain->carrier, id, r);
    };

    struct PerX {
        double wx = 0, u1 = 0, u2 = 0, u3 = 0, u4 = 0, u5 = 0, u6 = 0;
    };
    std::vector<PerX> per(nx);
    RandomStream outer_stream = rng.stream(rng.stream_id() * 4 + 1);
    parallel_for(nx, [&](std::size_t i) {
        RandomStream r = outer_stream.substream(static_cast<std::uint32_t>(i));
        PerX& px = per[i];
        MarkedPoint x = outer(r, kExtraIdBase, px.wx);
        std::vector<double> dx4, dx3, dy4(nk), d24(nk);
        dx4.reserve(ny * nk);
        dx3.reserve(ny * nk);
        double s1 = 0, s2 = 0, s5 = 0;
        for (std::size_t j = 0; j < ny; ++j) {
            double wy = 0;
            MarkedPoint y = outer(r, kExtraIdBase + 1, wy);
            for (std::size_t k = 0; k < nk; ++k) {
                Configuration chi = sample_poisson(domain, r);
                MarkedPoint xk = x, yk = y;
                xk.mark = domain->marks.sample(r);
                yk.mark = domain->marks.sample(r);
                double dx = diff1(f, chi, xk);
                double dy = diff1(f, chi, yk);
                double dxy = diff1(f, augment(chi, yk), xk) - dx;
                dx4.push_back(dx * dx * dx * dx);
                dx3.push_back(std::abs(dx * dx * dx));
                dy4[k] = dy * dy * dy * dy;
                d24[k] = dxy * dxy * dxy * dxy;
            }
            double a = jack_prod(dy4, d24, 0.25, 0.25, correct);
            double b = jack_prod(d24, {}, 0.5, 0.0, correct);
            s1 += wy * a;
            s2 += wy * b;
            s5 += wy * mean_of(d24);
        }
        double nyd = static_cast<double>(ny);
        double csq = jack_prod(dx4, {}, 0.5, 0.0, correct);
        px.u1 = (s1 / nyd) * (s1 / nyd);
        px.u2 = (s2 / nyd) * (s2 / nyd);
        px.u3 = mean_of(dx3);
        px.u4 = mean_of(dx4);
        px.u5 = s5 / nyd;
        px.u6 = (s2 / nyd) * csq;
        for (double v : {px.u1, px.u2, px.u3, px.u4, px.u5, px.u6}) require_finite(v, "difference-operator");
    });

    GammaEstimates out;
    out.budgets = budgets;
    out.seed = rng.seed();
    auto column = [&](double PerX::*field) {
        std::vector<double> v(nx);
        for (std::size_t i = 0; i < nx; ++i) v[i] = per[i].wx * (per[i].*field);
        return v;
    };
    auto sqrt0 = [](double v) { return std::sqrt(std::max(0.0, v)); };
    auto c1 = column(&PerX::u1), c2 = column(&PerX::u2), c3 = column(&PerX::u3);
    auto c4 = column(&PerX::u4), c5 = column(&PerX::u5), c6 = column(&PerX::u6);
    out.gamma[1] = jack_outer(c1, [&](double m) { return 2.0 * sqrt0(m); });
    out.gamma[2] = jack_outer(c2, [&](double m) { return 2.0 * sqrt0(m); });
    out.gamma[3] = jack_outer(c3, [&](double m) { return 2.0 * m; });
    out.gamma[4] = jack_outer(c4, [&](double m) { return sqrt0(4.0 * m); });
    out.gamma[5] = jack_outer(c5, [&](double m) { return sqrt0(8.0 * m); });
    out.gamma[6] = jack_outer(c6, [&](double m) { return sqrt0(32.0 * m); });

    std::vector<double> fv(budgets.n_var);
    RandomStream var_stream = rng.stream(rng.stream_id() * 4 + 2);
    parallel_for(fv.size(), [&](std::size_t i) {
        RandomStream r = var_stream.substream(static_cast<std::uint32_t>(i));
        fv[i] = f.evaluate(sample_poisson(domain, r));
    });
    auto ms = mean_stderr(fv);
    double m4 = 0.0;
    for (double v : fv) m4 += std::pow(v - ms.mean, 4);
    m4 /= static_cast<double>(fv.size());
    out.mean_f = {ms.mean, ms.std_error};
    out.var_f = {ms.variance, std::sqrt(std::max(0.0, m4 - ms.variance * ms.variance) / static_cast<double>(fv.size()))};
    out.gamma[0] = {std::abs(1.0 - ms.variance), out.var_f.std_error};
    for (const auto& g : out.gamma) require_finite(g.value, "gamma");
    return out;
}

PoincareBounds assemble_poincare_bounds(const GammaEstimates& g) {
    const double var = g.var_f.value;
    if (!(var > 0.0)) throw NumericalDiagnostic("variance estimate must be > 0 for bound assembly");
    for (const auto& e : g.gamma)
        if (!std::isfinite(e.value)) throw NumericalDiagnostic("non-finite gamma in bound assembly");
    const auto& G = g.gamma;
    PoincareBounds b;
    double sk = G[1].value + 0.5 * G[2].value + G[4].value + G[5].value + G[6].value;
    b.d_k.value = sk / var;
    const double c1 = std::sqrt(2.0 / std::numbers::pi), c2 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    b.d_w.value = c1 * G[1].value / var + c2 * G[2].value / var + G[3].value / std::pow(var, 1.5);
    // delta method, gammas treated as independent
    double rv = g.var_f.std_error / var;
    double ek = std::pow(G[1].std_error, 2) + std::pow(0.5 * G[2].std_error, 2) + std::pow(G[4].std_error, 2) +
                std::pow(G[5].std_error, 2) + std::pow(G[6].std_error, 2);
    b.d_k.std_error = std::sqrt(ek / (var * var) + std::pow(b.d_k.value * rv, 2));
    double ew = std::pow(c1 * G[1].std_error / var, 2) + std::pow(c2 * G[2].std_error / var, 2) +
                std::pow(G[3].std_error / std::pow(var, 1.5), 2);
    double dvar = (c1 * G[1].value + c2 * G[2].value) / var + 1.5 * G[3].value / std::pow(var, 1.5);
    b.d_w.std_error = std::sqrt(ew + std::pow(dvar * rv, 2));
    return b;
}

}  // namespace poisclt
