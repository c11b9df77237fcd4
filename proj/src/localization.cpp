#include "poisclt/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "poisclt/errors.hpp"
#include "poisclt/parallel.hpp"

namespace poisclt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kPanelSize = 6;
constexpr std::int64_t kEvalId = kExtraIdBase;
constexpr std::int64_t kAdversaryId = kExtraIdBase + 16;

std::vector<Point> base_points_for(const SpaceTimeDomain& domain, const PanelOptions& panel) {
    return panel.base_points.empty() ? default_base_points(domain) : panel.base_points;
}

// Random ingredients of one trial, shared by every radius so that the
// estimates are coupled (common random numbers).
struct TrialDraws {
    Configuration chi;
    double eval_mark = 0.0;
    std::array<std::array<double, kMaxCoords>, kPanelSize> dirs{};
    std::array<double, kPanelSize> marks{};
    std::array<double, kPanelSize> times{};
    std::array<Point, kPanelSize> boundary{};
};

Point boundary_point(const SpaceTimeDomain& dom, RandomStream& rng) {
    const Space& sp = dom.space;
    const Window& w = dom.window;
    int d = sp.dim();
    if (w.kind == Window::Kind::Ball) {
        auto u = random_direction(d, rng);
        return sp.polar_point(w.radius, std::span<const double>(u.data(), static_cast<std::size_t>(d)));
    }
    // Box (Whole means the carrier box): uniform point pushed to a random face.
    Window box = w;
    if (w.kind == Window::Kind::Whole) box = Window::centered_cube(d, sp.extent());
    Point p;
    p.n = d;
    for (int i = 0; i < d; ++i) p[i] = rng.uniform(box.lo[static_cast<std::size_t>(i)], box.hi[static_cast<std::size_t>(i)]);
    auto face = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * d)));
    auto axis = static_cast<std::size_t>(face / 2);
    p.x[axis] = (face % 2 == 0) ? box.lo[axis] : box.hi[axis];
    return p;
}

TrialDraws draw_trial(const DomainPtr& domain, RandomStream rng) {
    TrialDraws t;
    t.chi = sample_poisson(domain, rng);
    const auto& dom = *domain;
    t.eval_mark = dom.marks.sample(rng);
    for (int k = 0; k < kPanelSize; ++k) {
        auto ku = static_cast<std::size_t>(k);
        t.dirs[ku] = random_direction(dom.space.dim(), rng);
        t.marks[ku] = dom.marks.sample(rng);
        t.times[ku] = dom.is_space_time() ? dom.time.sample(rng) : 0.0;
        t.boundary[ku] = boundary_point(dom, rng);
    }
    return t;
}

std::span<const double> dir_span(const TrialDraws& t, int k, int d) {
    return {t.dirs[static_cast<std::size_t>(k)].data(), static_cast<std::size_t>(d)};
}

MarkedPoint adversary(const TrialDraws& t, int k, Point loc, std::optional<double> time) {
    MarkedPoint a;
    a.loc = loc;
    a.time = time;
    a.mark = t.marks[static_cast<std::size_t>(k)];
    a.id = kAdversaryId + k;
    return a;
}

// A-set for a spatial radius r.
std::vector<MarkedPoint> spatial_adversaries(const SpaceTimeDomain& dom, const TrialDraws& t, Placement pl,
                                             const Point& z, double r) {
    std::vector<MarkedPoint> out;
    if (pl == Placement::Empty) return out;
    int d = dom.space.dim();
    for (int k = 0; k < kPanelSize; ++k) {
        std::optional<double> time;
        if (dom.is_space_time()) time = t.times[static_cast<std::size_t>(k)];
        Point loc;
        switch (pl) {
        case Placement::Clustered:
            loc = point_at_distance(dom.space, z, 0.5 * r, dir_span(t, k, d));
            break;
        case Placement::Straddling:
            loc = point_at_distance(dom.space, z, (k < kPanelSize / 2 ? 0.95 : 1.05) * r, dir_span(t, k, d));
            break;
        case Placement::WindowBoundary:
            loc = t.boundary[static_cast<std::size_t>(k)];
            break;
        case Placement::Empty:
            break;
        }
        out.push_back(adversary(t, k, loc, time));
    }
    return out;
}

// A-set for a time threshold s; spatial positions at the panel's scale.
std::vector<MarkedPoint> temporal_adversaries(const SpaceTimeDomain& dom, const TrialDraws& t, Placement pl,
                                              const Point& z, double s, double scale) {
    std::vector<MarkedPoint> out;
    if (pl == Placement::Empty) return out;
    int d = dom.space.dim();
    for (int k = 0; k < kPanelSize; ++k) {
        double time = t.times[static_cast<std::size_t>(k)];
        Point loc;
        switch (pl) {
        case Placement::Clustered:
            loc = point_at_distance(dom.space, z, 0.5 * scale, dir_span(t, k, d));
            break;
        case Placement::Straddling:
            loc = point_at_distance(dom.space, z, 0.5 * scale, dir_span(t, k, d));
            time = (k < kPanelSize / 2 ? 0.95 : 1.05) * s;
            break;
        case Placement::WindowBoundary:
            loc = t.boundary[static_cast<std::size_t>(k)];
            break;
        case Placement::Empty:
            break;
        }
        out.push_back(adversary(t, k, loc, time));
    }
    return out;
}

MarkedPoint eval_point(const TrialDraws& t, const Point& z, std::optional<double> time) {
    MarkedPoint p;
    p.loc = z;
    p.time = time;
    p.mark = t.eval_mark;
    p.id = kEvalId;
    return p;
}

std::vector<ProfilePoint> aggregate(const std::vector<std::vector<unsigned char>>& hits, std::size_t n_cells,
                                    std::span<const double> grid) {
    std::size_t n_trials = hits.size();
    std::vector<ProfilePoint> out;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        ProfilePoint best;
        best.r = grid[j];
        best.trials = n_trials;
        bool first = true;
        for (std::size_t c = 0; c < n_cells; ++c) {
            std::size_t k = 0;
            for (const auto& h : hits) k += h[c * grid.size() + j];
            if (first || k > best.hits) {
                best.hits = k;
                first = false;
            }
        }
        best.estimate = n_trials ? static_cast<double>(best.hits) / static_cast<double>(n_trials) : 0.0;
        auto ci = wilson_interval(best.hits, n_trials);
        best.lo = ci.lo;
        best.hi = ci.hi;
        out.push_back(best);
    }
    return out;
}

void check_sorted(std::span<const double> grid, const char* what) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0) || (i > 0 && grid[i] < grid[i - 1]))
            throw InputError(std::string(what) + " must be non-negative and sorted ascending");
    }
}

}  // namespace

std::string to_string(Placement p) {
    switch (p) {
    case Placement::Empty: return "empty";
    case Placement::Clustered: return "clustered";
    case Placement::WindowBoundary: return "window_boundary";
    case Placement::Straddling: return "straddling";
    }
    return "?";
}

std::vector<ProfilePoint> estimate_psi(const ScoreFamily& family, const DomainPtr& domain,
                                       std::span<const double> radii, std::size_t n_trials,
                                       const PanelOptions& panel, RandomStream rng) {
    check_sorted(radii, "radii");
    const auto& dom = *domain;
    auto bases = base_points_for(dom, panel);
    std::vector<std::optional<double>> times;
    if (dom.is_space_time()) {
        // Space profile at the middle of the time support.
        times.push_back(0.5 * dom.time.horizon);
    } else {
        times.push_back(std::nullopt);
    }
    std::size_t n_cells = bases.size() * panel.placements.size() * times.size();
    std::size_t nr = radii.size();
    std::vector<std::vector<unsigned char>> hits(n_trials);

    parallel_for(n_trials, [&](std::size_t trial) {
        auto draws = draw_trial(domain, rng.substream(static_cast<std::uint32_t>(trial)));
        auto& h = hits[trial];
        h.assign(n_cells * nr, 0);
        std::size_t cell = 0;
        for (const auto& z : bases) {
            for (auto pl : panel.placements) {
                for (const auto& tm : times) {
                    auto p = eval_point(draws, z, tm);
                    bool r_free = pl == Placement::Empty || pl == Placement::WindowBoundary;
                    std::optional<double> full;
                    Configuration aug;
                    if (r_free) {
                        aug = augment(draws.chi, spatial_adversaries(dom, draws, pl, z, 0.0));
                        full = family.evaluate(p, aug);
                    }
                    for (std::size_t j = 0; j < nr; ++j) {
                        double r = radii[j];
                        double xi;
                        if (r_free) {
                            xi = *full;
                        } else {
                            aug = augment(draws.chi, spatial_adversaries(dom, draws, pl, z, r));
                            xi = family.evaluate(p, aug);
                        }
                        double xr = family.evaluate_space_restricted(p, aug, r);
                        h[cell * nr + j] = xi != xr ? 1 : 0;
                    }
                    ++cell;
                }
            }
        }
    });
    return aggregate(hits, n_cells, radii);
}

std::vector<ProfilePoint> estimate_phi(const ScoreFamily& family, const DomainPtr& domain,
                                       std::span<const double> times, std::size_t n_trials,
                                       const PanelOptions& panel, RandomStream rng) {
    const auto& dom = *domain;
    if (!dom.is_space_time()) throw DomainError("time profile requires a space-time domain");
    check_sorted(times, "times");
    auto bases = base_points_for(dom, panel);
    std::size_t n_time_pos = panel.midpoint_time ? 2 : 1;
    std::size_t n_cells = bases.size() * panel.placements.size() * n_time_pos;
    std::size_t ns = times.size();
    std::vector<std::vector<unsigned char>> hits(n_trials);

    parallel_for(n_trials, [&](std::size_t trial) {
        auto draws = draw_trial(domain, rng.substream(static_cast<std::uint32_t>(trial)));
        auto& h = hits[trial];
        h.assign(n_cells * ns, 0);
        std::size_t cell = 0;
        for (const auto& z : bases) {
            for (auto pl : panel.placements) {
                for (std::size_t tp = 0; tp < n_time_pos; ++tp) {
                    for (std::size_t j = 0; j < ns; ++j) {
                        double s = times[j];
                        auto p = eval_point(draws, z, tp == 0 ? s : 0.5 * s);
                        auto aug = augment(draws.chi, temporal_adversaries(dom, draws, pl, z, s, panel.spatial_scale));
                        double xi = family.evaluate(p, aug);
                        double xs = family.evaluate_time_restricted(p, aug, s);
                        h[cell * ns + j] = xi != xs ? 1 : 0;
                    }
                    ++cell;
                }
            }
        }
    });
    return aggregate(hits, n_cells, times);
}

MomentEstimate estimate_M5(const ScoreFamily& family, const DomainPtr& domain, std::span<const double> radii,
                           std::size_t n_trials, const PanelOptions& panel, RandomStream rng,
                           std::span<const double> times) {
    const auto& dom = *domain;
    if (n_trials == 0) throw InputError("M5 estimation needs at least one trial");
    if (!dom.is_space_time() && !times.empty()) throw DomainError("time grid given for a space-only domain");
    auto bases = base_points_for(dom, panel);
    // Columns: radii, then r = inf, then the time thresholds.
    std::size_t ncol = radii.size() + 1 + times.size();
    std::size_t n_cells = bases.size() * panel.placements.size();
    std::vector<std::vector<double>> vals(n_trials);
    std::optional<double> tmid;
    if (dom.is_space_time()) tmid = 0.5 * dom.time.horizon;

    parallel_for(n_trials, [&](std::size_t trial) {
        auto draws = draw_trial(domain, rng.substream(static_cast<std::uint32_t>(trial)));
        auto& v = vals[trial];
        v.assign(n_cells * ncol, 0.0);
        std::size_t cell = 0;
        for (const auto& z : bases) {
            for (auto pl : panel.placements) {
                auto p = eval_point(draws, z, tmid);
                double* row = v.data() + cell * ncol;
                for (std::size_t j = 0; j < radii.size(); ++j) {
                    auto aug = augment(draws.chi, spatial_adversaries(dom, draws, pl, z, radii[j]));
                    row[j] = std::pow(std::abs(family.evaluate_space_restricted(p, aug, radii[j])), 5);
                }
                auto aug = augment(draws.chi, spatial_adversaries(dom, draws, pl, z, 0.0));
                row[radii.size()] = std::pow(std::abs(family.evaluate(p, aug)), 5);
                for (std::size_t j = 0; j < times.size(); ++j) {
                    auto q = eval_point(draws, z, times[j]);
                    auto augt = augment(draws.chi, temporal_adversaries(dom, draws, pl, z, times[j], panel.spatial_scale));
                    row[radii.size() + 1 + j] = std::pow(std::abs(family.evaluate_time_restricted(q, augt, times[j])), 5);
                }
                ++cell;
            }
        }
    });

    MomentEstimate out;
    double best = 0.0;
    std::size_t best_col = 0;
    std::vector<double> col(n_trials);
    for (std::size_t c = 0; c < n_cells * ncol; ++c) {
        for (std::size_t t = 0; t < n_trials; ++t) col[t] = vals[t][c];
        double m = pairwise_sum(col) / static_cast<double>(n_trials);
        if (m > best) {
            best = m;
            best_col = c;
        }
    }
    if (!std::isfinite(best)) {
        out.value = kInf;
        out.heavy_tail = true;
        return out;
    }
    out.value = std::max(1.0, best);
    if (best > 0.0) {
        // A single draw dominating the mean signals an unstable fifth moment.
        double mx = 0.0, sum = 0.0;
        for (std::size_t t = 0; t < n_trials; ++t) {
            mx = std::max(mx, vals[t][best_col]);
            sum += vals[t][best_col];
        }
        out.heavy_tail = n_trials >= 50 && mx > 0.5 * sum;
    }
    return out;
}

// ---------------------------------------------------------------------------
// decay models

std::string to_string(DecayModel::Kind k) {
    switch (k) {
    case DecayModel::Kind::Linear: return "exp(-c r)";
    case DecayModel::Kind::DimPower: return "exp(-c r^d)";
    case DecayModel::Kind::ExpExp: return "exp(-c e^{ar})";
    case DecayModel::Kind::Log: return "power r^-c";
    case DecayModel::Kind::Step: return "step";
    }
    return "?";
}

double DecayModel::abscissa(double r) const {
    switch (kind) {
    case Kind::Linear: return r;
    case Kind::DimPower: return std::pow(r, dim);
    case Kind::ExpExp: return std::exp(a * r);
    case Kind::Log: return std::log(r);
    case Kind::Step: return r;
    }
    return r;
}

double DecayModel::log_value(double r) const {
    if (kind == Kind::Step) return r < cutoff ? std::log(level) : -kInf;
    if (kind == Kind::Log && r <= 0.0) return kInf;
    return intercept + slope * abscissa(r);
}

std::string DecayModel::describe() const {
    std::ostringstream os;
    if (kind == Kind::Step) {
        os << "step: " << level << " for r < " << cutoff << ", 0 beyond";
        return os.str();
    }
    os << to_string(kind) << ": log psi = " << intercept << " + " << slope << " * g(r)";
    if (kind == Kind::ExpExp) os << ", a = " << a;
    os << ", AIC " << aic << ", extrapolated beyond r = " << max_fitted_r;
    return os.str();
}

DecayModel fit_decay(std::span<const ProfilePoint> pts, int dim) {
    if (pts.empty()) throw InputError("decay fit needs at least one profile point");
    DecayModel m;
    m.dim = dim;
    m.max_fitted_r = pts.back().r;
    double max_est = 0.0;
    for (const auto& p : pts) max_est = std::max(max_est, p.estimate);

    // Exact-zero tail: the score stabilizes, a step is exact up to the grid.
    std::size_t zero_from = pts.size();
    while (zero_from > 0 && pts[zero_from - 1].estimate == 0.0) --zero_from;
    if (zero_from < pts.size()) {
        m.kind = DecayModel::Kind::Step;
        m.level = max_est;
        m.cutoff = pts[zero_from].r;
        return m;
    }

    std::vector<double> rs, ys;
    for (const auto& p : pts) {
        if (p.estimate > 0.0 && p.r > 0.0) {
            rs.push_back(p.r);
            ys.push_back(std::log(p.estimate));
        }
    }
    if (rs.size() < 2) {
        // Nothing to fit: a constant profile, which is never integrable.
        m.kind = DecayModel::Kind::Step;
        m.level = max_est;
        m.cutoff = kInf;
        return m;
    }

    struct Cand {
        DecayModel::Kind kind;
        double a;
    };
    const Cand cands[] = {{DecayModel::Kind::DimPower, 0.0}, {DecayModel::Kind::Linear, 0.0},
                          {DecayModel::Kind::ExpExp, 0.25},  {DecayModel::Kind::ExpExp, 0.5},
                          {DecayModel::Kind::ExpExp, 1.0},   {DecayModel::Kind::Log, 0.0}};
    bool have = false;
    double n = static_cast<double>(rs.size());
    for (const auto& c : cands) {
        DecayModel t;
        t.kind = c.kind;
        t.a = c.a;
        t.dim = dim;
        t.max_fitted_r = m.max_fitted_r;
        std::vector<double> xs(rs.size());
        bool ok = true;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            xs[i] = t.abscissa(rs[i]);
            if (!std::isfinite(xs[i])) ok = false;
        }
        if (!ok) continue;
        t.fit = fit_line(xs, ys);
        t.intercept = t.fit.intercept;
        t.slope = std::min(0.0, t.fit.slope);  // enforce a non-increasing profile
        int k = c.kind == DecayModel::Kind::ExpExp ? 3 : 2;
        double rss = 0.0;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            double e = ys[i] - (t.intercept + t.slope * xs[i]);
            rss += e * e;
        }
        t.aic = n * std::log(rss / n + 1e-300) + 2.0 * k;
        if (!have || t.aic < m.aic - 1e-12) {
            m = t;
            have = true;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// profiles

Profile Profile::from_log(LogFn log_fn, std::vector<double> breakpoints, std::string name) {
    Profile p;
    p.log_fn_ = std::move(log_fn);
    std::sort(breakpoints.begin(), breakpoints.end());
    p.breaks_ = std::move(breakpoints);
    p.name_ = std::move(name);
    return p;
}

Profile Profile::step(double level, double cutoff) {
    double ll = level > 0.0 ? std::log(level) : -kInf;
    std::vector<double> br;
    if (std::isfinite(cutoff)) br.push_back(cutoff);
    std::ostringstream os;
    os << "step(" << level << ", " << cutoff << ")";
    return from_log([ll, cutoff](double r) { return r < cutoff ? ll : -kInf; }, br, os.str());
}

Profile Profile::from_model(const DecayModel& m) {
    if (m.kind == DecayModel::Kind::Step) {
        auto p = step(std::min(2.0, 8.0 * m.level), m.cutoff);
        p.name_ = "8x " + m.describe();
        return p;
    }
    double log8 = std::log(8.0);
    return from_log([m, log8](double r) { return log8 + m.log_value(r); }, {}, "8x " + m.describe());
}

double Profile::log_value(double r) const {
    static const double log2 = std::log(2.0);
    if (r <= 0.0) return log2;
    return std::min(log2, log_fn_(r));
}

double Profile::value(double r) const { return std::exp(log_value(r)); }

// ---------------------------------------------------------------------------
// integrals

namespace {

// log of the surface element of spheres of radius u in the model space.
double log_sphere(const Space& space, double u) {
    int d = space.dim();
    double c = std::log(d * unit_ball_volume(d));
    if (d == 1) return c;
    if (u <= 0.0) return -kInf;
    if (space.is_hyperbolic()) {
        double ls = u > 20.0 ? u - std::log(2.0) + std::log1p(-std::exp(-2.0 * u)) : std::log(std::sinh(u));
        return c + (d - 1) * ls;
    }
    return c + (d - 1) * std::log(u);
}

double gk(const std::function<double(double)>& f, double a, double b) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-10, &err);
}

struct SemiInfinite {
    double value = 0.0;
    bool finite = true;
    std::string note;
};

// Integral of exp(logf) over [a, upper) with upper possibly infinite.
// Segments double in length; integration stops once the integrand has
// decayed (contribution negligible) or is identically zero beyond the last
// breakpoint. A log-integrand that keeps growing, or overflow, is divergence.
SemiInfinite integrate_log(const std::function<double(double)>& logf, double a, double upper,
                           std::vector<double> breaks) {
    SemiInfinite res;
    std::vector<double> knots = {a};
    for (double b : breaks)
        if (b > a && b < upper) knots.push_back(b);
    for (int k = -6; k <= 62; ++k) {
        double x = a + std::ldexp(1.0, k);
        if (x < upper) knots.push_back(x);
    }
    if (std::isfinite(upper)) knots.push_back(upper);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    double last_break = breaks.empty() ? a : std::max(a, *std::max_element(breaks.begin(), breaks.end()));
    auto f = [&](double x) { return std::exp(logf(x)); };
    const double far = a + 4096.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        double lo = knots[i], hi = knots[i + 1];
        double part = gk(f, lo, hi);
        res.value += part;
        if (!std::isfinite(res.value)) {
            res.value = kInf;
            res.finite = false;
            res.note = "integrand overflows";
            return res;
        }
        if (std::isfinite(upper)) continue;
        if (lo >= last_break && logf(hi) == -kInf && logf(0.5 * (lo + hi)) == -kInf) return res;
        if (lo >= far) {
            if (logf(hi) >= logf(lo)) {
                res.value = kInf;
                res.finite = false;
                res.note = "integrand does not decay";
                return res;
            }
            if (part <= 1e-13 * res.value || res.value == 0.0) return res;
        }
    }
    if (!std::isfinite(upper)) {
        res.value = kInf;
        res.finite = false;
        res.note = "no convergence up to the largest radius";
    }
    return res;
}

std::vector<double> scaled(const std::vector<double>& v, double c, double shift = 0.0) {
    std::vector<double> out;
    for (double x : v) out.push_back(shift + c * x);
    return out;
}

// log(psi(s)^q) with 0^0 = 1.
double log_pow(const Profile& psi, double s, double q) {
    if (q == 0.0) return 0.0;
    double l = psi.log_value(s);
    return l == -kInf ? -kInf : q * l;
}

// Intrinsic volumes of a box with the given side lengths (elementary symmetric polynomials).
std::vector<double> box_intrinsic_volumes(const std::vector<double>& sides) {
    std::vector<double> e(sides.size() + 1, 0.0);
    e[0] = 1.0;
    for (double s : sides)
        for (std::size_t k = sides.size(); k >= 1; --k) e[k] += s * e[k - 1];
    return e;
}

// Integral of psi(|g|)^q over g in prod [0, m_i] (k = margins.size() <= 4).
double corner_integral(const Profile& psi, double q, const std::vector<double>& margins) {
    auto k = margins.size();
    std::function<double(std::size_t, double)> rec = [&](std::size_t level, double sq) -> double {
        if (level == k) return std::exp(log_pow(psi, std::sqrt(sq), q));
        double m = margins[level];
        if (m <= 0.0) return 0.0;
        auto inner = [&](double g) { return rec(level + 1, sq + g * g); };
        double err = 0.0;
        // Lower order once nested to keep the cost bounded.
        if (k - level >= 2)
            return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(inner, 0.0, m, 3, 1e-8, &err);
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inner, 0.0, m, 10, 1e-10, &err);
    };
    return rec(0, 0.0);
}

}  // namespace

IntegralResult integral_I_psi(const Profile& psi, const Space& space, double theta) {
    if (!(theta > 0.0)) throw InputError("theta must be positive");
    auto logf = [&](double u) { return theta * psi.log_value(0.5 * u) + log_sphere(space, u); };
    auto r = integrate_log(logf, 0.0, kInf, scaled(psi.breakpoints(), 2.0));
    IntegralResult out;
    out.finite = r.finite;
    out.value = r.finite ? std::max(1.0, r.value) : kInf;
    if (!r.finite) {
        out.note = "I_psi diverges: " + r.note;
        if (space.is_hyperbolic() && space.dim() > 1)
            out.note += "; hyperbolic growth condition on the profile fails";
    }
    return out;
}

IntegralResult integral_I_phi(const Profile& phi, const TimeMeasure& mu, double theta_prime) {
    if (!(theta_prime > 0.0)) throw InputError("theta' must be positive");
    IntegralResult out;
    double v = 0.0;
    switch (mu.kind) {
    case TimeMeasure::Kind::None:
        v = std::exp(theta_prime * phi.log_value(0.0));
        break;
    case TimeMeasure::Kind::Lebesgue:
    case TimeMeasure::Kind::PowerDensity: {
        double beta = mu.kind == TimeMeasure::Kind::Lebesgue ? 0.0 : mu.beta;
        auto f = [&](double t) {
            double l = phi.log_value(t);
            if (l == -kInf) return 0.0;
            return std::exp(theta_prime * l + beta * std::log(t));
        };
        // Geometric segments towards 0 absorb the t^beta singularity.
        std::vector<double> knots = {0.0};
        for (int k = -40; k < 0; ++k) knots.push_back(mu.horizon * std::ldexp(1.0, k));
        for (double b : phi.breakpoints())
            if (b > 0.0 && b < mu.horizon) knots.push_back(b);
        knots.push_back(mu.horizon);
        std::sort(knots.begin(), knots.end());
        for (std::size_t i = 0; i + 1 < knots.size(); ++i) v += gk(f, knots[i], knots[i + 1]);
        break;
    }
    }
    out.finite = std::isfinite(v);
    out.value = out.finite ? std::max(1.0, v) : kInf;
    if (!out.finite) out.note = "I_phi diverges";
    return out;
}

IntegralResult integral_G_q(const Profile& psi, const Space& space, const Window& window, Carrier carrier, double q,
                            const Window& domain_carrier) {
    if (!(q >= 0.0)) throw InputError("q must be non-negative");
    IntegralResult out;
    double core = std::pow(2.0, q) * window_volume(space, window);
    double halo = 0.0;
    int d = space.dim();

    auto diverged = [&](const std::string& note) {
        out.value = kInf;
        out.finite = false;
        out.note = note;
        return out;
    };

    if (space.kind() == SpaceKind::FlatTorus) {
        if (window.kind == Window::Kind::Whole && (carrier == Carrier::Domain)) {
            out.value = core;
            return out;
        }
        if (window.kind == Window::Kind::Whole && domain_carrier.kind == Window::Kind::Whole) {
            out.value = core;
            return out;
        }
        throw UnsupportedError("G_q halo on a torus sub-window is not supported");
    }

    if (window.kind == Window::Kind::Whole) {
        if (carrier == Carrier::FullSpace)
            return diverged("window equals a bounded carrier but the carrier is requested as full space");
        out.value = core;
        return out;
    }

    if (space.is_hyperbolic()) {
        if (window.kind != Window::Kind::Ball) throw UnsupportedError("hyperbolic windows must be balls");
        double lam = window.radius;
        double upper = kInf;
        if (carrier == Carrier::Domain) {
            upper = space.extent();
            if (domain_carrier.kind == Window::Kind::Ball) upper = std::min(upper, domain_carrier.radius);
        }
        if (upper <= lam) {
            out.value = core;
            return out;
        }
        auto logf = [&](double u) { return log_pow(psi, u - lam, q) + log_sphere(space, u); };
        auto r = integrate_log(logf, lam, upper, scaled(psi.breakpoints(), 1.0, lam));
        if (!r.finite) return diverged("G_q halo diverges: " + r.note);
        halo = r.value;
    } else {
        if (window.kind != Window::Kind::Box) throw UnsupportedError("Euclidean G_q needs a box window");
        std::vector<double> sides;
        for (int i = 0; i < d; ++i) sides.push_back(window.hi[static_cast<std::size_t>(i)] - window.lo[static_cast<std::size_t>(i)]);
        if (carrier == Carrier::FullSpace) {
            // Steiner: the set at distance s from the box has area sum_j j kappa_j s^{j-1} V_{d-j}.
            auto V = box_intrinsic_volumes(sides);
            auto logf = [&](double s) {
                double poly = 0.0;
                for (int j = 1; j <= d; ++j)
                    poly += j * unit_ball_volume(j) * std::pow(s, j - 1) * V[static_cast<std::size_t>(d - j)];
                return log_pow(psi, s, q) + std::log(poly);
            };
            auto r = integrate_log(logf, 0.0, kInf, psi.breakpoints());
            if (!r.finite) return diverged("G_q halo diverges: " + r.note);
            halo = r.value;
        } else {
            // Clipped to the carrier box: sum over coordinate patterns (inside / below / above).
            Window xb = domain_carrier.kind == Window::Kind::Box ? domain_carrier
                                                                 : Window::centered_cube(d, space.extent());
            std::vector<double> below(static_cast<std::size_t>(d)), above(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) {
                auto iu = static_cast<std::size_t>(i);
                below[iu] = std::max(0.0, window.lo[iu] - std::max(xb.lo[iu], -0.5 * space.extent()));
                above[iu] = std::max(0.0, std::min(xb.hi[iu], 0.5 * space.extent()) - window.hi[iu]);
            }
            int patterns = 1;
            for (int i = 0; i < d; ++i) patterns *= 3;
            for (int pat = 1; pat < patterns; ++pat) {
                int code = pat;
                double vol = 1.0;
                std::vector<double> margins;
                for (int i = 0; i < d; ++i) {
                    auto iu = static_cast<std::size_t>(i);
                    int st = code % 3;
                    code /= 3;
                    if (st == 0) vol *= sides[iu];
                    else margins.push_back(st == 1 ? below[iu] : above[iu]);
                }
                if (vol == 0.0) continue;
                halo += vol * corner_integral(psi, q, margins);
            }
        }
    }
    out.value = core + halo;
    out.finite = std::isfinite(out.value);
    if (!out.finite) out.note = "G_q diverges";
    return out;
}

HypConditionResult hyperbolic_condition(const std::function<double(double)>& tau, int dim, double theta) {
    HypConditionResult res;
    if (dim <= 1) {
        res.holds = true;
        res.liminf_ratio = kInf;
        return res;
    }
    double liminf = kInf;
    for (int k = 20; k <= 40; ++k) {
        double r = std::ldexp(1.0, k);
        liminf = std::min(liminf, theta * tau(r) / ((dim - 1) * r));
    }
    res.liminf_ratio = liminf;
    res.holds = liminf > 1.0;
    return res;
}

// ---------------------------------------------------------------------------
// bound assembly

Exponents Exponents::defaults(bool bounded_score) {
    Exponents e;
    if (bounded_score) {
        e.theta_k = 1.0 / 48;
        e.theta_prime_k = 1.0 / 24;
        e.q_k = 1.0 / 24;
        e.theta_w = 1.0 / 10;
        e.theta_prime_w = 3.0 / 40;
        e.q_w = 3.0 / 40;
    }
    return e;
}

namespace {

double need(const std::map<double, double>& m, double key, const std::string& what) {
    for (const auto& [k, v] : m)
        if (std::abs(k - key) <= 1e-12 * std::max(1.0, std::abs(key))) return v;
    std::ostringstream os;
    os << "missing ingredient: " << what << " at " << key;
    throw InputError(os.str());
}

}  // namespace

BoundReport assemble_theorem_bound(const BoundInputs& in, BoundForm form, bool bounded_score) {
    BoundReport rep;
    rep.exponents = Exponents::defaults(bounded_score);
    const auto& e = rep.exponents;
    if (!in.var_h) throw InputError("missing ingredient: Var H");
    if (!in.M5) throw InputError("missing ingredient: M5");
    double var = *in.var_h;
    if (!(var > 0.0)) throw InputError("Var H must be positive");
    double m5 = *in.M5;

    double ipk = need(in.I_psi, e.theta_k, "I_psi(theta_K)");
    double ipw = need(in.I_psi, e.theta_w, "I_psi(theta_W)");
    bool with_time = form == BoundForm::SpaceTime || (form == BoundForm::XEqualsW && in.time_dependent);
    double ifk = 1.0, ifw = 1.0;
    if (with_time) {
        ifk = need(in.I_phi, e.theta_prime_k, "I_phi(theta'_K)");
        ifw = need(in.I_phi, e.theta_prime_w, "I_phi(theta'_W)");
    }
    rep.C_K = in.c * std::pow(ipk, 3) * (with_time ? std::pow(ifk, 3.5) : 1.0);
    rep.C_W = in.c * std::pow(ipw, 3) * (with_time ? std::pow(ifw, 4.0) : 1.0);

    double gk_term, gw_term;
    if (form == BoundForm::XEqualsW) {
        if (!in.nu_w) throw InputError("missing ingredient: nu(W)");
        gk_term = std::sqrt(*in.nu_w);
        gw_term = *in.nu_w;
    } else {
        gk_term = std::sqrt(need(in.G, e.q_k, "G_q(q_K)"));
        gw_term = need(in.G, e.q_w, "G_q(q_W)");
    }
    double m5k = std::pow(m5, 0.4), m5w = std::pow(m5, 0.6);
    rep.d_k = rep.C_K * m5k * gk_term / var;
    rep.d_w = rep.d_k + rep.C_W * m5w * gw_term / std::pow(var, 1.5);

    auto& f = rep.factors;
    f["c"] = in.c;
    f["I_psi(theta_K)"] = ipk;
    f["I_psi(theta_W)"] = ipw;
    if (with_time) {
        f["I_phi(theta'_K)"] = ifk;
        f["I_phi(theta'_W)"] = ifw;
    }
    f["M5^(2/5)"] = m5k;
    f["M5^(3/5)"] = m5w;
    f[form == BoundForm::XEqualsW ? "nu(W)^(1/2)" : "G_qK^(1/2)"] = gk_term;
    f[form == BoundForm::XEqualsW ? "nu(W)" : "G_qW"] = gw_term;
    f["Var^-1"] = 1.0 / var;
    f["Var^-3/2"] = std::pow(var, -1.5);
    rep.modulo_universal_constant = true;
    return rep;
}

double mixed_moment_gap_bound(int q, double L_or_M, double alpha, bool bounded) {
    if (q < 1) throw InputError("q must be at least 1");
    if (!(alpha >= 0.0 && alpha <= 2.0)) throw InputError("alpha must lie in [0, 2]");
    if (!(L_or_M >= 0.0)) throw InputError("L or M must be non-negative");
    double qd = q;
    if (bounded) {
        double L = std::max(1.0, L_or_M);
        return 2.0 * qd * std::pow(L, qd) * alpha;
    }
    return (36.0 * qd + 16.0) * std::max(1.0, std::pow(L_or_M, qd / (qd + 1.0))) * std::pow(alpha, 1.0 / (qd + 1.0));
}

// ---------------------------------------------------------------------------
// panel geometry

std::vector<Point> default_base_points(const SpaceTimeDomain& domain) {
    const Space& sp = domain.space;
    int d = sp.dim();
    const Window& w = domain.window;
    std::vector<Point> out;
    if (w.kind == Window::Kind::Ball) {
        out.push_back(sp.origin());
        std::array<double, kMaxCoords> e1{};
        e1[0] = 1.0;
        std::span<const double> u(e1.data(), static_cast<std::size_t>(d));
        out.push_back(sp.polar_point(w.radius, u));
        std::array<double, kMaxCoords> e2{};
        e2[d > 1 ? 1 : 0] = d > 1 ? 1.0 : -1.0;
        out.push_back(sp.polar_point(0.5 * w.radius, std::span<const double>(e2.data(), static_cast<std::size_t>(d))));
        return out;
    }
    if (sp.kind() == SpaceKind::FlatTorus && w.kind == Window::Kind::Whole) {
        // Homogeneous: every point is a centre.
        out.push_back(sp.origin());
        return out;
    }
    Window box = w.kind == Window::Kind::Whole ? Window::centered_cube(d, sp.extent()) : w;
    Point c, b, k;
    c.n = b.n = k.n = d;
    for (int i = 0; i < d; ++i) {
        auto iu = static_cast<std::size_t>(i);
        c[i] = 0.5 * (box.lo[iu] + box.hi[iu]);
        b[i] = i == 0 ? box.hi[iu] : c[i];
        k[i] = box.hi[iu];
    }
    out = {c, b};
    if (d > 1) out.push_back(k);
    else out.push_back(Point{box.lo[0]});
    return out;
}

Point point_at_distance(const Space& space, const Point& z, double s, std::span<const double> u) {
    int d = space.dim();
    if (space.is_hyperbolic()) {
        // Geodesic from the origin, then the boost taking the origin to z.
        Point p = space.polar_point(s, u);
        double z0 = z[0];
        double dot = 0.0;
        for (int i = 1; i <= d; ++i) dot += z[i] * p[i];
        Point q;
        q.n = d + 1;
        q[0] = z0 * p[0] + dot;
        double coef = p[0] + dot / (1.0 + z0);
        for (int i = 1; i <= d; ++i) q[i] = p[i] + z[i] * coef;
        return q;
    }
    Point q;
    q.n = d;
    double L = space.extent();
    for (int i = 0; i < d; ++i) {
        double v = z[i] + s * u[static_cast<std::size_t>(i)];
        if (space.kind() == SpaceKind::FlatTorus) v -= L * std::nearbyint(v / L);
        else v = std::clamp(v, -0.5 * L, 0.5 * L);
        q[i] = v;
    }
    return q;
}

}  // namespace poisclt
