#include "poisclt/laguerre.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "poisclt/errors.hpp"

namespace poisclt {

void LaguerreConfig::validate() const {
    if (!(t > 0.0)) throw ConfigError("laguerre: t must be > 0");
    if (!(beta > -1.0)) throw ConfigError("laguerre: beta must be > -1");
    if (!(margin >= 0.0)) throw ConfigError("laguerre: margin must be >= 0");
    if (!(h_max > 0.0)) throw ConfigError("laguerre: h_max must be > 0");
    if (dim < 1) throw ConfigError("laguerre: dim must be >= 1");
    if (dim > 2) throw UnsupportedError("laguerre retention is implemented for d = 1, 2");
}

namespace {

// Half-plane n.u <= c in coordinates u = w - x (n not normalized in d=1).
struct HalfSpace {
    double nx = 0.0, ny = 0.0, c = 0.0;
};

void check_dims(const WeightedPoint& p, std::span<const WeightedPoint> chi) {
    if (p.x.n < 1 || p.x.n > 2) throw UnsupportedError("laguerre retention needs d = 1 or 2");
    for (const auto& z : chi)
        if (z.x.n != p.x.n) throw InputError("laguerre: mixed dimensions");
}

// Constraints of p's cell from the competitors within distance r of p.
std::vector<HalfSpace> constraints(const WeightedPoint& p, std::span<const WeightedPoint> chi, double t, double r,
                                   bool& trivially_empty) {
    std::vector<HalfSpace> out;
    trivially_empty = false;
    out.reserve(chi.size());
    for (const auto& z : chi) {
        if (z.id == p.id) continue;
        double ax = z.x[0] - p.x[0];
        double ay = p.x.n > 1 ? z.x[1] - p.x[1] : 0.0;
        double a2 = ax * ax + ay * ay;
        if (!(std::sqrt(a2) < r)) continue;
        double b = 0.5 * a2 + t * (z.h - p.h);
        if (a2 == 0.0) {
            if (b < -kLaguerreTol * (1.0 + std::abs(t * z.h) + std::abs(t * p.h))) trivially_empty = true;
            continue;
        }
        if (p.x.n == 1) {
            out.push_back({ax, 0.0, b});
        } else {
            double na = std::sqrt(a2);
            out.push_back({ax / na, ay / na, b / na});
        }
    }
    return out;
}

bool feasible_1d(const std::vector<HalfSpace>& hs, double lo, double hi) {
    for (const auto& h : hs) {
        double v = h.c / h.nx;
        if (h.nx > 0) hi = std::min(hi, v);
        else lo = std::max(lo, v);
    }
    return lo <= hi + kLaguerreTol * (1.0 + std::abs(lo) + std::abs(hi));
}

bool satisfied(const HalfSpace& h, double ux, double uy) {
    return h.nx * ux + h.ny * uy <= h.c + kLaguerreTol * (1.0 + std::abs(h.c) + std::abs(ux) + std::abs(uy));
}

// Seidel's randomized incremental LP, feasibility only, inside |u_i| <= M.
bool feasible_2d(std::vector<HalfSpace> hs, std::uint64_t seed) {
    if (hs.empty()) return true;
    double scale = 1.0;
    for (const auto& h : hs) scale = std::max(scale, std::abs(h.c));
    const double M = 1e4 * scale;
    RandomStream rng(seed, 0x5e1d);
    std::shuffle(hs.begin(), hs.end(), rng);
    const double cx = 1.0, cy = 0.6180339887498949;
    const HalfSpace box[4] = {{1, 0, M}, {-1, 0, M}, {0, 1, M}, {0, -1, M}};
    double vx = -M, vy = -M;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        if (satisfied(hs[i], vx, vy)) continue;
        const HalfSpace& h = hs[i];
        double ox = h.nx * h.c, oy = h.ny * h.c;
        double dx = -h.ny, dy = h.nx;
        double slo = -std::numeric_limits<double>::infinity(), shi = std::numeric_limits<double>::infinity();
        auto clip = [&](const HalfSpace& g) {
            double coef = g.nx * dx + g.ny * dy;
            double rhs = g.c - (g.nx * ox + g.ny * oy);
            double tol = kLaguerreTol * (1.0 + std::abs(g.c) + std::abs(ox) + std::abs(oy));
            if (std::abs(coef) < 1e-14) return rhs >= -tol;
            if (coef > 0) shi = std::min(shi, (rhs + tol) / coef);
            else slo = std::max(slo, (rhs + tol) / coef);
            return true;
        };
        for (const auto& g : box)
            if (!clip(g)) return false;
        for (std::size_t j = 0; j < i; ++j)
            if (!clip(hs[j])) return false;
        if (slo > shi) return false;
        double dir = cx * dx + cy * dy;
        double s = dir > 0 ? slo : shi;
        if (!std::isfinite(s)) s = std::isfinite(slo) ? slo : shi;
        vx = ox + s * dx;
        vy = oy + s * dy;
    }
    return true;
}

// Square [-r, r]^2 clipped by the half-planes; then checks for a point at distance < r from 0.
bool polygon_meets_open_disk(const std::vector<HalfSpace>& hs, double r) {
    std::vector<std::array<double, 2>> poly = {{-r, -r}, {r, -r}, {r, r}, {-r, r}};
    for (const auto& h : hs) {
        std::vector<std::array<double, 2>> next;
        auto val = [&](const std::array<double, 2>& q) {
            return h.nx * q[0] + h.ny * q[1] - h.c - kLaguerreTol * (1.0 + std::abs(h.c) + r);
        };
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const auto& a = poly[i];
            const auto& b = poly[(i + 1) % poly.size()];
            double va = val(a), vb = val(b);
            if (va <= 0) next.push_back(a);
            if ((va <= 0) != (vb <= 0)) {
                double s = va / (va - vb);
                next.push_back({a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])});
            }
        }
        poly.swap(next);
        if (poly.empty()) return false;
    }
    bool inside = true;
    for (const auto& h : hs) inside = inside && h.c >= -kLaguerreTol * (1.0 + std::abs(h.c));
    if (inside) return true;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        double ex = b[0] - a[0], ey = b[1] - a[1];
        double len2 = ex * ex + ey * ey;
        double s = len2 > 0 ? std::clamp(-(a[0] * ex + a[1] * ey) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, std::hypot(a[0] + s * ex, a[1] + s * ey));
    }
    return best < r;
}

}  // namespace

bool is_retained(const WeightedPoint& p, std::span<const WeightedPoint> chi, const LaguerreConfig& cfg) {
    return is_retained_within(p, chi, std::numeric_limits<double>::infinity(), cfg);
}

bool is_retained_within(const WeightedPoint& p, std::span<const WeightedPoint> chi, double r,
                        const LaguerreConfig& cfg) {
    check_dims(p, chi);
    if (!(r > 0.0)) return false;
    bool empty = false;
    auto hs = constraints(p, chi, cfg.t, r, empty);
    if (empty) return false;
    const bool bounded = std::isfinite(r);
    if (p.x.n == 1) {
        if (!bounded) return feasible_1d(hs, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        for (const auto& h : hs) {
            double v = h.c / h.nx;
            if (h.nx > 0) hi = std::min(hi, v);
            else lo = std::max(lo, v);
        }
        // closed cell [lo, hi] against the open interval (-r, r)
        return lo <= hi + kLaguerreTol * (1.0 + std::abs(lo) + std::abs(hi)) && lo < r && hi > -r;
    }
    if (!bounded) return feasible_2d(std::move(hs), cfg.lp_seed ^ static_cast<std::uint64_t>(p.id));
    return polygon_meets_open_disk(hs, r);
}

std::vector<char> retained_flags(std::span<const WeightedPoint> chi, const LaguerreConfig& cfg) {
    std::vector<char> flags(chi.size(), 0);
    if (chi.empty()) return flags;
    if (chi.front().x.n != 1) {
        for (std::size_t i = 0; i < chi.size(); ++i) flags[i] = is_retained(chi[i], chi, cfg) ? 1 : 0;
        return flags;
    }
    // d = 1: f_i(w) - w^2/(2t) is the line m_i w + c_i; retained iff the line reaches the lower envelope
    const double t = cfg.t;
    std::vector<double> m(chi.size()), c(chi.size());
    for (std::size_t i = 0; i < chi.size(); ++i) {
        m[i] = -chi[i].x[0] / t;
        c[i] = chi[i].x[0] * chi[i].x[0] / (2 * t) + chi[i].h;
    }
    std::vector<std::size_t> order(chi.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (m[a] != m[b]) return m[a] > m[b];
        if (c[a] != c[b]) return c[a] < c[b];
        return chi[a].id < chi[b].id;
    });
    auto tol = [&](double v) { return kLaguerreTol * (1.0 + std::abs(v)); };
    // equal slopes: only the lowest (and exact ties with it) can survive
    std::vector<std::size_t> reps;
    std::vector<std::vector<std::size_t>> group;
    for (std::size_t k = 0; k < order.size(); ++k) {
        std::size_t i = order[k];
        if (!reps.empty() && m[reps.back()] == m[i]) {
            if (c[i] <= c[reps.back()] + tol(c[reps.back()])) group.back().push_back(i);
            continue;
        }
        reps.push_back(i);
        group.push_back({i});
    }
    auto cross = [&](std::size_t a, std::size_t b) { return (c[b] - c[a]) / (m[a] - m[b]); };
    std::vector<std::size_t> hull;  // indices into reps
    for (std::size_t k = 0; k < reps.size(); ++k) {
        std::size_t l = reps[k];
        while (hull.size() >= 2) {
            std::size_t a = reps[hull[hull.size() - 2]], b = reps[hull.back()];
            double w = cross(a, l);
            double va = m[a] * w + c[a];
            double vb = m[b] * w + c[b];
            if (vb > va + tol(va)) hull.pop_back();
            else break;
        }
        hull.push_back(k);
    }
    for (auto k : hull)
        for (auto i : group[k]) flags[i] = 1;
    return flags;
}

std::size_t count_thinned(std::span<const WeightedPoint> chi, const Space& space, const Window& window,
                          const LaguerreConfig& cfg) {
    auto flags = retained_flags(chi, cfg);
    std::size_t n = 0;
    for (std::size_t i = 0; i < chi.size(); ++i)
        if (flags[i] && window_contains(space, window, chi[i].x)) ++n;
    return n;
}

std::vector<WeightedPoint> weighted_points(const Configuration& chi) {
    std::vector<WeightedPoint> out;
    out.reserve(chi.size());
    for (const auto& p : chi) {
        if (!p.time) throw InputError("laguerre points need a weight coordinate");
        out.push_back({p.loc, *p.time, p.id});
    }
    return out;
}

DomainPtr laguerre_domain(const LaguerreConfig& cfg, double lambda) {
    cfg.validate();
    double side = std::pow(lambda, 1.0 / cfg.dim);
    SpaceTimeDomain d;
    d.space = Space::euclidean_box(cfg.dim, side + 2.0 * cfg.margin);
    d.window = Window::centered_cube(cfg.dim, side);
    d.carrier = Window::whole();
    d.time = TimeMeasure::power_density(cfg.beta, cfg.h_max);
    d.marks = MarkLaw::point_mass(0.0);
    return make_domain(std::move(d));
}

LaguerreScore::LaguerreScore(LaguerreConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<double> LaguerreScore::evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const {
    if (chi.space().kind() != SpaceKind::EuclideanBox) throw UnsupportedError("laguerre needs a Euclidean space");
    auto wp = weighted_points(chi);
    std::vector<double> out;
    out.reserve(positions.size());
    if (chi.space().dim() == 1) {
        auto flags = retained_flags(wp, cfg_);
        for (auto pos : positions) out.push_back(flags[pos] ? 1.0 : 0.0);
        return out;
    }
    for (auto pos : positions) out.push_back(is_retained(wp[pos], wp, cfg_) ? 1.0 : 0.0);
    return out;
}

double LaguerreScore::evaluate_space_restricted(const MarkedPoint& p, const Configuration& chi, double r) const {
    if (!p.time) throw InputError("laguerre points need a weight coordinate");
    auto wp = weighted_points(chi);
    return is_retained_within({p.loc, *p.time, p.id}, wp, r, cfg_) ? 1.0 : 0.0;
}

}  // namespace poisclt
