#include "poisclt/growth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "poisclt/errors.hpp"

namespace poisclt {

BirthGrowthConfig BirthGrowthConfig::make(double rho_min, double tail_rate, double t0, double bias_eps) {
    if (!(rho_min > 0.0)) throw ConfigError("rho_min must be > 0");
    if (!(tail_rate > 0.0)) throw ConfigError("tail_rate_C must be > 0");
    if (!(t0 > 0.0)) throw ConfigError("t0 must be > 0");
    if (!(bias_eps > 0.0)) throw ConfigError("bias_eps must be > 0");
    BirthGrowthConfig cfg{rho_min, tail_rate, t0, bias_eps};
    if (!check_speed_tail(cfg.speed_law(), rho_min, tail_rate, 100000, RandomStream(0x5eed, 7)))
        throw ConfigError("speed law violates the declared exponential tail");
    return cfg;
}

bool check_speed_tail(const MarkLaw& law, double rho_min, double rate, std::size_t draws, RandomStream rng) {
    std::vector<double> r(draws);
    for (auto& v : r) v = law.sample(rng);
    std::sort(r.begin(), r.end());
    double n = static_cast<double>(draws);
    for (int k = 0; k <= 40; ++k) {
        double x = rho_min + 0.25 * k / rate;
        auto above = static_cast<double>(r.end() - std::lower_bound(r.begin(), r.end(), x));
        double p = above / n;
        double b = std::min(1.0, std::exp(rate * rho_min - rate * x));
        if (p > b + 4.0 * std::sqrt(b * (1 - b) / n) + 1.0 / n) return false;
    }
    return true;
}

std::vector<double> effective_times(std::span<const Seed> seeds, std::size_t* ties) {
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (seeds[a].time != seeds[b].time) return seeds[a].time < seeds[b].time;
        return seeds[a].id < seeds[b].id;
    });
    std::vector<double> t(seeds.size());
    std::size_t n_ties = 0;
    double prev = -std::numeric_limits<double>::infinity();
    for (auto i : order) {
        double v = seeds[i].time;
        if (v <= prev) {
            v = prev + 1e-12;
            ++n_ties;
        }
        t[i] = v;
        prev = v;
    }
    if (ties) *ties = n_ties;
    return t;
}

namespace {

void check_seeds(std::span<const Seed> seeds) {
    for (const auto& s : seeds) {
        if (!(s.time >= 0.0) || !std::isfinite(s.time)) throw InputError("seed birth times must be finite and >= 0");
        if (!(s.speed > 0.0)) throw InputError("seed speeds must be > 0");
    }
}

// Dynamic uniform grid of accepted seeds.
struct AcceptedGrid {
    const Space* space = nullptr;
    int dim = 0;
    bool torus = false;
    std::array<double, kMaxCoords> lo{}, w{};
    std::array<std::int64_t, kMaxCoords> m{};
    double wmin = 0.0;
    std::int64_t mmin = 0;
    std::vector<std::vector<std::uint32_t>> cells;

    AcceptedGrid(const Space& sp, std::span<const Seed> seeds) : space(&sp), dim(sp.dim()) {
        torus = sp.kind() == SpaceKind::FlatTorus;
        std::array<double, kMaxCoords> hi{};
        if (torus) {
            lo.fill(-0.5 * sp.extent());
            hi.fill(0.5 * sp.extent());
        } else {
            lo.fill(std::numeric_limits<double>::infinity());
            hi.fill(-std::numeric_limits<double>::infinity());
            for (const auto& s : seeds)
                for (int i = 0; i < dim; ++i) {
                    auto k = static_cast<std::size_t>(i);
                    lo[k] = std::min(lo[k], s.loc[i]);
                    hi[k] = std::max(hi[k], s.loc[i]);
                }
        }
        double per = std::max(1.0, std::floor(std::pow(static_cast<double>(seeds.size()) / 2.0, 1.0 / dim)));
        std::int64_t total = 1;
        wmin = std::numeric_limits<double>::infinity();
        mmin = std::numeric_limits<std::int64_t>::max();
        for (int i = 0; i < dim; ++i) {
            auto k = static_cast<std::size_t>(i);
            double span = std::max(hi[k] - lo[k], 1e-9);
            m[k] = static_cast<std::int64_t>(per);
            w[k] = span / per;
            if (!torus) w[k] *= 1.0 + 1e-9;
            wmin = std::min(wmin, w[k]);
            mmin = std::min(mmin, m[k]);
            total *= m[k];
        }
        cells.resize(static_cast<std::size_t>(total));
    }

    std::int64_t coord(const Point& p, int i) const {
        auto k = static_cast<std::size_t>(i);
        double v = p[i];
        if (torus) v -= space->extent() * std::floor((v - lo[k]) / space->extent());
        auto c = static_cast<std::int64_t>(std::floor((v - lo[k]) / w[k]));
        return std::clamp<std::int64_t>(c, 0, m[k] - 1);
    }

    std::size_t flat(const std::array<std::int64_t, kMaxCoords>& c) const {
        std::size_t f = 0;
        for (int i = dim - 1; i >= 0; --i) f = f * static_cast<std::size_t>(m[static_cast<std::size_t>(i)]) +
                                             static_cast<std::size_t>(c[static_cast<std::size_t>(i)]);
        return f;
    }

    void insert(const Point& p, std::uint32_t idx) {
        std::array<std::int64_t, kMaxCoords> c{};
        for (int i = 0; i < dim; ++i) c[static_cast<std::size_t>(i)] = coord(p, i);
        cells[flat(c)].push_back(idx);
    }

    // Visits cells at Chebyshev ring k around p; returns false if the ring lies outside the grid.
    template <class F>
    bool ring(const Point& p, std::int64_t k, F&& f) const {
        std::array<std::int64_t, kMaxCoords> base{}, off{};
        for (int i = 0; i < dim; ++i) {
            base[static_cast<std::size_t>(i)] = coord(p, i);
            off[static_cast<std::size_t>(i)] = -k;
        }
        bool any = false;
        while (true) {
            std::int64_t cheb = 0;
            for (int i = 0; i < dim; ++i) cheb = std::max(cheb, std::abs(off[static_cast<std::size_t>(i)]));
            if (cheb == k) {
                std::array<std::int64_t, kMaxCoords> c{};
                bool inside = true;
                for (int i = 0; i < dim; ++i) {
                    auto q = static_cast<std::size_t>(i);
                    std::int64_t v = base[q] + off[q];
                    if (torus) v = ((v % m[q]) + m[q]) % m[q];
                    else if (v < 0 || v >= m[q]) inside = false;
                    c[q] = v;
                }
                if (inside) {
                    any = true;
                    if (f(cells[flat(c)])) return true;
                }
            }
            int i = 0;
            for (; i < dim; ++i) {
                auto q = static_cast<std::size_t>(i);
                if (++off[q] <= k) break;
                off[q] = -k;
            }
            if (i == dim) break;
        }
        return any;
    }
};

}  // namespace

AcceptanceResult simulate_acceptance(const Space& space, std::span<const Seed> seeds, double t0) {
    check_seeds(seeds);
    AcceptanceResult res;
    res.accepted.assign(seeds.size(), 0);
    if (seeds.empty()) return res;
    std::vector<double> t = effective_times(seeds, &res.ties_perturbed);
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });

    const bool use_grid = !space.is_hyperbolic() && seeds.size() >= 64;
    std::optional<AcceptedGrid> grid;
    if (use_grid) grid.emplace(space, seeds);
    std::vector<std::uint32_t> accepted;
    double rmax = 0.0, t_first = 0.0;

    for (std::size_t j : order) {
        if (t[j] > t0) continue;
        const Point& z = seeds[j].loc;
        auto covers = [&](std::uint32_t i) {
            return distance(space, seeds[i].loc, z) < (t[j] - t[i]) * seeds[i].speed;
        };
        bool covered = false;
        if (!accepted.empty()) {
            double reach = (t[j] - t_first) * rmax;
            bool brute = !grid;
            if (grid) {
                for (std::int64_t k = 0;; ++k) {
                    if (k >= 1 && static_cast<double>(k - 1) * grid->wmin >= reach) break;
                    if (grid->torus && 2 * k + 1 > grid->mmin) {
                        brute = true;
                        break;
                    }
                    bool hit = false;
                    bool inside = grid->ring(z, k, [&](const std::vector<std::uint32_t>& cell) {
                        for (auto i : cell)
                            if (covers(i)) {
                                hit = true;
                                return true;
                            }
                        return false;
                    });
                    if (hit) {
                        covered = true;
                        break;
                    }
                    if (!inside && k > 0) break;
                }
            }
            if (brute && !covered)
                for (auto i : accepted)
                    if (covers(i)) {
                        covered = true;
                        break;
                    }
        }
        if (covered) continue;
        if (accepted.empty()) t_first = t[j];
        res.accepted[j] = 1;
        ++res.count;
        accepted.push_back(static_cast<std::uint32_t>(j));
        rmax = std::max(rmax, seeds[j].speed);
        if (grid) grid->insert(z, static_cast<std::uint32_t>(j));
    }
    return res;
}

bool verify_acceptance(const Space& space, std::span<const Seed> seeds, std::span<const char> accepted, double t0) {
    if (accepted.size() != seeds.size()) return false;
    std::vector<double> t = effective_times(seeds);
    for (std::size_t j = 0; j < seeds.size(); ++j) {
        bool covered = false;
        for (std::size_t i = 0; i < seeds.size() && !covered; ++i)
            covered = accepted[i] && t[i] < t[j] &&
                      distance(space, seeds[i].loc, seeds[j].loc) < (t[j] - t[i]) * seeds[i].speed;
        bool should = !covered && t[j] <= t0;
        if (should != static_cast<bool>(accepted[j])) return false;
    }
    return true;
}

std::vector<Seed> seeds_from(const Configuration& chi) {
    std::vector<Seed> out;
    out.reserve(chi.size());
    for (const auto& p : chi) {
        if (!p.time) throw InputError("birth-growth seeds need a birth time");
        out.push_back({p.loc, *p.time, p.mark, p.id});
    }
    return out;
}

std::vector<double> BirthGrowthScore::evaluate_many(const Configuration& chi,
                                                    std::span<const std::size_t> positions) const {
    auto seeds = seeds_from(chi);
    auto acc = simulate_acceptance(chi.space(), seeds, cfg_.t0);
    std::vector<double> out;
    out.reserve(positions.size());
    for (auto pos : positions) out.push_back(acc.accepted[pos] ? 1.0 : 0.0);
    return out;
}

double coverage_time(const Space& space, std::span<const Seed> seeds, const AcceptanceResult& acc, const Point& z) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> t = effective_times(seeds);
    for (std::size_t i = 0; i < seeds.size(); ++i)
        if (acc.accepted[i]) best = std::min(best, t[i] + distance(space, seeds[i].loc, z) / seeds[i].speed);
    return best;
}

double pick_time_truncation(double nu_w, double eps, double rate) {
    if (!(rate > 0.0)) throw ConfigError("time-localization rate must be > 0");
    if (!(nu_w > 0.0) || !(eps > 0.0)) throw ConfigError("nu(W) and the bias budget must be > 0");
    return std::max(4.0, std::log(nu_w / eps) / rate);
}

}  // namespace poisclt
