#include "poisclt/process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poisclt/errors.hpp"
#include "poisclt/parallel.hpp"
#include "poisclt/scores.hpp"

namespace poisclt {

TimeMeasure TimeMeasure::lebesgue(double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("time horizon must be finite and > 0");
    return {Kind::Lebesgue, horizon, 0.0};
}

TimeMeasure TimeMeasure::power_density(double beta, double h_max) {
    if (!(beta > -1.0)) throw ConfigError("weight exponent beta must be > -1");
    if (!(h_max > 0.0) || !std::isfinite(h_max)) throw ConfigError("h_max must be finite and > 0");
    return {Kind::PowerDensity, h_max, beta};
}

double TimeMeasure::total_mass() const {
    switch (kind) {
        case Kind::None: return 1.0;
        case Kind::Lebesgue: return horizon;
        case Kind::PowerDensity: return std::pow(horizon, beta + 1.0) / (beta + 1.0);
    }
    return 0.0;
}

double TimeMeasure::sample(RandomStream& rng) const {
    switch (kind) {
        case Kind::None: return 0.0;
        case Kind::Lebesgue: return horizon * rng.uniform();
        case Kind::PowerDensity: return horizon * std::pow(rng.uniform(), 1.0 / (beta + 1.0));
    }
    return 0.0;
}

double TimeMeasure::mass_below(double s) const {
    switch (kind) {
        case Kind::None: return s > 0.0 ? 1.0 : 0.0;
        case Kind::Lebesgue: return std::clamp(s, 0.0, horizon);
        case Kind::PowerDensity: {
            double c = std::clamp(s, 0.0, horizon);
            return std::pow(c, beta + 1.0) / (beta + 1.0);
        }
    }
    return 0.0;
}

MarkLaw MarkLaw::point_mass(double m) {
    MarkLaw q;
    q.kind = Kind::PointMass;
    q.value = m;
    return q;
}

MarkLaw MarkLaw::shifted_exponential(double rho_min, double rate) {
    if (!(rho_min > 0.0)) throw ConfigError("rho_min must be > 0");
    if (!(rate > 0.0)) throw ConfigError("tail rate C must be > 0");
    MarkLaw q;
    q.kind = Kind::ShiftedExponential;
    q.rho_min = rho_min;
    q.rate = rate;
    return q;
}

MarkLaw MarkLaw::table(std::vector<double> values, std::vector<double> weights) {
    if (values.empty() || values.size() != weights.size()) throw ConfigError("mark table needs matching values and weights");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ConfigError("mark table weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("mark table weights sum to 0");
    MarkLaw q;
    q.kind = Kind::Table;
    q.values = std::move(values);
    double acc = 0.0;
    for (double w : weights) {
        acc += w / total;
        q.cumulative.push_back(acc);
    }
    q.cumulative.back() = 1.0;
    return q;
}

double MarkLaw::sample(RandomStream& rng) const {
    switch (kind) {
        case Kind::PointMass: return value;
        case Kind::ShiftedExponential: return rho_min + rng.exponential(rate);
        case Kind::Table: {
            double u = rng.uniform();
            auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
            return values[static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                                            static_cast<std::ptrdiff_t>(values.size()) - 1))];
        }
    }
    return 0.0;
}

double MarkLaw::tail(double r) const {
    switch (kind) {
        case Kind::PointMass: return value >= r ? 1.0 : 0.0;
        case Kind::ShiftedExponential: return r <= rho_min ? 1.0 : std::exp(-rate * (r - rho_min));
        case Kind::Table: {
            double p = 0.0, prev = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (values[i] >= r) p += cumulative[i] - prev;
                prev = cumulative[i];
            }
            return p;
        }
    }
    return 0.0;
}

double SpaceTimeDomain::window_volume() const { return poisclt::window_volume(space, window); }
double SpaceTimeDomain::carrier_volume() const { return poisclt::window_volume(space, carrier); }

void SpaceTimeDomain::validate() const {
    if (!window_within(space, window, carrier)) throw ConfigError("window must lie inside the carrier");
    double v = window_volume();
    if (!std::isfinite(v) || !(v > 0.0)) throw ConfigError("window volume must be finite and > 0");
    if (time.kind == TimeMeasure::Kind::PowerDensity && !(time.beta > -1.0))
        throw ConfigError("weight exponent beta must be > -1");
    if (time.kind != TimeMeasure::Kind::None && !(time.horizon > 0.0 && std::isfinite(time.horizon)))
        throw ConfigError("time horizon must be finite and > 0");
}

DomainPtr make_domain(SpaceTimeDomain d) {
    d.validate();
    return std::make_shared<const SpaceTimeDomain>(std::move(d));
}

Configuration::Configuration(DomainPtr domain, std::vector<MarkedPoint> points)
    : domain_(std::move(domain)), points_(std::move(points)) {
    std::sort(points_.begin(), points_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < points_.size(); ++i)
        if (points_[i].id == points_[i - 1].id) throw InputError("duplicate point id " + std::to_string(points_[i].id));
}

std::ptrdiff_t Configuration::find(std::int64_t id) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), id,
                               [](const MarkedPoint& p, std::int64_t v) { return p.id < v; });
    if (it == points_.end() || it->id != id) return -1;
    return it - points_.begin();
}

std::vector<Point> Configuration::locations() const {
    std::vector<Point> out;
    out.reserve(points_.size());
    for (const auto& p : points_) out.push_back(p.loc);
    return out;
}

std::vector<std::int64_t> Configuration::ids() const {
    std::vector<std::int64_t> out;
    out.reserve(points_.size());
    for (const auto& p : points_) out.push_back(p.id);
    return out;
}

MarkedPoint sample_marked_point(const SpaceTimeDomain& domain, const Window& region, std::int64_t id,
                                RandomStream& rng) {
    MarkedPoint p;
    p.loc = sample_uniform(domain.space, region, 1, rng).front();
    if (domain.is_space_time()) p.time = domain.time.sample(rng);
    p.mark = domain.marks.sample(rng);
    p.id = id;
    return p;
}

Configuration sample_poisson(const DomainPtr& domain, const Window& region, RandomStream& rng) {
    double mass = window_volume(domain->space, region) * domain->time.total_mass();
    if (!std::isfinite(mass)) throw ConfigError("intensity mass is infinite after truncation");
    if (!(mass > 0.0)) return Configuration(domain);
    auto count = rng.poisson(mass);
    std::vector<MarkedPoint> pts;
    pts.reserve(count);
    auto locs = sample_uniform(domain->space, region, count, rng);
    for (std::uint64_t i = 0; i < count; ++i) {
        MarkedPoint p;
        p.loc = locs[i];
        if (domain->is_space_time()) p.time = domain->time.sample(rng);
        p.mark = domain->marks.sample(rng);
        p.id = static_cast<std::int64_t>(i);
        pts.push_back(p);
    }
    return Configuration(domain, std::move(pts));
}

Configuration sample_poisson(const DomainPtr& domain, RandomStream& rng) {
    return sample_poisson(domain, domain->carrier, rng);
}

Configuration augment(const Configuration& config, std::span<const MarkedPoint> extra) {
    if (extra.empty()) return config;
    std::vector<MarkedPoint> pts = config.points();
    pts.insert(pts.end(), extra.begin(), extra.end());
    return Configuration(config.domain_ptr(), std::move(pts));
}

Configuration augment(const Configuration& config, const MarkedPoint& extra) {
    return augment(config, std::span<const MarkedPoint>(&extra, 1));
}

Configuration restrict_space(const Configuration& config, const Point& center, double r) {
    std::vector<MarkedPoint> pts;
    if (r > 0.0) {
        for (const auto& p : config)
            if (distance(config.space(), center, p.loc) < r) pts.push_back(p);
    }
    return Configuration(config.domain_ptr(), std::move(pts));
}

Configuration restrict_time(const Configuration& config, double s) {
    if (!config.domain().is_space_time()) throw DomainError("time restriction on a space-only domain");
    std::vector<MarkedPoint> pts;
    for (const auto& p : config)
        if (p.time && *p.time < s) pts.push_back(p);
    return Configuration(config.domain_ptr(), std::move(pts));
}

MeckeResult mecke_check(const DomainPtr& domain, const ScoreFamily& score, std::size_t n_outer,
                        std::size_t n_inner, RandomStream rng) {
    if (n_outer < 2 || n_inner < 1) throw InputError("mecke_check needs n_outer >= 2 and n_inner >= 1");
    std::vector<double> lhs(n_outer), rhs(n_outer);
    const double weight = domain->window_volume() * domain->time.total_mass();
    RandomStream left = rng.stream(rng.stream_id() * 2 + 1);
    RandomStream right = rng.stream(rng.stream_id() * 2 + 2);
    parallel_for(n_outer, [&](std::size_t i) {
        RandomStream r1 = left.substream(static_cast<std::uint32_t>(i));
        lhs[i] = score_sum(score, sample_poisson(domain, r1));
        RandomStream r2 = right.substream(static_cast<std::uint32_t>(i));
        MarkedPoint z = sample_marked_point(*domain, domain->window, kExtraIdBase, r2);
        double acc = 0.0;
        for (std::size_t j = 0; j < n_inner; ++j) acc += score.evaluate(z, sample_poisson(domain, r2));
        rhs[i] = weight * acc / static_cast<double>(n_inner);
    });
    auto a = mean_stderr(lhs);
    auto b = mean_stderr(rhs);
    return {a.mean, b.mean, a.std_error, b.std_error};
}

}  // namespace poisclt
