#include "poisclt/scores.hpp"

#include <cmath>
#include <stdexcept>

#include "poisclt/errors.hpp"
#include "poisclt/parallel.hpp"

namespace poisclt {

Configuration with_point(const Configuration& chi, const MarkedPoint& p, std::size_t& pos) {
    auto found = chi.find(p.id);
    if (found >= 0) {
        pos = static_cast<std::size_t>(found);
        return chi;
    }
    Configuration out = augment(chi, p);
    pos = static_cast<std::size_t>(out.find(p.id));
    return out;
}

double ScoreFamily::evaluate(const MarkedPoint& p, const Configuration& chi) const {
    std::size_t pos = 0;
    Configuration full = with_point(chi, p, pos);
    return evaluate_many(full, std::span<const std::size_t>(&pos, 1)).front();
}

double ScoreFamily::evaluate_space_restricted(const MarkedPoint& p, const Configuration& chi, double r) const {
    return evaluate(p, restrict_space(chi, p.loc, r));
}

double ScoreFamily::evaluate_time_restricted(const MarkedPoint& p, const Configuration& chi, double s) const {
    if (!chi.domain().is_space_time()) throw DomainError("time restriction on a space-only domain");
    if (!p.time) throw InputError("point has no time coordinate");
    if (!(*p.time < s)) return 0.0;
    return evaluate(p, restrict_time(chi, s));
}

std::vector<std::size_t> window_positions(const Configuration& chi) {
    std::vector<std::size_t> out;
    const auto& dom = chi.domain();
    for (std::size_t i = 0; i < chi.size(); ++i)
        if (window_contains(dom.space, dom.window, chi[i].loc)) out.push_back(i);
    return out;
}

double score_sum(const ScoreFamily& score, const Configuration& chi) {
    auto pos = window_positions(chi);
    if (pos.empty()) return 0.0;
    auto vals = score.evaluate_many(chi, pos);
    return pairwise_sum(vals);
}

namespace {

SpatialIndex build_index(const Configuration& chi, double cell) {
    auto locs = chi.locations();
    auto ids = chi.ids();
    return SpatialIndex(chi.space(), locs, ids, cell);
}

}  // namespace

// ---- U-statistics

double UStatKernel::sup_norm_hint() const {
    switch (kind) {
        case Kind::Indicator: return std::abs(weight);
        case Kind::PowerLength: {
            // sum of k(k-1)/2 distances each < delta
            double pairs = 0.5 * order * (order - 1);
            return std::abs(weight) * std::pow(pairs * delta, alpha);
        }
        case Kind::Custom: return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

UStatScore::UStatScore(UStatKernel kernel) : kernel_(std::move(kernel)) {
    if (kernel_.order < 2) throw InputError("U-statistic order must be >= 2");
    if (kernel_.order > 4) throw UnsupportedError("U-statistic order > 4 not supported");
    if (!(kernel_.delta > 0.0)) throw InputError("U-statistic range delta must be > 0");
    if (kernel_.kind == UStatKernel::Kind::PowerLength && !(kernel_.alpha >= 0.0))
        throw InputError("power must be >= 0");
    if (kernel_.kind == UStatKernel::Kind::Custom && !kernel_.custom) throw InputError("custom kernel missing");
}

double UStatScore::kernel_value(std::span<const MarkedPoint* const> pts, const Space& space) const {
    double total_len = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double d = distance(space, pts[i]->loc, pts[j]->loc);
            if (!(d < kernel_.delta)) return 0.0;
            total_len += d;
        }
    switch (kernel_.kind) {
        case UStatKernel::Kind::Indicator: return kernel_.weight;
        case UStatKernel::Kind::PowerLength: return kernel_.weight * std::pow(total_len, kernel_.alpha);
        case UStatKernel::Kind::Custom: return kernel_.custom(pts, space);
    }
    return 0.0;
}

std::optional<double> UStatScore::bound() const {
    return std::nullopt;  // grows with the neighbour count
}

std::vector<double> UStatScore::evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const {
    std::vector<double> out(positions.size(), 0.0);
    if (chi.empty()) return out;
    SpatialIndex index = build_index(chi, kernel_.delta);
    const int m = kernel_.order - 1;
    const double sup = kernel_.sup_norm_hint();
    for (std::size_t q = 0; q < positions.size(); ++q) {
        const MarkedPoint& p = chi[positions[q]];
        std::vector<std::size_t> nb;
        for (auto j : index.within(p.loc, kernel_.delta))
            if (chi[j].id != p.id) nb.push_back(j);
        const std::size_t n = nb.size();
        std::array<const MarkedPoint*, 4> tuple{&p, nullptr, nullptr, nullptr};
        std::array<std::size_t, 3> idx{};
        double acc = 0.0;
        // ordered tuples of distinct neighbours, lexicographic
        auto rec = [&](auto&& self, int depth) -> void {
            if (depth == m) {
                acc += kernel_value(std::span<const MarkedPoint* const>(tuple.data(), static_cast<std::size_t>(m + 1)),
                                    chi.space());
                return;
            }
            for (std::size_t a = 0; a < n; ++a) {
                bool used = false;
                for (int b = 0; b < depth; ++b) used = used || idx[static_cast<std::size_t>(b)] == a;
                if (used) continue;
                idx[static_cast<std::size_t>(depth)] = a;
                tuple[static_cast<std::size_t>(depth) + 1] = &chi[nb[a]];
                self(self, depth + 1);
            }
        };
        rec(rec, 0);
        if (std::abs(acc) > sup * std::pow(static_cast<double>(n), m) * (1.0 + 1e-12) + 1e-300)
            throw std::logic_error("U-statistic score exceeds its magnitude bound");
        out[q] = acc;
    }
    return out;
}

double UStatScore::evaluate_space_restricted(const MarkedPoint& p, const Configuration& chi, double r) const {
    if (r < kernel_.delta) return 0.0;
    return ScoreFamily::evaluate_space_restricted(p, chi, r);
}

// ---- isolated points

IsolatedScore::IsolatedScore(double rho) : rho_(rho) {
    if (!(rho > 0.0)) throw InputError("isolation radius must be > 0");
}

std::vector<double> IsolatedScore::evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const {
    std::vector<double> out(positions.size(), 1.0);
    if (chi.size() < 2) return out;
    SpatialIndex index = build_index(chi, rho_);
    for (std::size_t q = 0; q < positions.size(); ++q) {
        const MarkedPoint& p = chi[positions[q]];
        out[q] = index.any_within(p.loc, rho_, p.id) ? 0.0 : 1.0;
    }
    return out;
}

// ---- k nearest neighbours

KnnScore::KnnScore(KnnScoreConfig cfg) : cfg_(cfg) {
    if (cfg_.k < 1) throw InputError("k must be >= 1");
    if (!(cfg_.alpha >= 0.0)) throw InputError("power alpha must be >= 0");
}

std::vector<double> KnnScore::evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const {
    std::vector<double> out(positions.size(), 0.0);
    if (chi.size() < 2) return out;
    SpatialIndex index = build_index(chi, 0.0);
    const auto k = static_cast<std::size_t>(cfg_.k);
    std::vector<std::vector<std::pair<double, std::size_t>>> memo(chi.size());
    std::vector<char> done(chi.size(), 0);
    auto knn = [&](std::size_t i) -> const std::vector<std::pair<double, std::size_t>>& {
        if (!done[i]) {
            memo[i] = index.nearest(chi[i].loc, k, chi[i].id);
            done[i] = 1;
        }
        return memo[i];
    };
    for (std::size_t q = 0; q < positions.size(); ++q) {
        std::size_t x = positions[q];
        double acc = 0.0;
        for (const auto& [d, y] : knn(x)) {
            bool mutual = false;
            for (const auto& e : knn(y)) mutual = mutual || e.second == x;
            acc += (mutual ? 0.5 : 1.0) * std::pow(d, cfg_.alpha);
        }
        out[q] = acc;
    }
    return out;
}

// ---- canonical wrapper

namespace {

class CanonicalScore final : public ScoreFamily {
public:
    explicit CanonicalScore(ScorePtr inner) : inner_(std::move(inner)) {}
    std::string name() const override { return inner_->name(); }
    std::vector<double> evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const override {
        return inner_->evaluate_many(chi, positions);
    }
    std::optional<double> moment_hint() const override { return inner_->moment_hint(); }
    std::optional<double> bound() const override { return inner_->bound(); }
    double interaction_radius() const override { return inner_->interaction_radius(); }

private:
    ScorePtr inner_;
};

}  // namespace

ScorePtr canonical_restrictions(ScorePtr score) {
    if (!score) throw InputError("null score");
    return std::make_shared<CanonicalScore>(std::move(score));
}

}  // namespace poisclt
