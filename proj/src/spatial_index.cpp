#include "poisclt/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "poisclt/errors.hpp"

namespace poisclt {

SpatialIndex::SpatialIndex(const Space& space, std::span<const Point> points,
                           std::span<const std::int64_t> ids, double cell_size)
    : space_(space), points_(points.begin(), points.end()), ids_(ids.begin(), ids.end()) {
    if (!ids_.empty() && ids_.size() != points_.size()) throw InputError("ids and points differ in length");
    if (points_.size() > std::numeric_limits<std::uint32_t>::max()) throw UnsupportedError("index too large");
    dim_ = space.dim();
    brute_ = space.is_hyperbolic() || points_.size() < 16;
    if (brute_) return;
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) cell_size = 0.0;  // let the cell budget decide

    std::array<double, kMaxCoords> lo{}, hi{};
    if (space.kind() == SpaceKind::FlatTorus) {
        for (int i = 0; i < dim_; ++i) {
            lo[static_cast<std::size_t>(i)] = -0.5 * space.extent();
            hi[static_cast<std::size_t>(i)] = 0.5 * space.extent();
        }
    } else {
        lo.fill(std::numeric_limits<double>::infinity());
        hi.fill(-std::numeric_limits<double>::infinity());
        for (const auto& p : points_)
            for (int i = 0; i < dim_; ++i) {
                auto k = static_cast<std::size_t>(i);
                lo[k] = std::min(lo[k], p[i]);
                hi[k] = std::max(hi[k], p[i]);
            }
    }
    // keep the cell count O(n)
    double budget = std::max(1.0, 2.0 * static_cast<double>(points_.size()));
    double per_dim = std::pow(budget, 1.0 / dim_);
    std::int64_t total = 1;
    double diam2 = 0.0;
    for (int i = 0; i < dim_; ++i) {
        auto k = static_cast<std::size_t>(i);
        double span_k = std::max(hi[k] - lo[k], 1e-12);
        double w = std::max(cell_size, span_k / per_dim);
        auto m = static_cast<std::int64_t>(std::floor(span_k / w));
        if (space.kind() != SpaceKind::FlatTorus) m += 1;
        m = std::max<std::int64_t>(1, m);
        if (space.kind() == SpaceKind::FlatTorus) w = span_k / static_cast<double>(m);
        origin_[k] = lo[k];
        width_[k] = w;
        cells_[k] = m;
        total *= m;
        diam2 += space.kind() == SpaceKind::FlatTorus ? 0.25 * span_k * span_k : span_k * span_k;
    }
    diameter_bound_ = std::sqrt(diam2);

    std::vector<std::size_t> owner(points_.size());
    cell_start_.assign(static_cast<std::size_t>(total) + 1, 0);
    for (std::size_t i = 0; i < points_.size(); ++i) {
        owner[i] = cell_of(points_[i]);
        ++cell_start_[owner[i] + 1];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(total); ++c) cell_start_[c + 1] += cell_start_[c];
    cell_items_.resize(points_.size());
    std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[fill[owner[i]]++] = static_cast<std::uint32_t>(i);
}

std::size_t SpatialIndex::cell_of(const Point& p) const {
    std::size_t flat = 0;
    for (int i = dim_ - 1; i >= 0; --i) {
        auto k = static_cast<std::size_t>(i);
        double v = p[i];
        if (space_.kind() == SpaceKind::FlatTorus) {
            double L = space_.extent();
            v -= L * std::floor((v - origin_[k]) / L);
        }
        auto c = static_cast<std::int64_t>(std::floor((v - origin_[k]) / width_[k]));
        c = std::clamp<std::int64_t>(c, 0, cells_[k] - 1);
        flat = flat * static_cast<std::size_t>(cells_[k]) + static_cast<std::size_t>(c);
    }
    return flat;
}

template <class F>
void SpatialIndex::visit_candidates(const Point& p, double r, F&& f) const {
    if (brute_ || !std::isfinite(r) || r > diameter_bound_) {
        for (std::size_t i = 0; i < points_.size(); ++i) f(i);
        return;
    }
    const bool torus = space_.kind() == SpaceKind::FlatTorus;
    std::array<std::int64_t, kMaxCoords> from{}, to{};
    for (int i = 0; i < dim_; ++i) {
        auto k = static_cast<std::size_t>(i);
        double v = p[i];
        if (torus) v -= space_.extent() * std::floor((v - origin_[k]) / space_.extent());
        auto a = static_cast<std::int64_t>(std::floor((v - r - origin_[k]) / width_[k]));
        auto b = static_cast<std::int64_t>(std::floor((v + r - origin_[k]) / width_[k]));
        if (torus) {
            if (b - a + 1 >= cells_[k]) {
                a = 0;
                b = cells_[k] - 1;
            }
        } else {
            a = std::max<std::int64_t>(a, 0);
            b = std::min<std::int64_t>(b, cells_[k] - 1);
            if (a > b) return;
        }
        from[k] = a;
        to[k] = b;
    }
    std::array<std::int64_t, kMaxCoords> cur = from;
    while (true) {
        std::size_t flat = 0;
        for (int i = dim_ - 1; i >= 0; --i) {
            auto k = static_cast<std::size_t>(i);
            std::int64_t c = cur[k];
            if (torus) c = ((c % cells_[k]) + cells_[k]) % cells_[k];
            flat = flat * static_cast<std::size_t>(cells_[k]) + static_cast<std::size_t>(c);
        }
        for (std::uint32_t j = cell_start_[flat]; j < cell_start_[flat + 1]; ++j) f(cell_items_[j]);
        int i = 0;
        for (; i < dim_; ++i) {
            auto k = static_cast<std::size_t>(i);
            if (++cur[k] <= to[k]) break;
            cur[k] = from[k];
        }
        if (i == dim_) break;
    }
}

std::vector<std::size_t> SpatialIndex::within(const Point& p, double r) const {
    std::vector<std::size_t> out;
    if (!(r > 0.0) || points_.empty()) return out;
    visit_candidates(p, r, [&](std::size_t i) {
        if (distance(space_, p, points_[i]) < r) out.push_back(i);
    });
    std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) { return id_at(a) < id_at(b); });
    return out;
}

std::vector<std::int64_t> SpatialIndex::neighbors_within(const Point& p, double r) const {
    auto pos = within(p, r);
    std::vector<std::int64_t> out;
    out.reserve(pos.size());
    for (auto i : pos) out.push_back(id_at(i));
    return out;
}

bool SpatialIndex::any_within(const Point& p, double r, std::int64_t exclude_id) const {
    if (!(r > 0.0)) return false;
    bool found = false;
    // visit_candidates has no early exit; the scan is cheap at the radii used here
    visit_candidates(p, r, [&](std::size_t i) {
        if (!found && id_at(i) != exclude_id && distance(space_, p, points_[i]) < r) found = true;
    });
    return found;
}

std::vector<std::pair<double, std::size_t>> SpatialIndex::nearest(const Point& p, std::size_t k,
                                                                  std::int64_t exclude_id) const {
    std::vector<std::pair<double, std::size_t>> cand;
    if (k == 0 || points_.empty()) return cand;
    auto by_dist_id = [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return id_at(a.second) < id_at(b.second);
    };
    double r = brute_ ? std::numeric_limits<double>::infinity() : width_[0];
    for (int i = 1; i < dim_ && !brute_; ++i) r = std::max(r, width_[static_cast<std::size_t>(i)]);
    while (true) {
        cand.clear();
        bool all = brute_ || !std::isfinite(r) || r > diameter_bound_;
        visit_candidates(p, all ? std::numeric_limits<double>::infinity() : r, [&](std::size_t i) {
            if (id_at(i) == exclude_id) return;
            double dd = distance(space_, p, points_[i]);
            if (all || dd < r) cand.emplace_back(dd, i);
        });
        // with >= k hits strictly inside r, every point at or below the k-th distance is present
        if (all || cand.size() >= k) break;
        r *= 2.0;
    }
    std::sort(cand.begin(), cand.end(), by_dist_id);
    if (cand.size() > k) cand.resize(k);
    return cand;
}

}  // namespace poisclt
