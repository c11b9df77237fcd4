#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "poisclt/geometry.hpp"

namespace poisclt {

/// Immutable uniform-grid index over a point list (CSR layout). Hyperbolic
/// spaces use a plain scan. Results are positions into the point list,
/// ordered by the associated ids.
class SpatialIndex {
public:
    SpatialIndex() = default;
    /// `ids` may be empty, in which case positions act as ids.
    SpatialIndex(const Space& space, std::span<const Point> points, std::span<const std::int64_t> ids,
                 double cell_size);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    /// Positions of points q with distance(p, q) < r, sorted by id.
    std::vector<std::size_t> within(const Point& p, double r) const;
    /// Ids of points q with distance(p, q) < r, sorted.
    std::vector<std::int64_t> neighbors_within(const Point& p, double r) const;
    /// True when some point other than `exclude_id` lies at distance < r.
    bool any_within(const Point& p, double r, std::int64_t exclude_id = -1) const;
    /// The k nearest points to p other than `exclude_id`, as (distance, position)
    /// sorted by (distance, id). Fewer than k returned when the index is small.
    std::vector<std::pair<double, std::size_t>> nearest(const Point& p, std::size_t k,
                                                        std::int64_t exclude_id = -1) const;

    std::int64_t id_at(std::size_t pos) const { return ids_.empty() ? static_cast<std::int64_t>(pos) : ids_[pos]; }

private:
    template <class F>
    void visit_candidates(const Point& p, double r, F&& f) const;
    std::size_t cell_of(const Point& p) const;

    Space space_ = Space::euclidean_box(1, 1.0);
    std::vector<Point> points_;
    std::vector<std::int64_t> ids_;
    bool brute_ = true;
    int dim_ = 1;
    std::array<double, kMaxCoords> origin_{};
    std::array<double, kMaxCoords> width_{};
    std::array<std::int64_t, kMaxCoords> cells_{};
    std::vector<std::uint32_t> cell_start_;
    std::vector<std::uint32_t> cell_items_;
    double diameter_bound_ = 0.0;
};

}  // namespace poisclt
