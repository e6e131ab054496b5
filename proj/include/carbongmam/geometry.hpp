#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "carbongmam/state.hpp"

namespace carbongmam {

/// Cumulative Euclidean chord length; result[0] = 0, size matches input.
std::vector<double> cumulative_length(std::span<const State> points);

/// Total Euclidean length of a polyline.
double polyline_length(std::span<const State> points);

/// Point at arc-length fraction t in [0, 1] of a polyline, linear in chords.
State point_at_fraction(std::span<const State> points, std::span<const double> cumulative, double t);

/// Closed polygon with accelerated point-in-polygon and distance queries.
///
/// Edges are bucketed into horizontal bands (for crossing-number tests) and
/// into a square grid (for distance queries up to `max_query_distance`).
class ClosedCurve {
public:
    /// The last point may or may not repeat the first; the curve is closed
    /// either way.
    explicit ClosedCurve(std::span<const State> points, double max_query_distance = 0.0);

    bool contains(const State& p) const;

    /// Euclidean distance to the curve. Exact when the true distance is at
    /// most max_query_distance (or when that bound is 0); otherwise some value
    /// above the bound, possibly infinity.
    double distance(const State& p) const;

    bool within(const State& p, double radius) const { return distance(p) <= radius; }

    double bbox_diagonal() const;
    State bbox_min() const { return lo_; }
    State bbox_max() const { return hi_; }
    std::size_t size() const { return pts_.size(); }

private:
    double exact_distance(const State& p) const;
    double segment_distance(std::size_t edge, const State& p) const;

    std::vector<State> pts_;  // closed: pts_.back() != pts_.front()
    State lo_{}, hi_{};

    std::size_t n_bands_ = 1;
    std::vector<std::vector<std::size_t>> bands_;

    double reach_ = 0.0;
    double cell_ = 1.0;
    std::size_t nx_ = 1, ny_ = 1;
    State grid_lo_{};
    std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace carbongmam
