#include "carbongmam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "carbongmam/error.hpp"

namespace carbongmam {

std::vector<double> cumulative_length(std::span<const State> points) {
    std::vector<double> s(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i) s[i] = s[i - 1] + distance(points[i], points[i - 1]);
    return s;
}

double polyline_length(std::span<const State> points) {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i], points[i - 1]);
    return total;
}

State point_at_fraction(std::span<const State> points, std::span<const double> cumulative, double t) {
    if (points.empty()) throw DegeneratePathError("point_at_fraction: empty polyline");
    const double total = cumulative.back();
    const double target = std::clamp(t, 0.0, 1.0) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) return points.back();
    const auto hi = static_cast<std::size_t>(it - cumulative.begin());
    if (hi == 0) return points.front();
    const std::size_t lo = hi - 1;
    const double seg = cumulative[hi] - cumulative[lo];
    const double u = seg > 0.0 ? (target - cumulative[lo]) / seg : 0.0;
    return points[lo] + u * (points[hi] - points[lo]);
}

ClosedCurve::ClosedCurve(std::span<const State> points, double max_query_distance)
    : pts_(points.begin(), points.end()), reach_(std::max(0.0, max_query_distance)) {
    if (pts_.size() >= 2 && pts_.back() == pts_.front()) pts_.pop_back();
    if (pts_.size() < 3) throw DegeneratePathError("ClosedCurve: need at least 3 distinct points");

    lo_ = hi_ = pts_.front();
    for (const auto& p : pts_) {
        lo_ = {std::min(lo_.c, p.c), std::min(lo_.w, p.w)};
        hi_ = {std::max(hi_.c, p.c), std::max(hi_.w, p.w)};
    }
    const std::size_t n = pts_.size();

    n_bands_ = std::max<std::size_t>(1, n / 4);
    bands_.assign(n_bands_, {});
    const double band_h = (hi_.w - lo_.w) / static_cast<double>(n_bands_);
    const auto band_of = [&](double w) {
        if (!(band_h > 0.0)) return std::size_t{0};
        const double k = std::floor((w - lo_.w) / band_h);
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n_bands_ - 1)));
    };
    for (std::size_t e = 0; e < n; ++e) {
        const State& a = pts_[e];
        const State& b = pts_[(e + 1) % n];
        const std::size_t b0 = band_of(std::min(a.w, b.w));
        const std::size_t b1 = band_of(std::max(a.w, b.w));
        for (std::size_t k = b0; k <= b1; ++k) bands_[k].push_back(e);
    }

    if (reach_ > 0.0) {
        grid_lo_ = {lo_.c - reach_, lo_.w - reach_};
        const double span_c = hi_.c - lo_.c + 2.0 * reach_;
        const double span_w = hi_.w - lo_.w + 2.0 * reach_;
        cell_ = std::max({reach_, span_c / 512.0, span_w / 512.0});
        nx_ = static_cast<std::size_t>(std::ceil(span_c / cell_)) + 1;
        ny_ = static_cast<std::size_t>(std::ceil(span_w / cell_)) + 1;
        cells_.assign(nx_ * ny_, {});
        const auto clamp_idx = [](double v, std::size_t count) {
            return static_cast<std::size_t>(std::clamp(std::floor(v), 0.0, static_cast<double>(count - 1)));
        };
        for (std::size_t e = 0; e < n; ++e) {
            const State& a = pts_[e];
            const State& b = pts_[(e + 1) % n];
            const std::size_t i0 = clamp_idx((std::min(a.c, b.c) - reach_ - grid_lo_.c) / cell_, nx_);
            const std::size_t i1 = clamp_idx((std::max(a.c, b.c) + reach_ - grid_lo_.c) / cell_, nx_);
            const std::size_t j0 = clamp_idx((std::min(a.w, b.w) - reach_ - grid_lo_.w) / cell_, ny_);
            const std::size_t j1 = clamp_idx((std::max(a.w, b.w) + reach_ - grid_lo_.w) / cell_, ny_);
            for (std::size_t i = i0; i <= i1; ++i)
                for (std::size_t j = j0; j <= j1; ++j) cells_[i * ny_ + j].push_back(e);
        }
    }
}

bool ClosedCurve::contains(const State& p) const {
    if (p.c < lo_.c || p.c > hi_.c || p.w < lo_.w || p.w > hi_.w) return false;
    const double band_h = (hi_.w - lo_.w) / static_cast<double>(n_bands_);
    std::size_t k = 0;
    if (band_h > 0.0) {
        const double kk = std::floor((p.w - lo_.w) / band_h);
        k = static_cast<std::size_t>(std::clamp(kk, 0.0, static_cast<double>(n_bands_ - 1)));
    }
    const std::size_t n = pts_.size();
    bool inside = false;
    for (const std::size_t e : bands_[k]) {
        const State& a = pts_[e];
        const State& b = pts_[(e + 1) % n];
        if ((a.w > p.w) != (b.w > p.w)) {
            const double c_cross = a.c + (p.w - a.w) * (b.c - a.c) / (b.w - a.w);
            if (p.c < c_cross) inside = !inside;
        }
    }
    return inside;
}

double ClosedCurve::segment_distance(std::size_t e, const State& p) const {
    const State& a = pts_[e];
    const State& b = pts_[(e + 1) % pts_.size()];
    const State ab = b - a;
    const double len2 = dot(ab, ab);
    double u = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    return carbongmam::distance(p, a + u * ab);
}

double ClosedCurve::exact_distance(const State& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < pts_.size(); ++e) best = std::min(best, segment_distance(e, p));
    return best;
}

double ClosedCurve::distance(const State& p) const {
    if (reach_ <= 0.0) return exact_distance(p);
    const double fi = std::floor((p.c - grid_lo_.c) / cell_);
    const double fj = std::floor((p.w - grid_lo_.w) / cell_);
    if (fi < 0.0 || fj < 0.0 || fi >= static_cast<double>(nx_) || fj >= static_cast<double>(ny_)) {
        return std::numeric_limits<double>::infinity();
    }
    const auto& list = cells_[static_cast<std::size_t>(fi) * ny_ + static_cast<std::size_t>(fj)];
    double best = std::numeric_limits<double>::infinity();
    for (const std::size_t e : list) best = std::min(best, segment_distance(e, p));
    return best;
}

double ClosedCurve::bbox_diagonal() const { return carbongmam::distance(lo_, hi_); }

}  // namespace carbongmam
