#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace cantorlab {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double x) const { return x >= lo && x <= hi; }
    bool containedIn(const Interval& o) const { return lo >= o.lo && hi <= o.hi; }
};

inline double intervalGap(const Interval& a, const Interval& b) {
    if (a.hi < b.lo) return b.lo - a.hi;
    if (b.hi < a.lo) return a.lo - b.hi;
    return 0.0;
}

struct Rect {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
    bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    Interval xSpan() const { return {x0, x1}; }
    Interval ySpan() const { return {y0, y1}; }
};

inline double rectDistance(const Rect& a, const Rect& b) {
    const double dx = intervalGap(a.xSpan(), b.xSpan());
    const double dy = intervalGap(a.ySpan(), b.ySpan());
    return std::hypot(dx, dy);
}

inline double rectPointDistance(const Rect& a, Vec2 p) {
    const double dx = std::max({a.x0 - p.x, 0.0, p.x - a.x1});
    const double dy = std::max({a.y0 - p.y, 0.0, p.y - a.y1});
    return std::hypot(dx, dy);
}

namespace detail {

// int_0^X sqrt(r^2-t^2) dt for X in [0,r]
inline double circleQuarterIntegral(double X, double r) {
    X = std::clamp(X, 0.0, r);
    return 0.5 * (X * std::sqrt(std::max(0.0, r * r - X * X)) + r * r * std::asin(std::clamp(X / r, -1.0, 1.0)));
}

inline double circleIntegral(double a, double b, double r) {
    // int_a^b sqrt(r^2-t^2) dt with a,b clamped to [-r,r]
    a = std::clamp(a, -r, r);
    b = std::clamp(b, -r, r);
    auto F = [r](double t) {
        return t >= 0 ? circleQuarterIntegral(t, r) : -circleQuarterIntegral(-t, r);
    };
    return F(b) - F(a);
}

} // namespace detail

// Exact area of {x^2+y^2 <= r^2} intersected with [x0,x1] x [y0,y1],
// circle centered at the origin.
inline double circleRectArea(double x0, double x1, double y0, double y1, double r) {
    if (r <= 0 || x0 >= x1 || y0 >= y1) return 0.0;
    x0 = std::max(x0, -r);
    x1 = std::min(x1, r);
    if (x0 >= x1) return 0.0;
    if (y0 >= r || y1 <= -r) return 0.0;

    // per-column height: clamp the chord [-s(t), s(t)] to [y0,y1];
    // split the x-range where s(t) crosses |y0| and |y1|.
    std::vector<double> cuts = {x0, x1};
    for (double y : {y0, y1}) {
        const double ay = std::abs(y);
        if (ay < r) {
            const double t = std::sqrt(r * r - ay * ay);
            if (t > x0 && t < x1) cuts.push_back(t);
            if (-t > x0 && -t < x1) cuts.push_back(-t);
        }
    }
    std::sort(cuts.begin(), cuts.end());

    double area = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        if (b - a <= 0) continue;
        const double m = 0.5 * (a + b);
        const double s = std::sqrt(std::max(0.0, r * r - m * m));
        const double top = std::min(y1, s);
        const double bot = std::max(y0, -s);
        if (top <= bot) continue;
        // on this piece the active bounds do not switch; integrate each side.
        double piece = 0.0;
        piece += (y1 < s) ? y1 * (b - a) : detail::circleIntegral(a, b, r);
        piece -= (y0 > -s) ? y0 * (b - a) : -detail::circleIntegral(a, b, r);
        area += piece;
    }
    return area;
}

inline double circleRectArea(const Rect& rect, Vec2 center, double r) {
    return circleRectArea(rect.x0 - center.x, rect.x1 - center.x, rect.y0 - center.y, rect.y1 - center.y, r);
}

} // namespace cantorlab
