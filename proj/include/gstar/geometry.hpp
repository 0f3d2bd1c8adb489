#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gstar/common.hpp"

namespace gstar {

using Point = std::vector<double>;
using PointRef = std::span<const double>;

inline double dist_sq(PointRef a, PointRef b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(PointRef a, PointRef b) { return std::sqrt(dist_sq(a, b)); }

// Axis-aligned cube. Membership is half-open, [c - l/2, c + l/2)^n, so that
// sibling cubes partition their parent exactly.
struct Cube {
    Point center;
    double side = 1.0;

    Cube() = default;
    Cube(Point c, double l) : center(std::move(c)), side(l) {}

    static Cube from_corner(PointRef lo, double l) {
        Point c(lo.begin(), lo.end());
        for (double& x : c) x += l / 2.0;
        return Cube(std::move(c), l);
    }

    int dim() const { return static_cast<int>(center.size()); }
    double lo(int i) const { return center[i] - side / 2.0; }
    double hi(int i) const { return center[i] + side / 2.0; }

    bool contains(PointRef p) const {
        for (int i = 0; i < dim(); ++i)
            if (p[i] < lo(i) || p[i] >= hi(i)) return false;
        return true;
    }

    // aQ: same center, side scaled by a.
    Cube dilated(double a) const { return Cube(center, a * side); }

    // Euclidean distance from p to the closed cube (0 inside).
    double dist_to(PointRef p) const {
        double s = 0.0;
        for (int i = 0; i < dim(); ++i) {
            const double g = std::max({lo(i) - p[i], p[i] - hi(i), 0.0});
            s += g * g;
        }
        return std::sqrt(s);
    }

    // Euclidean distance from p to the boundary of the cube. For exterior
    // points this equals the distance to the closed cube; inside it is the
    // smallest margin to a face.
    double dist_to_boundary(PointRef p) const {
        bool inside = true;
        for (int i = 0; i < dim(); ++i)
            if (p[i] < lo(i) || p[i] > hi(i)) { inside = false; break; }
        if (!inside) return dist_to(p);
        double margin = side;
        for (int i = 0; i < dim(); ++i)
            margin = std::min({margin, p[i] - lo(i), hi(i) - p[i]});
        return margin;
    }
};

// Euclidean gap between two closed cubes (0 when they touch or overlap).
inline double cube_gap(const Cube& a, const Cube& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        const double g = std::max(0.0, std::abs(a.center[i] - b.center[i]) - (a.side + b.side) / 2.0);
        s += g * g;
    }
    return std::sqrt(s);
}

inline bool cubes_intersect(const Cube& a, const Cube& b) {
    for (int i = 0; i < a.dim(); ++i)
        if (std::abs(a.center[i] - b.center[i]) >= (a.side + b.side) / 2.0) return false;
    return true;
}

// a subset of b, as closed cubes.
inline bool cube_subset(const Cube& a, const Cube& b) {
    for (int i = 0; i < a.dim(); ++i)
        if (a.lo(i) < b.lo(i) || a.hi(i) > b.hi(i)) return false;
    return true;
}

// Closed Euclidean ball.
struct Ball {
    Point center;
    double radius = 1.0;

    Ball() = default;
    Ball(Point c, double r) : center(std::move(c)), radius(r) {}

    bool contains(PointRef p) const { return dist_sq(center, p) <= radius * radius; }
};

} // namespace gstar
