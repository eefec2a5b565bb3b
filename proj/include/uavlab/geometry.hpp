#ifndef UAVLAB_GEOMETRY_HPP
#define UAVLAB_GEOMETRY_HPP

#include <cmath>

namespace uavlab {

struct Position {
    double x = 0.0;  // m
    double y = 0.0;  // m
};

struct UavPose {
    double x = 0.0;  // m
    double y = 0.0;  // m
    double h = 0.0;  // m, altitude above ground
};

inline double horizontal_dist(const Position& a, const Position& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

inline double horizontal_dist(const UavPose& p, const Position& u) {
    return std::hypot(p.x - u.x, p.y - u.y);
}

inline double sq_dist(double ax, double ay, double bx, double by) {
    const double dx = ax - bx;
    const double dy = ay - by;
    return dx * dx + dy * dy;
}

}  // namespace uavlab

#endif
