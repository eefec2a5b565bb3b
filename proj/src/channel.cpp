#include "uavlab/channel.hpp"

#include <cmath>

#include "uavlab/errors.hpp"

namespace uavlab::channel {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg2Rad = kPi / 180.0;

// Angle-only part of the pathloss at fixed horizontal radius:
//   L(r, theta) = 20*log10(4*pi*f/c) + 20*log10(r) + g(theta)
// with g(theta) = -20*log10(cos theta) + P_los*eta_los + (1-P_los)*eta_nlos.
double angle_cost_db(double theta_deg, const ChannelParams& p) {
    const double cos_t = std::cos(theta_deg * kDeg2Rad);
    const double p_los = los_probability(theta_deg, p);
    return -20.0 * std::log10(cos_t) + p_los * p.eta_los_db + (1.0 - p_los) * p.eta_nlos_db;
}

}  // namespace

void ChannelParams::validate() const {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("channel: a and b must be positive");
    if (!(eta_los_db >= 0.0) || !(eta_nlos_db >= eta_los_db))
        throw ValidationError("channel: need eta_nlos >= eta_los >= 0");
    if (!(carrier_hz > 0.0)) throw ValidationError("channel: carrier frequency must be positive");
    const double fspl_1m = fspl_db(1.0, carrier_hz);
    if (!(gamma_db > fspl_1m))
        throw ValidationError("channel: gamma must exceed free-space loss at 1 m");
}

double fspl_db(double d_m, double carrier_hz) {
    return 20.0 * std::log10(4.0 * kPi * d_m * carrier_hz / kSpeedOfLight);
}

double los_probability(double elevation_deg, const ChannelParams& p) {
    if (!(elevation_deg > 0.0) || !(elevation_deg <= 90.0))
        throw ValidationError("los_probability: elevation must be in (0, 90] deg");
    return 1.0 / (1.0 + p.a * std::exp(-p.b * (elevation_deg - p.a)));
}

double pathloss_db(double horizontal_m, double h_m, const ChannelParams& p) {
    if (!(h_m > 0.0)) throw ValidationError("pathloss_db: altitude must be positive");
    if (horizontal_m < 0.0) throw ValidationError("pathloss_db: negative horizontal distance");
    const double d = std::sqrt(horizontal_m * horizontal_m + h_m * h_m);
    const double theta_deg = std::atan2(h_m, horizontal_m) / kDeg2Rad;
    const double p_los = los_probability(theta_deg, p);
    return fspl_db(d, p.carrier_hz) + p_los * p.eta_los_db + (1.0 - p_los) * p.eta_nlos_db;
}

CoverageGeometry max_coverage_radius(const ChannelParams& p) {
    p.validate();

    // Golden-section search for the angle minimizing the angle cost; the
    // optimum is independent of r and gamma.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 1e-9, hi = 90.0 - 1e-9;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = angle_cost_db(x1, p);
    double f2 = angle_cost_db(x2, p);
    while (hi - lo > 1e-6) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = angle_cost_db(x1, p);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = angle_cost_db(x2, p);
        }
    }
    const double theta_star = 0.5 * (lo + hi);
    const double g_star = angle_cost_db(theta_star, p);

    const double base_db = fspl_db(1.0, p.carrier_hz);  // 20*log10(4*pi*f/c)
    const double r_max = std::pow(10.0, (p.gamma_db - base_db - g_star) / 20.0);
    if (!(r_max >= 1.0))
        throw ValidationError("max_coverage_radius: gamma infeasible at r = 1 m");
    return CoverageGeometry{r_max, r_max * std::tan(theta_star * kDeg2Rad), theta_star};
}

bool is_covered(const UavPose& pose, const Position& user, const ChannelParams& p) {
    return pathloss_db(horizontal_dist(pose, user), pose.h, p) <= p.gamma_db;
}

}  // namespace uavlab::channel
