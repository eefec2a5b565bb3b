#ifndef UAVLAB_CHANNEL_HPP
#define UAVLAB_CHANNEL_HPP

#include "uavlab/geometry.hpp"

namespace uavlab::channel {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Air-to-ground channel constants plus the coverage threshold gamma.
struct ChannelParams {
    double a = 9.61;            // S-curve parameter (urban)
    double b = 0.16;            // S-curve parameter (urban)
    double eta_los_db = 1.0;    // excess loss under LoS, dB
    double eta_nlos_db = 20.0;  // excess loss under NLoS, dB
    double carrier_hz = 2.0e9;
    double gamma_db = 93.0;     // max allowed pathloss for coverage

    void validate() const;
};

// Free-space pathloss at slant distance d (m), dB.
double fspl_db(double d_m, double carrier_hz);

// LoS probability at elevation angle theta in degrees, theta in (0, 90].
double los_probability(double elevation_deg, const ChannelParams& p);

// Mean ATG pathloss at horizontal distance r and altitude h, dB.
double pathloss_db(double horizontal_m, double h_m, const ChannelParams& p);

struct CoverageGeometry {
    double r_max;          // largest horizontal radius with pathloss <= gamma
    double h_opt;          // altitude realizing it, r_max * tan(theta*)
    double theta_star_deg; // pathloss-minimizing elevation angle
};

// Solves for the maximum coverage radius and its altitude by a 1-D search
// over the elevation angle (tolerance 1e-6 deg). Throws ValidationError if
// gamma is infeasible even at r = 1 m.
CoverageGeometry max_coverage_radius(const ChannelParams& p);

// Coverage predicate: pathloss at (pose, user) <= gamma. Boundary inclusive.
bool is_covered(const UavPose& pose, const Position& user, const ChannelParams& p);

}  // namespace uavlab::channel

#endif
