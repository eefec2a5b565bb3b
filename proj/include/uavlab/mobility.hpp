#ifndef UAVLAB_MOBILITY_HPP
#define UAVLAB_MOBILITY_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uavlab/geometry.hpp"

namespace uavlab::mobility {

struct ScenarioConfig {
    double area_w = 2000.0;  // m
    double area_h = 2000.0;  // m
    int n_users = 30;
    double hotspot_radius = 600.0;  // m
    double speed_min = 1.0;         // m/s
    double speed_max = 5.0;         // m/s
    int steps_per_session = 15;
    double step_seconds = 4.0;

    void validate() const;
};

struct Snapshot {
    int t = 0;  // step index within the session
    std::vector<Position> positions;
};

struct Session {
    std::uint64_t id = 0;
    std::uint64_t seed = 0;
    std::vector<Snapshot> snapshots;
};

// Deterministic session generation: every position is a pure function of
// (id, seed, cfg). Each MU keeps a constant speed and heading for the whole
// session; borders reflect specularly.
Session generate_session(std::uint64_t id, std::uint64_t seed, const ScenarioConfig& cfg);

// Session i of a scenario uses seed split_seed(master_seed, i); sessions are
// independently reproducible.
Session scenario_session(std::uint64_t i, std::uint64_t master_seed, const ScenarioConfig& cfg);

std::vector<Session> generate_scenario(std::uint64_t n_sessions, std::uint64_t master_seed,
                                       const ScenarioConfig& cfg);

// Trajectories CSV: header `session_id,step,mu_id,x_m,y_m`, rows sorted by
// (session_id, step, mu_id), floats at 17 significant digits.
void write_trajectories_csv(const std::vector<Session>& sessions, const std::string& path);
std::vector<Session> read_trajectories_csv(const std::string& path);

}  // namespace uavlab::mobility

#endif
