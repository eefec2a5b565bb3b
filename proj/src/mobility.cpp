#include "uavlab/mobility.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "uavlab/errors.hpp"
#include "uavlab/rng.hpp"

namespace uavlab::mobility {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Folds x into [0, limit] with specular reflection, period 2*limit.
double reflect(double x, double limit) {
    const double period = 2.0 * limit;
    double m = std::fmod(x, period);
    if (m < 0.0) m += period;
    return (m > limit) ? period - m : m;
}

}  // namespace

void ScenarioConfig::validate() const {
    if (!(area_w > 0.0) || !(area_h > 0.0)) throw ValidationError("scenario: area must be positive");
    if (n_users < 1) throw ValidationError("scenario: need at least one MU");
    if (!(hotspot_radius > 0.0) || hotspot_radius > std::min(area_w, area_h) / 2.0)
        throw ValidationError("scenario: hotspot radius must be in (0, min(w,h)/2]");
    if (!(speed_min >= 0.0) || !(speed_max >= speed_min))
        throw ValidationError("scenario: speed range must satisfy 0 <= min <= max");
    if (steps_per_session < 1) throw ValidationError("scenario: steps_per_session must be >= 1");
    if (!(step_seconds > 0.0)) throw ValidationError("scenario: step_seconds must be positive");
}

Session generate_session(std::uint64_t id, std::uint64_t seed, const ScenarioConfig& cfg) {
    cfg.validate();
    Rng rng(seed);

    // Hotspot center uniform over the rectangle inset by the hotspot radius.
    const double cx = rng.uniform(cfg.hotspot_radius, cfg.area_w - cfg.hotspot_radius);
    const double cy = rng.uniform(cfg.hotspot_radius, cfg.area_h - cfg.hotspot_radius);

    struct Mu {
        double x, y, vx, vy;
    };
    std::vector<Mu> mus(static_cast<std::size_t>(cfg.n_users));
    for (auto& mu : mus) {
        // Uniform in the disk: radius via sqrt transform, then heading/speed.
        const double pos_angle = rng.uniform(0.0, kTwoPi);
        const double pos_r = cfg.hotspot_radius * std::sqrt(rng.next_double());
        mu.x = cx + pos_r * std::cos(pos_angle);
        mu.y = cy + pos_r * std::sin(pos_angle);
        const double heading = rng.uniform(0.0, kTwoPi);
        const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
        mu.vx = speed * std::cos(heading);
        mu.vy = speed * std::sin(heading);
    }

    Session session;
    session.id = id;
    session.seed = seed;
    session.snapshots.resize(static_cast<std::size_t>(cfg.steps_per_session));
    for (int t = 0; t < cfg.steps_per_session; ++t) {
        auto& snap = session.snapshots[static_cast<std::size_t>(t)];
        snap.t = t;
        snap.positions.resize(mus.size());
        for (std::size_t i = 0; i < mus.size(); ++i) {
            snap.positions[i] = Position{reflect(mus[i].x, cfg.area_w), reflect(mus[i].y, cfg.area_h)};
            mus[i].x += mus[i].vx * cfg.step_seconds;
            mus[i].y += mus[i].vy * cfg.step_seconds;
        }
    }
    return session;
}

Session scenario_session(std::uint64_t i, std::uint64_t master_seed, const ScenarioConfig& cfg) {
    return generate_session(i, split_seed(master_seed, i), cfg);
}

std::vector<Session> generate_scenario(std::uint64_t n_sessions, std::uint64_t master_seed,
                                       const ScenarioConfig& cfg) {
    std::vector<Session> out;
    out.reserve(n_sessions);
    for (std::uint64_t i = 0; i < n_sessions; ++i) out.push_back(scenario_session(i, master_seed, cfg));
    return out;
}

void write_trajectories_csv(const std::vector<Session>& sessions, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fputs("session_id,step,mu_id,x_m,y_m\n", f);
    for (const auto& s : sessions) {
        for (const auto& snap : s.snapshots) {
            for (std::size_t mu = 0; mu < snap.positions.size(); ++mu) {
                std::fprintf(f, "%" PRIu64 ",%d,%zu,%.17g,%.17g\n", s.id, snap.t, mu,
                             snap.positions[mu].x, snap.positions[mu].y);
            }
        }
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

std::vector<Session> read_trajectories_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "session_id,step,mu_id,x_m,y_m")
        throw IoError("bad trajectories header in " + path);

    std::map<std::uint64_t, Session> by_id;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::uint64_t sid, mu;
        int step;
        double x, y;
        char c1, c2, c3, c4;
        if (!(row >> sid >> c1 >> step >> c2 >> mu >> c3 >> x >> c4 >> y) || c1 != ',' ||
            c2 != ',' || c3 != ',' || c4 != ',')
            throw IoError("bad trajectories row: " + line);
        auto& s = by_id[sid];
        s.id = sid;
        if (s.snapshots.size() <= static_cast<std::size_t>(step))
            s.snapshots.resize(static_cast<std::size_t>(step) + 1);
        auto& snap = s.snapshots[static_cast<std::size_t>(step)];
        snap.t = step;
        if (snap.positions.size() <= mu) snap.positions.resize(mu + 1);
        snap.positions[mu] = Position{x, y};
    }
    std::vector<Session> out;
    out.reserve(by_id.size());
    for (auto& [sid, s] : by_id) out.push_back(std::move(s));
    return out;
}

}  // namespace uavlab::mobility
