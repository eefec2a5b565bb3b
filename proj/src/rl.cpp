#include "uavlab/rl.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uavlab/errors.hpp"
#include "uavlab/geometry.hpp"

namespace uavlab::rl {

Position cell_center(const RlState& s, const RlEnvConfig& cfg) {
    const double cell_w = cfg.area_w / cfg.grid_cols;
    const double cell_h = cfg.area_h / cfg.grid_rows;
    return Position{(s.uav_col + 0.5) * cell_w, (s.uav_row + 0.5) * cell_h};
}

namespace {

int count_covered_at(const RlState& s, const mobility::Snapshot& snapshot, const RlEnvConfig& cfg) {
    const Position c = cell_center(s, cfg);
    const double r2 = cfg.r_cov * cfg.r_cov;
    int n = 0;
    for (const auto& u : snapshot.positions)
        if (sq_dist(c.x, c.y, u.x, u.y) <= r2) ++n;
    return n;
}

}  // namespace

std::pair<RlState, double> env_step(const RlState& state, int action,
                                    const mobility::Snapshot& snapshot, const RlEnvConfig& cfg) {
    RlState next = state;
    switch (action) {
        case kUp: next.uav_row = std::min(cfg.grid_rows - 1, state.uav_row + 1); break;
        case kDown: next.uav_row = std::max(0, state.uav_row - 1); break;
        case kLeft: next.uav_col = std::max(0, state.uav_col - 1); break;
        case kRight: next.uav_col = std::min(cfg.grid_cols - 1, state.uav_col + 1); break;
        case kStay: break;
        default: throw ValidationError("env_step: unknown action");
    }
    return {next, static_cast<double>(count_covered_at(next, snapshot, cfg))};
}

std::uint16_t occupancy_code(const mobility::Snapshot& snapshot, const RlEnvConfig& cfg) {
    std::array<int, 16> counts{};
    const double cell_w = cfg.area_w / 4.0;
    const double cell_h = cfg.area_h / 4.0;
    for (const auto& u : snapshot.positions) {
        const int col = std::min(3, static_cast<int>(std::floor(u.x / cell_w)));
        const int row = std::min(3, static_cast<int>(std::floor(u.y / cell_h)));
        ++counts[static_cast<std::size_t>(row * 4 + col)];
    }
    auto sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[7] + sorted[8]);
    std::uint16_t code = 0;
    for (int i = 0; i < 16; ++i)
        if (counts[static_cast<std::size_t>(i)] > median) code = static_cast<std::uint16_t>(code | (1u << i));
    return code;
}

StateCode tabular_state(const RlState& s, std::uint16_t occupancy, const RlEnvConfig& cfg) {
    const auto cell = static_cast<StateCode>(s.uav_row) * static_cast<StateCode>(cfg.grid_cols) +
                      static_cast<StateCode>(s.uav_col);
    return (static_cast<StateCode>(occupancy) << 32) | cell;
}

StateCode UavEnv::code() const {
    const auto& session = (*sessions_)[session_idx_];
    return tabular_state(state_, occupancy_code(session.snapshots[t_], cfg_), cfg_);
}

StateCode UavEnv::reset(Rng&) {
    if (sessions_->empty()) throw ValidationError("rl: empty session list");
    session_idx_ = next_session_;
    next_session_ = (next_session_ + 1) % sessions_->size();
    t_ = 0;
    state_ = RlState{cfg_.grid_rows / 2, cfg_.grid_cols / 2};
    return code();
}

EnvStep UavEnv::step(int action, Rng&) {
    const auto& session = (*sessions_)[session_idx_];
    auto [next, reward] = env_step(state_, action, session.snapshots[t_], cfg_);
    state_ = next;
    EnvStep res;
    res.reward = reward;
    res.done = (t_ + 1 >= session.snapshots.size());
    if (!res.done) ++t_;
    res.next = code();
    return res;
}

void UavEnv::observe(std::vector<float>& out) const {
    const auto& snap = (*sessions_)[session_idx_].snapshots[t_];
    out.assign(static_cast<std::size_t>(obs_dim()), 0.0f);
    const double cell_w = cfg_.area_w / cfg_.grid_cols;
    const double cell_h = cfg_.area_h / cfg_.grid_rows;
    const float scale = snap.positions.empty() ? 1.0f : 1.0f / static_cast<float>(snap.positions.size());
    for (const auto& u : snap.positions) {
        const int col = std::min(cfg_.grid_cols - 1, static_cast<int>(std::floor(u.x / cell_w)));
        const int row = std::min(cfg_.grid_rows - 1, static_cast<int>(std::floor(u.y / cell_h)));
        out[static_cast<std::size_t>(row * cfg_.grid_cols + col)] += scale;
    }
    out[static_cast<std::size_t>(cfg_.grid_rows * cfg_.grid_cols)] =
        static_cast<float>(state_.uav_row) / static_cast<float>(cfg_.grid_rows - 1);
    out[static_cast<std::size_t>(cfg_.grid_rows * cfg_.grid_cols + 1)] =
        static_cast<float>(state_.uav_col) / static_cast<float>(cfg_.grid_cols - 1);
}

namespace {

template <typename ActFn>
std::vector<UavPose> rollout(const mobility::Session& session, const RlEnvConfig& cfg, ActFn act) {
    RlState s{cfg.grid_rows / 2, cfg.grid_cols / 2};
    std::vector<UavPose> poses;
    poses.reserve(session.snapshots.size());
    for (const auto& snap : session.snapshots) {
        const int a = act(s, snap);
        s = env_step(s, a, snap, cfg).first;
        const Position c = cell_center(s, cfg);
        poses.push_back(UavPose{c.x, c.y, cfg.h_opt});
    }
    return poses;
}

}  // namespace

std::vector<UavPose> rl_policy_positions(QTable& q, const mobility::Session& session,
                                         const RlEnvConfig& cfg) {
    return rollout(session, cfg, [&](const RlState& s, const mobility::Snapshot& snap) {
        return q.argmax(tabular_state(s, occupancy_code(snap, cfg), cfg));
    });
}

std::vector<UavPose> rl_policy_positions(cnn::Network<float>& dqn, const mobility::Session& session,
                                         const RlEnvConfig& cfg) {
    const double cell_w = cfg.area_w / cfg.grid_cols;
    const double cell_h = cfg.area_h / cfg.grid_rows;
    return rollout(session, cfg, [&](const RlState& s, const mobility::Snapshot& snap) {
        cnn::Mat<float> x = cnn::Mat<float>::Zero(1, cfg.grid_rows * cfg.grid_cols + 2);
        const float scale = snap.positions.empty() ? 1.0f : 1.0f / static_cast<float>(snap.positions.size());
        for (const auto& u : snap.positions) {
            const int col = std::min(cfg.grid_cols - 1, static_cast<int>(std::floor(u.x / cell_w)));
            const int row = std::min(cfg.grid_rows - 1, static_cast<int>(std::floor(u.y / cell_h)));
            x(0, row * cfg.grid_cols + col) += scale;
        }
        x(0, cfg.grid_rows * cfg.grid_cols) = static_cast<float>(s.uav_row) / static_cast<float>(cfg.grid_rows - 1);
        x(0, cfg.grid_rows * cfg.grid_cols + 1) = static_cast<float>(s.uav_col) / static_cast<float>(cfg.grid_cols - 1);
        const auto qv = dqn.forward(x, 1);
        int a = 0;
        for (int i = 1; i < kNumActions; ++i)
            if (qv(0, i) > qv(0, a)) a = i;
        return a;
    });
}

void write_qtable_csv(const QTable& q, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fputs("state_code,q_up,q_down,q_left,q_right,q_stay\n", f);
    std::vector<StateCode> keys;
    keys.reserve(q.table.size());
    for (const auto& [s, row] : q.table) keys.push_back(s);
    std::sort(keys.begin(), keys.end());
    for (const auto s : keys) {
        const auto& row = q.table.at(s);
        std::fprintf(f, "%" PRIu64 ",%.17g,%.17g,%.17g,%.17g,%.17g\n", s, row[0], row[1], row[2],
                     row[3], row[4]);
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

QTable read_qtable_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "state_code,q_up,q_down,q_left,q_right,q_stay")
        throw IoError("bad q-table header in " + path);
    QTable q;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        StateCode s;
        std::array<double, 5> v{};
        char c[5];
        if (!(row >> s >> c[0] >> v[0] >> c[1] >> v[1] >> c[2] >> v[2] >> c[3] >> v[3] >> c[4] >> v[4]))
            throw IoError("bad q-table row: " + line);
        q.table[s] = {v[0], v[1], v[2], v[3], v[4]};
    }
    return q;
}

}  // namespace uavlab::rl
