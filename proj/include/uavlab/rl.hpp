#ifndef UAVLAB_RL_HPP
#define UAVLAB_RL_HPP

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "uavlab/channel.hpp"
#include "uavlab/cnn.hpp"
#include "uavlab/dataset.hpp"
#include "uavlab/mobility.hpp"
#include "uavlab/rng.hpp"

namespace uavlab::rl {

enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kNumActions = 5;

using StateCode = std::uint64_t;

struct QTable {
    int n_actions = kNumActions;
    std::unordered_map<StateCode, std::vector<double>> table;

    std::vector<double>& row(StateCode s) {
        auto [it, inserted] = table.try_emplace(s);
        if (inserted) it->second.assign(static_cast<std::size_t>(n_actions), 0.0);
        return it->second;
    }
    double max_q(StateCode s) {
        const auto& r = row(s);
        double best = r[0];
        for (const double v : r) best = std::max(best, v);
        return best;
    }
    int argmax(StateCode s) {
        const auto& r = row(s);
        int best = 0;
        for (int a = 1; a < n_actions; ++a)
            if (r[static_cast<std::size_t>(a)] > r[static_cast<std::size_t>(best)]) best = a;
        return best;
    }
};

// Q-tables persisted as CSV `state_code,q_up,q_down,q_left,q_right,q_stay`.
void write_qtable_csv(const QTable& q, const std::string& path);
QTable read_qtable_csv(const std::string& path);

struct RlState {
    int uav_row = 0;
    int uav_col = 0;
};

struct RlEnvConfig {
    int grid_rows = 20;
    int grid_cols = 20;
    double area_w = 2000.0;
    double area_h = 2000.0;
    double r_cov = 300.0;  // coverage radius at h_opt
    double h_opt = 300.0;
};

Position cell_center(const RlState& s, const RlEnvConfig& cfg);

// One MDP transition: the UAV moves one cell (clamped at borders) and is
// rewarded with the covered MU count at the new cell center.
std::pair<RlState, double> env_step(const RlState& state, int action,
                                    const mobility::Snapshot& snapshot, const RlEnvConfig& cfg);

// Tabular state code: uav cell plus a coarse 4x4 occupancy bitmap of the
// current snapshot (cells above the median count set their bit).
std::uint16_t occupancy_code(const mobility::Snapshot& snapshot, const RlEnvConfig& cfg);
StateCode tabular_state(const RlState& s, std::uint16_t occupancy, const RlEnvConfig& cfg);

struct QLearnParams {
    double alpha0 = 0.1;       // decayed as alpha0 / sqrt(visits)
    double gamma = 0.99;
    double eps_start = 1.0;    // linear decay to eps_end over the first half
    double eps_end = 0.05;
    int passes = 10;           // passes over the session list
    std::uint64_t seed = 1;
};

// Single Q-learning update; exposed so diagnostic MDPs can drive it directly.
inline void q_update(QTable& q, StateCode s, int a, double r, StateCode s2, bool done,
                     double alpha, double gamma) {
    const double target = r + (done ? 0.0 : gamma * q.max_q(s2));
    auto& row = q.row(s);
    row[static_cast<std::size_t>(a)] += alpha * (target - row[static_cast<std::size_t>(a)]);
}

// Double Q update: a fair coin picks the table to update; the action is
// argmaxed on the updated table and evaluated on the other.
inline void double_q_update(QTable& qa, QTable& qb, StateCode s, int a, double r, StateCode s2,
                            bool done, double alpha, double gamma, bool update_a) {
    QTable& upd = update_a ? qa : qb;
    QTable& other = update_a ? qb : qa;
    const int a_star = upd.argmax(s2);
    const double target = r + (done ? 0.0 : gamma * other.row(s2)[static_cast<std::size_t>(a_star)]);
    auto& row = upd.row(s);
    row[static_cast<std::size_t>(a)] += alpha * (target - row[static_cast<std::size_t>(a)]);
}

// Episodic environment concept used by the generic trainers:
//   int n_actions() const;
//   StateCode reset(Rng&);                    // starts an episode
//   EnvStep step(int action, Rng&);           // advances it
//   int obs_dim() const;                      // DQN only
//   void observe(std::vector<float>& out);    // DQN only, current state
struct EnvStep {
    StateCode next = 0;
    double reward = 0.0;
    bool done = false;
};

template <typename Env>
QTable q_learning(Env& env, const QLearnParams& p, long n_episodes) {
    QTable q;
    q.n_actions = env.n_actions();
    std::unordered_map<StateCode, std::vector<std::uint32_t>> visits;
    Rng rng(p.seed);
    long step_idx = 0;
    const long half = std::max<long>(1, n_episodes / 2);
    for (long ep = 0; ep < n_episodes; ++ep) {
        StateCode s = env.reset(rng);
        const double frac = std::min(1.0, static_cast<double>(ep) / static_cast<double>(half));
        const double eps = p.eps_start + (p.eps_end - p.eps_start) * frac;
        bool done = false;
        while (!done) {
            const int a = rng.next_double() < eps ? static_cast<int>(rng.next_below(static_cast<std::uint64_t>(q.n_actions)))
                                                  : q.argmax(s);
            const EnvStep res = env.step(a, rng);
            auto [it, inserted] = visits.try_emplace(s);
            if (inserted) it->second.assign(static_cast<std::size_t>(q.n_actions), 0);
            const double alpha = p.alpha0 / std::sqrt(static_cast<double>(++it->second[static_cast<std::size_t>(a)]));
            q_update(q, s, a, res.reward, res.next, res.done, alpha, p.gamma);
            s = res.next;
            done = res.done;
            ++step_idx;
        }
    }
    (void)step_idx;
    return q;
}

template <typename Env>
std::pair<QTable, QTable> double_q_learning(Env& env, const QLearnParams& p, long n_episodes) {
    QTable qa, qb;
    qa.n_actions = qb.n_actions = env.n_actions();
    std::unordered_map<StateCode, std::vector<std::uint32_t>> visits;
    Rng rng(p.seed);
    const long half = std::max<long>(1, n_episodes / 2);
    for (long ep = 0; ep < n_episodes; ++ep) {
        StateCode s = env.reset(rng);
        const double frac = std::min(1.0, static_cast<double>(ep) / static_cast<double>(half));
        const double eps = p.eps_start + (p.eps_end - p.eps_start) * frac;
        bool done = false;
        while (!done) {
            int a;
            if (rng.next_double() < eps) {
                a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(qa.n_actions)));
            } else {
                // Behavior policy is greedy on the sum of both tables.
                const auto& ra = qa.row(s);
                const auto& rb = qb.row(s);
                a = 0;
                for (int i = 1; i < qa.n_actions; ++i)
                    if (ra[static_cast<std::size_t>(i)] + rb[static_cast<std::size_t>(i)] >
                        ra[static_cast<std::size_t>(a)] + rb[static_cast<std::size_t>(a)])
                        a = i;
            }
            const EnvStep res = env.step(a, rng);
            auto [it, inserted] = visits.try_emplace(s);
            if (inserted) it->second.assign(static_cast<std::size_t>(qa.n_actions), 0);
            const double alpha = p.alpha0 / std::sqrt(static_cast<double>(++it->second[static_cast<std::size_t>(a)]));
            double_q_update(qa, qb, s, a, res.reward, res.next, res.done, alpha, p.gamma,
                            rng.next_double() < 0.5);
            s = res.next;
            done = res.done;
        }
    }
    return {std::move(qa), std::move(qb)};
}

struct DqnConfig {
    double gamma = 0.99;
    double lr = 1e-3;
    int batch_size = 32;
    std::size_t replay_capacity = 100000;
    int target_sync_interval = 1000;
    std::size_t warmup = 1000;  // steps before learning starts
    double eps_start = 1.0;
    double eps_end = 0.05;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(gamma > 0.0) || gamma > 1.0) throw ValidationError("dqn: discount must be in (0,1]");
        if (!(lr > 0.0) || batch_size < 1 || replay_capacity < 1 || target_sync_interval < 1)
            throw ValidationError("dqn: invalid hyperparameters");
    }
};

struct Transition {
    std::vector<float> obs;
    int action;
    float reward;
    std::vector<float> next_obs;
    bool done;
};

// MLP value network trained with MSE TD loss, uniform replay sampling and a
// periodically synced target network.
template <typename Env>
cnn::Network<float> dqn_train(Env& env, const DqnConfig& cfg, long n_episodes,
                              const std::vector<int>& hidden = {128, 64}) {
    cfg.validate();
    std::vector<int> dims{env.obs_dim()};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(env.n_actions());
    auto online = cnn::make_mlp<float>(dims, split_seed(cfg.seed, 101));
    auto target = cnn::make_mlp<float>(dims, split_seed(cfg.seed, 101));

    const auto sync = [&]() {
        for (std::size_t i = 0; i < online.layers.size(); ++i) {
            auto src = online.layers[i]->params();
            auto dst = target.layers[i]->params();
            std::copy(src.begin(), src.end(), dst.begin());
            if (auto* d = dynamic_cast<cnn::Dense<float>*>(target.layers[i].get())) d->commit_params();
        }
    };
    sync();

    std::deque<Transition> replay;
    cnn::AdamState<float> adam(online.param_count(), static_cast<float>(cfg.lr));
    std::vector<float> scratch_p, scratch_g;
    Rng rng(cfg.seed);
    const int n_act = env.n_actions();
    long global_step = 0;
    const long half = std::max<long>(1, n_episodes / 2);

    std::vector<float> obs, next_obs;
    for (long ep = 0; ep < n_episodes; ++ep) {
        env.reset(rng);
        env.observe(obs);
        const double frac = std::min(1.0, static_cast<double>(ep) / static_cast<double>(half));
        const double eps = cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac;
        bool done = false;
        while (!done) {
            int a;
            if (rng.next_double() < eps) {
                a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_act)));
            } else {
                cnn::Mat<float> x(1, static_cast<Eigen::Index>(obs.size()));
                std::copy(obs.begin(), obs.end(), x.data());
                const auto qv = online.forward(x, 1);
                a = 0;
                for (int i = 1; i < n_act; ++i)
                    if (qv(0, i) > qv(0, a)) a = i;
            }
            const EnvStep res = env.step(a, rng);
            env.observe(next_obs);
            replay.push_back({obs, a, static_cast<float>(res.reward), next_obs, res.done});
            if (replay.size() > cfg.replay_capacity) replay.pop_front();
            obs = next_obs;
            done = res.done;
            ++global_step;

            if (replay.size() >= std::max<std::size_t>(cfg.warmup, static_cast<std::size_t>(cfg.batch_size))) {
                const int bs = cfg.batch_size;
                cnn::Mat<float> xb(bs, static_cast<Eigen::Index>(obs.size()));
                cnn::Mat<float> xn(bs, static_cast<Eigen::Index>(obs.size()));
                std::vector<int> actions(static_cast<std::size_t>(bs));
                std::vector<float> rewards(static_cast<std::size_t>(bs));
                std::vector<bool> dones(static_cast<std::size_t>(bs));
                for (int i = 0; i < bs; ++i) {
                    const auto& tr = replay[static_cast<std::size_t>(rng.next_below(replay.size()))];
                    std::copy(tr.obs.begin(), tr.obs.end(), xb.row(i).data());
                    std::copy(tr.next_obs.begin(), tr.next_obs.end(), xn.row(i).data());
                    actions[static_cast<std::size_t>(i)] = tr.action;
                    rewards[static_cast<std::size_t>(i)] = tr.reward;
                    dones[static_cast<std::size_t>(i)] = tr.done;
                }
                const auto q_next = target.forward(xn, bs);
                const auto q_pred = online.forward(xb, bs);
                cnn::Mat<float> grad = cnn::Mat<float>::Zero(bs, n_act);
                double loss = 0.0;
                for (int i = 0; i < bs; ++i) {
                    float td_target = rewards[static_cast<std::size_t>(i)];
                    if (!dones[static_cast<std::size_t>(i)])
                        td_target += static_cast<float>(cfg.gamma) * q_next.row(i).maxCoeff();
                    const float diff = q_pred(i, actions[static_cast<std::size_t>(i)]) - td_target;
                    loss += static_cast<double>(diff) * diff;
                    grad(i, actions[static_cast<std::size_t>(i)]) = 2.0f * diff / static_cast<float>(bs);
                }
                if (!std::isfinite(loss)) throw DivergenceError("dqn: TD loss became non-finite");
                online.backward(grad, bs);
                cnn::adam_update(online, adam, scratch_p, scratch_g);
                if (global_step % cfg.target_sync_interval == 0) sync();
            }
        }
    }
    return online;
}

// UAV coverage environment over a list of sessions; episodes walk one
// session's snapshots in order, cycling through the session list.
class UavEnv {
public:
    UavEnv(const std::vector<mobility::Session>* sessions, const RlEnvConfig& cfg)
        : sessions_(sessions), cfg_(cfg) {}

    int n_actions() const { return kNumActions; }
    int obs_dim() const { return cfg_.grid_rows * cfg_.grid_cols + 2; }

    StateCode reset(Rng& rng);
    EnvStep step(int action, Rng& rng);
    void observe(std::vector<float>& out) const;

    const RlEnvConfig& config() const { return cfg_; }

private:
    StateCode code() const;

    const std::vector<mobility::Session>* sessions_;
    RlEnvConfig cfg_;
    std::size_t session_idx_ = 0;
    std::size_t next_session_ = 0;
    std::size_t t_ = 0;
    RlState state_;
};

// Greedy per-instant rollout starting at the area-center cell; one pose per
// instant at the acting cell's center, h = h_opt.
std::vector<UavPose> rl_policy_positions(QTable& q, const mobility::Session& session,
                                         const RlEnvConfig& cfg);
std::vector<UavPose> rl_policy_positions(cnn::Network<float>& dqn, const mobility::Session& session,
                                         const RlEnvConfig& cfg);

}  // namespace uavlab::rl

#endif
