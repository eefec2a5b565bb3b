#include "uavlab/pipeline.hpp"

#include <map>
#include <memory>
#include <thread>

#include "uavlab/errors.hpp"

namespace uavlab::pipeline {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const auto workers = static_cast<std::size_t>(threads);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::vector<oracle::LabelRow> label_all(const std::vector<mobility::Session>& sessions,
                                        const channel::ChannelParams& p,
                                        const oracle::AreaRect& area, int threads) {
    std::vector<std::vector<oracle::PlacementResult>> per_session(sessions.size());
    parallel_for(sessions.size(), threads,
                 [&](std::size_t i) { per_session[i] = oracle::label_session(sessions[i], p, area); });

    std::vector<oracle::LabelRow> rows;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        for (std::size_t t = 0; t < per_session[i].size(); ++t) {
            rows.push_back(oracle::LabelRow{sessions[i].id, sessions[i].snapshots[t].t,
                                            per_session[i][t].pose, per_session[i][t].covered});
        }
    }
    return rows;
}

eval::PoseProvider oracle_provider(const std::vector<oracle::LabelRow>& labels) {
    auto by_key = std::make_shared<std::map<std::pair<std::uint64_t, int>, UavPose>>();
    for (const auto& row : labels) (*by_key)[{row.session_id, row.step}] = row.pose;
    return [by_key](const mobility::Session& session) {
        std::vector<UavPose> poses;
        poses.reserve(session.snapshots.size());
        for (const auto& snap : session.snapshots) {
            const auto it = by_key->find({session.id, snap.t});
            if (it == by_key->end())
                throw ValidationError("oracle poses: missing label for session " +
                                      std::to_string(session.id) + " step " + std::to_string(snap.t));
            poses.push_back(it->second);
        }
        return poses;
    };
}

namespace {

template <typename Scalar>
eval::PoseProvider cnn_provider_impl(cnn::Network<Scalar>& net, const dataset::GridConfig& grid,
                                     double area_w, double area_h, double h_opt) {
    return [&net, grid, area_w, area_h, h_opt](const mobility::Session& session) {
        std::vector<UavPose> poses;
        poses.reserve(session.snapshots.size());
        const int depth = grid.temporal_depth;
        for (std::size_t t = 0; t < session.snapshots.size(); ++t) {
            if (t + 1 < static_cast<std::size_t>(depth)) {
                poses.push_back(UavPose{area_w / 2, area_h / 2, h_opt});
                continue;
            }
            const auto window = std::span<const mobility::Snapshot>(
                &session.snapshots[t + 1 - static_cast<std::size_t>(depth)], static_cast<std::size_t>(depth));
            const auto features = dataset::featurize(window, grid, area_w, area_h);
            const auto xy = cnn::predict(net, features);
            poses.push_back(UavPose{xy[0] * area_w, xy[1] * area_h, h_opt});
        }
        return poses;
    };
}

// Covered cell-count mass of the window's last slice within r_max of the
// normalized position (nx, ny). Reads only the network's input tensor.
double grid_coverage_score(const dataset::FeatureTensor& f, double area_w, double area_h,
                           double r_max, double nx, double ny) {
    const double cell_w = area_w / f.cols, cell_h = area_h / f.rows;
    const double px = nx * area_w, py = ny * area_h;
    double score = 0.0;
    for (int r = 0; r < f.rows; ++r)
        for (int c = 0; c < f.cols; ++c) {
            const double dx = (c + 0.5) * cell_w - px;
            const double dy = (r + 0.5) * cell_h - py;
            if (dx * dx + dy * dy <= r_max * r_max) score += f.at(f.depth - 1, r, c);
        }
    return score;
}

template <typename Scalar>
std::array<double, 2> predict_symmetrized(cnn::Network<Scalar>& net,
                                          const dataset::FeatureTensor& features,
                                          bool use_transpose, double area_w, double area_h,
                                          double r_max) {
    std::vector<std::array<double, 2>> proposals;
    for (int m = 0; m < 4; ++m) {
        const bool flip_x = (m & 1) != 0, flip_y = (m & 2) != 0;
        const auto mirrored = dataset::mirror_tensor(features, flip_x, flip_y);
        {
            const auto p = cnn::predict(net, mirrored);
            proposals.push_back({flip_x ? 1.0 - p[0] : p[0], flip_y ? 1.0 - p[1] : p[1]});
        }
        if (use_transpose) {
            // label(transpose(f)) = swap(label(f)): undo the swap first,
            // then the mirror.
            const auto p = cnn::predict(net, dataset::transpose_tensor(mirrored));
            proposals.push_back({flip_x ? 1.0 - p[1] : p[1], flip_y ? 1.0 - p[0] : p[0]});
        }
    }
    double mx = 0.0, my = 0.0;
    for (const auto& p : proposals) {
        mx += p[0];
        my += p[1];
    }
    mx /= static_cast<double>(proposals.size());
    my /= static_cast<double>(proposals.size());
    proposals.push_back({mx, my});

    // Highest covered mass wins; score ties (counts are integers, so they
    // are common) go to the proposal nearest the symmetrized mean, which
    // keeps the decoder equivariant under the same symmetries.
    std::array<double, 2> best{mx, my};
    double best_score = -1.0, best_dist = 0.0;
    for (const auto& p : proposals) {
        const double score = grid_coverage_score(features, area_w, area_h, r_max, p[0], p[1]);
        const double dx = p[0] - mx, dy = p[1] - my;
        const double dist = dx * dx + dy * dy;
        if (score > best_score || (score == best_score && dist < best_dist)) {
            best_score = score;
            best_dist = dist;
            best = p;
        }
    }
    return best;
}

template <typename Scalar>
eval::PoseProvider cnn_symmetrized_provider_impl(cnn::Network<Scalar>& net,
                                                 const dataset::GridConfig& grid, double area_w,
                                                 double area_h, double h_opt, double r_max) {
    const bool use_transpose = grid.rows == grid.cols && area_w == area_h;
    return [&net, grid, area_w, area_h, h_opt, r_max,
            use_transpose](const mobility::Session& session) {
        std::vector<UavPose> poses;
        poses.reserve(session.snapshots.size());
        const int depth = grid.temporal_depth;
        for (std::size_t t = 0; t < session.snapshots.size(); ++t) {
            if (t + 1 < static_cast<std::size_t>(depth)) {
                poses.push_back(UavPose{area_w / 2, area_h / 2, h_opt});
                continue;
            }
            const auto window = std::span<const mobility::Snapshot>(
                &session.snapshots[t + 1 - static_cast<std::size_t>(depth)],
                static_cast<std::size_t>(depth));
            const auto features = dataset::featurize(window, grid, area_w, area_h);
            const auto xy = predict_symmetrized(net, features, use_transpose, area_w, area_h,
                                                r_max);
            poses.push_back(UavPose{xy[0] * area_w, xy[1] * area_h, h_opt});
        }
        return poses;
    };
}

}  // namespace

eval::PoseProvider cnn_symmetrized_provider(cnn::Network<float>& net,
                                            const dataset::GridConfig& grid, double area_w,
                                            double area_h, double h_opt, double r_max) {
    return cnn_symmetrized_provider_impl(net, grid, area_w, area_h, h_opt, r_max);
}

eval::PoseProvider cnn_symmetrized_provider(cnn::Network<double>& net,
                                            const dataset::GridConfig& grid, double area_w,
                                            double area_h, double h_opt, double r_max) {
    return cnn_symmetrized_provider_impl(net, grid, area_w, area_h, h_opt, r_max);
}

eval::PoseProvider cnn_provider(cnn::Network<float>& net, const dataset::GridConfig& grid,
                                double area_w, double area_h, double h_opt) {
    return cnn_provider_impl(net, grid, area_w, area_h, h_opt);
}

eval::PoseProvider cnn_provider(cnn::Network<double>& net, const dataset::GridConfig& grid,
                                double area_w, double area_h, double h_opt) {
    return cnn_provider_impl(net, grid, area_w, area_h, h_opt);
}

eval::PoseProvider qtable_provider(rl::QTable& q, const rl::RlEnvConfig& cfg) {
    return [&q, cfg](const mobility::Session& session) {
        return rl::rl_policy_positions(q, session, cfg);
    };
}

eval::PoseProvider dqn_provider(cnn::Network<float>& dqn, const rl::RlEnvConfig& cfg) {
    return [&dqn, cfg](const mobility::Session& session) {
        return rl::rl_policy_positions(dqn, session, cfg);
    };
}

rl::RlEnvConfig make_rl_env_config(const config::RunConfig& cfg) {
    const auto geom = channel::max_coverage_radius(cfg.channel);
    rl::RlEnvConfig env;
    env.grid_rows = cfg.grid.rows;
    env.grid_cols = cfg.grid.cols;
    env.area_w = cfg.scenario.area_w;
    env.area_h = cfg.scenario.area_h;
    env.r_cov = geom.r_max;
    env.h_opt = geom.h_opt;
    return env;
}

}  // namespace uavlab::pipeline
