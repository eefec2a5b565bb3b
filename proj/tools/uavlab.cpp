// uavlab: batch front-end for the UAV-BS placement pipeline.
//
// Subcommands: generate, label, dataset, train-cnn, train-rl, eval, bench.
// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 validation error,
// 5 divergence.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "uavlab/config.hpp"
#include "uavlab/errors.hpp"
#include "uavlab/pipeline.hpp"

namespace {

using uavlab::config::RunConfig;

struct CommonOpts {
    std::string config_path;
    std::map<std::string, std::string> overrides;
    int threads = 0;  // 0: config / env fallback
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Run config file (section.key = value lines)");
    cmd->add_option("--threads", opts.threads, "Worker threads (fallback: UAVLAB_THREADS, then run.threads)");
    for (const auto& key : RunConfig::keys()) {
        cmd->add_option_function<std::string>(
               "--" + key, [&opts, key](const std::string& v) { opts.overrides[key] = v; },
               "Override config key " + key)
            ->group("Config overrides");
    }
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = uavlab::config::load_config(opts.config_path);
    for (const auto& [k, v] : opts.overrides) cfg.set(k, v);
    if (opts.threads > 0) {
        cfg.threads = opts.threads;
    } else if (const char* env = std::getenv("UAVLAB_THREADS")) {
        cfg.threads = std::max(1, std::atoi(env));
    }
    cfg.validate();
    return cfg;
}

uavlab::oracle::AreaRect area_of(const RunConfig& cfg) {
    return {cfg.scenario.area_w, cfg.scenario.area_h};
}

int cmd_generate(const CommonOpts& common, std::uint64_t n_sessions, std::uint64_t seed,
                 const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    std::vector<uavlab::mobility::Session> sessions(n_sessions);
    uavlab::pipeline::parallel_for(n_sessions, cfg.threads, [&](std::size_t i) {
        sessions[i] = uavlab::mobility::scenario_session(i, seed, cfg.scenario);
    });
    uavlab::mobility::write_trajectories_csv(sessions, out);
    std::printf("generate: wrote %llu sessions (%s, seed %llu) to %s\n",
                static_cast<unsigned long long>(n_sessions), uavlab::kRngId,
                static_cast<unsigned long long>(seed), out.c_str());
    return 0;
}

int cmd_label(const CommonOpts& common, const std::string& traj, const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const auto sessions = uavlab::mobility::read_trajectories_csv(traj);
    const auto rows = uavlab::pipeline::label_all(sessions, cfg.channel, area_of(cfg), cfg.threads);
    uavlab::oracle::write_labels_csv(rows, out);
    std::printf("label: wrote %zu label rows to %s\n", rows.size(), out.c_str());
    return 0;
}

int cmd_dataset(const CommonOpts& common, const std::string& traj, const std::string& labels,
                const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const auto sessions = uavlab::mobility::read_trajectories_csv(traj);
    const auto label_rows = uavlab::oracle::read_labels_csv(labels);
    const auto samples = uavlab::dataset::build_samples(sessions, label_rows, cfg.grid,
                                                        cfg.scenario.area_w, cfg.scenario.area_h);
    uavlab::dataset::save_dataset(samples, cfg.grid, out);
    std::printf("dataset: wrote %zu samples to %s\n", samples.size(), out.c_str());
    return 0;
}

template <typename Scalar>
void train_cnn_impl(const RunConfig& cfg, const std::vector<uavlab::dataset::Sample>& samples,
                    double val_frac, const std::string& out) {
    auto parts = uavlab::dataset::split(samples, 1.0 - val_frac, val_frac, 0.0, cfg.train.seed);
    if (cfg.train_augment_flips) parts.train = uavlab::dataset::flip_augment(parts.train);
    auto net = uavlab::cnn::make_coverage_cnn<Scalar>(cfg.grid.rows, cfg.grid.cols,
                                                      cfg.grid.temporal_depth, cfg.train.seed);
    const auto hist = uavlab::cnn::train(net, parts.train, parts.val, cfg.train, true);
    uavlab::cnn::save_model(net, out);
    std::printf("train-cnn: %zu train / %zu val samples, best epoch %d, final val MAE %.6f -> %s\n",
                parts.train.size(), parts.val.size(), hist.best_epoch,
                hist.val_mae.empty() ? -1.0 : hist.val_mae.back(), out.c_str());
}

int cmd_train_cnn(const CommonOpts& common, const std::string& data_path, double val_frac,
                  const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const auto samples = uavlab::dataset::load_dataset(data_path);
    if (cfg.train_float32)
        train_cnn_impl<float>(cfg, samples, val_frac, out);
    else
        train_cnn_impl<double>(cfg, samples, val_frac, out);
    return 0;
}

int cmd_train_rl(const CommonOpts& common, const std::string& traj, const std::string& algo,
                 const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const auto sessions = uavlab::mobility::read_trajectories_csv(traj);
    const auto env_cfg = uavlab::pipeline::make_rl_env_config(cfg);
    uavlab::rl::UavEnv env(&sessions, env_cfg);

    if (algo == "q") {
        const long episodes = static_cast<long>(sessions.size()) * cfg.qlearn.passes;
        auto q = uavlab::rl::q_learning(env, cfg.qlearn, episodes);
        uavlab::rl::write_qtable_csv(q, out);
        std::printf("train-rl: q-learning, %ld episodes, %zu states -> %s\n", episodes,
                    q.table.size(), out.c_str());
    } else if (algo == "double-q") {
        const long episodes = static_cast<long>(sessions.size()) * cfg.qlearn.passes;
        auto [qa, qb] = uavlab::rl::double_q_learning(env, cfg.qlearn, episodes);
        // Persist the mean table; greedy play on it matches greedy on the sum.
        uavlab::rl::QTable mean;
        for (const auto& [s, row] : qa.table) mean.table[s] = row;
        for (const auto& [s, row] : qb.table) {
            auto& m = mean.row(s);
            for (std::size_t i = 0; i < row.size(); ++i) m[i] = 0.5 * (m[i] + row[i]);
        }
        uavlab::rl::write_qtable_csv(mean, out);
        std::printf("train-rl: double-q, %ld episodes, %zu states -> %s\n", episodes,
                    mean.table.size(), out.c_str());
    } else if (algo == "dqn") {
        const long episodes = static_cast<long>(sessions.size()) * cfg.dqn_passes;
        auto net = uavlab::rl::dqn_train(env, cfg.dqn, episodes);
        uavlab::cnn::save_model(net, out, "UAVQN1");
        std::printf("train-rl: dqn, %ld episodes -> %s\n", episodes, out.c_str());
    } else {
        throw uavlab::ConfigError("train-rl: unknown algo '" + algo + "' (want q|double-q|dqn)");
    }
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& traj, const std::string& labels,
             const std::string& cnn_path, const std::string& q_path, const std::string& dq_path,
             const std::string& dqn_path, const std::string& out_dir) {
    const RunConfig cfg = resolve_config(common);
    const auto sessions = uavlab::mobility::read_trajectories_csv(traj);
    const auto label_rows = uavlab::oracle::read_labels_csv(labels);
    const auto geom = uavlab::channel::max_coverage_radius(cfg.channel);
    const auto env_cfg = uavlab::pipeline::make_rl_env_config(cfg);

    std::vector<std::pair<std::string, uavlab::eval::PoseProvider>> methods;
    methods.emplace_back("oracle", uavlab::pipeline::oracle_provider(label_rows));

    uavlab::cnn::Network<float> cnn_net;
    if (!cnn_path.empty()) {
        cnn_net = uavlab::cnn::load_model<float>(cnn_path);
        auto provider = cfg.eval_symmetrize_cnn
                            ? uavlab::pipeline::cnn_symmetrized_provider(
                                  cnn_net, cfg.grid, cfg.scenario.area_w, cfg.scenario.area_h,
                                  geom.h_opt, geom.r_max)
                            : uavlab::pipeline::cnn_provider(cnn_net, cfg.grid,
                                                             cfg.scenario.area_w,
                                                             cfg.scenario.area_h, geom.h_opt);
        methods.emplace_back("cnn", std::move(provider));
    }
    uavlab::rl::QTable q, dq;
    if (!q_path.empty()) {
        q = uavlab::rl::read_qtable_csv(q_path);
        methods.emplace_back("q", uavlab::pipeline::qtable_provider(q, env_cfg));
    }
    if (!dq_path.empty()) {
        dq = uavlab::rl::read_qtable_csv(dq_path);
        methods.emplace_back("double_q", uavlab::pipeline::qtable_provider(dq, env_cfg));
    }
    uavlab::cnn::Network<float> dqn_net;
    if (!dqn_path.empty()) {
        dqn_net = uavlab::cnn::load_model<float>(dqn_path, "UAVQN1");
        methods.emplace_back("dqn", uavlab::pipeline::dqn_provider(dqn_net, env_cfg));
    }

    const auto report = uavlab::eval::evaluate(methods, sessions, cfg.channel,
                                               cfg.grid.temporal_depth - 1);
    uavlab::eval::export_report(report, out_dir);
    for (const auto& m : report.methods)
        std::printf("eval: %-10s mean covered %.3f mean gap %.3f\n", m.name.c_str(),
                    m.mean_covered, m.mean_gap);
    std::printf("eval: reports written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_bench(const CommonOpts& common, const std::string& cnn_path, int n_instances,
              std::uint64_t seed) {
    const RunConfig cfg = resolve_config(common);
    const auto geom = uavlab::channel::max_coverage_radius(cfg.channel);
    const uavlab::oracle::AreaRect area = area_of(cfg);

    std::vector<uavlab::mobility::Snapshot> instances;
    for (int i = 0; i < n_instances; ++i) {
        const auto s = uavlab::mobility::scenario_session(static_cast<std::uint64_t>(i), seed, cfg.scenario);
        instances.push_back(s.snapshots.front());
    }

    uavlab::cnn::Network<float> net;
    if (cnn_path.empty())
        net = uavlab::cnn::make_coverage_cnn<float>(cfg.grid.rows, cfg.grid.cols,
                                                    cfg.grid.temporal_depth, 1);
    else
        net = uavlab::cnn::load_model<float>(cnn_path);

    const auto oracle_fn = [&](const uavlab::mobility::Snapshot& snap) {
        uavlab::oracle::optimal_placement_exact(snap.positions, geom.r_max, area, geom.h_opt);
    };
    const auto cnn_fn = [&](const uavlab::mobility::Snapshot& snap) {
        std::vector<uavlab::mobility::Snapshot> window(static_cast<std::size_t>(cfg.grid.temporal_depth), snap);
        for (std::size_t k = 0; k < window.size(); ++k) window[k].t = static_cast<int>(k);
        const auto features = uavlab::dataset::featurize(window, cfg.grid, area.w, area.h);
        uavlab::cnn::predict(net, features);
    };
    const auto b = uavlab::eval::bench_runtime(oracle_fn, cnn_fn, instances);
    std::printf("bench: oracle median %.0f ns, cnn median %.0f ns, ratio %.2fx (n_users %d)\n",
                b.oracle_median_ns, b.cnn_median_ns, b.ratio, cfg.scenario.n_users);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UAV base-station placement lab: mobility, oracle labels, CNN and RL baselines"};
    app.require_subcommand(1);

    CommonOpts common;
    std::uint64_t n_sessions = 100, seed = 1;
    int n_instances = 100;
    std::string traj, labels_path, data_path, out, algo = "q";
    std::string cnn_path, q_path, dq_path, dqn_path;
    double val_frac = 0.1;

    auto* generate = app.add_subcommand("generate", "Generate MU trajectory sessions");
    add_common(generate, common);
    generate->add_option("--sessions", n_sessions, "Number of sessions")->required();
    generate->add_option("--seed", seed, "Master seed");
    generate->add_option("--out", out, "Output trajectories CSV")->required();

    auto* label = app.add_subcommand("label", "Compute optimal placements per instant");
    add_common(label, common);
    label->add_option("--traj", traj, "Trajectories CSV")->required();
    label->add_option("--out", out, "Output labels CSV")->required();

    auto* ds = app.add_subcommand("dataset", "Featurize trajectories and pair with labels");
    add_common(ds, common);
    ds->add_option("--traj", traj, "Trajectories CSV")->required();
    ds->add_option("--labels", labels_path, "Labels CSV")->required();
    ds->add_option("--out", out, "Output dataset file")->required();

    auto* tc = app.add_subcommand("train-cnn", "Train the coverage CNN");
    add_common(tc, common);
    tc->add_option("--dataset", data_path, "Dataset file")->required();
    tc->add_option("--val-frac", val_frac, "Validation fraction (by session)");
    tc->add_option("--out", out, "Output model checkpoint")->required();

    auto* tr = app.add_subcommand("train-rl", "Train an RL baseline");
    add_common(tr, common);
    tr->add_option("--traj", traj, "Trajectories CSV")->required();
    tr->add_option("--algo", algo, "q | double-q | dqn");
    tr->add_option("--out", out, "Output Q-table CSV or DQN checkpoint")->required();

    auto* ev = app.add_subcommand("eval", "Evaluate methods on test sessions");
    add_common(ev, common);
    ev->add_option("--traj", traj, "Test trajectories CSV")->required();
    ev->add_option("--labels", labels_path, "Test labels CSV (oracle poses)")->required();
    ev->add_option("--cnn", cnn_path, "CNN checkpoint");
    ev->add_option("--q", q_path, "Q-learning table CSV");
    ev->add_option("--double-q", dq_path, "Double Q-learning table CSV");
    ev->add_option("--dqn", dqn_path, "DQN checkpoint");
    ev->add_option("--out", out, "Output report directory")->required();

    auto* bench = app.add_subcommand("bench", "Benchmark oracle vs CNN inference runtime");
    add_common(bench, common);
    bench->add_option("--cnn", cnn_path, "CNN checkpoint (fresh weights if omitted)");
    bench->add_option("--instances", n_instances, "Number of instances");
    bench->add_option("--seed", seed, "Instance seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(common, n_sessions, seed, out);
        if (label->parsed()) return cmd_label(common, traj, out);
        if (ds->parsed()) return cmd_dataset(common, traj, labels_path, out);
        if (tc->parsed()) return cmd_train_cnn(common, data_path, val_frac, out);
        if (tr->parsed()) return cmd_train_rl(common, traj, algo, out);
        if (ev->parsed()) return cmd_eval(common, traj, labels_path, cnn_path, q_path, dq_path, dqn_path, out);
        if (bench->parsed()) return cmd_bench(common, cnn_path, n_instances, seed);
    } catch (const uavlab::ConfigError& e) {
        std::fprintf(stderr, "error: config: %s\n", e.what());
        return 2;
    } catch (const uavlab::IoError& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 3;
    } catch (const uavlab::ValidationError& e) {
        std::fprintf(stderr, "error: validation: %s\n", e.what());
        return 4;
    } catch (const uavlab::DivergenceError& e) {
        std::fprintf(stderr, "error: divergence: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 1;
    }
    return 0;
}
