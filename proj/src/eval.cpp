#include "uavlab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "uavlab/errors.hpp"

namespace uavlab::eval {

int coverage_of(const UavPose& pose, const mobility::Snapshot& snapshot,
                const channel::ChannelParams& p) {
    int n = 0;
    for (const auto& u : snapshot.positions)
        if (channel::is_covered(pose, u, p)) ++n;
    return n;
}

std::vector<std::vector<double>> EvalReport::cdf() const {
    std::vector<std::vector<double>> out;
    for (const auto& m : methods) {
        std::vector<double> cum(static_cast<std::size_t>(n_users) + 1, 0.0);
        for (const int c : m.covered) ++cum[static_cast<std::size_t>(std::clamp(c, 0, n_users))];
        double running = 0.0;
        for (auto& v : cum) {
            running += v;
            v = running / static_cast<double>(m.covered.size());
        }
        out.push_back(std::move(cum));
    }
    return out;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

EvalReport evaluate(const std::vector<std::pair<std::string, PoseProvider>>& methods,
                    const std::vector<mobility::Session>& test_sessions,
                    const channel::ChannelParams& p, int first_step) {
    if (methods.empty() || methods[0].first != "oracle")
        throw ValidationError("evaluate: methods[0] must be the oracle");
    if (test_sessions.empty()) throw ValidationError("evaluate: no test sessions");

    EvalReport report;
    report.n_users = static_cast<int>(test_sessions.front().snapshots.front().positions.size());
    for (const auto& [name, fn] : methods) {
        MethodEval m;
        m.name = name;
        report.methods.push_back(std::move(m));
    }

    std::vector<std::vector<UavPose>> poses(methods.size());
    for (const auto& session : test_sessions) {
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            poses[mi] = methods[mi].second(session);
            if (poses[mi].size() != session.snapshots.size())
                throw ValidationError("evaluate: instant-set mismatch for method " + methods[mi].first);
        }
        for (std::size_t t = static_cast<std::size_t>(first_step); t < session.snapshots.size(); ++t) {
            for (std::size_t mi = 0; mi < methods.size(); ++mi) {
                report.methods[mi].covered.push_back(
                    coverage_of(poses[mi][t], session.snapshots[t], p));
                report.methods[mi].pos_err_m.push_back(
                    std::hypot(poses[mi][t].x - poses[0][t].x, poses[mi][t].y - poses[0][t].y));
            }
        }
    }

    report.n_instants = report.methods[0].covered.size();
    const auto& oracle_cov = report.methods[0].covered;
    for (auto& m : report.methods) {
        std::vector<double> gaps(m.covered.size());
        for (std::size_t i = 0; i < m.covered.size(); ++i)
            gaps[i] = static_cast<double>(oracle_cov[i] - m.covered[i]);
        m.mean_covered = std::accumulate(m.covered.begin(), m.covered.end(), 0.0) /
                         static_cast<double>(m.covered.size());
        m.mean_gap = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
        m.median_gap = median(gaps);
        m.mean_pos_err_m = std::accumulate(m.pos_err_m.begin(), m.pos_err_m.end(), 0.0) /
                           static_cast<double>(m.pos_err_m.size());
    }
    return report;
}

RuntimeBench bench_runtime(const std::function<void(const mobility::Snapshot&)>& oracle_fn,
                           const std::function<void(const mobility::Snapshot&)>& cnn_fn,
                           const std::vector<mobility::Snapshot>& instances) {
    if (instances.empty()) throw ValidationError("bench_runtime: no instances");
    using Clock = std::chrono::steady_clock;

    const auto time_one = [](const auto& fn, const mobility::Snapshot& snap) {
        const auto t0 = Clock::now();
        fn(snap);
        const auto t1 = Clock::now();
        return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    };

    // Warm both paths before timing.
    oracle_fn(instances.front());
    cnn_fn(instances.front());

    std::vector<double> t_oracle, t_cnn;
    t_oracle.reserve(instances.size());
    t_cnn.reserve(instances.size());
    for (const auto& snap : instances) {
        t_oracle.push_back(time_one(oracle_fn, snap));
        t_cnn.push_back(time_one(cnn_fn, snap));
    }

    RuntimeBench b;
    b.oracle_median_ns = median(t_oracle);
    b.cnn_median_ns = median(t_cnn);
    b.ratio = b.oracle_median_ns / b.cnn_median_ns;
    return b;
}

void export_report(const EvalReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto open = [&](const std::string& name) {
        const std::string path = out_dir + "/" + name;
        std::FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw IoError("cannot open for writing: " + path);
        return f;
    };

    std::FILE* f = open("report_summary.csv");
    std::fputs("method,mean_covered,mean_gap,median_gap,mean_pos_err_m,n_instants\n", f);
    for (const auto& m : report.methods)
        std::fprintf(f, "%s,%.17g,%.17g,%.17g,%.17g,%zu\n", m.name.c_str(), m.mean_covered,
                     m.mean_gap, m.median_gap, m.mean_pos_err_m, m.covered.size());
    std::fclose(f);

    f = open("report_cdf.csv");
    std::fputs("method,covered,cum_prob\n", f);
    const auto cdfs = report.cdf();
    for (std::size_t mi = 0; mi < report.methods.size(); ++mi)
        for (int c = 0; c <= report.n_users; ++c)
            std::fprintf(f, "%s,%d,%.17g\n", report.methods[mi].name.c_str(), c,
                         cdfs[mi][static_cast<std::size_t>(c)]);
    std::fclose(f);

    f = open("report_series.csv");
    std::fputs("method,step,covered\n", f);
    for (const auto& m : report.methods)
        for (std::size_t i = 0; i < m.covered.size(); ++i)
            std::fprintf(f, "%s,%zu,%d\n", m.name.c_str(), i, m.covered[i]);
    std::fclose(f);

    f = open("report_summary.txt");
    std::fprintf(f, "instants evaluated: %zu, users per snapshot: %d\n", report.n_instants,
                 report.n_users);
    for (const auto& m : report.methods)
        std::fprintf(f,
                     "%-10s mean covered %7.3f  mean gap %7.3f  median gap %5.1f  mean pos err %8.2f m\n",
                     m.name.c_str(), m.mean_covered, m.mean_gap, m.median_gap, m.mean_pos_err_m);
    std::fclose(f);
}

}  // namespace uavlab::eval
