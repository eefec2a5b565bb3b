#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "uavlab/errors.hpp"
#include "uavlab/cnn.hpp"
#include "uavlab/eval.hpp"
#include "uavlab/pipeline.hpp"
#include "uavlab/oracle.hpp"
#include "uavlab/rng.hpp"

using namespace uavlab;
using namespace uavlab::eval;

namespace {

const oracle::AreaRect kArea{2000.0, 2000.0};

channel::ChannelParams params() { return channel::ChannelParams{}; }

std::vector<mobility::Session> test_sessions(int n, std::uint64_t seed, int n_users = 10) {
    mobility::ScenarioConfig cfg;
    cfg.n_users = n_users;
    return mobility::generate_scenario(n, seed, cfg);
}

PoseProvider oracle_provider(const channel::ChannelParams& p) {
    return [p](const mobility::Session& s) {
        std::vector<UavPose> poses;
        for (const auto& l : oracle::label_session(s, p, kArea)) poses.push_back(l.pose);
        return poses;
    };
}

PoseProvider fixed_center_provider(const channel::ChannelParams& p) {
    const auto geom = channel::max_coverage_radius(p);
    return [h = geom.h_opt](const mobility::Session& s) {
        return std::vector<UavPose>(s.snapshots.size(), UavPose{kArea.w / 2.0, kArea.h / 2.0, h});
    };
}

}  // namespace

TEST_CASE("coverage_of equals a direct per-user recount") {
    const auto p = params();
    const auto geom = channel::max_coverage_radius(p);
    const auto sessions = test_sessions(3, 9);
    Rng rng(4);
    for (const auto& s : sessions) {
        for (const auto& snap : s.snapshots) {
            const UavPose pose{rng.uniform(0.0, kArea.w), rng.uniform(0.0, kArea.h), geom.h_opt};
            int expect = 0;
            for (const auto& u : snap.positions)
                if (horizontal_dist(pose, u) <= geom.r_max) ++expect;
            CHECK(coverage_of(pose, snap, p) == expect);
        }
    }
}

TEST_CASE("oracle evaluated against itself has zero gap and position error") {
    const auto p = params();
    const auto sessions = test_sessions(4, 21);
    const auto report = evaluate({{"oracle", oracle_provider(p)}}, sessions, p, 0);
    REQUIRE(report.methods.size() == 1);
    CHECK(report.n_instants == 4 * 15);
    CHECK(report.methods[0].mean_gap == 0.0);
    CHECK(report.methods[0].median_gap == 0.0);
    CHECK(report.methods[0].mean_pos_err_m == 0.0);
}

TEST_CASE("no method beats the oracle on any instant") {
    const auto p = params();
    const auto sessions = test_sessions(5, 33);
    const auto report =
        evaluate({{"oracle", oracle_provider(p)}, {"center", fixed_center_provider(p)}}, sessions, p, 0);
    REQUIRE(report.methods.size() == 2);
    const auto& oracle_cov = report.methods[0].covered;
    const auto& center_cov = report.methods[1].covered;
    REQUIRE(oracle_cov.size() == center_cov.size());
    for (std::size_t i = 0; i < oracle_cov.size(); ++i) CHECK(center_cov[i] <= oracle_cov[i]);
    CHECK(report.methods[1].mean_gap >= 0.0);
    CHECK(report.methods[1].mean_covered <= report.methods[0].mean_covered);
}

TEST_CASE("first_step slices the shared instant set") {
    const auto p = params();
    const auto sessions = test_sessions(3, 5);
    const auto full = evaluate({{"oracle", oracle_provider(p)}}, sessions, p, 0);
    const auto tail = evaluate({{"oracle", oracle_provider(p)}}, sessions, p, 4);
    CHECK(full.n_instants == 3 * 15);
    CHECK(tail.n_instants == 3 * 11);
}

TEST_CASE("evaluate validation errors") {
    const auto p = params();
    const auto sessions = test_sessions(1, 1);
    CHECK_THROWS_AS(evaluate({{"center", fixed_center_provider(p)}}, sessions, p, 0), ValidationError);
    CHECK_THROWS_AS(evaluate({{"oracle", oracle_provider(p)}}, {}, p, 0), ValidationError);

    // A provider returning the wrong instant count is rejected.
    PoseProvider truncated = [&](const mobility::Session& s) {
        return std::vector<UavPose>(s.snapshots.size() - 1, UavPose{0, 0, 100});
    };
    CHECK_THROWS_AS(
        evaluate({{"oracle", oracle_provider(p)}, {"bad", truncated}}, sessions, p, 0),
        ValidationError);
}

TEST_CASE("cdf is monotone, ends at one, and matches counts") {
    const auto p = params();
    const auto sessions = test_sessions(4, 8);
    const auto report =
        evaluate({{"oracle", oracle_provider(p)}, {"center", fixed_center_provider(p)}}, sessions, p, 0);
    const auto cdfs = report.cdf();
    REQUIRE(cdfs.size() == 2);
    for (std::size_t mi = 0; mi < cdfs.size(); ++mi) {
        const auto& c = cdfs[mi];
        REQUIRE(c.size() == static_cast<std::size_t>(report.n_users) + 1);
        for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] >= c[i - 1]);
        CHECK(c.back() == doctest::Approx(1.0));
        // Cross-foot: P(covered <= k) recomputed from the raw counts.
        for (std::size_t k = 0; k < c.size(); ++k) {
            int n_le = 0;
            for (const int v : report.methods[mi].covered)
                if (v <= static_cast<int>(k)) ++n_le;
            CHECK(c[k] == doctest::Approx(static_cast<double>(n_le) /
                                          static_cast<double>(report.n_instants)));
        }
    }
}

TEST_CASE("export_report writes the four artifacts consistently") {
    const auto p = params();
    const auto sessions = test_sessions(2, 14);
    const auto report =
        evaluate({{"oracle", oracle_provider(p)}, {"center", fixed_center_provider(p)}}, sessions, p, 0);
    const auto dir = (std::filesystem::temp_directory_path() / "uavlab_report").string();
    export_report(report, dir);

    for (const char* name :
         {"report_summary.csv", "report_cdf.csv", "report_series.csv", "report_summary.txt"})
        CHECK(std::filesystem::exists(dir + "/" + name));

    // Summary round-trips the computed means.
    std::ifstream sum(dir + "/report_summary.csv");
    std::string line;
    std::getline(sum, line);
    CHECK(line == "method,mean_covered,mean_gap,median_gap,mean_pos_err_m,n_instants");
    std::getline(sum, line);
    std::istringstream row(line);
    std::string name;
    std::getline(row, name, ',');
    CHECK(name == "oracle");
    double mean_covered = -1.0;
    row >> mean_covered;
    CHECK(mean_covered == doctest::Approx(report.methods[0].mean_covered));

    // CDF file has one row per method per support point and stays monotone.
    std::ifstream cdf(dir + "/report_cdf.csv");
    std::getline(cdf, line);
    CHECK(line == "method,covered,cum_prob");
    std::size_t rows = 0;
    double prev = -1.0;
    std::string prev_method;
    while (std::getline(cdf, line)) {
        ++rows;
        std::istringstream r(line);
        std::string method, covered, prob;
        std::getline(r, method, ',');
        std::getline(r, covered, ',');
        std::getline(r, prob, ',');
        const double v = std::stod(prob);
        if (method == prev_method) CHECK(v >= prev - 1e-15);
        prev = v;
        prev_method = method;
    }
    CHECK(rows == 2 * (static_cast<std::size_t>(report.n_users) + 1));

    // Series file row count: one per method per instant.
    std::ifstream series(dir + "/report_series.csv");
    std::getline(series, line);
    std::size_t series_rows = 0;
    while (std::getline(series, line))
        if (!line.empty()) ++series_rows;
    CHECK(series_rows == 2 * report.n_instants);

    std::filesystem::remove_all(dir);
}

TEST_CASE("bench_runtime medians and ratio are sane") {
    const auto sessions = test_sessions(1, 2, 5);
    std::vector<mobility::Snapshot> instances(sessions[0].snapshots.begin(),
                                              sessions[0].snapshots.end());
    const auto slow = [](const mobility::Snapshot&) {
        std::this_thread::sleep_for(std::chrono::microseconds(400));
    };
    const auto fast = [](const mobility::Snapshot&) {
        std::this_thread::sleep_for(std::chrono::microseconds(50));
    };
    const auto b = bench_runtime(slow, fast, instances);
    CHECK(b.oracle_median_ns >= 400e3);
    CHECK(b.cnn_median_ns >= 50e3);
    CHECK(b.ratio > 1.0);
    CHECK(b.ratio == doctest::Approx(b.oracle_median_ns / b.cnn_median_ns));
    CHECK_THROWS_AS(bench_runtime(slow, fast, {}), ValidationError);
}

TEST_CASE("symmetrized CNN provider is equivariant under mirroring") {
    // Mirror every user position about the vertical center line; the
    // symmetry-decoded predictions must mirror with them (the proposal set
    // and the count-mass scores are identical, just re-indexed), even for an
    // untrained network with no symmetry of its own.
    dataset::GridConfig grid;
    auto net = cnn::make_coverage_cnn<float>(grid.rows, grid.cols, grid.temporal_depth, 7);
    const auto p = params();
    const auto geom = channel::max_coverage_radius(p);

    const auto sessions = test_sessions(1, 77, 12);
    auto mirrored = sessions;
    for (auto& snap : mirrored[0].snapshots)
        for (auto& u : snap.positions) u.x = kArea.w - u.x;

    const auto provider = pipeline::cnn_symmetrized_provider(net, grid, kArea.w, kArea.h,
                                                             geom.h_opt, geom.r_max);
    const auto a = provider(sessions[0]);
    const auto b = provider(mirrored[0]);
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        CHECK(b[t].x == doctest::Approx(kArea.w - a[t].x).epsilon(1e-5));
        CHECK(b[t].y == doctest::Approx(a[t].y).epsilon(1e-5));
        CHECK(b[t].h == a[t].h);
    }

    // The plain provider generally is not equivariant; the symmetrized one
    // must also stay inside the area like any pose provider.
    for (const auto& pose : a) {
        CHECK(pose.x >= 0.0);
        CHECK(pose.x <= kArea.w);
        CHECK(pose.y >= 0.0);
        CHECK(pose.y <= kArea.h);
    }
}
