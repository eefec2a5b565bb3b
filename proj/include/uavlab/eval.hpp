#ifndef UAVLAB_EVAL_HPP
#define UAVLAB_EVAL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uavlab/channel.hpp"
#include "uavlab/geometry.hpp"
#include "uavlab/mobility.hpp"

namespace uavlab::eval {

// Number of MUs covered by a pose against one snapshot, by direct evaluation
// of the channel predicate.
int coverage_of(const UavPose& pose, const mobility::Snapshot& snapshot,
                const channel::ChannelParams& p);

struct MethodEval {
    std::string name;
    std::vector<int> covered;         // per evaluated instant
    std::vector<double> pos_err_m;    // distance to the oracle pose
    double mean_covered = 0.0;
    double mean_gap = 0.0;            // oracle covered minus method covered
    double median_gap = 0.0;
    double mean_pos_err_m = 0.0;
};

struct EvalReport {
    int n_users = 0;
    std::size_t n_instants = 0;
    std::vector<MethodEval> methods;  // methods[0] is the oracle reference

    // CDF over covered counts, support 0..n_users, one row per method.
    std::vector<std::vector<double>> cdf() const;
};

// Produces one pose per session instant. Methods that need history (the CNN)
// still return a full-length vector; evaluation starts at `first_step` for
// every method so all methods are compared on the identical instant set.
using PoseProvider = std::function<std::vector<UavPose>(const mobility::Session&)>;

EvalReport evaluate(const std::vector<std::pair<std::string, PoseProvider>>& methods,
                    const std::vector<mobility::Session>& test_sessions,
                    const channel::ChannelParams& p, int first_step);

struct RuntimeBench {
    double oracle_median_ns = 0.0;
    double cnn_median_ns = 0.0;
    double ratio = 0.0;  // oracle / cnn
};

// Wall-clock medians over the given instances, warm runs, I/O excluded.
RuntimeBench bench_runtime(const std::function<void(const mobility::Snapshot&)>& oracle_fn,
                           const std::function<void(const mobility::Snapshot&)>& cnn_fn,
                           const std::vector<mobility::Snapshot>& instances);

// Writes report_summary.csv, report_cdf.csv, report_series.csv and
// report_summary.txt under `out_dir`.
void export_report(const EvalReport& report, const std::string& out_dir);

}  // namespace uavlab::eval

#endif
