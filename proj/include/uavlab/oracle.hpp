#ifndef UAVLAB_ORACLE_HPP
#define UAVLAB_ORACLE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uavlab/channel.hpp"
#include "uavlab/geometry.hpp"
#include "uavlab/mobility.hpp"

namespace uavlab::oracle {

struct AreaRect {
    double w = 2000.0;  // m
    double h = 2000.0;  // m
};

struct PlacementResult {
    UavPose pose;
    int covered = 0;
    std::int64_t runtime_ns = 0;
};

// Coverage objective weights; only the coverage term is active here.
struct ObjectiveWeights {
    double w1 = 1.0;
    double w2 = 0.0;
    double w3 = 0.0;
    void validate() const;
};

// Exact planar maximum disk coverage. Candidate centers are the user points
// plus both intersections of every pair of radius-r circles around users
// within 2r of each other, clamped to the area rectangle. Ties on covered
// count go to the lexicographically smallest (x, y) after rounding to 1e-6 m.
PlacementResult optimal_placement_exact(std::span<const Position> users, double r,
                                        const AreaRect& area, double altitude);

// Grid-restricted placement over centers spaced `step` (covered count is a
// lower bound on the exact result). Same tie-break.
PlacementResult optimal_placement_grid(std::span<const Position> users, double r, double step,
                                       const AreaRect& area, double altitude);

// One exact placement per snapshot, with r = r_max and h = h_opt from the
// channel geometry.
std::vector<PlacementResult> label_session(const mobility::Session& session,
                                           const channel::ChannelParams& p, const AreaRect& area);

struct LabelRow {
    std::uint64_t session_id;
    int step;
    UavPose pose;
    int covered;
};

// Labels CSV: header `session_id,step,opt_x_m,opt_y_m,opt_h_m,covered`.
void write_labels_csv(const std::vector<LabelRow>& rows, const std::string& path);
std::vector<LabelRow> read_labels_csv(const std::string& path);

}  // namespace uavlab::oracle

#endif
