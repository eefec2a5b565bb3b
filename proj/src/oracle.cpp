#include "uavlab/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uavlab/errors.hpp"

namespace uavlab::oracle {

namespace {

// Covered-count comparisons use a slightly inflated r^2 so that candidate
// centers constructed to put users exactly on the disk boundary still count
// them under floating-point error.
double inflated_r2(double r) {
    const double r2 = r * r;
    return r2 + std::max(1e-12, 4e-12 * r2);
}

double round_1e6(double v) { return std::round(v * 1e6) / 1e6; }

int count_covered(std::span<const Position> users, double cx, double cy, double r2) {
    int n = 0;
    for (const auto& u : users)
        if (sq_dist(cx, cy, u.x, u.y) <= r2) ++n;
    return n;
}

struct Best {
    double x = 0.0, y = 0.0;
    double rx = 0.0, ry = 0.0;  // rounded, for the tie-break
    int covered = -1;

    void offer(double cx, double cy, int covered_count) {
        const double cand_rx = round_1e6(cx);
        const double cand_ry = round_1e6(cy);
        if (covered_count > covered ||
            (covered_count == covered && (cand_rx < rx || (cand_rx == rx && cand_ry < ry)))) {
            x = cx;
            y = cy;
            rx = cand_rx;
            ry = cand_ry;
            covered = covered_count;
        }
    }
};

}  // namespace

void ObjectiveWeights::validate() const {
    if (w1 != 1.0 || w2 != 0.0 || w3 != 0.0)
        throw ValidationError("objective weights: only w1 = 1, w2 = w3 = 0 is supported");
}

PlacementResult optimal_placement_exact(std::span<const Position> users, double r,
                                        const AreaRect& area, double altitude) {
    if (users.empty()) throw ValidationError("optimal_placement_exact: empty user list");
    if (!(r > 0.0)) throw ValidationError("optimal_placement_exact: radius must be positive");

    const auto t0 = std::chrono::steady_clock::now();
    const double r2 = inflated_r2(r);
    const double four_r2 = 4.0 * r * r;

    const auto clamp_x = [&](double x) { return std::clamp(x, 0.0, area.w); };
    const auto clamp_y = [&](double y) { return std::clamp(y, 0.0, area.h); };

    Best best;
    for (const auto& u : users) best.offer(clamp_x(u.x), clamp_y(u.y), count_covered(users, u.x, u.y, r2));

    // Intersection points of circle pairs; clamping to the rectangle cannot
    // reduce the covered set because projecting onto a convex region that
    // contains all users shrinks every user distance.
    for (std::size_t i = 0; i + 1 < users.size(); ++i) {
        for (std::size_t j = i + 1; j < users.size(); ++j) {
            const double d2 = sq_dist(users[i].x, users[i].y, users[j].x, users[j].y);
            if (d2 > four_r2 || d2 == 0.0) continue;
            const double d = std::sqrt(d2);
            const double mx = 0.5 * (users[i].x + users[j].x);
            const double my = 0.5 * (users[i].y + users[j].y);
            const double half = std::sqrt(std::max(0.0, r * r - 0.25 * d2));
            const double px = (users[j].y - users[i].y) / d * half;
            const double py = -(users[j].x - users[i].x) / d * half;
            for (const double sign : {1.0, -1.0}) {
                const double cx = clamp_x(mx + sign * px);
                const double cy = clamp_y(my + sign * py);
                best.offer(cx, cy, count_covered(users, cx, cy, r2));
            }
        }
    }

    const auto t1 = std::chrono::steady_clock::now();
    PlacementResult res;
    res.pose = UavPose{best.x, best.y, altitude};
    res.covered = best.covered;
    res.runtime_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    return res;
}

PlacementResult optimal_placement_grid(std::span<const Position> users, double r, double step,
                                       const AreaRect& area, double altitude) {
    if (users.empty()) throw ValidationError("optimal_placement_grid: empty user list");
    if (!(r > 0.0)) throw ValidationError("optimal_placement_grid: radius must be positive");
    if (!(step > 0.0) || step > std::max(area.w, area.h))
        throw ValidationError("optimal_placement_grid: step must be in (0, side length]");

    const auto t0 = std::chrono::steady_clock::now();
    const std::int64_t nx = static_cast<std::int64_t>(std::floor(area.w / step + 1e-9)) + 1;
    const std::int64_t ny = static_cast<std::int64_t>(std::floor(area.h / step + 1e-9)) + 1;
    const double r2 = r * r;

    // Accumulate per-node counts by stamping each user's disk; equivalent to
    // counting users at every node but touches only pi*r^2/step^2 nodes per
    // user.
    std::vector<std::int32_t> counts(static_cast<std::size_t>(nx * ny), 0);
    for (const auto& u : users) {
        const std::int64_t ix_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((u.x - r) / step - 1e-9)));
        const std::int64_t ix_hi = std::min<std::int64_t>(nx - 1, static_cast<std::int64_t>(std::floor((u.x + r) / step + 1e-9)));
        for (std::int64_t ix = ix_lo; ix <= ix_hi; ++ix) {
            const double dx = static_cast<double>(ix) * step - u.x;
            const double rem = r2 - dx * dx;
            if (rem < 0.0) continue;
            const double span = std::sqrt(rem);
            std::int64_t iy_lo = static_cast<std::int64_t>(std::ceil((u.y - span) / step - 1e-9));
            std::int64_t iy_hi = static_cast<std::int64_t>(std::floor((u.y + span) / step + 1e-9));
            // Exact boundary check at the edges of the estimated range.
            while (iy_lo <= iy_hi && dx * dx + std::pow(iy_lo * step - u.y, 2) > r2) ++iy_lo;
            while (iy_hi >= iy_lo && dx * dx + std::pow(iy_hi * step - u.y, 2) > r2) --iy_hi;
            iy_lo = std::max<std::int64_t>(0, iy_lo);
            iy_hi = std::min<std::int64_t>(ny - 1, iy_hi);
            for (std::int64_t iy = iy_lo; iy <= iy_hi; ++iy)
                ++counts[static_cast<std::size_t>(ix * ny + iy)];
        }
    }

    // Lexicographic scan: first maximum in (x, y) order wins ties.
    std::int64_t best_ix = 0, best_iy = 0;
    std::int32_t best_count = -1;
    for (std::int64_t ix = 0; ix < nx; ++ix) {
        for (std::int64_t iy = 0; iy < ny; ++iy) {
            const std::int32_t c = counts[static_cast<std::size_t>(ix * ny + iy)];
            if (c > best_count) {
                best_count = c;
                best_ix = ix;
                best_iy = iy;
            }
        }
    }

    const auto t1 = std::chrono::steady_clock::now();
    PlacementResult res;
    res.pose = UavPose{static_cast<double>(best_ix) * step, static_cast<double>(best_iy) * step, altitude};
    res.covered = best_count;
    res.runtime_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    return res;
}

std::vector<PlacementResult> label_session(const mobility::Session& session,
                                           const channel::ChannelParams& p, const AreaRect& area) {
    if (session.snapshots.empty()) throw ValidationError("label_session: empty session");
    const auto geom = channel::max_coverage_radius(p);
    std::vector<PlacementResult> out;
    out.reserve(session.snapshots.size());
    for (const auto& snap : session.snapshots)
        out.push_back(optimal_placement_exact(snap.positions, geom.r_max, area, geom.h_opt));
    return out;
}

void write_labels_csv(const std::vector<LabelRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fputs("session_id,step,opt_x_m,opt_y_m,opt_h_m,covered\n", f);
    for (const auto& row : rows)
        std::fprintf(f, "%" PRIu64 ",%d,%.17g,%.17g,%.17g,%d\n", row.session_id, row.step,
                     row.pose.x, row.pose.y, row.pose.h, row.covered);
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

std::vector<LabelRow> read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "session_id,step,opt_x_m,opt_y_m,opt_h_m,covered")
        throw IoError("bad labels header in " + path);
    std::vector<LabelRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        LabelRow r{};
        char c[5];
        if (!(row >> r.session_id >> c[0] >> r.step >> c[1] >> r.pose.x >> c[2] >> r.pose.y >>
              c[3] >> r.pose.h >> c[4] >> r.covered))
            throw IoError("bad labels row: " + line);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace uavlab::oracle
