#ifndef UAVLAB_DATASET_HPP
#define UAVLAB_DATASET_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uavlab/mobility.hpp"
#include "uavlab/oracle.hpp"

namespace uavlab::dataset {

struct GridConfig {
    int rows = 20;
    int cols = 20;
    int temporal_depth = 5;

    void validate() const;
};

// Per-cell MU counts over `temporal_depth` consecutive instants, stored
// slice-major: index (slice * rows + row) * cols + col.
struct FeatureTensor {
    int rows = 0;
    int cols = 0;
    int depth = 0;
    std::vector<float> values;

    float at(int slice, int row, int col) const {
        return values[static_cast<std::size_t>((slice * rows + row) * cols + col)];
    }
};

struct Sample {
    FeatureTensor features;
    double label_x = 0.0;  // optimal UAV x, normalized to [0,1]
    double label_y = 0.0;
    std::uint64_t session_id = 0;
    int step = 0;  // step of the window's last instant
};

// Grid-counts a window of exactly `temporal_depth` consecutive snapshots of
// one session. The top/right area boundary maps into the last row/col.
FeatureTensor featurize(std::span<const mobility::Snapshot> window, const GridConfig& grid,
                        double area_w, double area_h);

// Pairs each 5-instant window (steps depth-1 .. last) with the oracle label
// at the window's last instant, normalized by the area dimensions.
std::vector<Sample> build_samples(const std::vector<mobility::Session>& sessions,
                                  const std::vector<oracle::LabelRow>& labels,
                                  const GridConfig& grid, double area_w, double area_h);

struct SplitResult {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

// Session-level split: all samples of a session land in the same part.
SplitResult split(std::vector<Sample> samples, double train_frac, double val_frac,
                  double test_frac, std::uint64_t seed);

// Reflects every slice about the vertical (flip_x) and/or horizontal
// (flip_y) grid axis.
FeatureTensor mirror_tensor(const FeatureTensor& f, bool flip_x, bool flip_y);

// Swaps rows and columns of every slice; requires rows == cols.
FeatureTensor transpose_tensor(const FeatureTensor& f);

// 4x symmetry augmentation: every sample plus its horizontal, vertical, and
// double mirror. Mirroring commutes with featurization (the grid and the
// optimal-placement problem are both reflection-symmetric about the area
// center), so the extra samples are exactly as valid as the originals.
// Order: original block first, then hflip, vflip, hvflip blocks.
std::vector<Sample> flip_augment(const std::vector<Sample>& samples);

// Binary dataset format, magic UAVDS1, little-endian, trailing CRC32.
void save_dataset(const std::vector<Sample>& samples, const GridConfig& grid,
                  const std::string& path);
std::vector<Sample> load_dataset(const std::string& path, GridConfig* grid_out = nullptr);

}  // namespace uavlab::dataset

#endif
