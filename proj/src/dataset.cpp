#include "uavlab/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <unordered_map>

#include "uavlab/errors.hpp"
#include "uavlab/rng.hpp"

namespace uavlab::dataset {

namespace {

constexpr char kMagic[6] = {'U', 'A', 'V', 'D', 'S', '1'};

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append_u32(buf, bits);
}

void append_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_u64(buf, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw IoError("dataset file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace

void GridConfig::validate() const {
    if (rows < 4 || cols < 4) throw ValidationError("grid: rows and cols must be >= 4");
    if (temporal_depth != 5) throw ValidationError("grid: temporal depth must be 5");
}

FeatureTensor featurize(std::span<const mobility::Snapshot> window, const GridConfig& grid,
                        double area_w, double area_h) {
    grid.validate();
    if (window.size() != static_cast<std::size_t>(grid.temporal_depth))
        throw ValidationError("featurize: window must have exactly temporal_depth snapshots");
    for (std::size_t k = 1; k < window.size(); ++k)
        if (window[k].t != window[k - 1].t + 1)
            throw ValidationError("featurize: window snapshots must be consecutive steps");

    const double cell_w = area_w / grid.cols;
    const double cell_h = area_h / grid.rows;

    FeatureTensor t;
    t.rows = grid.rows;
    t.cols = grid.cols;
    t.depth = grid.temporal_depth;
    t.values.assign(static_cast<std::size_t>(grid.rows) * grid.cols * grid.temporal_depth, 0.0f);
    for (std::size_t k = 0; k < window.size(); ++k) {
        for (const auto& pos : window[k].positions) {
            const int col = std::min(grid.cols - 1, static_cast<int>(std::floor(pos.x / cell_w)));
            const int row = std::min(grid.rows - 1, static_cast<int>(std::floor(pos.y / cell_h)));
            t.values[(k * static_cast<std::size_t>(grid.rows) + row) * grid.cols + col] += 1.0f;
        }
    }
    return t;
}

std::vector<Sample> build_samples(const std::vector<mobility::Session>& sessions,
                                  const std::vector<oracle::LabelRow>& labels,
                                  const GridConfig& grid, double area_w, double area_h) {
    grid.validate();
    std::map<std::pair<std::uint64_t, int>, const oracle::LabelRow*> by_key;
    for (const auto& row : labels) by_key[{row.session_id, row.step}] = &row;

    std::vector<Sample> out;
    const int depth = grid.temporal_depth;
    for (const auto& s : sessions) {
        for (std::size_t last = static_cast<std::size_t>(depth) - 1; last < s.snapshots.size(); ++last) {
            const auto it = by_key.find({s.id, s.snapshots[last].t});
            if (it == by_key.end())
                throw ValidationError("build_samples: missing label for session " +
                                      std::to_string(s.id) + " step " +
                                      std::to_string(s.snapshots[last].t));
            Sample sample;
            sample.features = featurize(
                std::span<const mobility::Snapshot>(&s.snapshots[last + 1 - depth], static_cast<std::size_t>(depth)),
                grid, area_w, area_h);
            sample.label_x = it->second->pose.x / area_w;
            sample.label_y = it->second->pose.y / area_h;
            sample.session_id = s.id;
            sample.step = s.snapshots[last].t;
            out.push_back(std::move(sample));
        }
    }
    return out;
}

SplitResult split(std::vector<Sample> samples, double train_frac, double val_frac,
                  double test_frac, std::uint64_t seed) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ValidationError("split: fractions must sum to 1");

    std::vector<std::uint64_t> ids;
    std::unordered_map<std::uint64_t, bool> seen;
    for (const auto& s : samples)
        if (!std::exchange(seen[s.session_id], true)) ids.push_back(s.session_id);

    // Deterministic Fisher-Yates on the session ids.
    Rng rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[static_cast<std::size_t>(rng.next_below(i))]);

    const auto n = static_cast<double>(ids.size());
    const std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * n));
    const std::size_t n_val = static_cast<std::size_t>(std::llround((train_frac + val_frac) * n)) - n_train;

    enum class Part { kTrain, kVal, kTest };
    std::unordered_map<std::uint64_t, Part> part;
    for (std::size_t i = 0; i < ids.size(); ++i)
        part[ids[i]] = i < n_train ? Part::kTrain : (i < n_train + n_val ? Part::kVal : Part::kTest);

    SplitResult res;
    for (auto& s : samples) {
        switch (part.at(s.session_id)) {
            case Part::kTrain: res.train.push_back(std::move(s)); break;
            case Part::kVal: res.val.push_back(std::move(s)); break;
            case Part::kTest: res.test.push_back(std::move(s)); break;
        }
    }
    if ((train_frac > 0.0 && res.train.empty()) || (val_frac > 0.0 && res.val.empty()) ||
        (test_frac > 0.0 && res.test.empty()))
        throw ValidationError("split: a requested part came out empty");
    return res;
}

FeatureTensor mirror_tensor(const FeatureTensor& f, bool flip_x, bool flip_y) {
    FeatureTensor out = f;
    for (int k = 0; k < f.depth; ++k)
        for (int r = 0; r < f.rows; ++r)
            for (int c = 0; c < f.cols; ++c) {
                const int sr = flip_y ? f.rows - 1 - r : r;
                const int sc = flip_x ? f.cols - 1 - c : c;
                out.values[(static_cast<std::size_t>(k) * f.rows + r) * f.cols + c] =
                    f.at(k, sr, sc);
            }
    return out;
}

FeatureTensor transpose_tensor(const FeatureTensor& f) {
    if (f.rows != f.cols) throw ValidationError("transpose_tensor: grid must be square");
    FeatureTensor out = f;
    for (int k = 0; k < f.depth; ++k)
        for (int r = 0; r < f.rows; ++r)
            for (int c = 0; c < f.cols; ++c)
                out.values[(static_cast<std::size_t>(k) * f.rows + r) * f.cols + c] =
                    f.at(k, c, r);
    return out;
}

namespace {

Sample mirror_sample(const Sample& s, bool flip_x, bool flip_y) {
    Sample out = s;
    out.features = mirror_tensor(s.features, flip_x, flip_y);
    if (flip_x) out.label_x = 1.0 - s.label_x;
    if (flip_y) out.label_y = 1.0 - s.label_y;
    return out;
}

}  // namespace

std::vector<Sample> flip_augment(const std::vector<Sample>& samples) {
    std::vector<Sample> out;
    out.reserve(4 * samples.size());
    out.insert(out.end(), samples.begin(), samples.end());
    for (const auto& s : samples) out.push_back(mirror_sample(s, true, false));
    for (const auto& s : samples) out.push_back(mirror_sample(s, false, true));
    for (const auto& s : samples) out.push_back(mirror_sample(s, true, true));
    return out;
}

void save_dataset(const std::vector<Sample>& samples, const GridConfig& grid,
                  const std::string& path) {
    grid.validate();
    std::string payload;
    payload.reserve(16 + samples.size() * (16 + static_cast<std::size_t>(grid.rows) * grid.cols * grid.temporal_depth * 4 + 16));
    append_u32(payload, static_cast<std::uint32_t>(grid.rows));
    append_u32(payload, static_cast<std::uint32_t>(grid.cols));
    append_u32(payload, static_cast<std::uint32_t>(grid.temporal_depth));
    append_u32(payload, static_cast<std::uint32_t>(samples.size()));
    for (const auto& s : samples) {
        if (s.features.rows != grid.rows || s.features.cols != grid.cols ||
            s.features.depth != grid.temporal_depth)
            throw ValidationError("save_dataset: sample shape does not match grid");
        append_u64(payload, s.session_id);
        append_u64(payload, static_cast<std::uint64_t>(s.step));
        for (const float v : s.features.values) append_f32(payload, v);
        append_f64(payload, s.label_x);
        append_f64(payload, s.label_y);
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fwrite(kMagic, 1, sizeof(kMagic), f);
    std::fwrite(payload.data(), 1, payload.size(), f);
    char tail[4];
    for (int i = 0; i < 4; ++i) tail[i] = static_cast<char>((crc >> (8 * i)) & 0xFF);
    std::fwrite(tail, 1, 4, f);
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

std::vector<Sample> load_dataset(const std::string& path, GridConfig* grid_out) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    std::string buf;
    char chunk[1 << 16];
    std::size_t got;
    while ((got = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, got);
    std::fclose(f);

    if (buf.size() < sizeof(kMagic) + 16 + 4 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw IoError("dataset magic mismatch: " + path);
    const std::string payload = buf.substr(sizeof(kMagic), buf.size() - sizeof(kMagic) - 4);
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[buf.size() - 4 + i])) << (8 * i);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    if (crc != stored_crc) throw IoError("dataset checksum failure: " + path);

    Reader r{payload};
    GridConfig grid;
    grid.rows = static_cast<int>(r.u32());
    grid.cols = static_cast<int>(r.u32());
    grid.temporal_depth = static_cast<int>(r.u32());
    const std::uint32_t n = r.u32();
    grid.validate();
    if (grid_out) *grid_out = grid;

    const std::size_t n_values = static_cast<std::size_t>(grid.rows) * grid.cols * grid.temporal_depth;
    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Sample s;
        s.session_id = r.u64();
        s.step = static_cast<int>(r.u64());
        s.features.rows = grid.rows;
        s.features.cols = grid.cols;
        s.features.depth = grid.temporal_depth;
        s.features.values.resize(n_values);
        for (auto& v : s.features.values) v = r.f32();
        s.label_x = r.f64();
        s.label_y = r.f64();
        samples.push_back(std::move(s));
    }
    if (r.pos != payload.size()) throw IoError("dataset has trailing bytes: " + path);
    return samples;
}

}  // namespace uavlab::dataset
