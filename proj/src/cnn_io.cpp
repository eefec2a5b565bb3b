#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "uavlab/errors.hpp"

namespace uavlab::cnn {

namespace {

constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw IoError("model checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace

void save_model_file(const std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>>& layer_meta,
                     const std::vector<std::vector<double>>& layer_params,
                     const std::array<std::uint32_t, 3>& input_dims, const std::string& path,
                     const char* magic) {
    std::string payload;
    append_u32(payload, kVersion);
    for (const auto d : input_dims) append_u32(payload, d);
    append_u32(payload, static_cast<std::uint32_t>(layer_meta.size()));
    for (std::size_t i = 0; i < layer_meta.size(); ++i) {
        payload.push_back(static_cast<char>(layer_meta[i].first));
        append_u32(payload, static_cast<std::uint32_t>(layer_meta[i].second.size()));
        for (const auto s : layer_meta[i].second) append_u32(payload, s);
        append_u32(payload, static_cast<std::uint32_t>(layer_params[i].size()));
        for (const double p : layer_params[i]) append_f64(payload, p);
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fwrite(magic, 1, 6, f);
    std::fwrite(payload.data(), 1, payload.size(), f);
    char tail[4];
    for (int i = 0; i < 4; ++i) tail[i] = static_cast<char>((crc >> (8 * i)) & 0xFF);
    std::fwrite(tail, 1, 4, f);
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

void load_model_file(std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>>& layer_meta,
                     std::vector<std::vector<double>>& layer_params,
                     std::array<std::uint32_t, 3>& input_dims, const std::string& path,
                     const char* magic) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    std::string buf;
    char chunk[1 << 16];
    std::size_t got;
    while ((got = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, got);
    std::fclose(f);

    if (buf.size() < 6 + 4 + 4 || std::memcmp(buf.data(), magic, 6) != 0)
        throw IoError("model checkpoint magic mismatch: " + path);
    const std::string payload = buf.substr(6, buf.size() - 6 - 4);
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[buf.size() - 4 + i])) << (8 * i);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    if (crc != stored_crc) throw IoError("model checkpoint checksum failure: " + path);

    Reader r{payload};
    if (r.u32() != kVersion) throw IoError("model checkpoint version mismatch: " + path);
    for (auto& d : input_dims) d = r.u32();
    const std::uint32_t n_layers = r.u32();
    layer_meta.clear();
    layer_params.clear();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::uint8_t tag = r.u8();
        std::vector<std::uint32_t> shape(r.u32());
        for (auto& s : shape) s = r.u32();
        std::vector<double> params(r.u32());
        for (auto& p : params) p = r.f64();
        layer_meta.emplace_back(tag, std::move(shape));
        layer_params.push_back(std::move(params));
    }
    if (r.pos != payload.size()) throw IoError("model checkpoint has trailing bytes: " + path);
}

}  // namespace uavlab::cnn
