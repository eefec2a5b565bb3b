#include "uavlab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "uavlab/errors.hpp"

namespace uavlab::config {

namespace {

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean value for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "channel.a") channel.a = parse_double(key, value);
    else if (key == "channel.b") channel.b = parse_double(key, value);
    else if (key == "channel.eta_los_db") channel.eta_los_db = parse_double(key, value);
    else if (key == "channel.eta_nlos_db") channel.eta_nlos_db = parse_double(key, value);
    else if (key == "channel.carrier_hz") channel.carrier_hz = parse_double(key, value);
    else if (key == "channel.gamma_db") channel.gamma_db = parse_double(key, value);
    else if (key == "scenario.area_w_m") scenario.area_w = parse_double(key, value);
    else if (key == "scenario.area_h_m") scenario.area_h = parse_double(key, value);
    else if (key == "scenario.n_users") scenario.n_users = static_cast<int>(parse_int(key, value));
    else if (key == "scenario.hotspot_radius_m") scenario.hotspot_radius = parse_double(key, value);
    else if (key == "scenario.speed_min_mps") scenario.speed_min = parse_double(key, value);
    else if (key == "scenario.speed_max_mps") scenario.speed_max = parse_double(key, value);
    else if (key == "scenario.steps_per_session") scenario.steps_per_session = static_cast<int>(parse_int(key, value));
    else if (key == "scenario.step_seconds") scenario.step_seconds = parse_double(key, value);
    else if (key == "grid.rows") grid.rows = static_cast<int>(parse_int(key, value));
    else if (key == "grid.cols") grid.cols = static_cast<int>(parse_int(key, value));
    else if (key == "grid.temporal_depth") grid.temporal_depth = static_cast<int>(parse_int(key, value));
    else if (key == "train.epochs") train.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "train.batch_size") train.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "train.lr") train.lr = parse_double(key, value);
    else if (key == "train.seed") train.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "train.patience") train.patience = static_cast<int>(parse_int(key, value));
    else if (key == "train.float32") train_float32 = parse_bool(key, value);
    else if (key == "train.augment_flips") train_augment_flips = parse_bool(key, value);
    else if (key == "eval.symmetrize_cnn") eval_symmetrize_cnn = parse_bool(key, value);
    else if (key == "rl.alpha0") qlearn.alpha0 = parse_double(key, value);
    else if (key == "rl.gamma") qlearn.gamma = parse_double(key, value);
    else if (key == "rl.eps_start") qlearn.eps_start = parse_double(key, value);
    else if (key == "rl.eps_end") qlearn.eps_end = parse_double(key, value);
    else if (key == "rl.passes") qlearn.passes = static_cast<int>(parse_int(key, value));
    else if (key == "rl.seed") qlearn.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "dqn.gamma") dqn.gamma = parse_double(key, value);
    else if (key == "dqn.lr") dqn.lr = parse_double(key, value);
    else if (key == "dqn.batch_size") dqn.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "dqn.replay_capacity") dqn.replay_capacity = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "dqn.target_sync_interval") dqn.target_sync_interval = static_cast<int>(parse_int(key, value));
    else if (key == "dqn.warmup") dqn.warmup = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "dqn.eps_start") dqn.eps_start = parse_double(key, value);
    else if (key == "dqn.eps_end") dqn.eps_end = parse_double(key, value);
    else if (key == "dqn.seed") dqn.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "dqn.passes") dqn_passes = static_cast<int>(parse_int(key, value));
    else if (key == "run.threads") threads = static_cast<int>(parse_int(key, value));
    else throw ConfigError("config: unknown key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
    std::ostringstream out;
    out.precision(17);
    if (key == "channel.a") out << channel.a;
    else if (key == "channel.b") out << channel.b;
    else if (key == "channel.eta_los_db") out << channel.eta_los_db;
    else if (key == "channel.eta_nlos_db") out << channel.eta_nlos_db;
    else if (key == "channel.carrier_hz") out << channel.carrier_hz;
    else if (key == "channel.gamma_db") out << channel.gamma_db;
    else if (key == "scenario.area_w_m") out << scenario.area_w;
    else if (key == "scenario.area_h_m") out << scenario.area_h;
    else if (key == "scenario.n_users") out << scenario.n_users;
    else if (key == "scenario.hotspot_radius_m") out << scenario.hotspot_radius;
    else if (key == "scenario.speed_min_mps") out << scenario.speed_min;
    else if (key == "scenario.speed_max_mps") out << scenario.speed_max;
    else if (key == "scenario.steps_per_session") out << scenario.steps_per_session;
    else if (key == "scenario.step_seconds") out << scenario.step_seconds;
    else if (key == "grid.rows") out << grid.rows;
    else if (key == "grid.cols") out << grid.cols;
    else if (key == "grid.temporal_depth") out << grid.temporal_depth;
    else if (key == "train.epochs") out << train.epochs;
    else if (key == "train.batch_size") out << train.batch_size;
    else if (key == "train.lr") out << train.lr;
    else if (key == "train.seed") out << train.seed;
    else if (key == "train.patience") out << train.patience;
    else if (key == "train.float32") out << (train_float32 ? "true" : "false");
    else if (key == "train.augment_flips") out << (train_augment_flips ? "true" : "false");
    else if (key == "eval.symmetrize_cnn") out << (eval_symmetrize_cnn ? "true" : "false");
    else if (key == "rl.alpha0") out << qlearn.alpha0;
    else if (key == "rl.gamma") out << qlearn.gamma;
    else if (key == "rl.eps_start") out << qlearn.eps_start;
    else if (key == "rl.eps_end") out << qlearn.eps_end;
    else if (key == "rl.passes") out << qlearn.passes;
    else if (key == "rl.seed") out << qlearn.seed;
    else if (key == "dqn.gamma") out << dqn.gamma;
    else if (key == "dqn.lr") out << dqn.lr;
    else if (key == "dqn.batch_size") out << dqn.batch_size;
    else if (key == "dqn.replay_capacity") out << dqn.replay_capacity;
    else if (key == "dqn.target_sync_interval") out << dqn.target_sync_interval;
    else if (key == "dqn.warmup") out << dqn.warmup;
    else if (key == "dqn.eps_start") out << dqn.eps_start;
    else if (key == "dqn.eps_end") out << dqn.eps_end;
    else if (key == "dqn.seed") out << dqn.seed;
    else if (key == "dqn.passes") out << dqn_passes;
    else if (key == "run.threads") out << threads;
    else throw ConfigError("config: unknown key '" + key + "'");
    return out.str();
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = {
        "channel.a", "channel.b", "channel.eta_los_db", "channel.eta_nlos_db",
        "channel.carrier_hz", "channel.gamma_db",
        "scenario.area_w_m", "scenario.area_h_m", "scenario.n_users",
        "scenario.hotspot_radius_m", "scenario.speed_min_mps", "scenario.speed_max_mps",
        "scenario.steps_per_session", "scenario.step_seconds",
        "grid.rows", "grid.cols", "grid.temporal_depth",
        "train.epochs", "train.batch_size", "train.lr", "train.seed", "train.patience",
        "train.float32", "train.augment_flips", "eval.symmetrize_cnn",
        "rl.alpha0", "rl.gamma", "rl.eps_start", "rl.eps_end", "rl.passes", "rl.seed",
        "dqn.gamma", "dqn.lr", "dqn.batch_size", "dqn.replay_capacity",
        "dqn.target_sync_interval", "dqn.warmup", "dqn.eps_start", "dqn.eps_end", "dqn.seed",
        "dqn.passes",
        "run.threads",
    };
    return k;
}

void RunConfig::validate() const {
    channel.validate();
    scenario.validate();
    grid.validate();
    train.validate();
    dqn.validate();
    if (threads < 1) throw ConfigError("config: run.threads must be >= 1");
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at " + path + ":" + std::to_string(lineno));
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    for (const auto& key : RunConfig::keys())
        std::fprintf(f, "%s = %s\n", key.c_str(), cfg.get(key).c_str());
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

}  // namespace uavlab::config
