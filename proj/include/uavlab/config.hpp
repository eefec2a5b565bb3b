#ifndef UAVLAB_CONFIG_HPP
#define UAVLAB_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "uavlab/channel.hpp"
#include "uavlab/cnn.hpp"
#include "uavlab/dataset.hpp"
#include "uavlab/mobility.hpp"
#include "uavlab/rl.hpp"

namespace uavlab::config {

// Everything a pipeline run needs, read from a flat `section.key = value`
// file. Unknown keys are rejected; CLI flags override file values.
struct RunConfig {
    channel::ChannelParams channel;
    mobility::ScenarioConfig scenario;
    dataset::GridConfig grid;
    cnn::TrainConfig train;
    bool train_float32 = true;
    bool train_augment_flips = false;  // 4x mirror augmentation of the training split
    bool eval_symmetrize_cnn = true;   // average CNN predictions over the square's symmetries
    rl::QLearnParams qlearn;
    rl::DqnConfig dqn;
    int dqn_passes = 2;  // passes over the session list for DQN training
    int threads = 1;

    // Sets one key; throws ConfigError on unknown key or unparsable value.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;

    void validate() const;

    // Every recognized key, for CLI flag generation and --help.
    static const std::vector<std::string>& keys();
};

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace uavlab::config

#endif
