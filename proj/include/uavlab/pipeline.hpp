#ifndef UAVLAB_PIPELINE_HPP
#define UAVLAB_PIPELINE_HPP

#include <functional>
#include <string>
#include <vector>

#include "uavlab/cnn.hpp"
#include "uavlab/config.hpp"
#include "uavlab/eval.hpp"
#include "uavlab/oracle.hpp"
#include "uavlab/rl.hpp"

namespace uavlab::pipeline {

// Chunked parallel loop; output written by index, so results are independent
// of the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Labels every instant of every session with the exact oracle.
std::vector<oracle::LabelRow> label_all(const std::vector<mobility::Session>& sessions,
                                        const channel::ChannelParams& p,
                                        const oracle::AreaRect& area, int threads);

// Pose providers for eval::evaluate. All return one pose per session instant.
eval::PoseProvider oracle_provider(const std::vector<oracle::LabelRow>& labels);

// Predicts from the causal 5-instant window ending at each step; steps with
// insufficient history get the area-center pose (excluded from evaluation).
eval::PoseProvider cnn_provider(cnn::Network<float>& net, const dataset::GridConfig& grid,
                                double area_w, double area_h, double h_opt);
eval::PoseProvider cnn_provider(cnn::Network<double>& net, const dataset::GridConfig& grid,
                                double area_w, double area_h, double h_opt);

// Like cnn_provider, but decodes through the symmetries of the problem: the
// network is evaluated on the 4 axis mirrors of the input (plus their
// transposes, 8 total, when the grid and area are square), each prediction
// is mapped back to original coordinates, and the proposal (or the proposal
// mean) whose disk covers the most mass of the current instant's cell counts
// wins. The placement problem is exactly invariant under these maps and the
// score reads only the network's own input tensor, so this removes the
// asymmetric and mode-averaging bias of a single regression pass at the cost
// of 4-8 forward passes per instant.
eval::PoseProvider cnn_symmetrized_provider(cnn::Network<float>& net,
                                            const dataset::GridConfig& grid, double area_w,
                                            double area_h, double h_opt, double r_max);
eval::PoseProvider cnn_symmetrized_provider(cnn::Network<double>& net,
                                            const dataset::GridConfig& grid, double area_w,
                                            double area_h, double h_opt, double r_max);

eval::PoseProvider qtable_provider(rl::QTable& q, const rl::RlEnvConfig& cfg);
eval::PoseProvider dqn_provider(cnn::Network<float>& dqn, const rl::RlEnvConfig& cfg);

rl::RlEnvConfig make_rl_env_config(const config::RunConfig& cfg);

}  // namespace uavlab::pipeline

#endif
