#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "routelab/env.hpp"
#include "routelab/graph_obs.hpp"

namespace routelab::spreg {

// One graph with the node observations of a fresh episode and the matrix of
// shortest-path lengths; targets row v holds distances from v to every node.
struct RegressionSample {
    Graph graph;
    nn::Mat<float> node_obs;  // L x d_m
    nn::Mat<float> targets;   // L x L, symmetric, zero diagonal
};

struct Dataset {
    std::vector<RegressionSample> samples;
    int validation = 0;  // trailing samples held out from training
    bool hop_targets = false;

    int train_count() const { return static_cast<int>(samples.size()) - validation; }
};

struct DatasetConfig {
    int count = 10000;
    int validation = 500;
    GenParams gen{};
    EnvConfig env{};
    bool hop_targets = false;  // default targets are delay-weighted lengths
};

RegressionSample make_sample(std::shared_ptr<const Graph> graph, const EnvState& state,
                             const EnvConfig& env_cfg, bool hop_targets);
Dataset build_dataset(const DatasetConfig& cfg, uint64_t seed);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

struct SlConfig {
    int k = 1;       // message passing iterations per forward step
    int unroll = 8;  // J: forward steps backpropagated through
    int iterations = 5000;
    int batch = 32;  // graphs per iteration
    int hidden_dim = 128;
    std::vector<int> encoder_hidden = {512, 256};
    double lr = 1e-3;
    double weight_decay = 0.0;   // pure Adam; decay measurably inflates the late-step error
    double target_scale = 10.0;  // targets divided by this during training
    int log_every = 50;          // loss-curve cadence; validation measured per row
    int val_max = 500;           // validation graphs per measurement
};

// Message-passing engine plus a dense head mapping each node's readout to its
// distance row. All losses and returned MSE values are in scaled-target units;
// multiply by target_scale^2 for raw units.
struct SlModel {
    gobs::GraphObsConfig obs_cfg;
    gobs::GraphObsNet<float> net;
    nn::Linear<float> head;
    double target_scale = 10.0;
    bool hop_targets = false;

    SlModel() = default;
    SlModel(const SlConfig& cfg, int node_obs_dim, int degree, int node_count, uint64_t seed);

    void collect(std::vector<nn::ParamRef<float>>& out);
    int node_count() const { return head.out_features(); }
};

struct LossPoint {
    int iteration = 0;  // 0 = before any update
    double train_loss = 0.0, val_loss = 0.0;
};

struct SlTrainResult {
    std::vector<LossPoint> curve;
    double initial_val_loss = 0.0, final_val_loss = 0.0;
};

// Per iteration: sample a batch of training graphs, unroll J steps from zero
// node states over the same observations, sum the per-step prediction MSEs and
// take one AdamW step. Throws std::runtime_error when the loss turns
// non-finite.
SlTrainResult train_regression(SlModel& model, const Dataset& data, const SlConfig& cfg,
                               uint64_t seed);

// MSE of step-t predictions for each requested t, carrying node states across
// steps; scaled-target units.
std::map<int, double> evaluate_at_steps(const SlModel& model,
                                        const std::vector<RegressionSample>& test,
                                        const std::vector<int>& steps);

void write_loss_csv(const std::vector<LossPoint>& curve, std::ostream& out);

void save_sl_model(const std::string& path, SlModel& model, const SlConfig& cfg);
SlModel load_sl_model(const std::string& path);

}  // namespace routelab::spreg
