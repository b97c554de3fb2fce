#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "routelab/env.hpp"
#include "routelab/graph_obs.hpp"

namespace routelab::marl {

// Published full-scale values; desk runs shrink total_steps, warmup and
// replay_capacity through the presets' callers.
struct TrainConfig {
    bool with_graph_obs = true;
    EnvMode mode = EnvMode::Unlimited;
    int packet_count = 20;
    int episode_len = 50;  // 300 single-graph, 50 generalized
    long long total_steps = 2500000;
    long long warmup_steps = 100000;
    int train_interval = 10;  // environment steps per training iteration
    int batch = 32;           // sequences per iteration
    int seq_len = 8;          // J
    int k = 1;                // message passing iterations per step
    int hidden_dim = 128;     // d_h
    std::vector<int> encoder_hidden = {512, 256};
    std::vector<int> q_hidden = {512, 256};
    double gamma = 0.9;
    double tau = 0.01;
    double lr = 1e-3;
    double weight_decay = 1e-2;
    double grad_clip = 1.0;
    double eps_init = 1.0;
    double eps_decay = 0.999;  // multiplicative, applied once per eps_interval steps
    double eps_floor = 0.01;
    int eps_interval = 100;
    size_t replay_capacity = 200000;
};

TrainConfig single_graph_defaults();  // plain DQN, 300-step episodes, 250k steps
TrainConfig generalized_defaults();   // graph observations, 50-step episodes, 2.5M steps

double epsilon_at(const TrainConfig& cfg, long long env_step);

std::string train_config_to_json(const TrainConfig& cfg);
// Fields present in the text replace the base's values; the rest keep them.
TrainConfig train_config_from_json(const std::string& text, const TrainConfig& base);
TrainConfig train_config_from_json(const std::string& text);

// Dense stack with Leaky ReLU throughout plus a linear output row of Q-values,
// one per action (wait + D edges). All agents share these parameters.
struct QNet {
    nn::Mlp<float> body;
    nn::Linear<float> out;

    struct Cache {
        typename nn::Mlp<float>::Cache body;
        nn::Mat<float> features;  // body output, input to the linear head
    };

    QNet() = default;
    QNet(int in_dim, int actions, const std::vector<int>& hidden, std::mt19937_64& rng);

    nn::Mat<float> forward(const nn::Mat<float>& x, Cache* cache = nullptr) const;
    nn::Mat<float> backward(const Cache& cache, const nn::Mat<float>& dq);
    void collect(std::vector<nn::ParamRef<float>>& out_params, const std::string& prefix);
    void zero_grad();
    int in_features() const { return body.layers.front().in_features(); }
    int actions() const { return out.out_features(); }
};

// Q-network plus, for generalized runs, the message-passing engine feeding it.
struct RlModel {
    bool with_graph_obs = false;
    gobs::GraphObsConfig obs_cfg;
    gobs::GraphObsNet<float> gnet;
    QNet qnet;

    RlModel() = default;
    RlModel(const TrainConfig& cfg, int agent_obs_dim, int node_obs_dim, int degree,
            uint64_t seed);

    void collect(std::vector<nn::ParamRef<float>>& out);
    void zero_grad();
    int psi_dim() const { return with_graph_obs ? qnet.in_features() - agent_obs_dim() : 0; }
    int agent_obs_dim() const { return agent_dim_; }

private:
    int agent_dim_ = 0;
    friend RlModel load_rl_model(const std::string&);
};

// Uniform legal action with probability eps, otherwise argmax over legal
// actions with ties to the smallest index. Without a mask every action is
// legal. Throws std::logic_error when the mask admits nothing.
int act(const float* q, int n_actions, double eps, std::mt19937_64& rng,
        const ActionMask* mask = nullptr);

// One environment step as recorded for training: the pre-step snapshot, the
// pre-step node-state carry (zero rows right after a reset), and what happened.
struct StepRecord {
    std::shared_ptr<const EnvState> state;
    nn::Mat<float> h, c;  // empty for plain DQN
    std::vector<int> actions;
    std::vector<float> rewards;
    std::vector<uint8_t> arrived;
    bool episode_end = false;
    // terminal snapshot; only set on episode_end, where the next record's
    // state belongs to a fresh episode
    std::shared_ptr<const EnvState> final_successor;
};

class ReplayMemory {
public:
    explicit ReplayMemory(size_t capacity);
    void push(StepRecord rec);
    size_t size() const { return std::min<size_t>(capacity_, static_cast<size_t>(total_)); }
    long long total_pushed() const { return total_; }
    long long first_abs() const { return total_ - static_cast<long long>(size()); }
    const StepRecord& at_abs(long long abs_index) const;
    // a start is valid when seq_len records plus the successor record exist
    long long valid_starts(int seq_len) const;
    long long sample_start(int seq_len, std::mt19937_64& rng) const;

private:
    std::vector<StepRecord> ring_;
    size_t capacity_ = 0;
    long long total_ = 0;
};

// theta_hat += tau * (theta - theta_hat), shapes must match pairwise.
void soft_update(const std::vector<nn::ParamRef<float>>& online,
                 std::vector<nn::ParamRef<float>>& target, double tau);

// One BPTT training iteration over cfg.batch sampled sequences: recompute node
// states from the stored carries with gradients, form targets from the target
// Q-network on next-step observations without gradients, sum TD-squared terms
// over the sequence, mean over batch x agents, clip and step AdamW on all
// parameters jointly. Node states and their gradient flow reset to zero across
// episode boundaries inside a sequence; the bootstrap at an episode's last
// step uses the stored terminal snapshot. Returns the loss.
double train_batch(RlModel& model, QNet& target_qnet, const ReplayMemory& replay,
                   const EnvConfig& env_cfg, const TrainConfig& cfg, nn::AdamW<float>& opt,
                   std::vector<nn::ParamRef<float>>& params, std::mt19937_64& rng);

struct TrainResult {
    struct EpisodeRow {
        long long episode = 0;
        long long end_step = 0;
        double reward_total = 0.0;
        double mean_reward = 0.0;  // per agent per step
        long long arrivals = 0;
        double epsilon = 0.0;
    };
    std::vector<EpisodeRow> episodes;
    std::vector<std::pair<long long, double>> losses;  // (env step, batch loss)
    long long steps = 0;
};

// Alternates rollout and training on the caller's environment: epsilon-greedy
// control, one record per step, one train_batch every train_interval steps
// once warmup_steps records exist, soft target update per iteration.
TrainResult train(RlModel& model, RoutingEnv& env, const TrainConfig& cfg, uint64_t seed);

void write_training_csv(const TrainResult& result, std::ostream& out);

struct EvalConfig {
    int episodes = 10;
    int episode_len = 300;
    EnvMode mode = EnvMode::Unlimited;
    bool masked = false;
    int packet_count = 20;
};

struct EvalResult {
    double mean_reward = 0.0;  // per agent per step
    double throughput = 0.0;
    std::optional<double> mean_delay;
    double drops_per_step = 0.0;
    long long arrivals = 0, blocks = 0, drops = 0;
    long long episodes = 0;
};

// Greedy policy (eps = 0), node states carried across each episode; masking
// restricts argmax to unvisited neighbors and drops dead-ended packets.
EvalResult evaluate_model(const RlModel& model, std::shared_ptr<const Graph> graph,
                          const EvalConfig& cfg, uint64_t seed);
EvalResult evaluate_sp(SpVariant variant, std::shared_ptr<const Graph> graph,
                       const EvalConfig& cfg, uint64_t seed);

struct AdaptationConfig {
    int episodes = 100;
    int episode_len = 300;
    EnvMode mode = EnvMode::Limited;
    int packet_count = 20;
    int edge_index = -1;  // -1 picks the most central delay-2 edge
    int new_delay = 10;
    int change_step = 50;
    bool with_override = true;  // false = control run
};

struct AdaptationResult {
    int edge_index = -1;
    int old_delay = 0;
    // one entry per step
    std::vector<double> throughput_model, throughput_sp_static, throughput_sp_stepwise;
    std::vector<double> node_state_diff;  // mean |h_t - h_{t-1}| for the model run
};

// Runs the model and both shortest-path baselines on seed-matched episodes
// with the scheduled delay override and averages per-step series.
AdaptationResult adaptation_experiment(const RlModel& model, std::shared_ptr<const Graph> graph,
                                       const AdaptationConfig& cfg, uint64_t seed);

void write_adaptation_csv(const AdaptationResult& result, std::ostream& out);

void save_rl_model(const std::string& path, RlModel& model, const TrainConfig& cfg);
RlModel load_rl_model(const std::string& path);

}  // namespace routelab::marl
