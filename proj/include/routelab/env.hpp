#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "routelab/graph.hpp"

namespace routelab {

enum class EnvMode { Unlimited, Limited };

struct EnvConfig {
    int packet_count = 20;  // N
    EnvMode mode = EnvMode::Unlimited;
    double arrival_reward = 10.0;
    double block_penalty = -0.2;
    int episode_len = 300;  // T
    // observation scaling: delays / delay_scale, node packet counts and sizes / N
    double obs_delay_scale = 10.0;
};

struct Packet {
    double size = 0.0;
    int src = 0, dst = 0;
    // current node; for in-transit packets the edge head (arrival node)
    int node = 0;
    bool in_transit = false;
    int edge_index = -1;
    int steps_remaining = 0;
    int birth_step = 0;     // first step the packet can act
    int path_delay = 0;     // sum of delays of entered edges
    std::vector<int> visited;  // begins with src, grows on arrival at each node
};

struct DelayOverride {
    int edge_index = 0;
    int new_delay = 1;
    int at_step = 0;
};

struct EnvState {
    std::shared_ptr<const Graph> graph;
    std::vector<Packet> packets;
    std::vector<double> edge_load;  // sum of sizes currently in transit per edge
    std::vector<int> edge_delay;    // effective delays (overrides applied)
    int delay_version = 0;          // bumped whenever edge_delay changes
    int step = 0;
    long long arrivals = 0, blocks = 0, drops = 0;
    double reward_total = 0.0;
};

struct StepResult {
    std::vector<double> rewards;
    std::vector<uint8_t> arrived;  // reached dst during this step (no bootstrap)
    std::vector<uint8_t> dropped;
    std::vector<int> arrival_age;         // steps since spawn, -1 unless arrived
    std::vector<int> arrival_path_delay;  // sum of entered edge delays, -1 unless arrived
    bool episode_done = false;  // step counter reached episode_len
};

struct ActionMask {
    std::vector<uint8_t> legal;  // size 1+D, index 0 = wait
    bool drop = false;           // every edge action leads to a visited node
};

class RoutingEnv {
public:
    using GraphSource = std::function<std::shared_ptr<const Graph>(std::mt19937_64&)>;

    RoutingEnv(std::shared_ptr<const Graph> graph, EnvConfig cfg, uint64_t seed);
    RoutingEnv(GraphSource source, EnvConfig cfg, uint64_t seed);

    // Applies from at_step onward; packets already in transit keep their timer.
    // Throws std::invalid_argument on unknown edge or delay < 1.
    void schedule_delay_override(DelayOverride ov);
    void clear_delay_overrides();

    // Fresh graph (generator sources), fresh packets, step = 0.
    void reset();

    // One action per slot, values in [0, degree]. In-transit packets ignore
    // theirs. drops, when given, removes the flagged at-node packets without
    // reward (masked-policy path); they respawn like arrivals.
    StepResult step(const std::vector<int>& actions, const std::vector<uint8_t>* drops = nullptr);

    const EnvState& state() const { return state_; }
    // direct state access for hand-built test scenarios; the caller is
    // responsible for keeping edge_load consistent with in-transit packets
    EnvState& mutable_state() { return state_; }
    const EnvConfig& config() const { return cfg_; }
    const Graph& graph() const { return *state_.graph; }

    // Observation extraction is pure in (state, cfg); usable on stored snapshots.
    static int agent_obs_dim(const Graph& g) { return 2 * g.node_count + 1 + g.degree * (g.node_count + 2); }
    static int node_obs_dim(const Graph& g) { return g.node_count + 2 + g.degree * (g.node_count + 2); }
    static void agent_obs_into(const EnvState& s, const EnvConfig& cfg, int slot, float* out);
    static void node_obs_into(const EnvState& s, const EnvConfig& cfg, int node, float* out);
    static std::vector<float> agent_obs(const EnvState& s, const EnvConfig& cfg, int slot);
    static std::vector<float> node_obs(const EnvState& s, const EnvConfig& cfg, int node);
    // slot -> observed node (edge head while in transit)
    static std::vector<int> assignment(const EnvState& s);

    static ActionMask action_mask(const EnvState& s, int slot);

private:
    void spawn_packet(int slot, int birth_step);
    void apply_due_overrides();

    EnvConfig cfg_;
    GraphSource source_;
    std::mt19937_64 rng_;
    std::vector<DelayOverride> overrides_;  // sorted by at_step
    size_t next_override_ = 0;
    EnvState state_;
};

// Delay-weighted shortest-path heuristic. Static freezes distances at
// on_reset; stepwise recomputes whenever the effective delays change.
enum class SpVariant { Static, Stepwise };

class ShortestPathPolicy {
public:
    explicit ShortestPathPolicy(SpVariant variant) : variant_(variant) {}
    void on_reset(const EnvState& s);
    // Ties broken by smallest neighbor id; in-transit slots get action 0.
    std::vector<int> actions(const EnvState& s);

private:
    void recompute(const EnvState& s);
    SpVariant variant_;
    std::vector<int> delays_;             // effective delays the table was built from
    std::vector<std::vector<int>> dist_;  // dist_[v][dst]
    int seen_version_ = -1;
    bool primed_ = false;
};

struct EpisodeTrace {
    int steps = 0;
    int packet_count = 0;
    double reward_total = 0.0;
    long long arrivals = 0, blocks = 0, drops = 0;
    std::vector<int> arrival_ages;  // age in steps at each arrival
    struct Row {
        int step, agent, action;
        double reward;
        long long arrivals, blocks, drops;  // episode counters after the step
    };
    std::vector<Row> rows;  // filled only when row recording is on
};

struct EpisodeMetrics {
    double mean_reward = 0.0;      // total reward / (N * T)
    double throughput = 0.0;       // arrivals / T
    std::optional<double> mean_delay;  // mean age at arrival; absent without arrivals
    double drops_per_step = 0.0;
    long long arrivals = 0, blocks = 0, drops = 0;
};

EpisodeMetrics episode_metrics(const EpisodeTrace& trace);  // throws on empty trace
void write_trace_csv(const EpisodeTrace& trace, std::ostream& out);

// Both runners reset the env and play one full episode.
using PolicyFn = std::function<std::vector<int>(const EnvState&)>;
EpisodeTrace run_episode(RoutingEnv& env, const PolicyFn& policy, bool record_rows = false);

// Masked variant: per-slot masks are computed each step and handed to the
// policy, which must choose among legal actions; slots whose masks raise the
// drop signal are dropped through the env.
using MaskedPolicyFn =
    std::function<std::vector<int>(const EnvState&, const std::vector<ActionMask>&)>;
EpisodeTrace run_episode_masked(RoutingEnv& env, const MaskedPolicyFn& policy,
                                bool record_rows = false);

}  // namespace routelab
