#include "routelab/env.hpp"
#include <limits>

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace routelab {

RoutingEnv::RoutingEnv(std::shared_ptr<const Graph> graph, EnvConfig cfg, uint64_t seed)
    : cfg_(cfg), source_(nullptr), rng_(seed) {
    if (!graph) throw std::invalid_argument("RoutingEnv: null graph");
    if (cfg_.packet_count < 1 || cfg_.episode_len < 1)
        throw std::invalid_argument("RoutingEnv: need N >= 1 and T >= 1");
    state_.graph = std::move(graph);
    reset();
}

RoutingEnv::RoutingEnv(GraphSource source, EnvConfig cfg, uint64_t seed)
    : cfg_(cfg), source_(std::move(source)), rng_(seed) {
    if (!source_) throw std::invalid_argument("RoutingEnv: null graph source");
    if (cfg_.packet_count < 1 || cfg_.episode_len < 1)
        throw std::invalid_argument("RoutingEnv: need N >= 1 and T >= 1");
    reset();
}

void RoutingEnv::schedule_delay_override(DelayOverride ov) {
    if (!state_.graph || ov.edge_index < 0 ||
        ov.edge_index >= static_cast<int>(state_.graph->edges.size()))
        throw std::invalid_argument("schedule_delay_override: unknown edge");
    if (ov.new_delay < 1) throw std::invalid_argument("schedule_delay_override: delay < 1");
    overrides_.push_back(ov);
    std::stable_sort(overrides_.begin(), overrides_.end(),
                     [](const DelayOverride& a, const DelayOverride& b) { return a.at_step < b.at_step; });
    // overrides scheduled mid-episode for the current step apply immediately
    next_override_ = 0;
    state_.edge_delay.assign(state_.graph->edges.size(), 0);
    for (size_t e = 0; e < state_.graph->edges.size(); ++e)
        state_.edge_delay[e] = state_.graph->edges[e].delay;
    ++state_.delay_version;
    apply_due_overrides();
}

void RoutingEnv::clear_delay_overrides() {
    overrides_.clear();
    next_override_ = 0;
    if (state_.graph) {
        state_.edge_delay.assign(state_.graph->edges.size(), 0);
        for (size_t e = 0; e < state_.graph->edges.size(); ++e)
            state_.edge_delay[e] = state_.graph->edges[e].delay;
        ++state_.delay_version;
    }
}

void RoutingEnv::spawn_packet(int slot, int birth_step) {
    const Graph& g = *state_.graph;
    std::uniform_int_distribution<int> node_pick(0, g.node_count - 1);
    std::uniform_int_distribution<int> other_pick(0, g.node_count - 2);
    std::uniform_real_distribution<double> size_pick(0.0, 1.0);
    Packet p;
    p.src = node_pick(rng_);
    p.dst = other_pick(rng_);
    if (p.dst >= p.src) ++p.dst;
    p.size = size_pick(rng_);
    p.node = p.src;
    p.in_transit = false;
    p.edge_index = -1;
    p.steps_remaining = 0;
    p.birth_step = birth_step;
    p.path_delay = 0;
    p.visited = {p.src};
    state_.packets[slot] = std::move(p);
}

void RoutingEnv::apply_due_overrides() {
    while (next_override_ < overrides_.size() &&
           overrides_[next_override_].at_step <= state_.step) {
        const DelayOverride& ov = overrides_[next_override_];
        state_.edge_delay[ov.edge_index] = ov.new_delay;
        ++state_.delay_version;
        ++next_override_;
    }
}

void RoutingEnv::reset() {
    if (source_) state_.graph = source_(rng_);
    state_.graph->validate();
    const int n = cfg_.packet_count;
    state_.packets.resize(n);
    state_.edge_load.assign(state_.graph->edges.size(), 0.0);
    state_.edge_delay.resize(state_.graph->edges.size());
    for (size_t e = 0; e < state_.graph->edges.size(); ++e)
        state_.edge_delay[e] = state_.graph->edges[e].delay;
    state_.delay_version = 0;
    state_.step = 0;
    state_.arrivals = state_.blocks = state_.drops = 0;
    state_.reward_total = 0.0;
    for (int slot = 0; slot < n; ++slot) spawn_packet(slot, 0);
    next_override_ = 0;
    apply_due_overrides();
}

StepResult RoutingEnv::step(const std::vector<int>& actions, const std::vector<uint8_t>* drops) {
    const int n = cfg_.packet_count;
    if (static_cast<int>(actions.size()) != n)
        throw std::invalid_argument("step: one action per agent slot required");
    if (drops && static_cast<int>(drops->size()) != n)
        throw std::invalid_argument("step: drop flags size mismatch");
    if (state_.step >= cfg_.episode_len) throw std::logic_error("step: episode already over");

    const Graph& g = *state_.graph;
    StepResult res;
    res.rewards.assign(n, 0.0);
    res.arrived.assign(n, 0);
    res.dropped.assign(n, 0);
    res.arrival_age.assign(n, -1);
    res.arrival_path_delay.assign(n, -1);
    std::vector<int> respawn;

    for (int slot = 0; slot < n; ++slot) {
        Packet& p = state_.packets[slot];
        if (p.in_transit) {
            // the action of an in-transit packet is ignored, including on the
            // step it completes transit
            --p.steps_remaining;
            if (p.steps_remaining == 0) {
                state_.edge_load[p.edge_index] -= p.size;
                p.in_transit = false;
                p.edge_index = -1;
                p.visited.push_back(p.node);
                if (p.node == p.dst) {
                    res.rewards[slot] += cfg_.arrival_reward;
                    res.arrived[slot] = 1;
                    res.arrival_age[slot] = state_.step - p.birth_step;
                    res.arrival_path_delay[slot] = p.path_delay;
                    ++state_.arrivals;
                    respawn.push_back(slot);
                }
            }
            continue;
        }
        if (drops && (*drops)[slot]) {
            ++state_.drops;
            res.dropped[slot] = 1;
            respawn.push_back(slot);
            continue;
        }
        const int a = actions[slot];
        if (a < 0 || a > g.degree) throw std::out_of_range("step: action index out of range");
        if (a == 0) continue;  // wait, no penalty
        const auto [head, e] = g.adjacency[p.node][a - 1];
        if (cfg_.mode == EnvMode::Limited && !(state_.edge_load[e] < 1.0 - p.size)) {
            res.rewards[slot] += cfg_.block_penalty;
            ++state_.blocks;
            continue;
        }
        p.in_transit = true;
        p.edge_index = e;
        p.steps_remaining = state_.edge_delay[e];
        p.node = head;
        p.path_delay += state_.edge_delay[e];
        state_.edge_load[e] += p.size;
    }

    state_.reward_total += std::accumulate(res.rewards.begin(), res.rewards.end(), 0.0);
    ++state_.step;
    apply_due_overrides();
    for (int slot : respawn) spawn_packet(slot, state_.step);
    res.episode_done = state_.step >= cfg_.episode_len;
    return res;
}

void RoutingEnv::agent_obs_into(const EnvState& s, const EnvConfig& cfg, int slot, float* out) {
    const Graph& g = *s.graph;
    const int L = g.node_count;
    const int dim = agent_obs_dim(g);
    std::fill(out, out + dim, 0.0f);
    const Packet& p = s.packets[slot];
    out[p.node] = 1.0f;
    out[L + p.dst] = 1.0f;
    out[2 * L] = static_cast<float>(p.size);
    int base = 2 * L + 1;
    for (int k = 0; k < g.degree; ++k) {
        const auto [w, e] = g.adjacency[p.node][k];
        out[base] = static_cast<float>(s.edge_delay[e] / cfg.obs_delay_scale);
        out[base + 1] = static_cast<float>(s.edge_load[e]);
        out[base + 2 + w] = 1.0f;
        base += L + 2;
    }
}

void RoutingEnv::node_obs_into(const EnvState& s, const EnvConfig& cfg, int node, float* out) {
    const Graph& g = *s.graph;
    const int L = g.node_count;
    const int dim = node_obs_dim(g);
    std::fill(out, out + dim, 0.0f);
    out[node] = 1.0f;
    int count = 0;
    double total_size = 0.0;
    for (const Packet& p : s.packets) {
        if (!p.in_transit && p.node == node) {
            ++count;
            total_size += p.size;
        }
    }
    const double n = static_cast<double>(s.packets.size());
    out[L] = static_cast<float>(count / n);
    out[L + 1] = static_cast<float>(total_size / n);
    int base = L + 2;
    for (int k = 0; k < g.degree; ++k) {
        const auto [w, e] = g.adjacency[node][k];
        out[base] = static_cast<float>(s.edge_delay[e] / cfg.obs_delay_scale);
        out[base + 1] = static_cast<float>(s.edge_load[e]);
        out[base + 2 + w] = 1.0f;
        base += L + 2;
    }
}

std::vector<float> RoutingEnv::agent_obs(const EnvState& s, const EnvConfig& cfg, int slot) {
    std::vector<float> v(agent_obs_dim(*s.graph));
    agent_obs_into(s, cfg, slot, v.data());
    return v;
}

std::vector<float> RoutingEnv::node_obs(const EnvState& s, const EnvConfig& cfg, int node) {
    std::vector<float> v(node_obs_dim(*s.graph));
    node_obs_into(s, cfg, node, v.data());
    return v;
}

std::vector<int> RoutingEnv::assignment(const EnvState& s) {
    std::vector<int> nodes(s.packets.size());
    for (size_t i = 0; i < s.packets.size(); ++i) nodes[i] = s.packets[i].node;
    return nodes;
}

ActionMask RoutingEnv::action_mask(const EnvState& s, int slot) {
    const Graph& g = *s.graph;
    const Packet& p = s.packets[slot];
    ActionMask m;
    m.legal.assign(1 + g.degree, 1);
    if (p.in_transit) return m;  // actions are ignored anyway
    bool any_edge = false;
    for (int k = 0; k < g.degree; ++k) {
        const int head = g.adjacency[p.node][k].first;
        const bool seen = std::find(p.visited.begin(), p.visited.end(), head) != p.visited.end();
        m.legal[k + 1] = seen ? 0 : 1;
        any_edge = any_edge || !seen;
    }
    m.drop = !any_edge;
    return m;
}

void ShortestPathPolicy::on_reset(const EnvState& s) {
    primed_ = false;
    recompute(s);
    primed_ = true;
}

void ShortestPathPolicy::recompute(const EnvState& s) {
    delays_ = s.edge_delay;
    dist_ = all_pairs_shortest_paths(*s.graph, PathWeight::Delay, &delays_);
    seen_version_ = s.delay_version;
}

std::vector<int> ShortestPathPolicy::actions(const EnvState& s) {
    if (!primed_) on_reset(s);
    if (variant_ == SpVariant::Stepwise && s.delay_version != seen_version_) recompute(s);
    const Graph& g = *s.graph;
    std::vector<int> acts(s.packets.size(), 0);
    for (size_t slot = 0; slot < s.packets.size(); ++slot) {
        const Packet& p = s.packets[slot];
        if (p.in_transit) continue;
        int best_k = 0;
        long best_cost = std::numeric_limits<long>::max();
        for (int k = 0; k < g.degree; ++k) {
            const auto [w, e] = g.adjacency[p.node][k];
            const long cost = static_cast<long>(delays_[e]) + dist_[w][p.dst];
            if (cost < best_cost) {
                best_cost = cost;
                best_k = k + 1;
            }
        }
        acts[slot] = best_k;
    }
    return acts;
}

EpisodeMetrics episode_metrics(const EpisodeTrace& trace) {
    if (trace.steps <= 0 || trace.packet_count <= 0)
        throw std::invalid_argument("episode_metrics: empty trace");
    EpisodeMetrics m;
    const double t = trace.steps;
    m.mean_reward = trace.reward_total / (trace.packet_count * t);
    m.throughput = trace.arrivals / t;
    if (!trace.arrival_ages.empty()) {
        double sum = std::accumulate(trace.arrival_ages.begin(), trace.arrival_ages.end(), 0.0);
        m.mean_delay = sum / static_cast<double>(trace.arrival_ages.size());
    }
    m.drops_per_step = trace.drops / t;
    m.arrivals = trace.arrivals;
    m.blocks = trace.blocks;
    m.drops = trace.drops;
    return m;
}

void write_trace_csv(const EpisodeTrace& trace, std::ostream& out) {
    out << "step,agent,action,reward,arrivals,blocks,drops\n";
    for (const auto& r : trace.rows)
        out << r.step << ',' << r.agent << ',' << r.action << ',' << r.reward << ',' << r.arrivals
            << ',' << r.blocks << ',' << r.drops << '\n';
}

namespace {

EpisodeTrace run_episode_impl(RoutingEnv& env,
                              const std::function<std::vector<int>(const EnvState&, bool,
                                                                   std::vector<uint8_t>&)>& act,
                              bool masked, bool record_rows) {
    env.reset();
    EpisodeTrace trace;
    trace.packet_count = env.config().packet_count;
    const int t_max = env.config().episode_len;
    std::vector<uint8_t> drops;
    for (int t = 0; t < t_max; ++t) {
        drops.assign(env.config().packet_count, 0);
        const std::vector<int> actions = act(env.state(), masked, drops);
        const StepResult res = env.step(actions, masked ? &drops : nullptr);
        for (int slot = 0; slot < env.config().packet_count; ++slot) {
            if (res.arrived[slot]) trace.arrival_ages.push_back(res.arrival_age[slot]);
            if (record_rows)
                trace.rows.push_back({t, slot, actions[slot], res.rewards[slot],
                                      env.state().arrivals, env.state().blocks, env.state().drops});
        }
    }
    trace.steps = t_max;
    trace.reward_total = env.state().reward_total;
    trace.arrivals = env.state().arrivals;
    trace.blocks = env.state().blocks;
    trace.drops = env.state().drops;
    return trace;
}

}  // namespace

EpisodeTrace run_episode(RoutingEnv& env, const PolicyFn& policy, bool record_rows) {
    return run_episode_impl(
        env,
        [&](const EnvState& s, bool, std::vector<uint8_t>&) { return policy(s); }, false,
        record_rows);
}

EpisodeTrace run_episode_masked(RoutingEnv& env, const MaskedPolicyFn& policy, bool record_rows) {
    return run_episode_impl(
        env,
        [&](const EnvState& s, bool, std::vector<uint8_t>& drops) {
            std::vector<ActionMask> masks(s.packets.size());
            for (size_t i = 0; i < s.packets.size(); ++i) {
                masks[i] = RoutingEnv::action_mask(s, static_cast<int>(i));
                if (masks[i].drop && !s.packets[i].in_transit) drops[i] = 1;
            }
            return policy(s, masks);
        },
        true, record_rows);
}

}  // namespace routelab
