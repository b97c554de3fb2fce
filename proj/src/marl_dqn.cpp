#include "routelab/marl_dqn.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace routelab::marl {

namespace {

nn::Mat<float> agent_obs_mat(const EnvState& s, const EnvConfig& cfg) {
    const int n = static_cast<int>(s.packets.size());
    const int d = RoutingEnv::agent_obs_dim(*s.graph);
    nn::Mat<float> o(n, d);
    std::vector<float> row(d);
    for (int i = 0; i < n; ++i) {
        RoutingEnv::agent_obs_into(s, cfg, i, row.data());
        for (int j = 0; j < d; ++j) o(i, j) = row[j];
    }
    return o;
}

nn::Mat<float> node_obs_mat(const EnvState& s, const EnvConfig& cfg) {
    const int l = s.graph->node_count;
    const int d = RoutingEnv::node_obs_dim(*s.graph);
    nn::Mat<float> m(l, d);
    std::vector<float> row(d);
    for (int v = 0; v < l; ++v) {
        RoutingEnv::node_obs_into(s, cfg, v, row.data());
        for (int j = 0; j < d; ++j) m(v, j) = row[j];
    }
    return m;
}

nn::Mat<float> concat_cols(const nn::Mat<float>& a, const nn::Mat<float>& b) {
    nn::Mat<float> x(a.rows(), a.cols() + b.cols());
    x.leftCols(a.cols()) = a;
    x.rightCols(b.cols()) = b;
    return x;
}

// Policy-side forward for one environment step: Q rows for every agent and,
// with graph observations, the advanced node states.
struct PolicyStep {
    nn::Mat<float> q;
    gobs::GraphObsNet<float>::StepOutput out;
};

void policy_forward(const RlModel& model, const gobs::Topology& topo, const EnvState& s,
                    const EnvConfig& env_cfg, const nn::Mat<float>& h, const nn::Mat<float>& c,
                    PolicyStep& ps) {
    const nn::Mat<float> o = agent_obs_mat(s, env_cfg);
    if (model.with_graph_obs) {
        model.gnet.forward(topo, node_obs_mat(s, env_cfg), h, c, ps.out);
        const nn::Mat<float> psi = model.gnet.readout(topo, ps.out, RoutingEnv::assignment(s));
        ps.q = model.qnet.forward(concat_cols(o, psi));
    } else {
        ps.q = model.qnet.forward(o);
    }
}

}  // namespace

TrainConfig single_graph_defaults() {
    TrainConfig cfg;
    cfg.with_graph_obs = false;
    cfg.episode_len = 300;
    cfg.total_steps = 250000;
    cfg.warmup_steps = 10000;
    cfg.eps_decay = 0.996;
    return cfg;
}

TrainConfig generalized_defaults() { return TrainConfig{}; }

double epsilon_at(const TrainConfig& cfg, long long env_step) {
    const double k = static_cast<double>(env_step / cfg.eps_interval);
    return std::max(cfg.eps_floor, cfg.eps_init * std::pow(cfg.eps_decay, k));
}

std::string train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["with_graph_obs"] = cfg.with_graph_obs;
    j["mode"] = cfg.mode == EnvMode::Limited ? "limited" : "unlimited";
    j["packet_count"] = cfg.packet_count;
    j["episode_len"] = cfg.episode_len;
    j["total_steps"] = cfg.total_steps;
    j["warmup_steps"] = cfg.warmup_steps;
    j["train_interval"] = cfg.train_interval;
    j["batch"] = cfg.batch;
    j["seq_len"] = cfg.seq_len;
    j["k"] = cfg.k;
    j["hidden_dim"] = cfg.hidden_dim;
    j["encoder_hidden"] = cfg.encoder_hidden;
    j["q_hidden"] = cfg.q_hidden;
    j["gamma"] = cfg.gamma;
    j["tau"] = cfg.tau;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["grad_clip"] = cfg.grad_clip;
    j["eps_init"] = cfg.eps_init;
    j["eps_decay"] = cfg.eps_decay;
    j["eps_floor"] = cfg.eps_floor;
    j["eps_interval"] = cfg.eps_interval;
    j["replay_capacity"] = cfg.replay_capacity;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text, const TrainConfig& base) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("train config: parse error: ") + e.what());
    }
    TrainConfig cfg = base;
    cfg.with_graph_obs = j.value("with_graph_obs", cfg.with_graph_obs);
    const std::string mode =
        j.value("mode", base.mode == EnvMode::Limited ? "limited" : "unlimited");
    if (mode != "unlimited" && mode != "limited")
        throw std::runtime_error("train config: unknown mode '" + mode + "'");
    cfg.mode = mode == "limited" ? EnvMode::Limited : EnvMode::Unlimited;
    cfg.packet_count = j.value("packet_count", cfg.packet_count);
    cfg.episode_len = j.value("episode_len", cfg.episode_len);
    cfg.total_steps = j.value("total_steps", cfg.total_steps);
    cfg.warmup_steps = j.value("warmup_steps", cfg.warmup_steps);
    cfg.train_interval = j.value("train_interval", cfg.train_interval);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.seq_len = j.value("seq_len", cfg.seq_len);
    cfg.k = j.value("k", cfg.k);
    cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
    cfg.encoder_hidden = j.value("encoder_hidden", cfg.encoder_hidden);
    cfg.q_hidden = j.value("q_hidden", cfg.q_hidden);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.grad_clip = j.value("grad_clip", cfg.grad_clip);
    cfg.eps_init = j.value("eps_init", cfg.eps_init);
    cfg.eps_decay = j.value("eps_decay", cfg.eps_decay);
    cfg.eps_floor = j.value("eps_floor", cfg.eps_floor);
    cfg.eps_interval = j.value("eps_interval", cfg.eps_interval);
    cfg.replay_capacity = j.value("replay_capacity", cfg.replay_capacity);
    return cfg;
}

TrainConfig train_config_from_json(const std::string& text) {
    return train_config_from_json(text, TrainConfig{});
}

QNet::QNet(int in_dim, int actions, const std::vector<int>& hidden, std::mt19937_64& rng) {
    std::vector<int> dims = {in_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    body = nn::Mlp<float>(dims, true, rng);
    out = nn::Linear<float>(hidden.back(), actions, rng);
}

nn::Mat<float> QNet::forward(const nn::Mat<float>& x, Cache* cache) const {
    nn::Mat<float> feat = body.forward(x, cache ? &cache->body : nullptr);
    nn::Mat<float> q = out.forward(feat);
    if (cache) cache->features = std::move(feat);
    return q;
}

nn::Mat<float> QNet::backward(const Cache& cache, const nn::Mat<float>& dq) {
    const nn::Mat<float> dfeat = out.backward(cache.features, dq);
    return body.backward(cache.body, dfeat);
}

void QNet::collect(std::vector<nn::ParamRef<float>>& out_params, const std::string& prefix) {
    body.collect(out_params, prefix + ".body");
    out.collect(out_params, prefix + ".out");
}

void QNet::zero_grad() {
    body.zero_grad();
    out.zero_grad();
}

RlModel::RlModel(const TrainConfig& cfg, int agent_obs_dim, int node_obs_dim, int degree,
                 uint64_t seed) {
    with_graph_obs = cfg.with_graph_obs;
    agent_dim_ = agent_obs_dim;
    std::mt19937_64 rng(seed);
    int in = agent_obs_dim;
    if (with_graph_obs) {
        obs_cfg.node_obs_dim = node_obs_dim;
        obs_cfg.hidden_dim = cfg.hidden_dim;
        obs_cfg.iterations = cfg.k;
        obs_cfg.encoder_hidden = cfg.encoder_hidden;
        gnet = gobs::GraphObsNet<float>(obs_cfg, rng);
        in += cfg.hidden_dim * (1 + degree);
    }
    qnet = QNet(in, degree + 1, cfg.q_hidden, rng);
}

void RlModel::collect(std::vector<nn::ParamRef<float>>& out) {
    if (with_graph_obs) gnet.collect(out, "rl.gnet");
    qnet.collect(out, "rl.qnet");
}

void RlModel::zero_grad() {
    if (with_graph_obs) gnet.zero_grad();
    qnet.zero_grad();
}

int act(const float* q, int n_actions, double eps, std::mt19937_64& rng,
        const ActionMask* mask) {
    if (n_actions < 1 || n_actions > 64)
        throw std::invalid_argument("act: unsupported action count");
    int legal[64];
    int n_legal = 0;
    for (int a = 0; a < n_actions; ++a)
        if (!mask || mask->legal[a]) legal[n_legal++] = a;
    if (n_legal == 0) throw std::logic_error("act: no legal action");
    if (eps > 0.0 && std::bernoulli_distribution(eps)(rng)) {
        std::uniform_int_distribution<int> pick(0, n_legal - 1);
        return legal[pick(rng)];
    }
    int best = legal[0];
    for (int i = 1; i < n_legal; ++i)
        if (q[legal[i]] > q[best]) best = legal[i];
    return best;
}

ReplayMemory::ReplayMemory(size_t capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ReplayMemory: capacity must be positive");
    ring_.resize(capacity);
}

void ReplayMemory::push(StepRecord rec) {
    ring_[static_cast<size_t>(total_ % static_cast<long long>(capacity_))] = std::move(rec);
    ++total_;
}

const StepRecord& ReplayMemory::at_abs(long long abs_index) const {
    if (abs_index < first_abs() || abs_index >= total_)
        throw std::out_of_range("ReplayMemory: index outside the live window");
    return ring_[static_cast<size_t>(abs_index % static_cast<long long>(capacity_))];
}

long long ReplayMemory::valid_starts(int seq_len) const {
    return std::max<long long>(0, total_ - seq_len - first_abs());
}

long long ReplayMemory::sample_start(int seq_len, std::mt19937_64& rng) const {
    const long long count = valid_starts(seq_len);
    if (count < 1) throw std::logic_error("ReplayMemory: no valid sequence start");
    std::uniform_int_distribution<long long> pick(0, count - 1);
    return first_abs() + pick(rng);
}

void soft_update(const std::vector<nn::ParamRef<float>>& online,
                 std::vector<nn::ParamRef<float>>& target, double tau) {
    if (online.size() != target.size())
        throw std::invalid_argument("soft_update: parameter list size mismatch");
    const float t = static_cast<float>(tau);
    for (size_t i = 0; i < online.size(); ++i) {
        if (online[i].value->rows() != target[i].value->rows() ||
            online[i].value->cols() != target[i].value->cols())
            throw std::invalid_argument("soft_update: shape mismatch at " + online[i].name);
        *target[i].value += t * (*online[i].value - *target[i].value);
    }
}

double train_batch(RlModel& model, QNet& target_qnet, const ReplayMemory& replay,
                   const EnvConfig& env_cfg, const TrainConfig& cfg, nn::AdamW<float>& opt,
                   std::vector<nn::ParamRef<float>>& params, std::mt19937_64& rng) {
    using Net = gobs::GraphObsNet<float>;
    if (replay.valid_starts(cfg.seq_len) < 1) return 0.0;  // not enough history yet
    const int j_len = cfg.seq_len;
    const int dh = cfg.hidden_dim;
    nn::zero_grads(params);
    double total_loss = 0.0;
    double inv_bn = 0.0;  // set from the first record's agent count
    for (int b = 0; b < cfg.batch; ++b) {
        const long long start = replay.sample_start(j_len, rng);
        std::vector<typename Net::StepCache> caches(model.with_graph_obs ? j_len : 0);
        std::vector<typename Net::StepOutput> outs(model.with_graph_obs ? j_len : 0);
        std::vector<QNet::Cache> qcaches(j_len);
        std::vector<nn::Mat<float>> dqs(j_len);
        std::vector<gobs::Topology> topos(model.with_graph_obs ? j_len : 0);
        std::vector<std::vector<int>> assigns(model.with_graph_obs ? j_len : 0);
        std::vector<uint8_t> boundary(j_len, 0);

        nn::Mat<float> h, c;
        if (model.with_graph_obs) {
            const StepRecord& r0 = replay.at_abs(start);
            h = r0.h;
            c = r0.c;
        }
        std::vector<nn::Mat<float>> qs(j_len);
        for (int j = 0; j < j_len; ++j) {
            const StepRecord& rec = replay.at_abs(start + j);
            const EnvState& s = *rec.state;
            if (inv_bn == 0.0)
                inv_bn = 1.0 / (static_cast<double>(cfg.batch) * s.packets.size());
            const nn::Mat<float> o = agent_obs_mat(s, env_cfg);
            if (model.with_graph_obs) {
                topos[j] = gobs::Topology::from_graph(*s.graph);
                // same GEMM shapes as the rollout so recomputed states match
                // the stored ones bit for bit under frozen parameters
                model.gnet.forward(topos[j], node_obs_mat(s, env_cfg), h, c, outs[j],
                                   &caches[j]);
                assigns[j] = RoutingEnv::assignment(s);
                const nn::Mat<float> psi = model.gnet.readout(topos[j], outs[j], assigns[j]);
                qs[j] = model.qnet.forward(concat_cols(o, psi), &qcaches[j]);
            } else {
                qs[j] = model.qnet.forward(o, &qcaches[j]);
            }
            boundary[j] = rec.episode_end ? 1 : 0;
            if (model.with_graph_obs && j + 1 < j_len) {
                if (rec.episode_end) {
                    const auto& next_graph = *replay.at_abs(start + j + 1).state->graph;
                    h = nn::Mat<float>::Zero(next_graph.node_count, dh);
                    c = nn::Mat<float>::Zero(next_graph.node_count, dh);
                } else {
                    h = outs[j].h;
                    c = outs[j].c;
                }
            }
        }
        for (int j = 0; j < j_len; ++j) {
            const StepRecord& rec = replay.at_abs(start + j);
            const EnvState& succ =
                rec.episode_end ? *rec.final_successor : *replay.at_abs(start + j + 1).state;
            const nn::Mat<float> o2 = agent_obs_mat(succ, env_cfg);
            nn::Mat<float> q2;
            if (model.with_graph_obs) {
                if (!rec.episode_end && j + 1 < j_len) {
                    // the online forward at j+1 already ran the update on
                    // exactly this carry and observation
                    const nn::Mat<float> psi2 =
                        model.gnet.readout(topos[j], outs[j + 1], assigns[j + 1]);
                    q2 = target_qnet.forward(concat_cols(o2, psi2));
                } else {
                    typename Net::StepOutput sout;
                    model.gnet.forward(topos[j], node_obs_mat(succ, env_cfg), outs[j].h,
                                       outs[j].c, sout);
                    const nn::Mat<float> psi2 =
                        model.gnet.readout(topos[j], sout, RoutingEnv::assignment(succ));
                    q2 = target_qnet.forward(concat_cols(o2, psi2));
                }
            } else {
                q2 = target_qnet.forward(o2);
            }
            const int n_agents = static_cast<int>(rec.rewards.size());
            dqs[j] = nn::Mat<float>::Zero(qs[j].rows(), qs[j].cols());
            for (int i = 0; i < n_agents; ++i) {
                const double bootstrap = rec.arrived[i] ? 0.0 : cfg.gamma * q2.row(i).maxCoeff();
                const double y = rec.rewards[i] + bootstrap;
                const double err = static_cast<double>(qs[j](i, rec.actions[i])) - y;
                total_loss += err * err * inv_bn;
                dqs[j](i, rec.actions[i]) = static_cast<float>(2.0 * err * inv_bn);
            }
        }

        if (model.with_graph_obs) {
            nn::Mat<float> dh_carry, dc_carry;
            for (int j = j_len - 1; j >= 0; --j) {
                const nn::Mat<float> dx = model.qnet.backward(qcaches[j], dqs[j]);
                const int rows = topos[j].node_count;
                if (j == j_len - 1 || boundary[j]) {
                    // no gradient crosses the sequence end or an episode reset
                    dh_carry = nn::Mat<float>::Zero(rows, dh);
                    dc_carry = nn::Mat<float>::Zero(rows, dh);
                }
                nn::Mat<float> dh_j = dh_carry;
                nn::Mat<float> dpen = nn::Mat<float>::Zero(rows, dh);
                Net::readout_backward(topos[j], assigns[j],
                                      dx.rightCols(model.psi_dim()), dh_j, dpen);
                nn::Mat<float> dh_prev, dc_prev;
                model.gnet.backward(topos[j], caches[j], dh_j, dc_carry, dpen, dh_prev,
                                    dc_prev);
                dh_carry = std::move(dh_prev);
                dc_carry = std::move(dc_prev);
            }
        } else {
            for (int j = j_len - 1; j >= 0; --j)
                (void)model.qnet.backward(qcaches[j], dqs[j]);
        }
    }
    if (!std::isfinite(total_loss))
        throw std::runtime_error("train_batch: non-finite loss");
    nn::clip_global_norm(params, cfg.grad_clip);
    opt.step();
    return total_loss;
}

TrainResult train(RlModel& model, RoutingEnv& env, const TrainConfig& cfg, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<nn::ParamRef<float>> params;
    model.collect(params);
    QNet target_qnet = model.qnet;  // target starts as a copy
    std::vector<nn::ParamRef<float>> q_online, q_target;
    model.qnet.collect(q_online, "q");
    target_qnet.collect(q_target, "q");
    nn::AdamW<float>::Config ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    nn::AdamW<float> opt(params, ocfg);
    ReplayMemory replay(cfg.replay_capacity);

    const int dh = cfg.hidden_dim;
    gobs::Topology topo;
    nn::Mat<float> h, c;
    auto on_episode_start = [&]() {
        if (!model.with_graph_obs) return;
        topo = gobs::Topology::from_graph(env.graph());
        h = nn::Mat<float>::Zero(env.graph().node_count, dh);
        c = nn::Mat<float>::Zero(env.graph().node_count, dh);
    };
    on_episode_start();
    if (!model.with_graph_obs) topo = gobs::Topology::from_graph(env.graph());

    TrainResult result;
    long long episode = 0;
    double ep_reward = 0.0;
    long long ep_arrivals = 0;
    const int n_actions = model.qnet.actions();

    for (long long step = 0; step < cfg.total_steps; ++step) {
        const double eps = epsilon_at(cfg, step);
        auto snapshot = std::make_shared<const EnvState>(env.state());
        PolicyStep ps;
        policy_forward(model, topo, *snapshot, env.config(), h, c, ps);
        const int n_agents = static_cast<int>(snapshot->packets.size());
        std::vector<int> actions(n_agents);
        std::vector<float> row(n_actions);
        for (int i = 0; i < n_agents; ++i) {
            for (int a = 0; a < n_actions; ++a) row[a] = ps.q(i, a);
            actions[i] = act(row.data(), n_actions, eps, rng);
        }
        const StepResult sr = env.step(actions);

        StepRecord rec;
        rec.state = snapshot;
        if (model.with_graph_obs) {
            rec.h = h;
            rec.c = c;
        }
        rec.actions = actions;
        rec.rewards.assign(sr.rewards.begin(), sr.rewards.end());
        rec.arrived = sr.arrived;
        rec.episode_end = sr.episode_done;
        for (int i = 0; i < n_agents; ++i) {
            ep_reward += sr.rewards[i];
            ep_arrivals += sr.arrived[i] ? 1 : 0;
        }
        if (sr.episode_done) {
            rec.final_successor = std::make_shared<const EnvState>(env.state());
        }
        replay.push(std::move(rec));

        if (sr.episode_done) {
            TrainResult::EpisodeRow er;
            er.episode = episode++;
            er.end_step = step + 1;
            er.reward_total = ep_reward;
            er.mean_reward = ep_reward / (static_cast<double>(n_agents) * env.config().episode_len);
            er.arrivals = ep_arrivals;
            er.epsilon = eps;
            result.episodes.push_back(er);
            ep_reward = 0.0;
            ep_arrivals = 0;
            env.reset();
            on_episode_start();
        } else if (model.with_graph_obs) {
            h = ps.out.h;
            c = ps.out.c;
        }

        if (replay.total_pushed() >= cfg.warmup_steps && (step + 1) % cfg.train_interval == 0 &&
            replay.valid_starts(cfg.seq_len) > 0) {
            const double loss =
                train_batch(model, target_qnet, replay, env.config(), cfg, opt, params, rng);
            soft_update(q_online, q_target, cfg.tau);
            result.losses.emplace_back(step, loss);
        }
    }
    result.steps = cfg.total_steps;
    return result;
}

void write_training_csv(const TrainResult& result, std::ostream& out) {
    out << "episode,end_step,reward_total,mean_reward,arrivals,epsilon\n";
    for (const auto& er : result.episodes)
        out << er.episode << ',' << er.end_step << ',' << er.reward_total << ','
            << er.mean_reward << ',' << er.arrivals << ',' << er.epsilon << '\n';
}

EvalResult evaluate_model(const RlModel& model, std::shared_ptr<const Graph> graph,
                          const EvalConfig& cfg, uint64_t seed) {
    EnvConfig ec;
    ec.packet_count = cfg.packet_count;
    ec.mode = cfg.mode;
    ec.episode_len = cfg.episode_len;
    RoutingEnv env(std::move(graph), ec, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const gobs::Topology topo = gobs::Topology::from_graph(env.graph());
    const int dh = model.with_graph_obs ? model.obs_cfg.hidden_dim : 0;
    const int n_actions = model.qnet.actions();

    EvalResult res;
    double reward_sum = 0.0;
    double age_sum = 0.0;
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        env.reset();
        nn::Mat<float> h, c;
        if (model.with_graph_obs) {
            h = nn::Mat<float>::Zero(env.graph().node_count, dh);
            c = nn::Mat<float>::Zero(env.graph().node_count, dh);
        }
        for (int t = 0; t < cfg.episode_len; ++t) {
            const EnvState& s = env.state();
            PolicyStep ps;
            policy_forward(model, topo, s, env.config(), h, c, ps);
            const int n_agents = static_cast<int>(s.packets.size());
            std::vector<int> actions(n_agents);
            std::vector<uint8_t> drops(n_agents, 0);
            std::vector<float> row(n_actions);
            for (int i = 0; i < n_agents; ++i) {
                for (int a = 0; a < n_actions; ++a) row[a] = ps.q(i, a);
                if (cfg.masked) {
                    const ActionMask mask = RoutingEnv::action_mask(s, i);
                    if (mask.drop && !s.packets[i].in_transit) drops[i] = 1;
                    actions[i] = act(row.data(), n_actions, 0.0, rng, &mask);
                } else {
                    actions[i] = act(row.data(), n_actions, 0.0, rng);
                }
            }
            const StepResult sr = env.step(actions, cfg.masked ? &drops : nullptr);
            for (int i = 0; i < n_agents; ++i) {
                reward_sum += sr.rewards[i];
                if (sr.arrived[i]) {
                    ++res.arrivals;
                    age_sum += sr.arrival_age[i];
                }
            }
            if (model.with_graph_obs) {
                h = std::move(ps.out.h);
                c = std::move(ps.out.c);
            }
        }
        res.blocks += env.state().blocks;
        res.drops += env.state().drops;
    }
    const double steps = static_cast<double>(cfg.episodes) * cfg.episode_len;
    res.episodes = cfg.episodes;
    res.mean_reward = reward_sum / (steps * cfg.packet_count);
    res.throughput = res.arrivals / steps;
    if (res.arrivals > 0) res.mean_delay = age_sum / static_cast<double>(res.arrivals);
    res.drops_per_step = static_cast<double>(res.drops) / steps;
    return res;
}

EvalResult evaluate_sp(SpVariant variant, std::shared_ptr<const Graph> graph,
                       const EvalConfig& cfg, uint64_t seed) {
    EnvConfig ec;
    ec.packet_count = cfg.packet_count;
    ec.mode = cfg.mode;
    ec.episode_len = cfg.episode_len;
    RoutingEnv env(std::move(graph), ec, seed);
    EvalResult res;
    double reward_sum = 0.0;
    double age_sum = 0.0;
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        env.reset();
        ShortestPathPolicy policy(variant);
        policy.on_reset(env.state());
        for (int t = 0; t < cfg.episode_len; ++t) {
            const StepResult sr = env.step(policy.actions(env.state()));
            for (size_t i = 0; i < sr.rewards.size(); ++i) {
                reward_sum += sr.rewards[i];
                if (sr.arrived[i]) {
                    ++res.arrivals;
                    age_sum += sr.arrival_age[i];
                }
            }
        }
        res.blocks += env.state().blocks;
        res.drops += env.state().drops;
    }
    const double steps = static_cast<double>(cfg.episodes) * cfg.episode_len;
    res.episodes = cfg.episodes;
    res.mean_reward = reward_sum / (steps * cfg.packet_count);
    res.throughput = res.arrivals / steps;
    if (res.arrivals > 0) res.mean_delay = age_sum / static_cast<double>(res.arrivals);
    res.drops_per_step = static_cast<double>(res.drops) / steps;
    return res;
}

AdaptationResult adaptation_experiment(const RlModel& model, std::shared_ptr<const Graph> graph,
                                       const AdaptationConfig& cfg, uint64_t seed) {
    if (!model.with_graph_obs)
        throw std::invalid_argument("adaptation_experiment: needs a graph-observation model");
    AdaptationResult res;
    if (cfg.edge_index >= 0) {
        if (cfg.edge_index >= static_cast<int>(graph->edges.size()))
            throw std::invalid_argument("adaptation_experiment: edge index out of range");
        res.edge_index = cfg.edge_index;
    } else {
        // most central delay-2 edge: maximize summed endpoint betweenness,
        // preferring delay exactly 2, then the closest delay
        const auto bc = betweenness_centrality(*graph);
        double best_score = -1.0;
        int best_gap = 1 << 30;
        for (size_t e = 0; e < graph->edges.size(); ++e) {
            const auto& edge = graph->edges[e];
            const int gap = std::abs(edge.delay - 2);
            const double score = bc[edge.u] + bc[edge.v];
            if (gap < best_gap || (gap == best_gap && score > best_score)) {
                best_gap = gap;
                best_score = score;
                res.edge_index = static_cast<int>(e);
            }
        }
    }
    res.old_delay = graph->edges[res.edge_index].delay;

    const int t_len = cfg.episode_len;
    res.throughput_model.assign(t_len, 0.0);
    res.throughput_sp_static.assign(t_len, 0.0);
    res.throughput_sp_stepwise.assign(t_len, 0.0);
    res.node_state_diff.assign(t_len, 0.0);

    EnvConfig ec;
    ec.packet_count = cfg.packet_count;
    ec.mode = cfg.mode;
    ec.episode_len = t_len;
    const DelayOverride ov{res.edge_index, cfg.new_delay, cfg.change_step};
    const int dh = model.obs_cfg.hidden_dim;
    const int n_actions = model.qnet.actions();

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        const uint64_t ep_seed = seed + static_cast<uint64_t>(ep);

        {  // learned policy
            RoutingEnv env(graph, ec, ep_seed);
            if (cfg.with_override) env.schedule_delay_override(ov);
            const gobs::Topology topo = gobs::Topology::from_graph(env.graph());
            std::mt19937_64 rng(ep_seed ^ 0x517cc1b727220a95ULL);
            nn::Mat<float> h = nn::Mat<float>::Zero(env.graph().node_count, dh);
            nn::Mat<float> c = nn::Mat<float>::Zero(env.graph().node_count, dh);
            std::vector<float> row(n_actions);
            for (int t = 0; t < t_len; ++t) {
                const EnvState& s = env.state();
                PolicyStep ps;
                policy_forward(model, topo, s, env.config(), h, c, ps);
                const int n_agents = static_cast<int>(s.packets.size());
                std::vector<int> actions(n_agents);
                for (int i = 0; i < n_agents; ++i) {
                    for (int a = 0; a < n_actions; ++a) row[a] = ps.q(i, a);
                    actions[i] = act(row.data(), n_actions, 0.0, rng);
                }
                const StepResult sr = env.step(actions);
                int arrived = 0;
                for (const auto f : sr.arrived) arrived += f ? 1 : 0;
                res.throughput_model[t] += arrived;
                res.node_state_diff[t] +=
                    (ps.out.h - h).cwiseAbs().cast<double>().mean();
                h = std::move(ps.out.h);
                c = std::move(ps.out.c);
            }
        }
        for (const SpVariant variant : {SpVariant::Static, SpVariant::Stepwise}) {
            RoutingEnv env(graph, ec, ep_seed);
            if (cfg.with_override) env.schedule_delay_override(ov);
            ShortestPathPolicy policy(variant);
            policy.on_reset(env.state());
            auto& series = variant == SpVariant::Static ? res.throughput_sp_static
                                                        : res.throughput_sp_stepwise;
            for (int t = 0; t < t_len; ++t) {
                const StepResult sr = env.step(policy.actions(env.state()));
                int arrived = 0;
                for (const auto f : sr.arrived) arrived += f ? 1 : 0;
                series[t] += arrived;
            }
        }
    }
    const double inv = 1.0 / cfg.episodes;
    for (int t = 0; t < t_len; ++t) {
        res.throughput_model[t] *= inv;
        res.throughput_sp_static[t] *= inv;
        res.throughput_sp_stepwise[t] *= inv;
        res.node_state_diff[t] *= inv;
    }
    return res;
}

void write_adaptation_csv(const AdaptationResult& result, std::ostream& out) {
    out << "step,throughput_model,throughput_sp_static,throughput_sp_stepwise,node_state_diff\n";
    for (size_t t = 0; t < result.node_state_diff.size(); ++t)
        out << (t + 1) << ',' << result.throughput_model[t] << ','
            << result.throughput_sp_static[t] << ',' << result.throughput_sp_stepwise[t] << ','
            << result.node_state_diff[t] << '\n';
}

void save_rl_model(const std::string& path, RlModel& model, const TrainConfig& cfg) {
    std::vector<nn::ParamRef<float>> params;
    model.collect(params);
    nlohmann::json meta;
    meta["kind"] = "rl";
    meta["with_graph_obs"] = model.with_graph_obs;
    meta["agent_obs_dim"] = model.agent_obs_dim();
    meta["actions"] = model.qnet.actions();
    if (model.with_graph_obs) {
        meta["node_obs_dim"] = model.obs_cfg.node_obs_dim;
        meta["hidden_dim"] = model.obs_cfg.hidden_dim;
        meta["k"] = model.obs_cfg.iterations;
        meta["encoder_hidden"] = model.obs_cfg.encoder_hidden;
    }
    meta["q_hidden"] = cfg.q_hidden;
    meta["train_config"] = nlohmann::json::parse(train_config_to_json(cfg));
    nn::save_params_file(path, params, meta.dump());
}

RlModel load_rl_model(const std::string& path) {
    const std::string meta_str = nn::read_params_metadata(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("model: bad metadata in " + path + ": " + e.what());
    }
    if (meta.value("kind", "") != "rl")
        throw std::runtime_error("model: " + path + " is not a policy checkpoint");
    TrainConfig cfg = train_config_from_json(meta.at("train_config").dump());
    cfg.with_graph_obs = meta.at("with_graph_obs").get<bool>();
    if (cfg.with_graph_obs) {
        cfg.hidden_dim = meta.at("hidden_dim").get<int>();
        cfg.k = meta.at("k").get<int>();
        cfg.encoder_hidden = meta.at("encoder_hidden").get<std::vector<int>>();
    }
    cfg.q_hidden = meta.at("q_hidden").get<std::vector<int>>();
    const int actions = meta.at("actions").get<int>();
    RlModel model(cfg, meta.at("agent_obs_dim").get<int>(),
                  cfg.with_graph_obs ? meta.at("node_obs_dim").get<int>() : 0, actions - 1, 0);
    std::vector<nn::ParamRef<float>> params;
    model.collect(params);
    nn::load_params_file(path, params);
    return model;
}

}  // namespace routelab::marl
