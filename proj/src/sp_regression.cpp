#include "routelab/sp_regression.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace routelab::spreg {

namespace {

constexpr char kMagic[8] = {'R', 'L', 'S', 'P', 'D', 'A', 'T'};
constexpr uint32_t kVersion = 1;

template <class X>
void put(std::ofstream& out, X x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(X));
}

template <class X>
X get(std::ifstream& in) {
    X x{};
    in.read(reinterpret_cast<char*>(&x), sizeof(X));
    if (!in) throw std::runtime_error("dataset: truncated file");
    return x;
}

void put_mat(std::ofstream& out, const nn::Mat<float>& m) {
    put(out, static_cast<uint32_t>(m.rows()));
    put(out, static_cast<uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(float) * m.size()));
}

nn::Mat<float> get_mat(std::ifstream& in) {
    const auto rows = get<uint32_t>(in);
    const auto cols = get<uint32_t>(in);
    nn::Mat<float> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * m.size()));
    if (!in) throw std::runtime_error("dataset: truncated matrix");
    return m;
}

std::vector<int> identity_nodes(int n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

// Sum over the J forward steps of the per-step prediction MSE; with_grad also
// accumulates parameter gradients through the whole unroll.
double unrolled_loss(SlModel& model, const gobs::Topology& topo, const nn::Mat<float>& obs,
                     const nn::Mat<float>& targets_scaled, int unroll, bool with_grad) {
    using Net = gobs::GraphObsNet<float>;
    const int rows = topo.node_count;
    const int dh = model.obs_cfg.hidden_dim;
    const std::vector<int> all_nodes = identity_nodes(rows);

    std::vector<typename Net::StepCache> caches(with_grad ? unroll : 0);
    std::vector<nn::Mat<float>> psis, dpreds;
    nn::Mat<float> h = nn::Mat<float>::Zero(rows, dh);
    nn::Mat<float> c = nn::Mat<float>::Zero(rows, dh);
    double loss = 0.0;
    for (int j = 0; j < unroll; ++j) {
        typename Net::StepOutput out;
        model.net.forward(topo, obs, h, c, out, with_grad ? &caches[j] : nullptr);
        nn::Mat<float> psi = model.net.readout(topo, out, all_nodes);
        const nn::Mat<float> pred = model.head.forward(psi);
        loss += static_cast<double>(nn::mse_loss(pred, targets_scaled));
        if (with_grad) {
            dpreds.push_back(nn::mse_backward(pred, targets_scaled));
            psis.push_back(std::move(psi));
        }
        h = std::move(out.h);
        c = std::move(out.c);
    }
    if (with_grad) {
        nn::Mat<float> dh_carry = nn::Mat<float>::Zero(rows, dh);
        nn::Mat<float> dc_carry = nn::Mat<float>::Zero(rows, dh);
        for (int j = unroll - 1; j >= 0; --j) {
            const nn::Mat<float> dpsi = model.head.backward(psis[j], dpreds[j]);
            nn::Mat<float> dh_total = dh_carry;
            nn::Mat<float> dpen = nn::Mat<float>::Zero(rows, dh);
            Net::readout_backward(topo, all_nodes, dpsi, dh_total, dpen);
            nn::Mat<float> dh_next, dc_next;
            model.net.backward(topo, caches[j], dh_total, dc_carry, dpen, dh_next, dc_next);
            dh_carry = std::move(dh_next);
            dc_carry = std::move(dc_next);
        }
    }
    return loss;
}

struct Stacked {
    gobs::Topology topo;
    nn::Mat<float> obs, targets_scaled;
};

Stacked stack_samples(const Dataset& data, const std::vector<int>& indices, double scale) {
    std::vector<const Graph*> graphs;
    graphs.reserve(indices.size());
    for (int i : indices) graphs.push_back(&data.samples[i].graph);
    Stacked s;
    s.topo = gobs::Topology::disjoint_union(graphs);
    const auto& first = data.samples[indices.front()];
    const int d_m = static_cast<int>(first.node_obs.cols());
    const int l = static_cast<int>(first.targets.cols());
    s.obs.resize(s.topo.node_count, d_m);
    s.targets_scaled.resize(s.topo.node_count, l);
    int row = 0;
    for (int i : indices) {
        const auto& smp = data.samples[i];
        s.obs.middleRows(row, smp.node_obs.rows()) = smp.node_obs;
        s.targets_scaled.middleRows(row, smp.targets.rows()) =
            smp.targets * static_cast<float>(1.0 / scale);
        row += static_cast<int>(smp.node_obs.rows());
    }
    return s;
}

}  // namespace

RegressionSample make_sample(std::shared_ptr<const Graph> graph, const EnvState& state,
                             const EnvConfig& env_cfg, bool hop_targets) {
    RegressionSample smp;
    smp.graph = *graph;
    const int l = graph->node_count;
    const int d_m = RoutingEnv::node_obs_dim(*graph);
    smp.node_obs.resize(l, d_m);
    std::vector<float> row(d_m);
    for (int v = 0; v < l; ++v) {
        RoutingEnv::node_obs_into(state, env_cfg, v, row.data());
        for (int j = 0; j < d_m; ++j) smp.node_obs(v, j) = row[j];
    }
    const auto dist = all_pairs_shortest_paths(
        *graph, hop_targets ? PathWeight::Hops : PathWeight::Delay);
    smp.targets.resize(l, l);
    for (int v = 0; v < l; ++v)
        for (int w = 0; w < l; ++w) smp.targets(v, w) = static_cast<float>(dist[v][w]);
    return smp;
}

Dataset build_dataset(const DatasetConfig& cfg, uint64_t seed) {
    if (cfg.count < 1) throw std::invalid_argument("build_dataset: count must be positive");
    if (cfg.validation < 0 || cfg.validation >= cfg.count)
        throw std::invalid_argument("build_dataset: validation split out of range");
    const GenParams gen = cfg.gen;
    RoutingEnv env(
        [gen](std::mt19937_64& rng) {
            return std::make_shared<const Graph>(generate_graph(gen, rng));
        },
        cfg.env, seed);
    Dataset data;
    data.validation = cfg.validation;
    data.hop_targets = cfg.hop_targets;
    data.samples.reserve(cfg.count);
    for (int i = 0; i < cfg.count; ++i) {
        if (i > 0) env.reset();
        data.samples.push_back(
            make_sample(env.state().graph, env.state(), env.config(), cfg.hop_targets));
    }
    return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dataset: cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put(out, static_cast<uint32_t>(data.samples.size()));
    put(out, static_cast<uint32_t>(data.validation));
    put(out, static_cast<uint8_t>(data.hop_targets ? 1 : 0));
    for (const auto& smp : data.samples) {
        const std::string gj = graph_to_json(smp.graph);
        put(out, static_cast<uint32_t>(gj.size()));
        out.write(gj.data(), static_cast<std::streamsize>(gj.size()));
        put_mat(out, smp.node_obs);
        put_mat(out, smp.targets);
    }
    if (!out) throw std::runtime_error("dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("dataset: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("dataset: bad magic in " + path);
    const auto version = get<uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("dataset: unsupported version " + std::to_string(version));
    Dataset data;
    const auto count = get<uint32_t>(in);
    data.validation = static_cast<int>(get<uint32_t>(in));
    data.hop_targets = get<uint8_t>(in) != 0;
    data.samples.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const auto len = get<uint32_t>(in);
        std::string gj(len, '\0');
        in.read(gj.data(), len);
        if (!in) throw std::runtime_error("dataset: truncated graph record");
        RegressionSample smp;
        smp.graph = graph_from_json(gj);
        smp.node_obs = get_mat(in);
        smp.targets = get_mat(in);
        data.samples.push_back(std::move(smp));
    }
    if (data.validation >= static_cast<int>(data.samples.size()) && data.validation != 0)
        throw std::runtime_error("dataset: validation split exceeds sample count");
    return data;
}

SlModel::SlModel(const SlConfig& cfg, int node_obs_dim, int degree, int node_count,
                 uint64_t seed) {
    obs_cfg.node_obs_dim = node_obs_dim;
    obs_cfg.hidden_dim = cfg.hidden_dim;
    obs_cfg.iterations = cfg.k;
    obs_cfg.encoder_hidden = cfg.encoder_hidden;
    target_scale = cfg.target_scale;
    std::mt19937_64 rng(seed);
    net = gobs::GraphObsNet<float>(obs_cfg, rng);
    head = nn::Linear<float>(cfg.hidden_dim * (1 + degree), node_count, rng);
}

void SlModel::collect(std::vector<nn::ParamRef<float>>& out) {
    net.collect(out, "sl.net");
    head.collect(out, "sl.head");
}

SlTrainResult train_regression(SlModel& model, const Dataset& data, const SlConfig& cfg,
                               uint64_t seed) {
    if (data.train_count() < 1) throw std::invalid_argument("train_regression: empty train split");
    if (cfg.unroll < 1 || cfg.batch < 1 || cfg.iterations < 0)
        throw std::invalid_argument("train_regression: bad config");
    std::mt19937_64 rng(seed);
    // shuffled epochs: every training graph is visited equally often
    std::vector<int> order(data.train_count());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    size_t cursor = 0;
    auto next_index = [&]() {
        if (cursor == order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        return order[cursor++];
    };

    std::vector<nn::ParamRef<float>> params;
    model.collect(params);
    nn::AdamW<float>::Config ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    nn::AdamW<float> opt(params, ocfg);

    const int val_count = std::min(data.validation, cfg.val_max);
    auto measure_val = [&]() -> double {
        if (val_count == 0) return 0.0;
        double weighted = 0.0;
        int weight = 0;
        const int first_val = data.train_count();
        for (int start = 0; start < val_count; start += cfg.batch) {
            const int n = std::min(cfg.batch, val_count - start);
            std::vector<int> idx(n);
            std::iota(idx.begin(), idx.end(), first_val + start);
            const Stacked s = stack_samples(data, idx, model.target_scale);
            weighted += unrolled_loss(model, s.topo, s.obs, s.targets_scaled, cfg.unroll, false) * n;
            weight += n;
        }
        return weighted / weight;
    };

    SlTrainResult result;
    result.initial_val_loss = measure_val();
    {
        std::vector<int> idx(cfg.batch);
        for (auto& i : idx) i = next_index();
        const Stacked s = stack_samples(data, idx, model.target_scale);
        const double l0 = unrolled_loss(model, s.topo, s.obs, s.targets_scaled, cfg.unroll, false);
        result.curve.push_back({0, l0, result.initial_val_loss});
    }

    double running = 0.0;
    int window = 0;
    for (int it = 1; it <= cfg.iterations; ++it) {
        std::vector<int> idx(cfg.batch);
        for (auto& i : idx) i = next_index();
        const Stacked s = stack_samples(data, idx, model.target_scale);
        nn::zero_grads(params);
        const double loss =
            unrolled_loss(model, s.topo, s.obs, s.targets_scaled, cfg.unroll, true);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_regression: non-finite loss at iteration " +
                                     std::to_string(it));
        opt.step();
        running += loss;
        ++window;
        if (it % cfg.log_every == 0 || it == cfg.iterations) {
            const double val = measure_val();
            result.curve.push_back({it, running / window, val});
            running = 0.0;
            window = 0;
        }
    }
    result.final_val_loss = result.curve.back().val_loss;
    return result;
}

std::map<int, double> evaluate_at_steps(const SlModel& model,
                                        const std::vector<RegressionSample>& test,
                                        const std::vector<int>& steps) {
    if (test.empty()) throw std::invalid_argument("evaluate_at_steps: empty test set");
    if (steps.empty()) throw std::invalid_argument("evaluate_at_steps: no steps requested");
    int t_max = 0;
    for (int t : steps) {
        if (t < 1) throw std::invalid_argument("evaluate_at_steps: steps are 1-based");
        t_max = std::max(t_max, t);
    }
    std::map<int, double> sse;
    for (int t : steps) sse[t] = 0.0;
    long long elems = 0;
    const int chunk = 32;
    const int dh = model.obs_cfg.hidden_dim;
    for (size_t start = 0; start < test.size(); start += chunk) {
        const size_t n = std::min<size_t>(chunk, test.size() - start);
        std::vector<const Graph*> graphs;
        for (size_t i = 0; i < n; ++i) graphs.push_back(&test[start + i].graph);
        const gobs::Topology topo = gobs::Topology::disjoint_union(graphs);
        nn::Mat<float> obs(topo.node_count, model.obs_cfg.node_obs_dim);
        nn::Mat<float> targets(topo.node_count, model.node_count());
        int row = 0;
        for (size_t i = 0; i < n; ++i) {
            const auto& smp = test[start + i];
            obs.middleRows(row, smp.node_obs.rows()) = smp.node_obs;
            targets.middleRows(row, smp.targets.rows()) =
                smp.targets * static_cast<float>(1.0 / model.target_scale);
            row += static_cast<int>(smp.node_obs.rows());
        }
        const std::vector<int> all_nodes = identity_nodes(topo.node_count);
        nn::Mat<float> h = nn::Mat<float>::Zero(topo.node_count, dh);
        nn::Mat<float> c = nn::Mat<float>::Zero(topo.node_count, dh);
        for (int t = 1; t <= t_max; ++t) {
            typename gobs::GraphObsNet<float>::StepOutput out;
            model.net.forward(topo, obs, h, c, out);
            if (sse.count(t)) {
                const nn::Mat<float> psi = model.net.readout(topo, out, all_nodes);
                const nn::Mat<float> pred = model.head.forward(psi);
                sse[t] += static_cast<double>(
                    (pred - targets).cast<double>().array().square().sum());
            }
            h = std::move(out.h);
            c = std::move(out.c);
        }
        elems += static_cast<long long>(topo.node_count) * model.node_count();
    }
    std::map<int, double> mse;
    for (auto& [t, s] : sse) mse[t] = s / static_cast<double>(elems);
    return mse;
}

void write_loss_csv(const std::vector<LossPoint>& curve, std::ostream& out) {
    out << "iteration,train_loss,val_loss\n";
    for (const auto& p : curve)
        out << p.iteration << ',' << p.train_loss << ',' << p.val_loss << '\n';
}

void save_sl_model(const std::string& path, SlModel& model, const SlConfig& cfg) {
    std::vector<nn::ParamRef<float>> params;
    model.collect(params);
    nlohmann::json meta;
    meta["kind"] = "sl";
    meta["k"] = model.obs_cfg.iterations;
    meta["unroll"] = cfg.unroll;
    meta["hidden_dim"] = model.obs_cfg.hidden_dim;
    meta["encoder_hidden"] = model.obs_cfg.encoder_hidden;
    meta["node_obs_dim"] = model.obs_cfg.node_obs_dim;
    meta["node_count"] = model.node_count();
    meta["degree"] = model.head.in_features() / model.obs_cfg.hidden_dim - 1;
    meta["target_scale"] = model.target_scale;
    meta["hop_targets"] = model.hop_targets;
    nn::save_params_file(path, params, meta.dump());
}

SlModel load_sl_model(const std::string& path) {
    const std::string meta_str = nn::read_params_metadata(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("model: bad metadata in " + path + ": " + e.what());
    }
    if (meta.value("kind", "") != "sl")
        throw std::runtime_error("model: " + path + " is not a regression checkpoint");
    SlConfig cfg;
    cfg.k = meta.at("k").get<int>();
    cfg.hidden_dim = meta.at("hidden_dim").get<int>();
    cfg.encoder_hidden = meta.at("encoder_hidden").get<std::vector<int>>();
    cfg.target_scale = meta.at("target_scale").get<double>();
    SlModel model(cfg, meta.at("node_obs_dim").get<int>(), meta.at("degree").get<int>(),
                  meta.at("node_count").get<int>(), 0);
    model.hop_targets = meta.value("hop_targets", false);
    std::vector<nn::ParamRef<float>> params;
    model.collect(params);
    nn::load_params_file(path, params);
    return model;
}

}  // namespace routelab::spreg
