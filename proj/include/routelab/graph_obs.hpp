#pragma once

#include <vector>

#include "routelab/graph.hpp"
#include "routelab/nn.hpp"

namespace routelab::gobs {

// Neighbor structure the message passing runs on. A topology may be the
// disjoint union of several graphs (row-offset node ids), which batches
// independent graphs through one call.
struct Topology {
    int node_count = 0;
    int degree = 0;
    std::vector<std::vector<int>> neighbors;  // ascending id within each block

    static Topology from_graph(const Graph& g);
    static Topology disjoint_union(const std::vector<const Graph*>& graphs);
};

struct GraphObsConfig {
    int node_obs_dim = 0;  // d_m
    int hidden_dim = 128;  // d_h
    int iterations = 1;    // K aggregate/update rounds per environment step
    std::vector<int> encoder_hidden = {512, 256};
};

// Encode / aggregate / update engine with a shared (h, c) pair per node.
// One forward call advances all nodes by one environment step.
template <class T>
class GraphObsNet {
public:
    nn::Mlp<T> encoder;           // d_m -> hidden -> d_h, Leaky ReLU throughout
    nn::LstmCell<T> lstm_encode;  // consumes the embedding (LSTM-A)
    nn::LstmCell<T> lstm_update;  // consumes neighbor sums, all iterations (LSTM-B)

    GraphObsNet() = default;
    GraphObsNet(const GraphObsConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        if (cfg.iterations < 1) throw std::invalid_argument("GraphObsNet: need at least one iteration");
        std::vector<int> dims = {cfg.node_obs_dim};
        dims.insert(dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
        dims.push_back(cfg.hidden_dim);
        encoder = nn::Mlp<T>(dims, true, rng);
        lstm_encode = nn::LstmCell<T>(cfg.hidden_dim, cfg.hidden_dim, rng);
        lstm_update = nn::LstmCell<T>(cfg.hidden_dim, cfg.hidden_dim, rng);
    }

    const GraphObsConfig& config() const { return cfg_; }

    struct StepCache {
        typename nn::Mlp<T>::Cache encoder_cache;
        typename nn::LstmCell<T>::Cache encode_cache;
        std::vector<typename nn::LstmCell<T>::Cache> update_caches;  // K entries
        std::vector<nn::Mat<T>> h_levels;                            // h_0 .. h_K
    };

    struct StepOutput {
        nn::Mat<T> h, c;      // h_K, c_K, the carry into the next step
        nn::Mat<T> h_penult;  // h_{K-1}, read out for neighbor blocks
    };

    // M^v = sum of neighbors' rows, own row excluded.
    static nn::Mat<T> aggregate(const Topology& topo, const nn::Mat<T>& h) {
        nn::Mat<T> m = nn::Mat<T>::Zero(h.rows(), h.cols());
        for (int v = 0; v < topo.node_count; ++v)
            for (int w : topo.neighbors[v]) m.row(v) += h.row(w);
        return m;
    }

    void forward(const Topology& topo, const nn::Mat<T>& node_obs, const nn::Mat<T>& h_in,
                 const nn::Mat<T>& c_in, StepOutput& out, StepCache* cache = nullptr) const {
        if (node_obs.rows() != topo.node_count)
            throw std::invalid_argument("GraphObsNet: one observation row per node required");
        const nn::Mat<T> e = encoder.forward(node_obs, cache ? &cache->encoder_cache : nullptr);
        nn::Mat<T> h, c;
        lstm_encode.forward(e, h_in, c_in, h, c, cache ? &cache->encode_cache : nullptr);
        if (cache) {
            cache->update_caches.assign(cfg_.iterations, {});
            cache->h_levels.assign(1, h);
        }
        nn::Mat<T> h_prev_level;
        for (int k = 0; k < cfg_.iterations; ++k) {
            const nn::Mat<T> m = aggregate(topo, h);
            h_prev_level = h;
            nn::Mat<T> h_next, c_next;
            lstm_update.forward(m, h, c, h_next, c_next, cache ? &cache->update_caches[k] : nullptr);
            h = std::move(h_next);
            c = std::move(c_next);
            if (cache) cache->h_levels.push_back(h);
        }
        out.h = std::move(h);
        out.c = std::move(c);
        out.h_penult = std::move(h_prev_level);
    }

    // Upstream gradients arrive on h_K (dh), c_K (dc) and h_{K-1} (dh_penult);
    // dh_prev/dc_prev receive the gradients on the previous step's carry.
    void backward(const Topology& topo, const StepCache& cache, const nn::Mat<T>& dh,
                  const nn::Mat<T>& dc, const nn::Mat<T>& dh_penult, nn::Mat<T>& dh_prev,
                  nn::Mat<T>& dc_prev) {
        const int k_max = cfg_.iterations;
        nn::Mat<T> dh_cur = dh;
        nn::Mat<T> dc_cur = dc;
        for (int k = k_max - 1; k >= 0; --k) {
            nn::Mat<T> dm = nn::Mat<T>::Zero(dh_cur.rows(), dh_cur.cols());
            nn::Mat<T> dh_below = nn::Mat<T>::Zero(dh_cur.rows(), dh_cur.cols());
            nn::Mat<T> dc_below = nn::Mat<T>::Zero(dh_cur.rows(), dh_cur.cols());
            lstm_update.backward(cache.update_caches[k], dh_cur, dc_cur, dm, dh_below, dc_below);
            dh_below += aggregate(topo, dm);  // neighbor-sum adjoint is the same sum
            if (k == k_max - 1 && dh_penult.size() > 0) dh_below += dh_penult;
            dh_cur = std::move(dh_below);
            dc_cur = std::move(dc_below);
        }
        nn::Mat<T> de = nn::Mat<T>::Zero(dh_cur.rows(), cfg_.hidden_dim);
        dh_prev = nn::Mat<T>::Zero(dh_cur.rows(), cfg_.hidden_dim);
        dc_prev = nn::Mat<T>::Zero(dh_cur.rows(), cfg_.hidden_dim);
        lstm_encode.backward(cache.encode_cache, dh_cur, dc_cur, de, dh_prev, dc_prev);
        encoder.backward(cache.encoder_cache, de);  // input gradient not needed
    }

    // psi^i = h_K(v_i) || h_{K-1}(w) for neighbors w of v_i in ascending order.
    static int psi_dim(const Topology& topo, int hidden_dim) {
        return hidden_dim * (1 + topo.degree);
    }

    nn::Mat<T> readout(const Topology& topo, const StepOutput& out,
                       const std::vector<int>& agent_nodes) const {
        const int dh = cfg_.hidden_dim;
        nn::Mat<T> psi(static_cast<Eigen::Index>(agent_nodes.size()), psi_dim(topo, dh));
        for (size_t i = 0; i < agent_nodes.size(); ++i) {
            const int v = agent_nodes[i];
            if (v < 0 || v >= topo.node_count) throw std::invalid_argument("readout: unassigned agent");
            psi.block(i, 0, 1, dh) = out.h.row(v);
            const auto& nb = topo.neighbors[v];
            for (size_t j = 0; j < nb.size(); ++j)
                psi.block(i, static_cast<Eigen::Index>(dh * (1 + j)), 1, dh) =
                    out.h_penult.row(nb[j]);
        }
        return psi;
    }

    static void readout_backward(const Topology& topo, const std::vector<int>& agent_nodes,
                                 const nn::Mat<T>& dpsi, nn::Mat<T>& dh, nn::Mat<T>& dh_penult) {
        const int dh_dim = static_cast<int>(dh.cols());
        for (size_t i = 0; i < agent_nodes.size(); ++i) {
            const int v = agent_nodes[i];
            dh.row(v) += dpsi.block(i, 0, 1, dh_dim);
            const auto& nb = topo.neighbors[v];
            for (size_t j = 0; j < nb.size(); ++j)
                dh_penult.row(nb[j]) +=
                    dpsi.block(i, static_cast<Eigen::Index>(dh_dim * (1 + j)), 1, dh_dim);
        }
    }

    void collect(std::vector<nn::ParamRef<T>>& out, const std::string& prefix) {
        encoder.collect(out, prefix + ".encoder");
        lstm_encode.collect(out, prefix + ".lstm_encode");
        lstm_update.collect(out, prefix + ".lstm_update");
    }
    void zero_grad() {
        encoder.zero_grad();
        lstm_encode.zero_grad();
        lstm_update.zero_grad();
    }

private:
    GraphObsConfig cfg_;
};

// Debug view of all states entering a node's readout: own h_0..h_K and each
// ascending-order neighbor's h_0..h_{K-1}.
template <class T>
struct NodeIntermediates {
    std::vector<nn::Mat<T>> own;
    std::vector<std::vector<nn::Mat<T>>> neighbors;
};

template <class T>
NodeIntermediates<T> collect_intermediates(const Topology& topo,
                                           const typename GraphObsNet<T>::StepCache& cache,
                                           int node) {
    NodeIntermediates<T> out;
    for (const auto& level : cache.h_levels) out.own.push_back(level.row(node));
    out.neighbors.resize(topo.neighbors[node].size());
    for (size_t j = 0; j < topo.neighbors[node].size(); ++j)
        for (size_t k = 0; k + 1 < cache.h_levels.size(); ++k)
            out.neighbors[j].push_back(cache.h_levels[k].row(topo.neighbors[node][j]));
    return out;
}

}  // namespace routelab::gobs
