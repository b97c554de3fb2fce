#include "routelab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace routelab {

namespace {

double sq_dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

bool connected(int n, const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
        }
    }
    return count == n;
}

}  // namespace

void Graph::rebuild_adjacency() {
    adjacency.assign(node_count, {});
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
        adjacency[edges[e].u].emplace_back(edges[e].v, e);
        adjacency[edges[e].v].emplace_back(edges[e].u, e);
    }
    for (auto& row : adjacency) std::sort(row.begin(), row.end());
}

void Graph::validate() const {
    if (node_count <= 0) throw std::runtime_error("graph: empty node set");
    if (static_cast<int>(positions.size()) != node_count)
        throw std::runtime_error("graph: positions size mismatch");
    if (static_cast<int>(adjacency.size()) != node_count)
        throw std::runtime_error("graph: adjacency not built");
    for (size_t e = 0; e < edges.size(); ++e) {
        const Edge& ed = edges[e];
        if (ed.u < 0 || ed.v >= node_count || ed.u >= ed.v)
            throw std::runtime_error("graph: edge endpoints not canonical");
        if (ed.delay < 1) throw std::runtime_error("graph: non-positive delay");
        if (e > 0) {
            const Edge& p = edges[e - 1];
            if (std::pair(p.u, p.v) >= std::pair(ed.u, ed.v))
                throw std::runtime_error("graph: edges not sorted or duplicated");
        }
    }
    std::vector<std::vector<int>> plain(node_count);
    for (int v = 0; v < node_count; ++v) {
        if (static_cast<int>(adjacency[v].size()) != degree)
            throw std::runtime_error("graph: node degree != " + std::to_string(degree));
        for (auto [w, e] : adjacency[v]) {
            if (w == v) throw std::runtime_error("graph: self loop");
            if (e < 0 || e >= static_cast<int>(edges.size()) ||
                (edges[e].u != std::min(v, w) || edges[e].v != std::max(v, w)))
                throw std::runtime_error("graph: adjacency/edge index mismatch");
            plain[v].push_back(w);
        }
    }
    if (!connected(node_count, plain)) throw std::runtime_error("graph: disconnected");
}

int Graph::edge_between(int u, int v) const {
    for (auto [w, e] : adjacency[u])
        if (w == v) return e;
    return -1;
}

Graph generate_graph(const GenParams& params, std::mt19937_64& rng) {
    const int n = params.node_count;
    const int d = params.degree;
    if (n <= d || d < 1) throw std::invalid_argument("generate_graph: need node_count > degree >= 1");
    if ((n * d) % 2 != 0) throw std::invalid_argument("generate_graph: node_count * degree must be even");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < params.max_restarts; ++attempt) {
        std::vector<std::array<double, 2>> pos(n);
        for (auto& p : pos) {
            p[0] = unit(rng);
            p[1] = unit(rng);
        }

        std::vector<int> deg(n, 0);
        std::vector<std::vector<int>> adj(n);
        std::vector<std::pair<int, int>> picked;
        bool stuck = false;
        const int target_edges = n * d / 2;
        while (static_cast<int>(picked.size()) < target_edges) {
            // lowest-degree node first, smallest id on ties
            int v = -1;
            for (int i = 0; i < n; ++i)
                if (deg[i] < d && (v < 0 || deg[i] < deg[v])) v = i;
            // nearest node with a free slot and no existing edge to v
            int best = -1;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (int w = 0; w < n; ++w) {
                if (w == v || deg[w] >= d) continue;
                if (std::find(adj[v].begin(), adj[v].end(), w) != adj[v].end()) continue;
                const double d2 = sq_dist(pos[v], pos[w]);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = w;
                }
            }
            if (best < 0) {
                stuck = true;
                break;
            }
            adj[v].push_back(best);
            adj[best].push_back(v);
            ++deg[v];
            ++deg[best];
            picked.emplace_back(std::min(v, best), std::max(v, best));
        }
        if (stuck || !connected(n, adj)) continue;

        Graph g;
        g.node_count = n;
        g.degree = d;
        g.positions = std::move(pos);
        std::sort(picked.begin(), picked.end());
        g.edges.reserve(picked.size());
        for (auto [u, v] : picked) {
            const double dist = std::sqrt(sq_dist(g.positions[u], g.positions[v]));
            const int delay = std::max(1, static_cast<int>(std::lround(params.delay_scale * dist)));
            g.edges.push_back({u, v, delay});
        }
        g.rebuild_adjacency();
        g.validate();
        return g;
    }
    throw std::runtime_error("generate_graph: no valid graph within restart budget");
}

std::vector<std::vector<int>> all_pairs_shortest_paths(const Graph& g, PathWeight weight,
                                                      const std::vector<int>* delay_override) {
    const int n = g.node_count;
    if (delay_override && delay_override->size() != g.edges.size())
        throw std::invalid_argument("all_pairs_shortest_paths: override size mismatch");
    auto edge_weight = [&](int e) {
        if (weight == PathWeight::Hops) return 1;
        return delay_override ? (*delay_override)[e] : g.edges[e].delay;
    };
    const int inf = std::numeric_limits<int>::max();
    std::vector<std::vector<int>> dist(n, std::vector<int>(n, inf));
    using Item = std::pair<int, int>;  // (dist, node)
    for (int s = 0; s < n; ++s) {
        auto& ds = dist[s];
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        ds[s] = 0;
        pq.emplace(0, s);
        while (!pq.empty()) {
            auto [dv, v] = pq.top();
            pq.pop();
            if (dv > ds[v]) continue;
            for (auto [w, e] : g.adjacency[v]) {
                const int cand = dv + edge_weight(e);
                if (cand < ds[w]) {
                    ds[w] = cand;
                    pq.emplace(cand, w);
                }
            }
        }
        for (int t = 0; t < n; ++t)
            if (ds[t] == inf) throw std::runtime_error("all_pairs_shortest_paths: disconnected graph");
    }
    return dist;
}

std::vector<double> betweenness_centrality(const Graph& g, PathWeight weight) {
    const int n = g.node_count;
    std::vector<double> bc(n, 0.0);
    if (n < 3) return bc;
    auto edge_weight = [&](int e) { return weight == PathWeight::Hops ? 1 : g.edges[e].delay; };
    const int inf = std::numeric_limits<int>::max();

    // Brandes accumulation; integer distances keep path counting exact.
    std::vector<int> dist(n);
    std::vector<double> sigma(n), delta(n);
    std::vector<std::vector<int>> pred(n);
    std::vector<int> order;
    std::vector<char> settled(n);
    using Item = std::pair<int, int>;
    for (int s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        std::fill(settled.begin(), settled.end(), 0);
        for (auto& p : pred) p.clear();
        order.clear();

        dist[s] = 0;
        sigma[s] = 1.0;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        pq.emplace(0, s);
        while (!pq.empty()) {
            auto [dv, v] = pq.top();
            pq.pop();
            if (settled[v] || dv > dist[v]) continue;
            settled[v] = 1;
            order.push_back(v);
            for (auto [w, e] : g.adjacency[v]) {
                const int cand = dv + edge_weight(e);
                if (cand < dist[w]) {
                    dist[w] = cand;
                    sigma[w] = sigma[v];
                    pred[w] = {v};
                    pq.emplace(cand, w);
                } else if (cand == dist[w]) {
                    sigma[w] += sigma[v];
                    pred[w].push_back(v);
                }
            }
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int w = *it;
            for (int v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            if (w != s) bc[w] += delta[w];
        }
    }
    // each unordered pair counted twice above
    const double scale = 1.0 / (static_cast<double>(n - 1) * (n - 2));
    for (double& x : bc) x *= scale;
    return bc;
}

GraphMetrics compute_metrics(const Graph& g) {
    GraphMetrics m;
    m.apsp_hops = all_pairs_shortest_paths(g, PathWeight::Hops);
    m.apsp_delay = all_pairs_shortest_paths(g, PathWeight::Delay);
    for (const auto& row : m.apsp_hops)
        for (int x : row) m.diameter_hops = std::max(m.diameter_hops, x);
    for (const auto& row : m.apsp_delay)
        for (int x : row) m.diameter_delay = std::max(m.diameter_delay, x);
    m.betweenness = betweenness_centrality(g, PathWeight::Delay);
    return m;
}

void Moments::accumulate(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("Moments: empty sample");
    min = *std::min_element(xs.begin(), xs.end());
    max = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += x;
    mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    stddev = std::sqrt(ss / static_cast<double>(xs.size()));
}

SuiteStats suite_stats(const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw std::invalid_argument("suite_stats: no graphs");
    SuiteStats s;
    s.graph_count = static_cast<int>(graphs.size());
    std::vector<double> dia_h, dia_d, pair_h, pair_d, node_bc, max_bc, mean_bc;
    size_t pair_total = 0;
    std::vector<size_t> hop_hist;
    for (const Graph& g : graphs) {
        const GraphMetrics m = compute_metrics(g);
        dia_h.push_back(m.diameter_hops);
        dia_d.push_back(m.diameter_delay);
        const int n = g.node_count;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                if (a == b) continue;
                const int h = m.apsp_hops[a][b];
                pair_h.push_back(h);
                pair_d.push_back(m.apsp_delay[a][b]);
                if (static_cast<int>(hop_hist.size()) <= h) hop_hist.resize(h + 1, 0);
                ++hop_hist[h];
                ++pair_total;
            }
        double bsum = 0.0, bmax = 0.0;
        for (double b : m.betweenness) {
            node_bc.push_back(b);
            bsum += b;
            bmax = std::max(bmax, b);
        }
        max_bc.push_back(bmax);
        mean_bc.push_back(bsum / n);
    }
    s.diameter_hops.accumulate(dia_h);
    s.diameter_delay.accumulate(dia_d);
    s.apsp_hops.accumulate(pair_h);
    s.apsp_delay.accumulate(pair_d);
    s.betweenness.accumulate(node_bc);
    s.betweenness_max.accumulate(max_bc);
    s.betweenness_mean.accumulate(mean_bc);
    s.hop_cdf.resize(hop_hist.size());
    size_t run = 0;
    for (size_t h = 0; h < hop_hist.size(); ++h) {
        run += hop_hist[h];
        s.hop_cdf[h] = static_cast<double>(run) / static_cast<double>(pair_total);
    }
    return s;
}

namespace {

nlohmann::json moments_json(const Moments& m) {
    return {{"min", m.min}, {"max", m.max}, {"mean", m.mean}, {"stddev", m.stddev}};
}

}  // namespace

std::string suite_stats_to_json(const SuiteStats& s) {
    nlohmann::json j;
    j["graph_count"] = s.graph_count;
    j["diameter_hops"] = moments_json(s.diameter_hops);
    j["diameter_delay"] = moments_json(s.diameter_delay);
    j["apsp_hops"] = moments_json(s.apsp_hops);
    j["apsp_delay"] = moments_json(s.apsp_delay);
    j["betweenness"] = moments_json(s.betweenness);
    j["betweenness_max"] = moments_json(s.betweenness_max);
    j["betweenness_mean"] = moments_json(s.betweenness_mean);
    j["hop_cdf"] = s.hop_cdf;
    return j.dump(2);
}

std::string graph_to_json(const Graph& g) {
    nlohmann::json j;
    j["node_count"] = g.node_count;
    j["degree"] = g.degree;
    auto pos = nlohmann::json::array();
    for (const auto& p : g.positions) pos.push_back({p[0], p[1]});
    j["positions"] = std::move(pos);
    auto edges = nlohmann::json::array();
    for (const Edge& e : g.edges) edges.push_back({{"u", e.u}, {"v", e.v}, {"delay", e.delay}});
    j["edges"] = std::move(edges);
    return j.dump(2);
}

Graph graph_from_json(const std::string& text) {
    Graph g;
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        g.node_count = j.at("node_count").get<int>();
        g.degree = j.at("degree").get<int>();
        for (const auto& p : j.at("positions"))
            g.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        for (const auto& e : j.at("edges"))
            g.edges.push_back({e.at("u").get<int>(), e.at("v").get<int>(), e.at("delay").get<int>()});
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error(std::string("graph_from_json: malformed input: ") + ex.what());
    }
    g.rebuild_adjacency();
    g.validate();
    return g;
}

void save_graph(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_graph: cannot open " + path);
    out << graph_to_json(g) << '\n';
}

Graph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_graph: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return graph_from_json(ss.str());
}

}  // namespace routelab
