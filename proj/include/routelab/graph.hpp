#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace routelab {

// Undirected edge, canonical u < v. Delay is in whole steps, >= 1.
struct Edge {
    int u = 0;
    int v = 0;
    int delay = 1;
};

struct Graph {
    int node_count = 0;
    int degree = 0;  // every node has exactly this many neighbors
    std::vector<std::array<double, 2>> positions;
    std::vector<Edge> edges;  // sorted by (u, v)
    // adjacency[v] = (neighbor, edge index) pairs, ascending neighbor id.
    // Action slot k at node v maps to adjacency[v][k].
    std::vector<std::vector<std::pair<int, int>>> adjacency;

    void rebuild_adjacency();
    // Throws std::runtime_error if regularity, canonical edge order,
    // connectivity or delay positivity is violated.
    void validate() const;
    // Edge index joining u and v, or -1.
    int edge_between(int u, int v) const;
};

struct GenParams {
    int node_count = 20;
    int degree = 3;
    double delay_scale = 7.0;  // delay = max(1, round(scale * euclidean distance))
    int max_restarts = 100;
};

// Random geometric-ish regular graph: nodes uniform in the unit square,
// greedy nearest-neighbour wiring, restart on dead ends or disconnection.
// Throws std::runtime_error after max_restarts failures or if
// node_count * degree is odd.
Graph generate_graph(const GenParams& params, std::mt19937_64& rng);

enum class PathWeight { Hops, Delay };

// dist[s][t]; weight Hops counts edges, Delay sums edge delays.
// delay_override, when given, replaces per-edge delays (indexed like edges).
std::vector<std::vector<int>> all_pairs_shortest_paths(
    const Graph& g, PathWeight weight,
    const std::vector<int>* delay_override = nullptr);

// Normalized betweenness centrality (Brandes), shortest paths under the
// given weight. Normalization: 2 / ((L-1)(L-2)) pair weighting.
std::vector<double> betweenness_centrality(const Graph& g,
                                           PathWeight weight = PathWeight::Delay);

struct GraphMetrics {
    std::vector<std::vector<int>> apsp_hops;
    std::vector<std::vector<int>> apsp_delay;
    int diameter_hops = 0;
    int diameter_delay = 0;
    std::vector<double> betweenness;  // delay-weighted
};

GraphMetrics compute_metrics(const Graph& g);

struct Moments {
    double min = 0.0, max = 0.0, mean = 0.0, stddev = 0.0;
    void accumulate(const std::vector<double>& xs);
};

// Aggregate statistics over a suite of graphs. Pair quantities are taken
// over ordered pairs s != t of each graph.
struct SuiteStats {
    int graph_count = 0;
    Moments diameter_hops;     // per graph
    Moments diameter_delay;    // per graph
    Moments apsp_hops;         // per pair
    Moments apsp_delay;        // per pair
    Moments betweenness;       // per node
    Moments betweenness_max;   // per graph
    Moments betweenness_mean;  // per graph
    // hop_cdf[h] = fraction of pairs with shortest hop distance <= h
    std::vector<double> hop_cdf;
};

SuiteStats suite_stats(const std::vector<Graph>& graphs);

std::string suite_stats_to_json(const SuiteStats& s);

// JSON round trip, layout: {"node_count","degree","positions","edges"}.
std::string graph_to_json(const Graph& g);
Graph graph_from_json(const std::string& text);  // throws on malformed input
void save_graph(const Graph& g, const std::string& path);
Graph load_graph(const std::string& path);

}  // namespace routelab
