#include "routelab/graph_obs.hpp"

#include <stdexcept>

namespace routelab::gobs {

Topology Topology::from_graph(const Graph& g) {
    Topology t;
    t.node_count = g.node_count;
    t.degree = g.degree;
    t.neighbors.resize(g.node_count);
    for (int v = 0; v < g.node_count; ++v)
        for (const auto& [w, e] : g.adjacency[v]) t.neighbors[v].push_back(w);
    return t;
}

Topology Topology::disjoint_union(const std::vector<const Graph*>& graphs) {
    if (graphs.empty()) throw std::invalid_argument("disjoint_union: empty batch");
    Topology t;
    t.degree = graphs.front()->degree;
    int offset = 0;
    for (const Graph* g : graphs) {
        if (g->degree != t.degree)
            throw std::invalid_argument("disjoint_union: mixed degrees");
        for (int v = 0; v < g->node_count; ++v) {
            auto& row = t.neighbors.emplace_back();
            for (const auto& [w, e] : g->adjacency[v]) row.push_back(w + offset);
        }
        offset += g->node_count;
    }
    t.node_count = offset;
    return t;
}

}  // namespace routelab::gobs
