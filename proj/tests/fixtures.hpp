#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "asmatch/datagen.hpp"
#include "asmatch/graph.hpp"
#include "asmatch/rng.hpp"

namespace asmatch::testing {

// Labels: A=0, B=1, C=2.

/// Triangle A-B-A.
inline Graph q3() {
    return Graph(3, {0, 1, 0}, {{0, 1}, {1, 2}, {0, 2}});
}

/// Triangle A-B-A plus a pendant C on node 2.
inline Graph t4() {
    return Graph(3, {0, 1, 0, 2}, {{0, 1}, {1, 2}, {0, 2}, {2, 3}});
}

inline NodeMapping mapping_of(const Graph& gq, const Graph& gt,
                              const std::vector<std::pair<int, int>>& pairs) {
    NodeMapping m(gq.node_count(), gt.node_count());
    for (auto [u, v] : pairs) m = m.extended(u, v);
    return m;
}

/// Connected random graph: a random spanning tree plus extra edges.
inline Graph random_connected_graph(int nodes, int extra_edges, int alphabet, Rng& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < nodes; ++v) edges.emplace_back(uniform_index(rng, v), v);
    std::set<std::pair<int, int>> have(edges.begin(), edges.end());
    int attempts = 0;
    while (extra_edges > 0 && attempts++ < 1000) {
        int u = uniform_index(rng, nodes);
        int v = uniform_index(rng, nodes);
        if (u == v) continue;
        auto e = std::minmax(u, v);
        if (have.insert({e.first, e.second}).second) {
            edges.push_back({e.first, e.second});
            --extra_edges;
        }
    }
    std::vector<int> labels(nodes);
    for (int& l : labels) l = uniform_index(rng, alphabet);
    return Graph(alphabet, std::move(labels), edges);
}

}  // namespace asmatch::testing
