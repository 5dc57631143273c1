#pragma once

#include <string>
#include <utility>
#include <vector>

#include "asmatch/error.hpp"

namespace asmatch {

/// Undirected simple graph with one categorical label per node.
/// Immutable after construction; safe to share across threads.
class Graph {
public:
    Graph() = default;

    /// Validates and builds. Edges may come in any order and either
    /// orientation; self-loops and duplicates are rejected.
    Graph(int label_alphabet, std::vector<int> labels,
          const std::vector<std::pair<int, int>>& edges);

    int node_count() const { return static_cast<int>(labels_.size()); }
    int edge_count() const { return edge_count_; }
    int label_alphabet() const { return label_alphabet_; }
    int label(int v) const { return labels_[v]; }
    const std::vector<int>& labels() const { return labels_; }

    int degree(int v) const { return static_cast<int>(adj_[v].size()); }
    const std::vector<int>& neighbors(int v) const { return adj_[v]; }
    bool has_edge(int u, int v) const;

    /// Edges as (u, v) with u < v, sorted; the canonical edge list.
    std::vector<std::pair<int, int>> edges() const;

    bool operator==(const Graph& other) const = default;

private:
    int label_alphabet_ = 0;
    int edge_count_ = 0;
    std::vector<int> labels_;
    std::vector<std::vector<int>> adj_;  // sorted neighbor lists
};

/// Ordered injective partial map from query nodes to target nodes.
/// Value type: extension copies, never mutates.
class NodeMapping {
public:
    NodeMapping() = default;
    NodeMapping(int query_nodes, int target_nodes);

    int size() const { return static_cast<int>(pairs_.size()); }
    bool empty() const { return pairs_.empty(); }
    const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

    bool query_mapped(int u) const { return q2t_[u] >= 0; }
    bool target_mapped(int v) const { return t2q_[v] >= 0; }
    /// -1 when unmapped.
    int target_of(int u) const { return q2t_[u]; }
    int query_of(int v) const { return t2q_[v]; }

    /// Returns a new mapping extended by (u, v). Throws InvalidMapping on
    /// reuse or out-of-range indices.
    NodeMapping extended(int u, int v) const;

    int query_capacity() const { return static_cast<int>(q2t_.size()); }
    int target_capacity() const { return static_cast<int>(t2q_.size()); }

    bool operator==(const NodeMapping& other) const { return pairs_ == other.pairs_; }

private:
    std::vector<std::pair<int, int>> pairs_;  // insertion order
    std::vector<int> q2t_;
    std::vector<int> t2q_;
};

/// Node and edge components of the edit cost.
struct EditCost {
    int node_cost = 0;
    int edge_cost = 0;
    int total() const { return node_cost + edge_cost; }
    bool operator==(const EditCost&) const = default;
};

/// Edit distance of a complete mapping: label mismatches plus query edges
/// whose image is absent in the target.
EditCost ged(const NodeMapping& mapping, const Graph& gq, const Graph& gt);

/// Same cost restricted to the determined part of a partial mapping:
/// label terms for mapped nodes, edge terms where both endpoints are mapped.
EditCost partial_cost(const NodeMapping& mapping, const Graph& gq, const Graph& gt);

/// Cost delta of extending `mapping` by (u, v): the label term for u plus
/// newly determined violated edges. partial_cost(M + uv) = partial_cost(M) + delta.
EditCost extension_cost(const NodeMapping& mapping, const Graph& gq, const Graph& gt,
                        int u, int v);

struct InducedSubgraph {
    Graph graph;
    std::vector<int> original_nodes;  // new index -> node in the source graph
};

/// Subgraph on `nodes` with dense order-preserving re-indexing.
InducedSubgraph induced_subgraph(const Graph& g, const std::vector<int>& nodes);

/// Canonical text form; identical strings iff identical graphs.
std::string serialize_graph(const Graph& g);
Graph parse_graph(const std::string& text);

Graph load_graph(const std::string& path);
void save_graph(const Graph& g, const std::string& path);

}  // namespace asmatch
