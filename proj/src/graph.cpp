#include "asmatch/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace asmatch {

using nlohmann::json;

Graph::Graph(int label_alphabet, std::vector<int> labels,
             const std::vector<std::pair<int, int>>& edges)
    : label_alphabet_(label_alphabet), labels_(std::move(labels)) {
    const int n = node_count();
    if (label_alphabet_ <= 0)
        throw SchemaViolation("label alphabet must be positive");
    for (int v = 0; v < n; ++v) {
        if (labels_[v] < 0 || labels_[v] >= label_alphabet_)
            throw SchemaViolation("label id " + std::to_string(labels_[v]) +
                                  " outside alphabet of size " + std::to_string(label_alphabet_));
    }
    adj_.assign(n, {});
    for (auto [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw SchemaViolation("edge endpoint out of range: [" + std::to_string(u) + "," +
                                  std::to_string(v) + "]");
        if (u == v)
            throw SchemaViolation("self-loop at node " + std::to_string(u));
        adj_[u].push_back(v);
        adj_[v].push_back(u);
    }
    for (int v = 0; v < n; ++v) {
        auto& nb = adj_[v];
        std::sort(nb.begin(), nb.end());
        if (std::adjacent_find(nb.begin(), nb.end()) != nb.end())
            throw SchemaViolation("duplicate edge at node " + std::to_string(v));
    }
    edge_count_ = static_cast<int>(edges.size());
}

bool Graph::has_edge(int u, int v) const {
    const auto& nb = adj_[u];
    return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<int, int>> Graph::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(edge_count_);
    for (int u = 0; u < node_count(); ++u)
        for (int v : adj_[u])
            if (u < v) out.emplace_back(u, v);
    return out;
}

NodeMapping::NodeMapping(int query_nodes, int target_nodes)
    : q2t_(query_nodes, -1), t2q_(target_nodes, -1) {}

NodeMapping NodeMapping::extended(int u, int v) const {
    if (u < 0 || u >= query_capacity() || v < 0 || v >= target_capacity())
        throw InvalidMapping("pair (" + std::to_string(u) + "," + std::to_string(v) +
                             ") out of range");
    if (q2t_[u] >= 0)
        throw InvalidMapping("query node " + std::to_string(u) + " already mapped");
    if (t2q_[v] >= 0)
        throw InvalidMapping("target node " + std::to_string(v) + " already mapped");
    NodeMapping out = *this;
    out.pairs_.emplace_back(u, v);
    out.q2t_[u] = v;
    out.t2q_[v] = u;
    return out;
}

EditCost partial_cost(const NodeMapping& mapping, const Graph& gq, const Graph& gt) {
    if (mapping.query_capacity() != gq.node_count() ||
        mapping.target_capacity() != gt.node_count())
        throw InvalidMapping("mapping sized for different graphs");
    EditCost cost;
    for (auto [u, v] : mapping.pairs()) {
        if (gq.label(u) != gt.label(v)) ++cost.node_cost;
        for (int w : gq.neighbors(u)) {
            if (w > u || !mapping.query_mapped(w)) continue;  // count each edge once
            if (!gt.has_edge(v, mapping.target_of(w))) ++cost.edge_cost;
        }
    }
    return cost;
}

EditCost ged(const NodeMapping& mapping, const Graph& gq, const Graph& gt) {
    if (mapping.query_capacity() != gq.node_count() ||
        mapping.target_capacity() != gt.node_count())
        throw InvalidMapping("mapping sized for different graphs");
    if (mapping.size() != gq.node_count())
        throw IncompleteMapping("mapping covers " + std::to_string(mapping.size()) + " of " +
                                std::to_string(gq.node_count()) + " query nodes");
    return partial_cost(mapping, gq, gt);
}

EditCost extension_cost(const NodeMapping& mapping, const Graph& gq, const Graph& gt,
                        int u, int v) {
    EditCost delta;
    if (gq.label(u) != gt.label(v)) ++delta.node_cost;
    for (int w : gq.neighbors(u)) {
        if (!mapping.query_mapped(w)) continue;
        if (!gt.has_edge(v, mapping.target_of(w))) ++delta.edge_cost;
    }
    return delta;
}

InducedSubgraph induced_subgraph(const Graph& g, const std::vector<int>& nodes) {
    if (nodes.empty()) throw EmptySelection("empty node selection");
    std::vector<int> sel = nodes;
    std::sort(sel.begin(), sel.end());
    sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
    for (int v : sel)
        if (v < 0 || v >= g.node_count())
            throw IndexOutOfRange("node " + std::to_string(v) + " not in graph");

    std::vector<int> to_new(g.node_count(), -1);
    for (size_t i = 0; i < sel.size(); ++i) to_new[sel[i]] = static_cast<int>(i);

    std::vector<int> labels(sel.size());
    std::vector<std::pair<int, int>> edges;
    for (size_t i = 0; i < sel.size(); ++i) {
        labels[i] = g.label(sel[i]);
        for (int w : g.neighbors(sel[i]))
            if (to_new[w] > static_cast<int>(i)) edges.emplace_back(static_cast<int>(i), to_new[w]);
    }
    return {Graph(g.label_alphabet(), std::move(labels), edges), std::move(sel)};
}

std::string serialize_graph(const Graph& g) {
    json j;
    j["label_alphabet"] = g.label_alphabet();
    j["nodes"] = g.labels();
    json edges = json::array();
    for (auto [u, v] : g.edges()) edges.push_back({u, v});
    j["edges"] = std::move(edges);
    return j.dump();
}

Graph parse_graph(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed graph document: ") + e.what());
    }
    if (!j.is_object() || !j.contains("label_alphabet") || !j.contains("nodes") ||
        !j.contains("edges"))
        throw ParseError("graph document needs label_alphabet, nodes, edges");
    int alphabet;
    std::vector<int> labels;
    std::vector<std::pair<int, int>> edges;
    try {
        alphabet = j["label_alphabet"].get<int>();
        labels = j["nodes"].get<std::vector<int>>();
        for (const auto& e : j["edges"]) {
            if (!e.is_array() || e.size() != 2)
                throw ParseError("edge entries must be [u,v]");
            int u = e[0].get<int>();
            int v = e[1].get<int>();
            if (u >= v)
                throw SchemaViolation("edge [" + std::to_string(u) + "," + std::to_string(v) +
                                      "] must satisfy u<v");
            edges.emplace_back(u, v);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad field type: ") + e.what());
    }
    return Graph(alphabet, std::move(labels), edges);
}

Graph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_graph(buf.str());
    } catch (const SchemaViolation& e) {
        throw SchemaViolation(path + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_graph(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << serialize_graph(g) << "\n";
}

}  // namespace asmatch
