#include "asmatch/oracle.hpp"

#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace asmatch {

uint64_t injective_mapping_count(int query_nodes, int target_nodes) {
    uint64_t count = 1;
    for (int i = 0; i < query_nodes; ++i) {
        uint64_t factor = static_cast<uint64_t>(target_nodes - i);
        if (factor != 0 && count > std::numeric_limits<uint64_t>::max() / factor)
            return std::numeric_limits<uint64_t>::max();
        count *= factor;
    }
    return count;
}

namespace {

struct Enumerator {
    const Graph& gq;
    const Graph& gt;
    std::vector<std::pair<int, int>> query_edges;
    std::vector<int> assign;   // query node -> target node, -1 if free
    std::vector<char> used;    // target occupancy
    std::vector<int> free_query;

    EditCost best;
    std::vector<int> best_assign;
    bool found = false;
    uint64_t leaves = 0;

    Enumerator(const Graph& q, const Graph& t) : gq(q), gt(t) {
        query_edges = gq.edges();
        assign.assign(gq.node_count(), -1);
        used.assign(gt.node_count(), 0);
        best.node_cost = std::numeric_limits<int>::max() / 2;
    }

    EditCost evaluate() const {
        EditCost cost;
        for (int u = 0; u < gq.node_count(); ++u)
            if (assign[u] >= 0 && gq.label(u) != gt.label(assign[u])) ++cost.node_cost;
        for (auto [a, b] : query_edges)
            if (assign[a] >= 0 && assign[b] >= 0 && !gt.has_edge(assign[a], assign[b]))
                ++cost.edge_cost;
        return cost;
    }

    void run(size_t depth) {
        if (depth == free_query.size()) {
            ++leaves;
            EditCost cost = evaluate();
            if (!found || cost.total() < best.total()) {
                best = cost;
                best_assign = assign;
                found = true;
            }
            return;
        }
        int u = free_query[depth];
        for (int v = 0; v < gt.node_count(); ++v) {
            if (used[v]) continue;
            used[v] = 1;
            assign[u] = v;
            run(depth + 1);
            assign[u] = -1;
            used[v] = 0;
        }
    }
};

NodeMapping mapping_from_assign(const Graph& gq, const Graph& gt,
                                const std::vector<int>& assign) {
    NodeMapping m(gq.node_count(), gt.node_count());
    for (int u = 0; u < gq.node_count(); ++u)
        if (assign[u] >= 0) m = m.extended(u, assign[u]);
    return m;
}

void check_oracle_pre(const Graph& gq, const Graph& gt, int free_q, int free_t,
                      uint64_t limit) {
    if (gq.node_count() > gt.node_count())
        throw QueryLargerThanTarget("query has " + std::to_string(gq.node_count()) +
                                    " nodes, target " + std::to_string(gt.node_count()));
    uint64_t count = injective_mapping_count(free_q, free_t);
    if (count > limit)
        throw TooLarge("enumeration of " + std::to_string(count) +
                       " mappings exceeds budget " + std::to_string(limit));
}

}  // namespace

OracleResult exact_asm(const Graph& gq, const Graph& gt, uint64_t limit) {
    check_oracle_pre(gq, gt, gq.node_count(), gt.node_count(), limit);
    Enumerator en(gq, gt);
    for (int u = 0; u < gq.node_count(); ++u) en.free_query.push_back(u);
    en.run(0);
    return {en.best, mapping_from_assign(gq, gt, en.best_assign), en.leaves};
}

OracleResult exact_asm_parallel(const Graph& gq, const Graph& gt, uint64_t limit) {
    check_oracle_pre(gq, gt, gq.node_count(), gt.node_count(), limit);
    if (gq.node_count() == 0) return exact_asm(gq, gt, limit);

    const int nt = gt.node_count();
    std::vector<OracleResult> per_root(nt);
    std::vector<char> root_found(nt, 0);

#pragma omp parallel for schedule(dynamic)
    for (int v0 = 0; v0 < nt; ++v0) {
        Enumerator en(gq, gt);
        for (int u = 1; u < gq.node_count(); ++u) en.free_query.push_back(u);
        en.assign[0] = v0;
        en.used[v0] = 1;
        en.run(0);
        per_root[v0] = {en.best, mapping_from_assign(gq, gt, en.best_assign), en.leaves};
        root_found[v0] = en.found;
    }

    // reduce in ascending v0 order so ties resolve lexicographically
    OracleResult out;
    bool found = false;
    for (int v0 = 0; v0 < nt; ++v0) {
        out.mappings_enumerated += per_root[v0].mappings_enumerated;
        if (root_found[v0] &&
            (!found || per_root[v0].best_cost.total() < out.best_cost.total())) {
            out.best_cost = per_root[v0].best_cost;
            out.best_mapping = per_root[v0].best_mapping;
            found = true;
        }
    }
    return out;
}

EditCost min_completion_cost(const Graph& gq, const Graph& gt, const NodeMapping& partial,
                             uint64_t limit) {
    const int free_q = gq.node_count() - partial.size();
    const int free_t = gt.node_count() - partial.size();
    check_oracle_pre(gq, gt, free_q, free_t, limit);

    Enumerator en(gq, gt);
    for (auto [u, v] : partial.pairs()) {
        en.assign[u] = v;
        en.used[v] = 1;
    }
    for (int u = 0; u < gq.node_count(); ++u)
        if (en.assign[u] < 0) en.free_query.push_back(u);
    en.run(0);
    return en.best;
}

}  // namespace asmatch
