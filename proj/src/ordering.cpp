#include "asmatch/ordering.hpp"

namespace asmatch {

MappingOrder compute_order(const Graph& gq) {
    const int n = gq.node_count();
    if (n == 0) throw EmptyGraph("cannot order an empty graph");

    std::vector<int> edges_into(n, 0);
    std::vector<char> placed(n, 0);
    MappingOrder order;
    order.sequence.reserve(n);

    for (int step = 0; step < n; ++step) {
        int best = -1;
        for (int v = 0; v < n; ++v) {
            if (placed[v]) continue;
            if (best < 0) {
                best = v;
                continue;
            }
            if (edges_into[v] != edges_into[best]) {
                if (edges_into[v] > edges_into[best]) best = v;
            } else if (gq.degree(v) != gq.degree(best)) {
                if (gq.degree(v) > gq.degree(best)) best = v;
            }
            // equal on both: keep the lower index, i.e. the current best
        }
        placed[best] = 1;
        order.sequence.push_back(best);
        for (int w : gq.neighbors(best))
            if (!placed[w]) ++edges_into[w];
    }
    return order;
}

}  // namespace asmatch
