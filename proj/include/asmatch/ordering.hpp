#pragma once

#include <vector>

#include "asmatch/graph.hpp"

namespace asmatch {

/// Permutation of the query nodes fixing which node is matched at each depth.
struct MappingOrder {
    std::vector<int> sequence;
    int at(int depth) const { return sequence[depth]; }
    int size() const { return static_cast<int>(sequence.size()); }
};

/// Degree-then-connectivity order: start at a maximum-degree node, then
/// repeatedly take the node with the most edges into the prefix. Ties break
/// by higher total degree, then lower index; components with no edge into
/// the prefix restart with the degree rule.
MappingOrder compute_order(const Graph& gq);

}  // namespace asmatch
