#pragma once

#include <cstdint>

#include "asmatch/graph.hpp"

namespace asmatch {

struct OracleResult {
    EditCost best_cost;
    NodeMapping best_mapping;
    uint64_t mappings_enumerated = 0;
};

/// Number of injective mappings P(|V^t|, |V^q|); saturates at UINT64_MAX.
uint64_t injective_mapping_count(int query_nodes, int target_nodes);

/// Exhaustive minimum-cost search over every injective mapping, visited in
/// lexicographic order of (M(0), M(1), ...). No pruning by design; the
/// first minimum encountered wins ties, which makes golden values stable.
OracleResult exact_asm(const Graph& gq, const Graph& gt, uint64_t limit = 10'000'000);

/// Same enumeration split across first-node assignments with an OpenMP
/// loop; tie reduction by lexicographic order keeps results identical to
/// exact_asm.
OracleResult exact_asm_parallel(const Graph& gq, const Graph& gt,
                                uint64_t limit = 10'000'000);

/// Minimum ged over all complete extensions of a partial mapping.
EditCost min_completion_cost(const Graph& gq, const Graph& gt, const NodeMapping& partial,
                             uint64_t limit = 10'000'000);

}  // namespace asmatch
