#pragma once

#include <cstdint>
#include <functional>
#include <limits>

#include "asmatch/mdp.hpp"

namespace asmatch {

constexpr int kInfiniteCost = std::numeric_limits<int>::max() / 2;

/// Node-pair selection strategy. Implementations must be deterministic and
/// usable read-only from concurrent searches; higher score wins, ties go to
/// the earlier action (= lower target index).
struct Policy {
    virtual ~Policy() = default;
    virtual std::vector<double> scores(const SearchState& state,
                                       const std::vector<Action>& actions) const = 0;
};

/// Admissible bound on the best completion after taking `a`: cost already
/// determined plus, for every still-unmapped query node, the minimum label
/// mismatch over remaining targets.
int lower_bound(const SearchState& state, const Action& a);
std::vector<int> lower_bounds(const SearchState& state, const std::vector<Action>& actions);

/// Keeps actions whose bound can still strictly improve on the incumbent.
std::vector<Action> prune_actions(const std::vector<Action>& actions,
                                  const std::vector<int>& bounds, int curr_best);

struct SearchBudget {
    double wall_clock_seconds = 600.0;
    uint64_t max_expansions = 0;  // 0 = no expansion cap
};

struct SearchOptions {
    SearchBudget budget;
    bool cache_enabled = true;
    bool prune = true;  // lower-bound pruning; off only for measurements
};

struct SearchResult {
    bool found = false;  // at least one complete mapping reached
    NodeMapping best_mapping;
    EditCost best_cost;
    bool exhausted = false;  // tree fully traversed: best_cost is optimal
    uint64_t expansions = 0;
    uint64_t expansions_to_best = 0;
    double time_to_best_seconds = 0.0;
    double elapsed_seconds = 0.0;
    EditCost first_round_cost;  // first complete mapping, before any backtracking
};

/// Called for every (state, action) whose lower bound gets evaluated.
using BoundObserver =
    std::function<void(const SearchState& state, const Action& a, int bound)>;

/// Depth-first branch-and-bound over the mapping order. Maintains the best
/// mapping found, prunes by lower bound against it, caches bounds and policy
/// scores per visited state, and drops the whole cache whenever the
/// incumbent improves (stale states recompute when backtracked into).
SearchResult branch_and_bound(const PairPtr& pair, const Policy& policy,
                              const SearchOptions& options,
                              const BoundObserver& observer = {});

/// Scores = -lower_bound: descends the branch with the smallest bound.
struct GreedyLowerBoundPolicy final : Policy {
    std::vector<double> scores(const SearchState& state,
                               const std::vector<Action>& actions) const override;
};

/// I.i.d. scores keyed on (seed, state, action); hashing instead of a shared
/// stream keeps replays and cache-on/off runs identical.
struct RandomPolicy final : Policy {
    explicit RandomPolicy(uint64_t seed) : seed_(seed) {}
    std::vector<double> scores(const SearchState& state,
                               const std::vector<Action>& actions) const override;

private:
    uint64_t seed_;
};

}  // namespace asmatch
