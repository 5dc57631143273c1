#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "asmatch/graph.hpp"
#include "asmatch/ordering.hpp"
#include "asmatch/rng.hpp"

namespace asmatch {

/// Immutable search context shared by every state of one (query, target) run.
struct SearchPair {
    Graph query;
    Graph target;
    MappingOrder order;
};

using PairPtr = std::shared_ptr<const SearchPair>;

PairPtr make_search_pair(Graph query, Graph target);

struct Action {
    int query_node = -1;
    int target_node = -1;
    bool operator==(const Action&) const = default;
};

struct Reward {
    int node_part = 0;  // +1 on label match, -1 otherwise
    int edge_part = 0;  // matched minus violated edges into the mapped prefix
    int total() const { return node_part + edge_part; }
};

/// One node of the search tree: the pair plus a partial mapping along the
/// mapping order. Extension copies; ancestors are never mutated.
class SearchState {
public:
    explicit SearchState(PairPtr pair);

    const SearchPair& pair() const { return *pair_; }
    PairPtr pair_ptr() const { return pair_; }
    const NodeMapping& mapping() const { return mapping_; }
    int depth() const { return mapping_.size(); }
    bool terminal() const { return depth() == pair_->query.node_count(); }
    /// Cost of the determined part, maintained incrementally.
    const EditCost& partial() const { return partial_; }
    /// Query node matched at this depth, i.e. order[depth].
    int next_query_node() const;
    /// Targets of the mapping in insertion order; identifies the state.
    std::vector<int> key() const;

    friend SearchState apply_action(const SearchState& state, const Action& a);

private:
    PairPtr pair_;
    NodeMapping mapping_;
    EditCost partial_;
};

/// All legal actions: (order[depth], v) for every unmapped v, ascending.
std::vector<Action> action_space(const SearchState& state);

SearchState apply_action(const SearchState& state, const Action& a);

Reward reward(const SearchState& state, const Action& a);

struct Policy;

struct TrajectoryStep {
    Action action;
    Reward reward;
    int action_space_size = 0;
    int action_index = 0;     // position within the presented action list
    double probability = 1.0; // behaviour probability when sampled
};

struct Trajectory {
    PairPtr pair;
    std::vector<TrajectoryStep> steps;
    NodeMapping final_mapping;
};

enum class RolloutMode { Sample, Greedy };

/// One backtracking-free descent of |V^q| steps. Sample mode draws from the
/// policy's distribution; greedy takes the argmax with ties to the lowest
/// target index.
Trajectory rollout_episode(const PairPtr& pair, const Policy& policy, Rng& rng,
                           RolloutMode mode = RolloutMode::Sample);

/// R_t = sum_i gamma^(i-t) r_i over the recorded raw rewards.
std::vector<double> discounted_returns(const Trajectory& traj, double gamma);

/// Debug dump: one "(depth, action, reward, action-space size)" record per line.
void dump_trajectory(const Trajectory& traj, std::ostream& out);

}  // namespace asmatch
