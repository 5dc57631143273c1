#include "asmatch/mdp.hpp"

#include <ostream>

#include "asmatch/search.hpp"

namespace asmatch {

PairPtr make_search_pair(Graph query, Graph target) {
    MappingOrder order = compute_order(query);
    return std::make_shared<const SearchPair>(
        SearchPair{std::move(query), std::move(target), std::move(order)});
}

SearchState::SearchState(PairPtr pair)
    : pair_(std::move(pair)),
      mapping_(pair_->query.node_count(), pair_->target.node_count()) {}

int SearchState::next_query_node() const {
    if (terminal()) throw TerminalState("all query nodes are mapped");
    return pair_->order.at(depth());
}

std::vector<int> SearchState::key() const {
    std::vector<int> k;
    k.reserve(mapping_.size());
    for (auto [u, v] : mapping_.pairs()) k.push_back(v);
    return k;
}

std::vector<Action> action_space(const SearchState& state) {
    const int u = state.next_query_node();
    std::vector<Action> actions;
    actions.reserve(state.pair().target.node_count() - state.depth());
    for (int v = 0; v < state.pair().target.node_count(); ++v)
        if (!state.mapping().target_mapped(v)) actions.push_back({u, v});
    return actions;
}

namespace {

void check_legal(const SearchState& state, const Action& a) {
    if (state.terminal()) throw TerminalState("no actions at a complete mapping");
    if (a.query_node != state.next_query_node())
        throw IllegalAction("action maps query node " + std::to_string(a.query_node) +
                            " but the order requires " +
                            std::to_string(state.next_query_node()));
    if (a.target_node < 0 || a.target_node >= state.pair().target.node_count())
        throw IllegalAction("target node " + std::to_string(a.target_node) + " out of range");
    if (state.mapping().target_mapped(a.target_node))
        throw IllegalAction("target node " + std::to_string(a.target_node) + " already used");
}

}  // namespace

SearchState apply_action(const SearchState& state, const Action& a) {
    check_legal(state, a);
    SearchState next = state;
    EditCost delta = extension_cost(state.mapping(), state.pair().query,
                                    state.pair().target, a.query_node, a.target_node);
    next.mapping_ = state.mapping().extended(a.query_node, a.target_node);
    next.partial_.node_cost += delta.node_cost;
    next.partial_.edge_cost += delta.edge_cost;
    return next;
}

Reward reward(const SearchState& state, const Action& a) {
    check_legal(state, a);
    const Graph& gq = state.pair().query;
    const Graph& gt = state.pair().target;
    Reward r;
    r.node_part = gq.label(a.query_node) == gt.label(a.target_node) ? 1 : -1;
    for (int w : gq.neighbors(a.query_node)) {
        if (!state.mapping().query_mapped(w)) continue;
        r.edge_part += gt.has_edge(a.target_node, state.mapping().target_of(w)) ? 1 : -1;
    }
    return r;
}

Trajectory rollout_episode(const PairPtr& pair, const Policy& policy, Rng& rng,
                           RolloutMode mode) {
    if (pair->query.node_count() > pair->target.node_count())
        throw QueryLargerThanTarget("query larger than target");
    Trajectory traj;
    traj.pair = pair;
    SearchState state(pair);
    while (!state.terminal()) {
        std::vector<Action> actions = action_space(state);
        std::vector<double> scores = policy.scores(state, actions);
        int pick = 0;
        if (mode == RolloutMode::Greedy) {
            for (size_t i = 1; i < scores.size(); ++i)
                if (scores[i] > scores[pick]) pick = static_cast<int>(i);
        } else {
            double total = 0.0;
            for (double s : scores) total += s > 0.0 ? s : 0.0;
            if (total <= 0.0) {
                pick = uniform_index(rng, static_cast<int>(actions.size()));
            } else {
                double draw = std::uniform_real_distribution<double>(0.0, total)(rng);
                double acc = 0.0;
                for (size_t i = 0; i < scores.size(); ++i) {
                    acc += scores[i] > 0.0 ? scores[i] : 0.0;
                    if (draw < acc || i + 1 == scores.size()) {
                        pick = static_cast<int>(i);
                        break;
                    }
                }
            }
        }
        TrajectoryStep step;
        step.action = actions[pick];
        step.reward = reward(state, actions[pick]);
        step.action_space_size = static_cast<int>(actions.size());
        step.action_index = pick;
        step.probability = scores[pick];
        traj.steps.push_back(step);
        state = apply_action(state, actions[pick]);
    }
    traj.final_mapping = state.mapping();
    return traj;
}

std::vector<double> discounted_returns(const Trajectory& traj, double gamma) {
    std::vector<double> returns(traj.steps.size(), 0.0);
    double acc = 0.0;
    for (int t = static_cast<int>(traj.steps.size()) - 1; t >= 0; --t) {
        acc = traj.steps[t].reward.total() + gamma * acc;
        returns[t] = acc;
    }
    return returns;
}

void dump_trajectory(const Trajectory& traj, std::ostream& out) {
    for (size_t t = 0; t < traj.steps.size(); ++t) {
        const TrajectoryStep& s = traj.steps[t];
        out << t << " " << s.action.query_node << "->" << s.action.target_node << " "
            << s.reward.total() << " " << s.action_space_size << "\n";
    }
}

}  // namespace asmatch
