#include "asmatch/search.hpp"

#include <chrono>
#include <unordered_map>

namespace asmatch {

namespace {

struct BoundWorkspace {
    std::vector<int> remaining_query_hist;  // labels of order[depth+1:]
    std::vector<int> unmapped_target_count; // labels of unmapped targets
    int base_lookahead = 0;

    void prepare(const SearchState& state) {
        const Graph& gq = state.pair().query;
        const Graph& gt = state.pair().target;
        remaining_query_hist.assign(gq.label_alphabet(), 0);
        unmapped_target_count.assign(gt.label_alphabet(), 0);
        const auto& order = state.pair().order.sequence;
        for (int d = state.depth() + 1; d < static_cast<int>(order.size()); ++d)
            ++remaining_query_hist[gq.label(order[d])];
        for (int v = 0; v < gt.node_count(); ++v)
            if (!state.mapping().target_mapped(v)) ++unmapped_target_count[gt.label(v)];
        base_lookahead = 0;
        for (size_t l = 0; l < remaining_query_hist.size(); ++l)
            if (unmapped_target_count[l] == 0) base_lookahead += remaining_query_hist[l];
    }

    int bound(const SearchState& state, const Action& a) const {
        const Graph& gq = state.pair().query;
        const Graph& gt = state.pair().target;
        EditCost delta = extension_cost(state.mapping(), gq, gt, a.query_node, a.target_node);
        int lookahead = base_lookahead;
        int lam = gt.label(a.target_node);
        if (unmapped_target_count[lam] == 1) lookahead += remaining_query_hist[lam];
        return state.partial().total() + delta.total() + lookahead;
    }
};

struct KeyHash {
    size_t operator()(const std::vector<int>& key) const {
        uint64_t h = 0x51ed270b35ae9ce5ULL;
        for (int v : key) h = splitmix64(h ^ static_cast<uint64_t>(v));
        return static_cast<size_t>(h);
    }
};

// Untried actions plus their bounds/scores for one visited state. Entries
// become stale when the incumbent improves (epoch bump) and are then rebuilt
// from the full action space on the next visit.
struct NodeMemo {
    std::vector<Action> remaining;
    std::vector<int> bounds;
    std::vector<double> scores;
    uint64_t epoch = 0;
};

}  // namespace

std::vector<int> lower_bounds(const SearchState& state, const std::vector<Action>& actions) {
    BoundWorkspace ws;
    ws.prepare(state);
    std::vector<int> out;
    out.reserve(actions.size());
    for (const Action& a : actions) out.push_back(ws.bound(state, a));
    return out;
}

int lower_bound(const SearchState& state, const Action& a) {
    BoundWorkspace ws;
    ws.prepare(state);
    return ws.bound(state, a);
}

std::vector<Action> prune_actions(const std::vector<Action>& actions,
                                  const std::vector<int>& bounds, int curr_best) {
    std::vector<Action> kept;
    kept.reserve(actions.size());
    for (size_t i = 0; i < actions.size(); ++i)
        if (bounds[i] < curr_best) kept.push_back(actions[i]);
    return kept;
}

std::vector<double> GreedyLowerBoundPolicy::scores(const SearchState& state,
                                                   const std::vector<Action>& actions) const {
    std::vector<int> bounds = lower_bounds(state, actions);
    std::vector<double> out(bounds.size());
    for (size_t i = 0; i < bounds.size(); ++i) out[i] = -static_cast<double>(bounds[i]);
    return out;
}

std::vector<double> RandomPolicy::scores(const SearchState& state,
                                         const std::vector<Action>& actions) const {
    uint64_t h = splitmix64(seed_);
    for (int v : state.key()) h = splitmix64(h ^ static_cast<uint64_t>(v));
    std::vector<double> out(actions.size());
    for (size_t i = 0; i < actions.size(); ++i) {
        uint64_t a = splitmix64(h ^ splitmix64(static_cast<uint64_t>(actions[i].target_node) + 0x9e37));
        out[i] = static_cast<double>(a >> 11) * 0x1.0p-53;
    }
    return out;
}

SearchResult branch_and_bound(const PairPtr& pair, const Policy& policy,
                              const SearchOptions& options, const BoundObserver& observer) {
    if (pair->query.node_count() > pair->target.node_count())
        throw QueryLargerThanTarget("query has more nodes than target");
    if (options.budget.wall_clock_seconds <= 0.0 && options.budget.max_expansions == 0)
        throw ConfigError("search budget must allow at least one expansion");

    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

    SearchResult result;
    int curr_best = kInfiniteCost;
    uint64_t epoch = 0;

    std::unordered_map<std::vector<int>, NodeMemo, KeyHash> memo;
    std::vector<SearchState> stack;
    stack.emplace_back(pair);

    auto derive = [&](const SearchState& state, NodeMemo& m) {
        std::vector<Action> actions = action_space(state);
        std::vector<int> bounds = lower_bounds(state, actions);
        if (observer)
            for (size_t i = 0; i < actions.size(); ++i) observer(state, actions[i], bounds[i]);
        m.remaining.clear();
        m.bounds.clear();
        for (size_t i = 0; i < actions.size(); ++i) {
            if (!options.prune || bounds[i] < curr_best) {
                m.remaining.push_back(actions[i]);
                m.bounds.push_back(bounds[i]);
            }
        }
        m.scores = m.remaining.empty() ? std::vector<double>{}
                                       : policy.scores(state, m.remaining);
        m.epoch = epoch;
    };

    while (!stack.empty()) {
        if (options.budget.wall_clock_seconds > 0.0 &&
            elapsed() >= options.budget.wall_clock_seconds)
            break;
        if (options.budget.max_expansions > 0 &&
            result.expansions >= options.budget.max_expansions)
            break;

        SearchState state = std::move(stack.back());
        stack.pop_back();

        std::vector<int> key = state.key();
        auto it = memo.find(key);
        if (it == memo.end() || it->second.epoch != epoch) {
            derive(state, memo[key]);
            it = memo.find(key);
        } else if (!options.cache_enabled) {
            // recompute instead of reusing; values are identical by
            // determinism so the traversal does not change
            NodeMemo& m = it->second;
            m.bounds = lower_bounds(state, m.remaining);
            m.scores = m.remaining.empty() ? std::vector<double>{}
                                           : policy.scores(state, m.remaining);
        }
        NodeMemo& m = it->second;
        if (m.remaining.empty()) {
            memo.erase(it);
            continue;
        }

        int pick = 0;
        for (size_t i = 1; i < m.scores.size(); ++i)
            if (m.scores[i] > m.scores[pick]) pick = static_cast<int>(i);
        Action a = m.remaining[pick];
        m.remaining.erase(m.remaining.begin() + pick);
        m.bounds.erase(m.bounds.begin() + pick);
        m.scores.erase(m.scores.begin() + pick);

        SearchState child = apply_action(state, a);
        ++result.expansions;

        if (child.terminal()) {
            EditCost cost = child.partial();
            if (!result.found) {
                result.first_round_cost = cost;
                result.found = true;
            }
            if (cost.total() < curr_best) {
                curr_best = cost.total();
                result.best_mapping = child.mapping();
                result.best_cost = cost;
                result.time_to_best_seconds = elapsed();
                result.expansions_to_best = result.expansions;
                memo.clear();  // cached bounds correlate with the incumbent
                ++epoch;
            }
            stack.push_back(std::move(state));
            continue;
        }

        stack.push_back(std::move(state));
        stack.push_back(std::move(child));
    }

    result.exhausted = stack.empty();
    result.elapsed_seconds = elapsed();
    return result;
}

}  // namespace asmatch
