#include <queue>

#include "asmatch/ordering.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace asmatch;
using namespace asmatch::testing;

TEST_SUITE_BEGIN("ordering");

TEST_CASE("hand-checked orders") {
    CHECK(compute_order(q3()).sequence == std::vector<int>{0, 1, 2});

    Graph star(1, {0, 0, 0, 0}, {{0, 1}, {0, 2}, {0, 3}});
    CHECK(compute_order(star).sequence == std::vector<int>{0, 1, 2, 3});

    Graph path(1, {0, 0, 0}, {{0, 1}, {1, 2}});
    CHECK(compute_order(path).sequence == std::vector<int>{1, 0, 2});
}

TEST_CASE("empty graph rejected") {
    CHECK_THROWS_AS(compute_order(Graph(1, {}, {})), EmptyGraph);
}

TEST_CASE("disconnected graphs restart with the degree rule") {
    // two components: a triangle on {3,4,5} and an edge {0,1}, isolated 2
    Graph g(1, {0, 0, 0, 0, 0, 0}, {{3, 4}, {4, 5}, {3, 5}, {0, 1}});
    auto seq = compute_order(g).sequence;
    CHECK(seq.size() == 6);
    CHECK(seq[0] == 3);              // max degree, lowest index
    CHECK(seq[3] == 0);              // restart: next highest degree
    CHECK(seq[5] == 2);              // isolated node last
}

TEST_CASE("order is a permutation and prefixes stay connected") {
    Rng rng = make_rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        Graph g = random_connected_graph(4 + uniform_index(rng, 10), uniform_index(rng, 8), 3, rng);
        auto seq = compute_order(g).sequence;

        std::vector<char> seen(g.node_count(), 0);
        for (int v : seq) {
            CHECK(!seen[v]);
            seen[v] = 1;
        }

        // every prefix induces a connected subgraph
        for (size_t len = 1; len <= seq.size(); ++len) {
            std::vector<char> inside(g.node_count(), 0);
            for (size_t i = 0; i < len; ++i) inside[seq[i]] = 1;
            std::vector<char> reached(g.node_count(), 0);
            std::queue<int> frontier;
            frontier.push(seq[0]);
            reached[seq[0]] = 1;
            int count = 1;
            while (!frontier.empty()) {
                int u = frontier.front();
                frontier.pop();
                for (int w : g.neighbors(u))
                    if (inside[w] && !reached[w]) {
                        reached[w] = 1;
                        ++count;
                        frontier.push(w);
                    }
            }
            CHECK(count == static_cast<int>(len));
        }
    }
}

TEST_SUITE_END();
