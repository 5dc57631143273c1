#include "asmatch/oracle.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace asmatch;
using namespace asmatch::testing;

TEST_SUITE_BEGIN("oracle");

TEST_CASE("canonical pair") {
    OracleResult r = exact_asm(q3(), t4());
    CHECK(r.best_cost.total() == 0);
    CHECK(r.best_mapping == mapping_of(q3(), t4(), {{0, 0}, {1, 1}, {2, 2}}));
    CHECK(r.mappings_enumerated == 24);
}

TEST_CASE("single-node mismatch") {
    Graph a(2, {0}, {});
    Graph b(2, {1}, {});
    OracleResult r = exact_asm(a, b);
    CHECK(r.best_cost.total() == 1);
    CHECK(r.mappings_enumerated == 1);
}

TEST_CASE("relabeled copy costs one") {
    Graph gt(3, {0, 1, 2}, {{0, 1}, {1, 2}, {0, 2}});
    CHECK(exact_asm(q3(), gt).best_cost.total() == 1);
}

TEST_CASE("preconditions") {
    CHECK_THROWS_AS(exact_asm(t4(), q3()), QueryLargerThanTarget);
    Rng rng = make_rng(1);
    Graph gq = random_connected_graph(8, 4, 3, rng);
    Graph gt = random_connected_graph(16, 10, 3, rng);
    CHECK_THROWS_AS(exact_asm(gq, gt, 1000), TooLarge);
}

TEST_CASE("min_completion_cost") {
    Graph gq = q3(), gt = t4();
    SUBCASE("complete mapping reduces to ged") {
        auto m = mapping_of(gq, gt, {{0, 0}, {1, 1}, {2, 3}});
        CHECK(min_completion_cost(gq, gt, m).total() == ged(m, gq, gt).total());
    }
    SUBCASE("empty mapping reduces to exact_asm") {
        CHECK(min_completion_cost(gq, gt, NodeMapping(3, 4)).total() ==
              exact_asm(gq, gt).best_cost.total());
    }
    SUBCASE("frozen bad first pair") {
        auto m = mapping_of(gq, gt, {{0, 3}});
        CHECK(min_completion_cost(gq, gt, m).total() == 2);
    }
}

TEST_CASE("parallel enumeration matches the serial reference") {
    Rng rng = make_rng(33);
    for (int trial = 0; trial < 25; ++trial) {
        Graph gq = random_connected_graph(3 + uniform_index(rng, 3), 2, 3, rng);
        Graph gt = random_connected_graph(6 + uniform_index(rng, 3), 5, 3, rng);
        OracleResult serial = exact_asm(gq, gt);
        OracleResult parallel = exact_asm_parallel(gq, gt);
        CHECK(serial.best_cost == parallel.best_cost);
        CHECK(serial.best_mapping == parallel.best_mapping);
        CHECK(serial.mappings_enumerated == parallel.mappings_enumerated);
    }
}

TEST_CASE("zero cost iff a label-preserved induced occurrence exists") {
    Rng rng = make_rng(5);
    Graph gt = random_connected_graph(8, 6, 3, rng);
    InducedSubgraph sub = induced_subgraph(gt, {0, 2, 4, 6});
    CHECK(exact_asm(sub.graph, gt).best_cost.total() == 0);

    // a triangle cannot occur in a tree
    Graph tree(1, {0, 0, 0, 0, 0}, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    Graph triangle(1, {0, 0, 0}, {{0, 1}, {1, 2}, {0, 2}});
    CHECK(exact_asm(triangle, tree).best_cost.total() > 0);
}

TEST_CASE("adding a query edge never lowers the optimum") {
    Rng rng = make_rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Graph gq = random_connected_graph(4, 1, 3, rng);
        Graph gt = random_connected_graph(7, 5, 3, rng);
        int base = exact_asm(gq, gt).best_cost.total();
        for (int u = 0; u < gq.node_count() && trial >= 0; ++u) {
            for (int v = u + 1; v < gq.node_count(); ++v) {
                if (gq.has_edge(u, v)) continue;
                auto edges = gq.edges();
                edges.emplace_back(u, v);
                Graph denser(gq.label_alphabet(), gq.labels(), edges);
                CHECK(exact_asm(denser, gt).best_cost.total() >= base);
            }
        }
    }
}

TEST_SUITE_END();
