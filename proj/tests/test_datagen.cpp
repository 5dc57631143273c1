#include <filesystem>
#include <fstream>
#include <queue>
#include <set>

#include "asmatch/datagen.hpp"
#include "asmatch/oracle.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace asmatch;
using namespace asmatch::testing;

namespace fs = std::filesystem;

TEST_SUITE_BEGIN("datagen");

namespace {

bool connected_on(const Graph& g, const std::vector<int>& nodes) {
    std::set<int> inside(nodes.begin(), nodes.end());
    std::set<int> reached{nodes[0]};
    std::queue<int> frontier;
    frontier.push(nodes[0]);
    while (!frontier.empty()) {
        int u = frontier.front();
        frontier.pop();
        for (int w : g.neighbors(u))
            if (inside.count(w) && !reached.count(w)) {
                reached.insert(w);
                frontier.push(w);
            }
    }
    return reached.size() == inside.size();
}

}  // namespace

TEST_CASE("bfs_sample") {
    Rng rng = make_rng(3);
    Graph gt = t4();

    SUBCASE("full-size sample covers the graph") {
        auto nodes = bfs_sample(gt, 4, rng);
        CHECK(nodes.size() == 4);
    }
    SUBCASE("singleton") {
        CHECK(bfs_sample(gt, 1, rng).size() == 1);
    }
    SUBCASE("samples are connected prefixes") {
        Rng rng2 = make_rng(10);
        Graph big = random_connected_graph(30, 20, 3, rng2);
        for (int trial = 0; trial < 20; ++trial) {
            auto nodes = bfs_sample(big, 3 + uniform_index(rng2, 10), rng2);
            CHECK(connected_on(big, nodes));
        }
    }
    SUBCASE("oversize sample fails") {
        CHECK_THROWS_AS(bfs_sample(gt, 9, rng), SizeTooLarge);
    }
    SUBCASE("disconnected component too small") {
        Graph g(1, {0, 0, 0}, {{0, 1}});
        CHECK_THROWS_AS(bfs_sample(g, 3, rng), SizeTooLarge);
    }
}

TEST_CASE("rw_sample") {
    Rng rng = make_rng(8);

    SUBCASE("zero steps yield a single node") {
        WalkSample w = rw_sample(t4(), 0, rng);
        CHECK(w.nodes.size() == 1);
        CHECK(w.edges.empty());
    }
    SUBCASE("two-node graph is fully covered") {
        Graph g(1, {0, 0}, {{0, 1}});
        WalkSample w = rw_sample(g, 5, rng);
        CHECK(w.nodes == std::vector<int>{0, 1});
        CHECK(w.edges == std::vector<std::pair<int, int>>{{0, 1}});
    }
    SUBCASE("walk edges exist in the target") {
        Rng rng2 = make_rng(12);
        Graph big = random_connected_graph(20, 15, 3, rng2);
        WalkSample w = rw_sample(big, 25, rng2);
        for (auto [u, v] : w.edges) CHECK(big.has_edge(u, v));
        CHECK(connected_on(big, w.nodes));
    }
}

TEST_CASE("inject_noise") {
    Rng rng = make_rng(5);

    SUBCASE("zero level is the identity") {
        auto [g, spec] = inject_noise(q3(), 0.0, rng);
        CHECK(g == q3());
        CHECK(spec.n_noise == 0);
    }

    SUBCASE("intensity formula: |V|+|E| = 20 at level 0.10 gives 2") {
        Rng rng2 = make_rng(6);
        Graph g = random_connected_graph(10, 1, 4, rng2);  // 10 nodes, 10 edges
        REQUIRE(g.node_count() + g.edge_count() == 20);
        auto [_, spec] = inject_noise(g, 0.10, rng2);
        CHECK(spec.n_noise == 2);
    }

    SUBCASE("complete graphs cap edge additions at zero") {
        // K3 with 3 labels: |V|+|E| = 6, level 1/6 requests one operation
        for (uint64_t seed = 0; seed < 40; ++seed) {
            Rng r = make_rng(seed);
            auto [g, spec] = inject_noise(q3(), 0.17, r);
            CHECK(spec.n_noise == 1);
            CHECK(spec.n_edge_noise == 0);  // no non-edges exist
            CHECK(g.edge_count() == 3);
        }
    }

    SUBCASE("label changes always move off the old label and edges are new") {
        Rng rng2 = make_rng(14);
        for (int trial = 0; trial < 30; ++trial) {
            Graph seed_query = random_connected_graph(8, 4, 4, rng2);
            auto [noisy, spec] = inject_noise(seed_query, 0.10, rng2);
            int changed = 0;
            for (int v = 0; v < 8; ++v)
                if (noisy.label(v) != seed_query.label(v)) ++changed;
            CHECK(changed == spec.n_node_noise);
            CHECK(noisy.edge_count() == seed_query.edge_count() + spec.n_edge_noise);
            for (auto [u, v] : seed_query.edges()) CHECK(noisy.has_edge(u, v));
            CHECK(spec.applied() <= spec.n_noise);
        }
    }
}

TEST_CASE("generated pairs certify the noise bound") {
    fs::path dir = fs::temp_directory_path() / "asmatch_datagen_bound";
    fs::remove_all(dir);
    DatasetConfig cfg;
    cfg.num_pairs = 24;
    cfg.num_targets = 3;
    cfg.target_nodes = 12;
    cfg.target_edges = 20;
    cfg.label_alphabet = 3;
    cfg.query_min = 3;
    cfg.query_max = 5;
    cfg.seed = 9;
    DatasetManifest manifest = generate_dataset(cfg, dir.string());

    for (const ManifestEntry& entry : manifest.pairs) {
        LoadedPair pair = load_pair(manifest, entry);
        EditCost corr_cost = ged(pair.seed_correspondence, pair.query, pair.target);
        CHECK(corr_cost.total() == entry.noise.applied());  // BFS mode is exact
        CHECK(corr_cost.total() <= entry.noise.n_noise);
        if (entry.noise.level == 0.0) CHECK(corr_cost.total() == 0);

        // the optimum can only improve on the seed correspondence
        EditCost best = exact_asm(pair.query, pair.target).best_cost;
        CHECK(best.total() <= corr_cost.total());
    }
}

TEST_CASE("random-walk pairs stay within the bound") {
    fs::path dir = fs::temp_directory_path() / "asmatch_datagen_rw";
    fs::remove_all(dir);
    DatasetConfig cfg;
    cfg.mode = SampleMode::RW;
    cfg.num_pairs = 12;
    cfg.num_targets = 2;
    cfg.target_nodes = 12;
    cfg.target_edges = 24;
    cfg.label_alphabet = 3;
    cfg.rw_steps = 5;
    cfg.query_min = 2;
    cfg.query_max = 6;
    cfg.seed = 4;
    DatasetManifest manifest = generate_dataset(cfg, dir.string());
    for (const ManifestEntry& entry : manifest.pairs) {
        LoadedPair pair = load_pair(manifest, entry);
        CHECK(ged(pair.seed_correspondence, pair.query, pair.target).total() <=
              entry.noise.applied());
    }
}

TEST_CASE("dataset split, dedup, and determinism") {
    fs::path dir_a = fs::temp_directory_path() / "asmatch_datagen_a";
    fs::path dir_b = fs::temp_directory_path() / "asmatch_datagen_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    DatasetConfig cfg;
    cfg.num_pairs = 100;
    cfg.num_targets = 4;
    cfg.target_nodes = 30;
    cfg.target_edges = 60;
    cfg.label_alphabet = 5;
    cfg.query_min = 4;
    cfg.query_max = 8;
    cfg.seed = 31;

    DatasetManifest manifest = generate_dataset(cfg, dir_a.string());
    REQUIRE(manifest.pairs.size() == 100);

    int train = 0, val = 0, test = 0;
    std::set<std::string> keys;
    std::set<double> test_levels;
    for (const ManifestEntry& e : manifest.pairs) {
        if (e.split == Split::Train) ++train;
        if (e.split == Split::Val) ++val;
        if (e.split == Split::Test) {
            ++test;
            test_levels.insert(e.noise.level);
        }
        LoadedPair pair = load_pair(manifest, e);
        keys.insert(serialize_graph(pair.query) + "|" + serialize_graph(pair.target));
    }
    CHECK(train == 80);
    CHECK(val == 10);
    CHECK(test == 10);
    CHECK(keys.size() == 100);             // dedup holds after reload
    CHECK(test_levels.size() == 3);        // every noise level appears in test

    generate_dataset(cfg, dir_b.string());
    std::ifstream fa(dir_a / "manifest.json"), fb(dir_b / "manifest.json");
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    DatasetManifest reloaded = load_manifest(dir_a.string());
    CHECK(reloaded.pairs.size() == manifest.pairs.size());
    CHECK(reloaded.config.seed == cfg.seed);
    CHECK(reloaded.pairs[7].correspondence == manifest.pairs[7].correspondence);
}

TEST_SUITE_END();
