#include <algorithm>
#include <filesystem>

#include "asmatch/policy_net.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace asmatch;
using namespace asmatch::testing;

TEST_SUITE_BEGIN("policy_net");

namespace {

EncoderConfig tiny_config(int alphabet) {
    EncoderConfig cfg;
    cfg.hidden_dim = 16;
    cfg.layers = 2;
    cfg.interaction_dim = 8;
    cfg.heads = 4;
    cfg.label_alphabet = alphabet;
    cfg.encodings.mode = EncodingMode::RWSE;
    cfg.encodings.rwse_m = 4;
    cfg.encodings.lap_k = 4;
    return cfg;
}

std::vector<double> action_probs(const PolicyNet& net, const SearchState& state) {
    NeuralPolicy policy(net);
    return policy.scores(state, action_space(state));
}

}  // namespace

TEST_CASE("cross-graph links cover each side correctly") {
    PairPtr pair = make_search_pair(q3(), t4());
    SearchState root(pair);
    SearchState mid = apply_action(root, {0, 1});

    CrossGraphLinks links = build_links(mid);
    // mapped query node 0 -> only target 1
    CHECK(links.query_to_target.at(0, 1) == 1.0);
    CHECK(links.query_to_target.at(0, 0) == 0.0);
    // unmapped query nodes fan out to unmapped targets only
    for (int v : {0, 2, 3}) CHECK(links.query_to_target.at(1, v) == 1.0);
    CHECK(links.query_to_target.at(1, 1) == 0.0);
    // mapped target 1 -> only query 0; no mapped target is a candidate
    CHECK(links.target_to_query.at(1, 0) == 1.0);
    CHECK(links.target_to_query.at(1, 1) == 0.0);
    for (int u : {1, 2}) CHECK(links.target_to_query.at(0, u) == 1.0);
    CHECK(links.target_to_query.at(0, 0) == 0.0);

    // every query node appears as a source exactly once (mapped) or fans out
    for (int u = 0; u < 3; ++u) {
        double row = 0.0;
        for (int v = 0; v < 4; ++v) row += links.query_to_target.at(u, v);
        CHECK(row >= 1.0);
    }
}

TEST_CASE("action distribution is a proper distribution") {
    PolicyNet net(tiny_config(3), 42);
    net.set_training(false);
    PairPtr pair = make_search_pair(q3(), t4());
    SearchState root(pair);

    std::vector<double> probs = action_probs(net, root);
    REQUIRE(probs.size() == 4);
    double total = 0.0;
    for (double p : probs) {
        CHECK(p > 0.0);
        total += p;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);

    SUBCASE("singleton action set gets probability one") {
        NeuralPolicy policy(net);
        SearchState s = apply_action(apply_action(root, {0, 0}), {1, 1});
        std::vector<Action> one{{2, 3}};
        auto p = policy.scores(s, one);
        REQUIRE(p.size() == 1);
        CHECK(p[0] == doctest::Approx(1.0));
    }

    SUBCASE("empty action set is rejected") {
        Tape tape(false);
        EncodingCache cache(net.config().encodings);
        CHECK_THROWS_AS(net.action_distribution(tape, root, {}, cache), EmptyActionSet);
    }

    SUBCASE("eval forwards are deterministic") {
        CHECK(action_probs(net, root) == action_probs(net, root));
    }
}

TEST_CASE("equivariance under target relabeling") {
    PolicyNet net(tiny_config(3), 7);
    net.set_training(false);

    Rng rng = make_rng(5);
    for (int trial = 0; trial < 3; ++trial) {
        Graph gq = random_connected_graph(4, 2, 3, rng);
        Graph gt = random_connected_graph(7, 5, 3, rng);

        std::vector<int> perm(7);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        std::vector<int> labels(7);
        std::vector<std::pair<int, int>> edges;
        for (int v = 0; v < 7; ++v) labels[perm[v]] = gt.label(v);
        for (auto [u, v] : gt.edges())
            edges.emplace_back(std::min(perm[u], perm[v]), std::max(perm[u], perm[v]));
        Graph gt_perm(3, labels, edges);

        SearchState a(make_search_pair(gq, gt));
        SearchState b(make_search_pair(gq, gt_perm));
        std::vector<double> pa = action_probs(net, a);
        std::vector<double> pb = action_probs(net, b);
        for (int v = 0; v < 7; ++v)
            CHECK(pa[v] == doctest::Approx(pb[perm[v]]).epsilon(1e-9));
    }
}

TEST_CASE("automorphic candidates get equal probabilities") {
    // path A-B-A: swapping the endpoints is an automorphism
    Graph gq(2, {1}, {});  // single node labeled B
    Graph gt(2, {0, 1, 0}, {{0, 1}, {1, 2}});
    PolicyNet net(tiny_config(2), 11);
    net.set_training(false);

    SearchState root(make_search_pair(gq, gt));
    std::vector<double> probs = action_probs(net, root);
    REQUIRE(probs.size() == 3);
    CHECK(probs[0] == doctest::Approx(probs[2]).epsilon(1e-9));
}

TEST_CASE("1-WL-indistinguishable targets: plain message passing vs LapPE") {
    // hexagon vs two triangles: same degrees, uniform labels
    Graph hexagon(1, {0, 0, 0, 0, 0, 0},
                  {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}});
    Graph triangles(1, {0, 0, 0, 0, 0, 0},
                    {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
    Graph gq(1, {0, 0, 0}, {{0, 1}, {1, 2}});  // 3-path probe query

    auto embeddings = [&](const PolicyNet& net, const Graph& gt) {
        Tape tape(false);
        EncodingCache cache(net.config().encodings);
        SearchState root(make_search_pair(gq, gt));
        return net.encode(tape, root, cache).target.values();
    };
    auto sorted_rows = [](std::vector<double> vals, int d) {
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i + d <= vals.size(); i += d)
            rows.emplace_back(vals.begin() + i, vals.begin() + i + d);
        std::sort(rows.begin(), rows.end());
        return rows;
    };

    int distinguished = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        EncoderConfig plain = tiny_config(1);
        plain.global_attention = false;
        plain.encodings.mode = EncodingMode::None;
        PolicyNet mpnn(plain, seed);
        mpnn.set_training(false);

        auto ra = sorted_rows(embeddings(mpnn, hexagon), plain.hidden_dim);
        auto rb = sorted_rows(embeddings(mpnn, triangles), plain.hidden_dim);
        double diff = 0.0;
        for (size_t i = 0; i < ra.size(); ++i)
            for (size_t j = 0; j < ra[i].size(); ++j)
                diff = std::max(diff, std::fabs(ra[i][j] - rb[i][j]));
        CHECK(diff <= 1e-9);  // bounded by the 1-WL test

        EncoderConfig with_pe = plain;
        with_pe.encodings.mode = EncodingMode::LapPE;
        PolicyNet lap(with_pe, seed);
        lap.set_training(false);
        auto la = sorted_rows(embeddings(lap, hexagon), with_pe.hidden_dim);
        auto lb = sorted_rows(embeddings(lap, triangles), with_pe.hidden_dim);
        double lap_diff = 0.0;
        for (size_t i = 0; i < la.size(); ++i)
            for (size_t j = 0; j < la[i].size(); ++j)
                lap_diff = std::max(lap_diff, std::fabs(la[i][j] - lb[i][j]));
        if (lap_diff > 1e-3) ++distinguished;
    }
    CHECK(distinguished > 5);
}

TEST_CASE("checkpoint round trip preserves the distribution") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "asmatch_policy_ckpt";
    fs::create_directories(dir);
    std::string path = (dir / "net.ckpt").string();

    PolicyNet net(tiny_config(3), 99);
    net.set_training(false);
    PairPtr pair = make_search_pair(q3(), t4());
    SearchState root(pair);
    std::vector<double> before = action_probs(net, root);

    net.save(path);
    PolicyNet loaded = PolicyNet::from_checkpoint(path);
    CHECK(loaded.config().hidden_dim == 16);
    CHECK(loaded.config().encodings.mode == EncodingMode::RWSE);
    std::vector<double> after = action_probs(loaded, root);
    CHECK(before == after);
}

TEST_CASE("full policy forward passes the gradient check") {
    EncoderConfig cfg = tiny_config(3);
    cfg.layers = 1;
    cfg.hidden_dim = 8;
    cfg.interaction_dim = 4;
    cfg.heads = 2;
    cfg.encodings.rwse_m = 3;
    PolicyNet net(cfg, 3);
    net.set_training(false);

    PairPtr pair = make_search_pair(q3(), t4());
    SearchState root(pair);
    std::vector<Action> actions = action_space(root);

    auto loss = [&](Tape& tape) {
        EncodingCache cache(cfg.encodings);
        Tensor probs = net.action_distribution(tape, root, actions, cache);
        Tensor safe = tape.clamp(probs, 1e-12, 1.0);
        return tape.scale(tape.sum(tape.mul(probs, tape.log(safe))), -1.0);
    };
    CHECK(grad_check(net.params(), loss, 80) < 1e-4);
}

TEST_SUITE_END();
