#include <cmath>

#include "asmatch/encodings.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace asmatch;
using namespace asmatch::testing;

TEST_SUITE_BEGIN("encodings");

namespace {

DenseMatrix matvec_residual(const DenseMatrix& lap, const DenseMatrix& vectors,
                            const std::vector<double>& values) {
    const int n = lap.rows;
    DenseMatrix res(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double lv = 0.0;
            for (int l = 0; l < n; ++l) lv += lap.at(i, l) * vectors.at(l, j);
            res.at(i, j) = lv - values[j] * vectors.at(i, j);
        }
    return res;
}

}  // namespace

TEST_CASE("two nodes, one edge") {
    Graph g(1, {0, 0}, {{0, 1}});

    DenseMatrix pe = laplacian_pe(g, 1);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(pe.at(0, 0) == doctest::Approx(inv_sqrt2));
    CHECK(pe.at(1, 0) == doctest::Approx(-inv_sqrt2));

    EigenDecomposition eig = jacobi_eigen(normalized_laplacian(g));
    CHECK(eig.values[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(eig.values[1] == doctest::Approx(2.0));
}

TEST_CASE("triangle spectrum is degenerate at 3/2") {
    Graph g(1, {0, 0, 0}, {{0, 1}, {1, 2}, {0, 2}});
    EigenDecomposition eig = jacobi_eigen(normalized_laplacian(g));
    CHECK(eig.values[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(eig.values[1] == doctest::Approx(1.5));
    CHECK(eig.values[2] == doctest::Approx(1.5));

    DenseMatrix pe = laplacian_pe(g, 3);
    for (int i = 0; i < 3; ++i) CHECK(pe.at(i, 2) == 0.0);  // only two nonzero eigenvalues

    // residual and orthogonality, not specific vectors: the eigenspace is degenerate
    DenseMatrix lap = normalized_laplacian(g);
    DenseMatrix res = matvec_residual(lap, eig.vectors, eig.values);
    for (double r : res.data) CHECK(std::fabs(r) <= 1e-8);
}

TEST_CASE("edgeless graph has no nonzero eigenvalues") {
    Graph g(1, {0, 0, 0}, {});
    DenseMatrix pe = laplacian_pe(g, 2);
    for (double v : pe.data) CHECK(v == 0.0);
}

TEST_CASE("eigenpairs of random graphs satisfy residual and orthogonality bounds") {
    Rng rng = make_rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        Graph g = random_connected_graph(6 + uniform_index(rng, 10), uniform_index(rng, 10), 3, rng);
        DenseMatrix lap = normalized_laplacian(g);
        EigenDecomposition eig = jacobi_eigen(lap);

        DenseMatrix res = matvec_residual(lap, eig.vectors, eig.values);
        for (double r : res.data) CHECK(std::fabs(r) <= 1e-8);

        const int n = g.node_count();
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += eig.vectors.at(i, a) * eig.vectors.at(i, b);
                CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-8);
            }
    }
}

TEST_CASE("rwse closed forms") {
    SUBCASE("two nodes swap and return") {
        Graph g(1, {0, 0}, {{0, 1}});
        DenseMatrix s = rwse(g, 2);
        for (int u = 0; u < 2; ++u) {
            CHECK(s.at(u, 0) == doctest::Approx(0.0));
            CHECK(s.at(u, 1) == doctest::Approx(1.0));
        }
    }
    SUBCASE("triangle returns with probability 1/2 after two steps") {
        Graph g(1, {0, 0, 0}, {{0, 1}, {1, 2}, {0, 2}});
        DenseMatrix s = rwse(g, 2);
        for (int u = 0; u < 3; ++u) {
            CHECK(s.at(u, 0) == doctest::Approx(0.0));
            CHECK(s.at(u, 1) == doctest::Approx(0.5));
        }
    }
    SUBCASE("isolated nodes stay at zero") {
        Graph g(1, {0, 0, 0}, {{0, 1}});
        DenseMatrix s = rwse(g, 4);
        for (int step = 0; step < 4; ++step) CHECK(s.at(2, step) == 0.0);
    }
}

TEST_CASE("random-walk rows are stochastic for non-isolated nodes") {
    Rng rng = make_rng(91);
    Graph g = random_connected_graph(8, 5, 3, rng);
    const int n = g.node_count();
    // rebuild P and its powers independently
    std::vector<std::vector<double>> p(n, std::vector<double>(n, 0.0));
    for (int u = 0; u < n; ++u)
        for (int w : g.neighbors(u)) p[u][w] = 1.0 / g.degree(u);
    std::vector<std::vector<double>> power = p;
    DenseMatrix s = rwse(g, 4);
    for (int step = 0; step < 4; ++step) {
        if (step > 0) {
            std::vector<std::vector<double>> next(n, std::vector<double>(n, 0.0));
            for (int i = 0; i < n; ++i)
                for (int l = 0; l < n; ++l)
                    for (int j = 0; j < n; ++j) next[i][j] += power[i][l] * p[l][j];
            power = next;
        }
        for (int u = 0; u < n; ++u) {
            double row = 0.0;
            for (int j = 0; j < n; ++j) row += power[u][j];
            CHECK(row == doctest::Approx(1.0));
            CHECK(s.at(u, step) == doctest::Approx(power[u][u]));
            CHECK(s.at(u, step) >= 0.0);
            CHECK(s.at(u, step) <= 1.0);
        }
    }
}

TEST_CASE("rwse is permutation equivariant") {
    Rng rng = make_rng(47);
    Graph g = random_connected_graph(7, 4, 3, rng);
    std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
    std::vector<int> labels(7);
    std::vector<std::pair<int, int>> edges;
    for (int v = 0; v < 7; ++v) labels[perm[v]] = g.label(v);
    for (auto [u, v] : g.edges())
        edges.emplace_back(std::min(perm[u], perm[v]), std::max(perm[u], perm[v]));
    Graph h(3, labels, edges);

    DenseMatrix sg = rwse(g, 5), sh = rwse(h, 5);
    for (int u = 0; u < 7; ++u)
        for (int step = 0; step < 5; ++step)
            CHECK(sg.at(u, step) == doctest::Approx(sh.at(perm[u], step)));
}

TEST_CASE("assemble_features") {
    Graph gq = q3();
    EncodingConfig cfg;
    cfg.lap_k = 2;
    cfg.rwse_m = 3;

    SUBCASE("mapped flags follow the given set") {
        NodeFeatureSet fs = assemble_features(gq, {0}, cfg);
        CHECK(fs.mapped_flag[0] == 1.0);
        CHECK(fs.mapped_flag[1] == 0.0);
        CHECK(fs.mapped_flag[2] == 0.0);
    }

    SUBCASE("one-hot labels") {
        NodeFeatureSet fs = assemble_features(gq, {}, cfg);
        CHECK(fs.label_onehot.at(0, 0) == 1.0);
        CHECK(fs.label_onehot.at(0, 1) == 0.0);
        CHECK(fs.label_onehot.at(1, 1) == 1.0);
    }

    SUBCASE("mode Both concatenates") {
        cfg.mode = EncodingMode::Both;
        NodeFeatureSet fs = assemble_features(gq, {}, cfg);
        CHECK(fs.pos_struct.cols == cfg.lap_k + cfg.rwse_m);
    }

    SUBCASE("bad mapped node") {
        CHECK_THROWS_AS(assemble_features(gq, {5}, cfg), IndexOutOfRange);
    }

    SUBCASE("cache returns the same block") {
        EncodingCache cache(cfg);
        const DenseMatrix& a = cache.pos_features(gq);
        const DenseMatrix& b = cache.pos_features(gq);
        CHECK(&a == &b);
    }
}

TEST_SUITE_END();
