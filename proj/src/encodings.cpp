#include "asmatch/encodings.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace asmatch {

int pos_struct_dim(const EncodingConfig& cfg) {
    switch (cfg.mode) {
        case EncodingMode::None: return 0;
        case EncodingMode::LapPE: return cfg.lap_k;
        case EncodingMode::RWSE: return cfg.rwse_m;
        case EncodingMode::Both: return cfg.lap_k + cfg.rwse_m;
    }
    return 0;
}

EigenDecomposition jacobi_eigen(const DenseMatrix& symmetric) {
    const int n = symmetric.rows;
    DenseMatrix a = symmetric;
    DenseMatrix v(n, n);
    for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

    constexpr double kOffTol = 1e-10;
    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a.at(p, q)));
        if (off < kOffTol) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a.at(p, q);
                if (std::fabs(apq) < kOffTol) continue;
                double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int i = 0; i < n; ++i) {
                    double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    double vip = v.at(i, p), viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a.at(i, i);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int x, int y) { return diag[x] < diag[y]; });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = DenseMatrix(n, n);
    for (int j = 0; j < n; ++j) {
        out.values[j] = diag[idx[j]];
        for (int i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, idx[j]);
    }
    return out;
}

DenseMatrix normalized_laplacian(const Graph& g) {
    const int n = g.node_count();
    DenseMatrix lap(n, n);
    std::vector<double> inv_sqrt_deg(n, 0.0);
    for (int u = 0; u < n; ++u)
        if (g.degree(u) > 0) inv_sqrt_deg[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u)));
    for (int u = 0; u < n; ++u) {
        if (g.degree(u) > 0) lap.at(u, u) = 1.0;
        for (int w : g.neighbors(u)) lap.at(u, w) = -inv_sqrt_deg[u] * inv_sqrt_deg[w];
    }
    return lap;
}

DenseMatrix laplacian_pe(const Graph& g, int k) {
    const int n = g.node_count();
    if (n == 0) throw EmptyGraph("laplacian_pe on empty graph");

    EigenDecomposition eig = jacobi_eigen(normalized_laplacian(g));

    constexpr double kZeroTol = 1e-8;
    DenseMatrix pe(n, k);
    const int max_cols = std::min(k, n - 1);
    int col = 0;
    for (int j = 0; j < n && col < max_cols; ++j) {
        if (eig.values[j] <= kZeroTol) continue;
        // sign: largest-magnitude entry positive, ties to the lowest index
        int arg = 0;
        for (int i = 1; i < n; ++i)
            if (std::fabs(eig.vectors.at(i, j)) > std::fabs(eig.vectors.at(arg, j))) arg = i;
        double sign = eig.vectors.at(arg, j) < 0.0 ? -1.0 : 1.0;
        for (int i = 0; i < n; ++i) pe.at(i, col) = sign * eig.vectors.at(i, j);
        ++col;
    }
    return pe;
}

DenseMatrix rwse(const Graph& g, int m) {
    const int n = g.node_count();
    if (n == 0) throw EmptyGraph("rwse on empty graph");

    DenseMatrix walk(n, n);
    for (int u = 0; u < n; ++u) {
        if (g.degree(u) == 0) continue;
        double p = 1.0 / g.degree(u);
        for (int w : g.neighbors(u)) walk.at(u, w) = p;
    }

    DenseMatrix out(n, m);
    DenseMatrix power = walk;
    for (int s = 0; s < m; ++s) {
        if (s > 0) {
            DenseMatrix next(n, n);
            for (int i = 0; i < n; ++i)
                for (int l = 0; l < n; ++l) {
                    double pil = power.at(i, l);
                    if (pil == 0.0) continue;
                    for (int j = 0; j < n; ++j) next.at(i, j) += pil * walk.at(l, j);
                }
            power = std::move(next);
        }
        for (int u = 0; u < n; ++u) out.at(u, s) = power.at(u, u);
    }
    return out;
}

DenseMatrix pos_struct_features(const Graph& g, const EncodingConfig& cfg) {
    switch (cfg.mode) {
        case EncodingMode::None: return DenseMatrix(g.node_count(), 0);
        case EncodingMode::LapPE: return laplacian_pe(g, cfg.lap_k);
        case EncodingMode::RWSE: return rwse(g, cfg.rwse_m);
        case EncodingMode::Both: break;
    }
    DenseMatrix lap = laplacian_pe(g, cfg.lap_k);
    DenseMatrix walk = rwse(g, cfg.rwse_m);
    DenseMatrix both(g.node_count(), cfg.lap_k + cfg.rwse_m);
    for (int i = 0; i < g.node_count(); ++i) {
        for (int j = 0; j < cfg.lap_k; ++j) both.at(i, j) = lap.at(i, j);
        for (int j = 0; j < cfg.rwse_m; ++j) both.at(i, cfg.lap_k + j) = walk.at(i, j);
    }
    return both;
}

NodeFeatureSet assemble_features(const Graph& g, const std::vector<int>& mapped_nodes,
                                 const EncodingConfig& cfg, const DenseMatrix* cached_pos) {
    const int n = g.node_count();
    if (n == 0) throw EmptyGraph("assemble_features on empty graph");
    NodeFeatureSet fs;
    fs.label_onehot = DenseMatrix(n, g.label_alphabet());
    for (int u = 0; u < n; ++u) fs.label_onehot.at(u, g.label(u)) = 1.0;
    fs.mapped_flag.assign(n, 0.0);
    for (int u : mapped_nodes) {
        if (u < 0 || u >= n) throw IndexOutOfRange("mapped node " + std::to_string(u));
        fs.mapped_flag[u] = 1.0;
    }
    fs.pos_struct = cached_pos ? *cached_pos : pos_struct_features(g, cfg);
    return fs;
}

const DenseMatrix& EncodingCache::pos_features(const Graph& g) {
    auto it = cache_.find(&g);
    if (it == cache_.end())
        it = cache_.emplace(&g, pos_struct_features(g, cfg_)).first;
    return it->second;
}

}  // namespace asmatch
