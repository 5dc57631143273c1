#pragma once

#include <unordered_map>

#include "asmatch/dense.hpp"
#include "asmatch/graph.hpp"

namespace asmatch {

enum class EncodingMode { None, LapPE, RWSE, Both };

struct EncodingConfig {
    int lap_k = 8;
    int rwse_m = 16;
    EncodingMode mode = EncodingMode::RWSE;
};

int pos_struct_dim(const EncodingConfig& cfg);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Sweeps until every off-diagonal magnitude is below 1e-10. Values come
/// back ascending with matching orthonormal columns in `vectors`.
struct EigenDecomposition {
    std::vector<double> values;
    DenseMatrix vectors;  // column j pairs with values[j]
};
EigenDecomposition jacobi_eigen(const DenseMatrix& symmetric);

/// Symmetric normalized Laplacian; isolated nodes contribute zero rows.
DenseMatrix normalized_laplacian(const Graph& g);

/// n x k positional encoding: eigenvectors of the k smallest nonzero
/// Laplacian eigenvalues, sign-fixed so the largest-magnitude entry is
/// positive, zero-padded when fewer exist.
DenseMatrix laplacian_pe(const Graph& g, int k);

/// n x m structural encoding: return probabilities diag(P^s), s = 1..m,
/// for the random-walk matrix P = D^-1 A (zero rows on isolated nodes).
DenseMatrix rwse(const Graph& g, int m);

/// Positional/structural block per the configured mode (may be 0 columns).
DenseMatrix pos_struct_features(const Graph& g, const EncodingConfig& cfg);

/// The three raw feature families fed to the policy's input projections.
struct NodeFeatureSet {
    DenseMatrix label_onehot;  // n x alphabet
    std::vector<double> mapped_flag;
    DenseMatrix pos_struct;  // n x pos_struct_dim
};

NodeFeatureSet assemble_features(const Graph& g, const std::vector<int>& mapped_nodes,
                                 const EncodingConfig& cfg,
                                 const DenseMatrix* cached_pos = nullptr);

/// Per-graph memo for the mapping-independent feature block. One owner per
/// search or training context; not synchronized.
class EncodingCache {
public:
    explicit EncodingCache(EncodingConfig cfg) : cfg_(cfg) {}
    const DenseMatrix& pos_features(const Graph& g);
    const EncodingConfig& config() const { return cfg_; }

private:
    EncodingConfig cfg_;
    std::unordered_map<const Graph*, DenseMatrix> cache_;
};

}  // namespace asmatch
