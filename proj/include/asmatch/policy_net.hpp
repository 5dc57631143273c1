#pragma once

#include <string>
#include <vector>

#include "asmatch/encodings.hpp"
#include "asmatch/search.hpp"
#include "asmatch/tensor.hpp"

namespace asmatch {

struct EncoderConfig {
    int hidden_dim = 32;
    int layers = 4;
    int interaction_dim = 32;
    int heads = 4;
    EncodingConfig encodings;
    bool global_attention = true;  // off = plain gated message passing
    double dropout = 0.1;
    int label_alphabet = 13;
};

/// Cross-graph attention support: mapped nodes link to their image, unmapped
/// nodes fan out to every unmapped node on the other side.
struct CrossGraphLinks {
    DenseMatrix query_to_target;  // (nq, nt), 1.0 where attention is allowed
    DenseMatrix target_to_query;  // (nt, nq)
};

CrossGraphLinks build_links(const SearchState& state);

/// Encoder/decoder producing the action distribution: per-family input
/// projections, alternating intra (gated MPNN + global attention + MLP) and
/// inter (masked cross-attention) layers, jump-knowledge aggregation, then
/// self-attention pooling and a bilinear action head.
class PolicyNet {
public:
    PolicyNet(EncoderConfig cfg, uint64_t init_seed);

    static PolicyNet from_checkpoint(const std::string& path);
    void save(const std::string& path) const;

    const EncoderConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    /// Mode switch for dropout/batch-norm; a shared frozen net stays in eval.
    void set_training(bool on) const { params_.set_training(on); }

    struct Encoded {
        Tensor query;   // (|V^q|, d)
        Tensor target;  // (|V^t|, d)
    };

    Encoded encode(Tape& tape, const SearchState& state, EncodingCache& cache) const;

    /// (1, K) probabilities over `actions`, which must be nonempty and all
    /// map the state's next query node.
    Tensor action_distribution(Tape& tape, const SearchState& state,
                               const std::vector<Action>& actions,
                               EncodingCache& cache) const;

private:
    // params_ is mutated by training but logically const during encode
    EncoderConfig cfg_;
    mutable ParamStore params_;

    Tensor embed_graph(Tape& tape, const Graph& g, const std::vector<double>& mapped_flag,
                       const DenseMatrix& pos, const char* side) const;
    Tensor intra_layer(Tape& tape, const Tensor& x,
                       const std::vector<std::pair<int, int>>& edges, int layer) const;
    std::pair<Tensor, Tensor> inter_layer(Tape& tape, const Tensor& xq, const Tensor& xt,
                                          const CrossGraphLinks& links, int layer) const;
    Tensor self_attention(Tape& tape, const Tensor& x, const std::string& prefix,
                          const DenseMatrix* mask_qk, const Tensor* keys) const;
};

/// Search-facing adapter running frozen eval-mode forwards. One adapter per
/// concurrent search; the shared PolicyNet itself is read-only here.
class NeuralPolicy final : public Policy {
public:
    explicit NeuralPolicy(const PolicyNet& net)
        : net_(&net), own_cache_(net.config().encodings), cache_(&own_cache_) {}
    /// Reuse a caller-owned cache (single-threaded contexts only).
    NeuralPolicy(const PolicyNet& net, EncodingCache* shared_cache)
        : net_(&net), own_cache_(net.config().encodings),
          cache_(shared_cache ? shared_cache : &own_cache_) {}

    std::vector<double> scores(const SearchState& state,
                               const std::vector<Action>& actions) const override;

private:
    const PolicyNet* net_;
    mutable EncodingCache own_cache_;
    EncodingCache* cache_;
};

}  // namespace asmatch
