#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "asmatch/dense.hpp"
#include "asmatch/error.hpp"
#include "asmatch/rng.hpp"

namespace asmatch {

struct TensorNode {
    std::vector<int> shape;
    std::vector<double> val;
    std::vector<double> grad;  // same length as val while gradients are on
    bool needs_grad = false;
};

/// Handle over a tape-owned value.
class Tensor {
public:
    Tensor() = default;

    const std::vector<int>& shape() const { return node_->shape; }
    int rows() const { return node_->shape[0]; }
    int cols() const { return node_->shape.size() > 1 ? node_->shape[1] : 1; }
    size_t size() const { return node_->val.size(); }
    const std::vector<double>& values() const { return node_->val; }
    const std::vector<double>& gradient() const { return node_->grad; }
    double scalar() const {
        if (node_->val.size() != 1) throw NotScalar("tensor is not a scalar");
        return node_->val[0];
    }
    bool valid() const { return node_ != nullptr; }

private:
    friend class Tape;
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;
};

using GradMap = std::map<std::string, std::vector<double>>;

struct ParamEntry {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> adam_m, adam_v;
    bool trainable = true;
};

/// Named parameters plus optimizer state and the train/eval switch that
/// gates dropout and batch-norm behaviour.
class ParamStore {
public:
    std::vector<double>& add(const std::string& name, std::vector<int> shape,
                             std::vector<double> values, bool trainable = true);
    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    ParamEntry& at(const std::string& name);
    const ParamEntry& at(const std::string& name) const;
    const std::map<std::string, ParamEntry>& entries() const { return entries_; }

    bool training() const { return training_; }
    void set_training(bool on) { training_ = on; }

    int64_t step_count() const { return adam_step_; }

    const std::string& meta() const { return meta_; }
    void set_meta(std::string meta) { meta_ = std::move(meta); }

    /// Decoupled-weight-decay adaptive update over every trainable entry
    /// present in `grads`.
    void adamw_step(const GradMap& grads, double lr, double weight_decay,
                    double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void save(const std::string& path) const;
    static ParamStore load(const std::string& path);

private:
    std::map<std::string, ParamEntry> entries_;
    bool training_ = false;
    int64_t adam_step_ = 0;
    std::string meta_;
};

/// Batch statistics observed by one batch-norm call in training mode; the
/// trainer folds them into the running buffers in a deterministic order.
struct BnBatchStat {
    std::string prefix;
    std::vector<double> mean;
    std::vector<double> var;
};

/// Records each op's backward closure in creation order (which is a
/// topological order); backward replays them exactly reversed.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }
    void set_finite_checks(bool on) { finite_checks_ = on; }
    void enable_dropout(uint64_t seed) { dropout_on_ = true; dropout_rng_ = make_rng(seed); }

    Tensor input(std::vector<int> shape, std::vector<double> values, bool needs_grad = false);
    Tensor param(ParamStore& ps, const std::string& name);

    // arithmetic
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor add_n(const std::vector<Tensor>& terms);
    Tensor add_bias(const Tensor& a, const Tensor& bias);  // (N,C) + (C)
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double factor);
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T

    // shape
    Tensor transpose(const Tensor& a);
    Tensor concat_cols(const std::vector<Tensor>& parts);
    Tensor slice_cols(const Tensor& a, int from, int to);
    Tensor gather_rows(const Tensor& a, std::vector<int> indices);
    Tensor repeat_row(const Tensor& a, int copies);  // (1,C) -> (N,C)

    // nonlinearities and reductions
    Tensor relu(const Tensor& a);
    Tensor sigmoid(const Tensor& a);
    Tensor log(const Tensor& a);
    Tensor exp(const Tensor& a);
    Tensor softmax_rows(const Tensor& a);
    Tensor mean_rows(const Tensor& a);  // (N,C) -> (1,C)
    Tensor sum(const Tensor& a);        // -> scalar
    Tensor minimum(const Tensor& a, const Tensor& b);
    Tensor clamp(const Tensor& a, double lo, double hi);
    Tensor pick(const Tensor& a, int flat_index);  // -> scalar

    // masking / regularization / normalization
    Tensor masked_fill(const Tensor& a, const DenseMatrix& allowed, double value);
    Tensor dropout(const Tensor& a, double p);
    Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-5);
    Tensor batch_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                      ParamStore& ps, const std::string& prefix, double eps = 1e-5);

    /// out[k,f] = sum_ij x[i] * w[i,j,f] * y[k,j]; x is (1,d), w is (d,d,F), y is (K,d)
    Tensor bilinear(const Tensor& x, const Tensor& w, const Tensor& y);

    /// Multi-head scaled dot-product attention with head splitting, masking,
    /// softmax, and value mixing fused into one op (heads must divide the
    /// width). Equivalent to composing slice/matmul/softmax per head.
    Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                               const DenseMatrix* allowed, int heads);

    /// out[u] = sum_{v in adj(u)} sigmoid(gate_a[u] + gate_b[v]) .* values[v]
    Tensor gated_neighbor_sum(const Tensor& gate_a, const Tensor& gate_b,
                              const Tensor& values,
                              const std::vector<std::pair<int, int>>& edges);

    void backward(const Tensor& loss);

    const GradMap& param_grads() const { return param_grads_; }
    const std::vector<BnBatchStat>& bn_stats() const { return bn_stats_; }

private:
    Tensor make(std::vector<int> shape, bool needs_grad);
    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }
    void check_finite(const Tensor& t, const char* op) const;

    bool grad_enabled_ = true;
    bool finite_checks_ = true;
    bool dropout_on_ = false;
    Rng dropout_rng_;
    std::vector<std::function<void()>> ops_;
    std::map<std::string, Tensor> param_leaves_;
    GradMap param_grads_;
    std::vector<BnBatchStat> bn_stats_;
};

/// Scaled dot-product attention composed from tape primitives.
/// `allowed` may be null for unmasked attention.
Tensor scaled_dot_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            const DenseMatrix* allowed);

/// Central-difference check of d(loss)/d(params) on a random subsample of
/// coordinates. Deterministic losses only (eval mode enforced).
double grad_check(ParamStore& ps, const std::function<Tensor(Tape&)>& make_loss,
                  int min_coords = 50, double eps = 1e-5, uint64_t seed = 1);

}  // namespace asmatch
