#include "asmatch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "asmatch/fastmath.hpp"
#include "asmatch/kernels.hpp"

namespace asmatch {

namespace {

bool has_grad(const std::shared_ptr<TensorNode>& n) { return !n->grad.empty(); }

// dst(n,k) += a(n,m) * b(k,m)^T
void mm_acc_nt(const double* __restrict a, const double* __restrict b,
               double* __restrict dst, int n, int m, int k) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * m;
        double* drow = dst + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double* brow = b + static_cast<size_t>(j) * m;
            double acc = 0.0;
            for (int l = 0; l < m; ++l) acc += arow[l] * brow[l];
            drow[j] += acc;
        }
    }
}

// dst(k,m) += a(n,k)^T * b(n,m)
void mm_acc_tn(const double* __restrict a, const double* __restrict b,
               double* __restrict dst, int n, int k, int m) {
    for (int l = 0; l < n; ++l) {
        const double* arow = a + static_cast<size_t>(l) * k;
        const double* brow = b + static_cast<size_t>(l) * m;
        for (int i = 0; i < k; ++i) {
            const double av = arow[i];
            double* drow = dst + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) drow[j] += av * brow[j];
        }
    }
}

// dst(n,m) += a(n,k) * b(k,m)
void mm_acc_nn(const double* __restrict a, const double* __restrict b,
               double* __restrict dst, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* drow = dst + static_cast<size_t>(i) * m;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + static_cast<size_t>(l) * m;
            for (int j = 0; j < m; ++j) drow[j] += av * brow[j];
        }
    }
}

size_t shape_size(const std::vector<int>& shape) {
    size_t total = 1;
    for (int d : shape) total *= static_cast<size_t>(d);
    return total;
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.shape().size() != 2) throw ShapeMismatch(std::string(op) + ": expected a matrix");
}

std::string shape_string(const std::vector<int>& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

}  // namespace

std::vector<double>& ParamStore::add(const std::string& name, std::vector<int> shape,
                                     std::vector<double> values, bool trainable) {
    if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    if (values.size() != shape_size(shape))
        throw ShapeMismatch("parameter " + name + " has " + std::to_string(values.size()) +
                            " values for shape " + shape_string(shape));
    ParamEntry entry;
    entry.shape = std::move(shape);
    entry.value = std::move(values);
    entry.trainable = trainable;
    if (trainable) {
        entry.adam_m.assign(entry.value.size(), 0.0);
        entry.adam_v.assign(entry.value.size(), 0.0);
    }
    return entries_.emplace(name, std::move(entry)).first->second.value;
}

ParamEntry& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

void ParamStore::adamw_step(const GradMap& grads, double lr, double weight_decay,
                            double beta1, double beta2, double eps) {
    ++adam_step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_step_));
    for (const auto& [name, grad] : grads) {
        ParamEntry& entry = at(name);
        if (!entry.trainable) continue;
        if (grad.size() != entry.value.size())
            throw ShapeMismatch("gradient size mismatch for " + name);
        for (size_t i = 0; i < grad.size(); ++i) {
            entry.adam_m[i] = beta1 * entry.adam_m[i] + (1.0 - beta1) * grad[i];
            entry.adam_v[i] = beta2 * entry.adam_v[i] + (1.0 - beta2) * grad[i] * grad[i];
            double mhat = entry.adam_m[i] / bc1;
            double vhat = entry.adam_v[i] / bc2;
            entry.value[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * entry.value[i]);
        }
    }
}

Tensor Tape::make(std::vector<int> shape, bool needs_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->val.assign(shape_size(node->shape), 0.0);
    node->needs_grad = needs_grad && grad_enabled_;
    if (node->needs_grad) node->grad.assign(node->val.size(), 0.0);
    return Tensor(node);
}

void Tape::check_finite(const Tensor& t, const char* op) const {
    if (!finite_checks_) return;
    for (double v : t.node_->val)
        if (!std::isfinite(v)) throw NonFinite(std::string(op) + " produced a non-finite value");
}

Tensor Tape::input(std::vector<int> shape, std::vector<double> values, bool needs_grad) {
    if (values.size() != shape_size(shape))
        throw ShapeMismatch("input: " + std::to_string(values.size()) + " values for shape " +
                            shape_string(shape));
    Tensor t = make(std::move(shape), needs_grad);
    t.node_->val = std::move(values);
    check_finite(t, "input");
    return t;
}

Tensor Tape::param(ParamStore& ps, const std::string& name) {
    auto it = param_leaves_.find(name);
    if (it != param_leaves_.end()) return it->second;
    ParamEntry& entry = ps.at(name);
    Tensor t = make(entry.shape, entry.trainable);
    t.node_->val = entry.value;
    param_leaves_.emplace(name, t);
    return t;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeMismatch("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor out = make(a.shape(), a.node_->needs_grad || b.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = a.node_->val[i] + b.node_->val[i];
    check_finite(out, "add");
    if (out.node_->needs_grad) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        record([an, bn, on] {
            for (size_t i = 0; i < on->grad.size(); ++i) {
                if (has_grad(an)) an->grad[i] += on->grad[i];
                if (has_grad(bn)) bn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor Tape::add_n(const std::vector<Tensor>& terms) {
    if (terms.empty()) throw ShapeMismatch("add_n of nothing");
    bool needs = false;
    for (const Tensor& t : terms) {
        if (t.shape() != terms[0].shape()) throw ShapeMismatch("add_n: ragged shapes");
        needs = needs || t.node_->needs_grad;
    }
    Tensor out = make(terms[0].shape(), needs);
    for (const Tensor& t : terms)
        for (size_t i = 0; i < out.size(); ++i) out.node_->val[i] += t.node_->val[i];
    check_finite(out, "add_n");
    if (out.node_->needs_grad) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        for (const Tensor& t : terms) nodes.push_back(t.node_);
        auto on = out.node_;
        record([nodes, on] {
            for (const auto& n : nodes)
                if (has_grad(n))
                    for (size_t i = 0; i < on->grad.size(); ++i) n->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor Tape::add_bias(const Tensor& a, const Tensor& bias) {
    require_matrix(a, "add_bias");
    const int n = a.rows(), c = a.cols();
    if (static_cast<int>(bias.size()) != c)
        throw ShapeMismatch("add_bias: bias length " + std::to_string(bias.size()) +
                            " for width " + std::to_string(c));
    Tensor out = make(a.shape(), a.node_->needs_grad || bias.node_->needs_grad);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
            out.node_->val[static_cast<size_t>(i) * c + j] =
                a.node_->val[static_cast<size_t>(i) * c + j] + bias.node_->val[j];
    check_finite(out, "add_bias");
    if (out.node_->needs_grad) {
        auto an = a.node_, bn = bias.node_, on = out.node_;
        record([an, bn, on, n, c] {
            if (has_grad(an))
                for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            if (has_grad(bn)) column_sums_serial(on->grad.data(), bn->grad.data(), n, c);
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeMismatch("sub: shape mismatch");
    Tensor out = make(a.shape(), a.node_->needs_grad || b.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = a.node_->val[i] - b.node_->val[i];
    check_finite(out, "sub");
    if (out.node_->needs_grad) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        record([an, bn, on] {
            for (size_t i = 0; i < on->grad.size(); ++i) {
                if (has_grad(an)) an->grad[i] += on->grad[i];
                if (has_grad(bn)) bn->grad[i] -= on->grad[i];
            }
        });
    }
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeMismatch("mul: shape mismatch");
    Tensor out = make(a.shape(), a.node_->needs_grad || b.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = a.node_->val[i] * b.node_->val[i];
    check_finite(out, "mul");
    if (out.node_->needs_grad) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        record([an, bn, on] {
            for (size_t i = 0; i < on->grad.size(); ++i) {
                if (has_grad(an)) an->grad[i] += on->grad[i] * bn->val[i];
                if (has_grad(bn)) bn->grad[i] += on->grad[i] * an->val[i];
            }
        });
    }
    return out;
}

Tensor Tape::scale(const Tensor& a, double factor) {
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i) out.node_->val[i] = a.node_->val[i] * factor;
    check_finite(out, "scale");
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, factor] {
            for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * factor;
        });
    }
    return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.cols() != b.rows())
        throw ShapeMismatch("matmul: " + shape_string(a.shape()) + " x " +
                            shape_string(b.shape()));
    const int n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out = make({n, m}, a.node_->needs_grad || b.node_->needs_grad);
    asmatch::matmul(a.node_->val.data(), b.node_->val.data(), out.node_->val.data(), n, k, m);
    check_finite(out, "matmul");
    if (out.node_->needs_grad) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        record([an, bn, on, n, k, m] {
            if (has_grad(an)) mm_acc_nt(on->grad.data(), bn->val.data(), an->grad.data(), n, m, k);
            if (has_grad(bn)) mm_acc_tn(an->val.data(), on->grad.data(), bn->grad.data(), n, k, m);
        });
    }
    return out;
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    if (a.cols() != b.cols())
        throw ShapeMismatch("matmul_nt: " + shape_string(a.shape()) + " x " +
                            shape_string(b.shape()) + "^T");
    const int n = a.rows(), k = a.cols(), m = b.rows();
    Tensor out = make({n, m}, a.node_->needs_grad || b.node_->needs_grad);
    asmatch::matmul_nt(a.node_->val.data(), b.node_->val.data(), out.node_->val.data(), n, k, m);
    check_finite(out, "matmul_nt");
    if (out.node_->needs_grad) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        record([an, bn, on, n, k, m] {
            // dA += dO * B ; dB += dO^T * A
            if (has_grad(an)) mm_acc_nn(on->grad.data(), bn->val.data(), an->grad.data(), n, m, k);
            if (has_grad(bn)) mm_acc_tn(on->grad.data(), an->val.data(), bn->grad.data(), n, m, k);
        });
    }
    return out;
}

Tensor Tape::transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const int n = a.rows(), m = a.cols();
    Tensor out = make({m, n}, a.node_->needs_grad);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            out.node_->val[static_cast<size_t>(j) * n + i] =
                a.node_->val[static_cast<size_t>(i) * m + j];
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, n, m] {
            if (!has_grad(an)) return;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    an->grad[static_cast<size_t>(i) * m + j] +=
                        on->grad[static_cast<size_t>(j) * n + i];
        });
    }
    return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols of nothing");
    const int n = parts[0].rows();
    int total = 0;
    bool needs = false;
    for (const Tensor& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.rows() != n) throw ShapeMismatch("concat_cols: row mismatch");
        total += p.cols();
        needs = needs || p.node_->needs_grad;
    }
    Tensor out = make({n, total}, needs);
    int offset = 0;
    for (const Tensor& p : parts) {
        const int c = p.cols();
        for (int i = 0; i < n; ++i)
            std::memcpy(out.node_->val.data() + static_cast<size_t>(i) * total + offset,
                        p.node_->val.data() + static_cast<size_t>(i) * c,
                        sizeof(double) * static_cast<size_t>(c));
        offset += c;
    }
    if (out.node_->needs_grad) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        std::vector<int> offsets;
        int off = 0;
        for (const Tensor& p : parts) {
            nodes.push_back(p.node_);
            offsets.push_back(off);
            off += p.cols();
        }
        auto on = out.node_;
        record([nodes, offsets, on, n, total] {
            for (size_t pi = 0; pi < nodes.size(); ++pi) {
                if (!has_grad(nodes[pi])) continue;
                const int c = nodes[pi]->shape[1];
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < c; ++j)
                        nodes[pi]->grad[static_cast<size_t>(i) * c + j] +=
                            on->grad[static_cast<size_t>(i) * total + offsets[pi] + j];
            }
        });
    }
    return out;
}

Tensor Tape::slice_cols(const Tensor& a, int from, int to) {
    require_matrix(a, "slice_cols");
    if (from < 0 || to > a.cols() || from >= to) throw ShapeMismatch("slice_cols: bad range");
    const int n = a.rows(), c = a.cols(), w = to - from;
    Tensor out = make({n, w}, a.node_->needs_grad);
    for (int i = 0; i < n; ++i)
        std::memcpy(out.node_->val.data() + static_cast<size_t>(i) * w,
                    a.node_->val.data() + static_cast<size_t>(i) * c + from,
                    sizeof(double) * static_cast<size_t>(w));
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, n, c, w, from] {
            if (!has_grad(an)) return;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j)
                    an->grad[static_cast<size_t>(i) * c + from + j] +=
                        on->grad[static_cast<size_t>(i) * w + j];
        });
    }
    return out;
}

Tensor Tape::gather_rows(const Tensor& a, std::vector<int> indices) {
    require_matrix(a, "gather_rows");
    const int c = a.cols();
    for (int idx : indices)
        if (idx < 0 || idx >= a.rows()) throw ShapeMismatch("gather_rows: index out of range");
    Tensor out = make({static_cast<int>(indices.size()), c}, a.node_->needs_grad);
    for (size_t i = 0; i < indices.size(); ++i)
        std::memcpy(out.node_->val.data() + i * c,
                    a.node_->val.data() + static_cast<size_t>(indices[i]) * c,
                    sizeof(double) * static_cast<size_t>(c));
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, indices, c] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < indices.size(); ++i)
                for (int j = 0; j < c; ++j)
                    an->grad[static_cast<size_t>(indices[i]) * c + j] += on->grad[i * c + j];
        });
    }
    return out;
}

Tensor Tape::repeat_row(const Tensor& a, int copies) {
    require_matrix(a, "repeat_row");
    if (a.rows() != 1) throw ShapeMismatch("repeat_row: expected a single row");
    const int c = a.cols();
    Tensor out = make({copies, c}, a.node_->needs_grad);
    for (int i = 0; i < copies; ++i)
        std::memcpy(out.node_->val.data() + static_cast<size_t>(i) * c, a.node_->val.data(),
                    sizeof(double) * static_cast<size_t>(c));
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, copies, c] {
            if (!has_grad(an)) return;
            column_sums_serial(on->grad.data(), an->grad.data(), copies, c);
        });
    }
    return out;
}

Tensor Tape::relu(const Tensor& a) {
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = a.node_->val[i] > 0.0 ? a.node_->val[i] : 0.0;
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < on->grad.size(); ++i)
                if (an->val[i] > 0.0) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor Tape::sigmoid(const Tensor& a) {
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = fast_sigmoid(a.node_->val[i]);
    check_finite(out, "sigmoid");
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < on->grad.size(); ++i) {
                double s = on->val[i];
                an->grad[i] += on->grad[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

Tensor Tape::log(const Tensor& a) {
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i) out.node_->val[i] = std::log(a.node_->val[i]);
    check_finite(out, "log");
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] / an->val[i];
        });
    }
    return out;
}

Tensor Tape::exp(const Tensor& a) {
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i) out.node_->val[i] = std::exp(a.node_->val[i]);
    check_finite(out, "exp");
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] * on->val[i];
        });
    }
    return out;
}

Tensor Tape::softmax_rows(const Tensor& a) {
    require_matrix(a, "softmax_rows");
    const int n = a.rows(), c = a.cols();
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (int i = 0; i < n; ++i) {
        const double* row = a.node_->val.data() + static_cast<size_t>(i) * c;
        double* orow = out.node_->val.data() + static_cast<size_t>(i) * c;
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double total = exp_shift_sum(row, orow, c, -mx);
        for (int j = 0; j < c; ++j) orow[j] /= total;
    }
    check_finite(out, "softmax");
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, n, c] {
            if (!has_grad(an)) return;
            for (int i = 0; i < n; ++i) {
                const double* y = on->val.data() + static_cast<size_t>(i) * c;
                const double* dy = on->grad.data() + static_cast<size_t>(i) * c;
                double* dx = an->grad.data() + static_cast<size_t>(i) * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += dy[j] * y[j];
                for (int j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
            }
        });
    }
    return out;
}

Tensor Tape::mean_rows(const Tensor& a) {
    require_matrix(a, "mean_rows");
    const int n = a.rows(), c = a.cols();
    Tensor out = make({1, c}, a.node_->needs_grad);
    column_sums_serial(a.node_->val.data(), out.node_->val.data(), n, c);
    for (int j = 0; j < c; ++j) out.node_->val[j] /= n;
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, n, c] {
            if (!has_grad(an)) return;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j)
                    an->grad[static_cast<size_t>(i) * c + j] += on->grad[j] / n;
        });
    }
    return out;
}

Tensor Tape::sum(const Tensor& a) {
    Tensor out = make({1}, a.node_->needs_grad);
    double total = 0.0;
    for (double v : a.node_->val) total += v;
    out.node_->val[0] = total;
    check_finite(out, "sum");
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
        });
    }
    return out;
}

Tensor Tape::minimum(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeMismatch("minimum: shape mismatch");
    Tensor out = make(a.shape(), a.node_->needs_grad || b.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = std::min(a.node_->val[i], b.node_->val[i]);
    if (out.node_->needs_grad) {
        auto an = a.node_, bn = b.node_, on = out.node_;
        record([an, bn, on] {
            for (size_t i = 0; i < on->grad.size(); ++i) {
                if (an->val[i] <= bn->val[i]) {
                    if (has_grad(an)) an->grad[i] += on->grad[i];
                } else if (has_grad(bn)) {
                    bn->grad[i] += on->grad[i];
                }
            }
        });
    }
    return out;
}

Tensor Tape::clamp(const Tensor& a, double lo, double hi) {
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = std::min(std::max(a.node_->val[i], lo), hi);
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, lo, hi] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < on->grad.size(); ++i)
                if (an->val[i] >= lo && an->val[i] <= hi) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor Tape::pick(const Tensor& a, int flat_index) {
    if (flat_index < 0 || flat_index >= static_cast<int>(a.size()))
        throw ShapeMismatch("pick: index out of range");
    Tensor out = make({1}, a.node_->needs_grad);
    out.node_->val[0] = a.node_->val[flat_index];
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, flat_index] {
            if (has_grad(an)) an->grad[flat_index] += on->grad[0];
        });
    }
    return out;
}

Tensor Tape::masked_fill(const Tensor& a, const DenseMatrix& allowed, double value) {
    require_matrix(a, "masked_fill");
    if (allowed.rows != a.rows() || allowed.cols != a.cols())
        throw ShapeMismatch("masked_fill: mask shape mismatch");
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = allowed.data[i] != 0.0 ? a.node_->val[i] : value;
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        const std::vector<double> mask = allowed.data;
        record([an, on, mask] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < on->grad.size(); ++i)
                if (mask[i] != 0.0) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor Tape::dropout(const Tensor& a, double p) {
    if (!dropout_on_ || p <= 0.0) return a;
    if (p >= 1.0) throw ConfigError("dropout rate must be below 1");
    const double keep = 1.0 - p;
    std::vector<char> mask(a.size());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (size_t i = 0; i < mask.size(); ++i) mask[i] = dist(dropout_rng_) < keep ? 1 : 0;
    Tensor out = make(a.shape(), a.node_->needs_grad);
    for (size_t i = 0; i < out.size(); ++i)
        out.node_->val[i] = mask[i] ? a.node_->val[i] / keep : 0.0;
    if (out.node_->needs_grad) {
        auto an = a.node_, on = out.node_;
        record([an, on, mask, keep] {
            if (!has_grad(an)) return;
            for (size_t i = 0; i < on->grad.size(); ++i)
                if (mask[i]) an->grad[i] += on->grad[i] / keep;
        });
    }
    return out;
}

Tensor Tape::layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
    require_matrix(a, "layer_norm");
    const int n = a.rows(), c = a.cols();
    if (static_cast<int>(gamma.size()) != c || static_cast<int>(beta.size()) != c)
        throw ShapeMismatch("layer_norm: affine params must match width");
    Tensor out = make(a.shape(), a.node_->needs_grad || gamma.node_->needs_grad ||
                                     beta.node_->needs_grad);
    std::vector<double> inv_std(n), xhat(static_cast<size_t>(n) * c);
    for (int i = 0; i < n; ++i) {
        const double* row = a.node_->val.data() + static_cast<size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += row[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= c;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < c; ++j) {
            double xh = (row[j] - mean) * inv_std[i];
            xhat[static_cast<size_t>(i) * c + j] = xh;
            out.node_->val[static_cast<size_t>(i) * c + j] =
                gamma.node_->val[j] * xh + beta.node_->val[j];
        }
    }
    check_finite(out, "layer_norm");
    if (out.node_->needs_grad) {
        auto an = a.node_, gn = gamma.node_, bn = beta.node_, on = out.node_;
        record([an, gn, bn, on, inv_std, xhat, n, c] {
            for (int i = 0; i < n; ++i) {
                const double* dy = on->grad.data() + static_cast<size_t>(i) * c;
                const double* xh = xhat.data() + static_cast<size_t>(i) * c;
                if (has_grad(gn) || has_grad(bn)) {
                    for (int j = 0; j < c; ++j) {
                        if (has_grad(gn)) gn->grad[j] += dy[j] * xh[j];
                        if (has_grad(bn)) bn->grad[j] += dy[j];
                    }
                }
                if (!has_grad(an)) continue;
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int j = 0; j < c; ++j) {
                    double dxh = dy[j] * gn->val[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xh[j];
                }
                mean_dxhat /= c;
                mean_dxhat_xhat /= c;
                double* dx = an->grad.data() + static_cast<size_t>(i) * c;
                for (int j = 0; j < c; ++j) {
                    double dxh = dy[j] * gn->val[j];
                    dx[j] += inv_std[i] * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
                }
            }
        });
    }
    return out;
}

Tensor Tape::batch_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                        ParamStore& ps, const std::string& prefix, double eps) {
    require_matrix(a, "batch_norm");
    const int n = a.rows(), c = a.cols();
    ParamEntry& rm = ps.at(prefix + ".running_mean");
    ParamEntry& rv = ps.at(prefix + ".running_var");
    if (static_cast<int>(rm.value.size()) != c || static_cast<int>(rv.value.size()) != c)
        throw ShapeMismatch("batch_norm: running stats must match width");

    Tensor out = make(a.shape(), a.node_->needs_grad || gamma.node_->needs_grad ||
                                     beta.node_->needs_grad);

    std::vector<double> mean(c, 0.0), var(c, 0.0), inv_std(c);
    if (ps.training()) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) mean[j] += a.node_->val[static_cast<size_t>(i) * c + j];
        for (int j = 0; j < c; ++j) mean[j] /= n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                double d = a.node_->val[static_cast<size_t>(i) * c + j] - mean[j];
                var[j] += d * d;
            }
        for (int j = 0; j < c; ++j) var[j] /= n;
        bn_stats_.push_back({prefix, mean, var});
    } else {
        mean = rm.value;
        var = rv.value;
    }
    for (int j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);

    std::vector<double> xhat(static_cast<size_t>(n) * c);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            double xh = (a.node_->val[static_cast<size_t>(i) * c + j] - mean[j]) * inv_std[j];
            xhat[static_cast<size_t>(i) * c + j] = xh;
            out.node_->val[static_cast<size_t>(i) * c + j] =
                gamma.node_->val[j] * xh + beta.node_->val[j];
        }
    check_finite(out, "batch_norm");

    if (out.node_->needs_grad) {
        const bool use_batch_stats = ps.training();
        auto an = a.node_, gn = gamma.node_, bn = beta.node_, on = out.node_;
        record([an, gn, bn, on, inv_std, xhat, n, c, use_batch_stats] {
            for (int j = 0; j < c; ++j) {
                double dgamma = 0.0, dbeta = 0.0, dxhat_sum = 0.0, dxhat_xhat_sum = 0.0;
                for (int i = 0; i < n; ++i) {
                    const size_t idx = static_cast<size_t>(i) * c + j;
                    dgamma += on->grad[idx] * xhat[idx];
                    dbeta += on->grad[idx];
                    double dxh = on->grad[idx] * gn->val[j];
                    dxhat_sum += dxh;
                    dxhat_xhat_sum += dxh * xhat[idx];
                }
                if (has_grad(gn)) gn->grad[j] += dgamma;
                if (has_grad(bn)) bn->grad[j] += dbeta;
                if (!has_grad(an)) continue;
                for (int i = 0; i < n; ++i) {
                    const size_t idx = static_cast<size_t>(i) * c + j;
                    double dxh = on->grad[idx] * gn->val[j];
                    if (use_batch_stats) {
                        an->grad[idx] += inv_std[j] *
                                         (dxh - dxhat_sum / n - xhat[idx] * dxhat_xhat_sum / n);
                    } else {
                        an->grad[idx] += inv_std[j] * dxh;  // running stats are constants
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::bilinear(const Tensor& x, const Tensor& w, const Tensor& y) {
    if (x.shape().size() != 2 || x.rows() != 1) throw ShapeMismatch("bilinear: x must be (1,d)");
    if (w.shape().size() != 3) throw ShapeMismatch("bilinear: w must be (d,d,F)");
    require_matrix(y, "bilinear");
    const int d = x.cols(), f = w.shape()[2], kk = y.rows();
    if (w.shape()[0] != d || w.shape()[1] != d || y.cols() != d)
        throw ShapeMismatch("bilinear: dimension mismatch");

    // tmp[j,f] = sum_i x[i] w[i,j,f]
    std::vector<double> tmp(static_cast<size_t>(d) * f, 0.0);
    for (int i = 0; i < d; ++i) {
        const double xi = x.node_->val[i];
        if (xi == 0.0) continue;
        const double* wrow = w.node_->val.data() + static_cast<size_t>(i) * d * f;
        for (size_t jf = 0; jf < tmp.size(); ++jf) tmp[jf] += xi * wrow[jf];
    }
    Tensor out = make({kk, f}, x.node_->needs_grad || w.node_->needs_grad || y.node_->needs_grad);
    asmatch::matmul(y.node_->val.data(), tmp.data(), out.node_->val.data(), kk, d, f);
    check_finite(out, "bilinear");

    if (out.node_->needs_grad) {
        auto xn = x.node_, wn = w.node_, yn = y.node_, on = out.node_;
        record([xn, wn, yn, on, tmp, d, f, kk] {
            // dY += dO * tmp^T
            if (has_grad(yn)) mm_acc_nt(on->grad.data(), tmp.data(), yn->grad.data(), kk, f, d);
            if (has_grad(wn) || has_grad(xn)) {
                // z[j,f] = sum_k y[k,j] dO[k,f]
                std::vector<double> z(static_cast<size_t>(d) * f, 0.0);
                mm_acc_tn(yn->val.data(), on->grad.data(), z.data(), kk, d, f);
                if (has_grad(wn)) {
                    for (int i = 0; i < d; ++i) {
                        const double xi = xn->val[i];
                        if (xi == 0.0) continue;
                        double* wrow = wn->grad.data() + static_cast<size_t>(i) * d * f;
                        for (size_t jf = 0; jf < z.size(); ++jf) wrow[jf] += xi * z[jf];
                    }
                }
                if (has_grad(xn)) {
                    for (int i = 0; i < d; ++i) {
                        const double* wrow = wn->val.data() + static_cast<size_t>(i) * d * f;
                        double acc = 0.0;
                        for (size_t jf = 0; jf < z.size(); ++jf) acc += wrow[jf] * z[jf];
                        xn->grad[i] += acc;
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const DenseMatrix* allowed, int heads) {
    require_matrix(q, "multihead_attention");
    require_matrix(k, "multihead_attention");
    require_matrix(v, "multihead_attention");
    const int n = q.rows(), m = k.rows(), d = q.cols();
    if (k.cols() != d || v.cols() != d || v.rows() != m)
        throw ShapeMismatch("multihead_attention: operand shapes disagree");
    if (heads <= 0 || d % heads != 0)
        throw ShapeMismatch("multihead_attention: heads must divide the width");
    if (allowed && (allowed->rows != n || allowed->cols != m))
        throw ShapeMismatch("multihead_attention: mask shape mismatch");

    const int hd = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    Tensor out = make({n, d}, q.node_->needs_grad || k.node_->needs_grad ||
                                  v.node_->needs_grad);
    // attention weights per head, kept for the backward pass
    auto weights = std::make_shared<std::vector<double>>(
        static_cast<size_t>(heads) * n * m);

    std::vector<double> scores(m);
    for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        for (int i = 0; i < n; ++i) {
            const double* qrow = q.node_->val.data() + static_cast<size_t>(i) * d + off;
            double mx = -1e300;
            for (int j = 0; j < m; ++j) {
                const double* krow = k.node_->val.data() + static_cast<size_t>(j) * d + off;
                double acc = 0.0;
                for (int l = 0; l < hd; ++l) acc += qrow[l] * krow[l];
                acc *= inv_sqrt;
                if (allowed && allowed->at(i, j) == 0.0) acc = -1e30;
                scores[j] = acc;
                mx = std::max(mx, acc);
            }
            double* arow = weights->data() + (static_cast<size_t>(h) * n + i) * m;
            double total = exp_shift_sum(scores.data(), arow, m, -mx);
            double inv_total = 1.0 / total;
            double* orow = out.node_->val.data() + static_cast<size_t>(i) * d + off;
            for (int l = 0; l < hd; ++l) orow[l] = 0.0;
            for (int j = 0; j < m; ++j) {
                arow[j] *= inv_total;
                const double a = arow[j];
                if (a == 0.0) continue;
                const double* vrow = v.node_->val.data() + static_cast<size_t>(j) * d + off;
                for (int l = 0; l < hd; ++l) orow[l] += a * vrow[l];
            }
        }
    }
    check_finite(out, "multihead_attention");

    if (out.node_->needs_grad) {
        auto qn = q.node_, kn = k.node_, vn = v.node_, on = out.node_;
        record([qn, kn, vn, on, weights, heads, n, m, d, hd, inv_sqrt] {
            std::vector<double> da(m), ds(m);
            for (int h = 0; h < heads; ++h) {
                const int off = h * hd;
                for (int i = 0; i < n; ++i) {
                    const double* dout = on->grad.data() + static_cast<size_t>(i) * d + off;
                    const double* arow =
                        weights->data() + (static_cast<size_t>(h) * n + i) * m;
                    double dot = 0.0;
                    for (int j = 0; j < m; ++j) {
                        const double* vrow =
                            vn->val.data() + static_cast<size_t>(j) * d + off;
                        double acc = 0.0;
                        for (int l = 0; l < hd; ++l) acc += dout[l] * vrow[l];
                        da[j] = acc;
                        dot += acc * arow[j];
                    }
                    for (int j = 0; j < m; ++j) ds[j] = arow[j] * (da[j] - dot);

                    if (has_grad(vn)) {
                        for (int j = 0; j < m; ++j) {
                            const double a = arow[j];
                            if (a == 0.0) continue;
                            double* dv = vn->grad.data() + static_cast<size_t>(j) * d + off;
                            for (int l = 0; l < hd; ++l) dv[l] += a * dout[l];
                        }
                    }
                    if (has_grad(qn)) {
                        double* dq = qn->grad.data() + static_cast<size_t>(i) * d + off;
                        for (int j = 0; j < m; ++j) {
                            const double s = ds[j] * inv_sqrt;
                            if (s == 0.0) continue;
                            const double* krow =
                                kn->val.data() + static_cast<size_t>(j) * d + off;
                            for (int l = 0; l < hd; ++l) dq[l] += s * krow[l];
                        }
                    }
                    if (has_grad(kn)) {
                        const double* qrow =
                            qn->val.data() + static_cast<size_t>(i) * d + off;
                        for (int j = 0; j < m; ++j) {
                            const double s = ds[j] * inv_sqrt;
                            if (s == 0.0) continue;
                            double* dk = kn->grad.data() + static_cast<size_t>(j) * d + off;
                            for (int l = 0; l < hd; ++l) dk[l] += s * qrow[l];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::gated_neighbor_sum(const Tensor& gate_a, const Tensor& gate_b,
                                const Tensor& values,
                                const std::vector<std::pair<int, int>>& edges) {
    require_matrix(gate_a, "gated_neighbor_sum");
    if (gate_a.shape() != gate_b.shape() || gate_a.shape() != values.shape())
        throw ShapeMismatch("gated_neighbor_sum: operand shapes differ");
    const int c = gate_a.cols();
    Tensor out = make(gate_a.shape(), gate_a.node_->needs_grad || gate_b.node_->needs_grad ||
                                          values.node_->needs_grad);

    auto forward_dir = [&](int u, int v) {
        const double* ga = gate_a.node_->val.data() + static_cast<size_t>(u) * c;
        const double* gb = gate_b.node_->val.data() + static_cast<size_t>(v) * c;
        const double* val = values.node_->val.data() + static_cast<size_t>(v) * c;
        double* o = out.node_->val.data() + static_cast<size_t>(u) * c;
        for (int j = 0; j < c; ++j) {
            double s = fast_sigmoid(ga[j] + gb[j]);
            o[j] += s * val[j];
        }
    };
    for (auto [u, v] : edges) {
        forward_dir(u, v);
        forward_dir(v, u);
    }
    check_finite(out, "gated_neighbor_sum");

    if (out.node_->needs_grad) {
        auto an = gate_a.node_, bn = gate_b.node_, vn = values.node_, on = out.node_;
        record([an, bn, vn, on, edges, c] {
            auto backward_dir = [&](int u, int v) {
                const double* ga = an->val.data() + static_cast<size_t>(u) * c;
                const double* gb = bn->val.data() + static_cast<size_t>(v) * c;
                const double* val = vn->val.data() + static_cast<size_t>(v) * c;
                const double* dout = on->grad.data() + static_cast<size_t>(u) * c;
                for (int j = 0; j < c; ++j) {
                    double s = fast_sigmoid(ga[j] + gb[j]);
                    double dgate = s * (1.0 - s) * val[j] * dout[j];
                    if (has_grad(an)) an->grad[static_cast<size_t>(u) * c + j] += dgate;
                    if (has_grad(bn)) bn->grad[static_cast<size_t>(v) * c + j] += dgate;
                    if (has_grad(vn)) vn->grad[static_cast<size_t>(v) * c + j] += s * dout[j];
                }
            };
            for (auto [u, v] : edges) {
                backward_dir(u, v);
                backward_dir(v, u);
            }
        });
    }
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (!grad_enabled_) throw ConfigError("backward on a gradient-free tape");
    if (loss.size() != 1) throw NotScalar("backward needs a scalar loss");
    if (!loss.node_->needs_grad) throw ConfigError("loss does not depend on parameters");
    loss.node_->grad[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    for (const auto& [name, tensor] : param_leaves_) {
        if (!has_grad(tensor.node_)) continue;
        auto [it, inserted] = param_grads_.try_emplace(name, tensor.node_->grad);
        if (!inserted)
            for (size_t i = 0; i < it->second.size(); ++i)
                it->second[i] += tensor.node_->grad[i];
    }
}

Tensor scaled_dot_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            const DenseMatrix* allowed) {
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt);
    if (allowed) scores = tape.masked_fill(scores, *allowed, -1e30);
    return tape.matmul(tape.softmax_rows(scores), v);
}

double grad_check(ParamStore& ps, const std::function<Tensor(Tape&)>& make_loss,
                  int min_coords, double eps, uint64_t seed) {
    if (ps.training())
        throw ConfigError("grad_check requires eval mode (dropout/batch-norm frozen)");

    Tape tape(true);
    Tensor loss = make_loss(tape);
    tape.backward(loss);
    const GradMap grads = tape.param_grads();

    std::vector<std::pair<std::string, size_t>> coords;
    for (const auto& [name, entry] : ps.entries()) {
        if (!entry.trainable) continue;
        for (size_t i = 0; i < entry.value.size(); ++i) coords.emplace_back(name, i);
    }
    Rng rng = make_rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    const size_t count = std::min(coords.size(), static_cast<size_t>(std::max(min_coords, 1)));

    auto eval_loss = [&] {
        Tape t(false);
        return make_loss(t).scalar();
    };

    double max_rel = 0.0;
    for (size_t ci = 0; ci < count; ++ci) {
        const auto& [name, idx] = coords[ci];
        double& slot = ps.at(name).value[idx];
        const double orig = slot;
        slot = orig + eps;
        const double lp = eval_loss();
        slot = orig - eps;
        const double lm = eval_loss();
        slot = orig;
        const double numeric = (lp - lm) / (2.0 * eps);
        double analytic = 0.0;
        auto it = grads.find(name);
        if (it != grads.end()) analytic = it->second[idx];
        const double rel = std::fabs(analytic - numeric) /
                           std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

namespace {

constexpr char kMagic[4] = {'A', 'S', 'M', 'T'};
constexpr uint32_t kVersion = 1;

struct Fnv1a {
    uint64_t state = 0xcbf29ce484222325ULL;
    void feed(const void* data, size_t len) {
        const unsigned char* bytes = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            state ^= bytes[i];
            state *= 0x100000001b3ULL;
        }
    }
};

class CheckedWriter {
public:
    explicit CheckedWriter(std::ofstream& out) : out_(out) {}
    void write(const void* data, size_t len) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        hash_.feed(data, len);
    }
    template <typename T>
    void write_pod(T v) {
        write(&v, sizeof(T));
    }
    uint64_t digest() const { return hash_.state; }

private:
    std::ofstream& out_;
    Fnv1a hash_;
};

class CheckedReader {
public:
    explicit CheckedReader(std::ifstream& in) : in_(in) {}
    void read(void* data, size_t len) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
        if (!in_) throw ParseError("checkpoint truncated");
        hash_.feed(data, len);
    }
    template <typename T>
    T read_pod() {
        T v;
        read(&v, sizeof(T));
        return v;
    }
    uint64_t digest() const { return hash_.state; }

private:
    std::ifstream& in_;
    Fnv1a hash_;
};

void write_doubles(CheckedWriter& w, const std::vector<double>& values) {
    for (double v : values) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        // little-endian byte order on disk
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
        w.write(bytes, 8);
    }
}

std::vector<double> read_doubles(CheckedReader& r, size_t count) {
    std::vector<double> values(count);
    for (size_t i = 0; i < count; ++i) {
        unsigned char bytes[8];
        r.read(bytes, 8);
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<uint64_t>(bytes[b]) << (8 * b);
        std::memcpy(&values[i], &bits, sizeof(double));
    }
    return values;
}

}  // namespace

void ParamStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    CheckedWriter w(out);
    w.write(kMagic, 4);
    w.write_pod<uint32_t>(kVersion);
    w.write_pod<uint32_t>(static_cast<uint32_t>(meta_.size()));
    w.write(meta_.data(), meta_.size());
    w.write_pod<int64_t>(adam_step_);
    w.write_pod<uint32_t>(static_cast<uint32_t>(entries_.size()));
    for (const auto& [name, entry] : entries_) {
        w.write_pod<uint32_t>(static_cast<uint32_t>(name.size()));
        w.write(name.data(), name.size());
        w.write_pod<uint8_t>(entry.trainable ? 1 : 0);
        w.write_pod<uint32_t>(static_cast<uint32_t>(entry.shape.size()));
        for (int d : entry.shape) w.write_pod<int64_t>(d);
        write_doubles(w, entry.value);
        if (entry.trainable) {
            write_doubles(w, entry.adam_m);
            write_doubles(w, entry.adam_v);
        }
    }
    uint64_t digest = w.digest();
    out.write(reinterpret_cast<const char*>(&digest), sizeof(digest));
    if (!out) throw IoError("short write on checkpoint " + path);
}

ParamStore ParamStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    CheckedReader r(in);
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a checkpoint file: " + path);
    uint32_t version = r.read_pod<uint32_t>();
    if (version != kVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));

    ParamStore ps;
    uint32_t meta_len = r.read_pod<uint32_t>();
    ps.meta_.resize(meta_len);
    if (meta_len > 0) r.read(ps.meta_.data(), meta_len);
    ps.adam_step_ = r.read_pod<int64_t>();
    uint32_t count = r.read_pod<uint32_t>();
    for (uint32_t e = 0; e < count; ++e) {
        uint32_t name_len = r.read_pod<uint32_t>();
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        ParamEntry entry;
        entry.trainable = r.read_pod<uint8_t>() != 0;
        uint32_t ndim = r.read_pod<uint32_t>();
        size_t total = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            entry.shape.push_back(static_cast<int>(r.read_pod<int64_t>()));
            total *= static_cast<size_t>(entry.shape.back());
        }
        entry.value = read_doubles(r, total);
        if (entry.trainable) {
            entry.adam_m = read_doubles(r, total);
            entry.adam_v = read_doubles(r, total);
        }
        ps.entries_.emplace(std::move(name), std::move(entry));
    }
    uint64_t expected = r.digest();
    uint64_t stored;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!in || stored != expected) throw ParseError("checkpoint checksum mismatch: " + path);
    return ps;
}

}  // namespace asmatch
