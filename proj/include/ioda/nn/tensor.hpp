#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ioda/errors.hpp"
#include "ioda/geometry.hpp"

// Minimal reverse-mode automatic differentiation over dense 2-D tensors
// (64-bit floats). Graphs are built per forward pass (define-by-run); calling
// backward() on a scalar loss accumulates gradients into every reachable
// trainable tensor. A graph and its tensors belong to one thread; frozen
// parameters may be shared read-only.

namespace ioda::nn {

struct TensorNode {
    int rows = 0;
    int cols = 0;
    std::vector<double> val;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool trainable = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backprop;

    std::size_t size() const { return val.size(); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
};

namespace detail {
// Whether newly created ops record graph structure. Disabled inside
// NoGradGuard scopes (cheap inference-only forwards).
inline thread_local bool grad_enabled = true;
}  // namespace detail

struct NoGradGuard {
    bool saved;
    NoGradGuard() : saved(detail::grad_enabled) { detail::grad_enabled = false; }
    ~NoGradGuard() { detail::grad_enabled = saved; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(int rows, int cols, bool trainable = false) {
        return filled(rows, cols, 0.0, trainable);
    }

    static Tensor filled(int rows, int cols, double value, bool trainable = false) {
        auto n = std::make_shared<TensorNode>();
        n->rows = rows;
        n->cols = cols;
        n->val.assign(static_cast<std::size_t>(rows) * cols, value);
        n->trainable = trainable;
        n->requires_grad = trainable;
        return Tensor(std::move(n));
    }

    static Tensor from_values(int rows, int cols, std::vector<double> values,
                              bool trainable = false) {
        if (values.size() != static_cast<std::size_t>(rows) * cols)
            throw UsageError("Tensor: value count does not match shape");
        auto n = std::make_shared<TensorNode>();
        n->rows = rows;
        n->cols = cols;
        n->val = std::move(values);
        n->trainable = trainable;
        n->requires_grad = trainable;
        return Tensor(std::move(n));
    }

    static Tensor scalar(double v) { return from_values(1, 1, {v}); }

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    std::size_t size() const { return node_->val.size(); }
    bool trainable() const { return node_->trainable; }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<double>& values() const { return node_->val; }
    std::vector<double>& mutable_values() { return node_->val; }
    const std::vector<double>& grad() const {
        const_cast<TensorNode*>(node_.get())->ensure_grad();
        return node_->grad;
    }

    double at(int r, int c) const { return node_->val[r * node_->cols + c]; }
    double scalar_value() const {
        if (size() != 1) throw UsageError("Tensor: scalar_value on non-scalar");
        return node_->val[0];
    }

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline Tensor make_op(int rows, int cols,
                      std::vector<std::shared_ptr<TensorNode>> parents) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->val.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    if (grad_enabled) {
        for (const auto& p : parents)
            if (p->requires_grad) n->requires_grad = true;
        if (n->requires_grad) n->parents = std::move(parents);
    }
    return Tensor(std::move(n));
}

inline void set_backprop(const Tensor& t, std::function<void()> fn) {
    if (t.node()->requires_grad) t.node()->backprop = std::move(fn);
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw UsageError(std::string(op) + ": shape mismatch (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

// C += A(MxK) * B(KxN). Each output row is produced by exactly one thread, so
// results are bit-identical across schedules.
inline void matmul_acc(const double* A, const double* B, double* C, int M, int K,
                       int N) {
#pragma omp parallel for schedule(static) if (static_cast<long>(M) * K * N > 16384)
    for (int i = 0; i < M; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * K;
        double* c = C + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            double av = a[k];
            const double* b = B + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C += A(MxN) * B(KxN)^T -> MxK
inline void matmul_nt_acc(const double* A, const double* B, double* C, int M,
                          int N, int K) {
#pragma omp parallel for schedule(static) if (static_cast<long>(M) * K * N > 16384)
    for (int i = 0; i < M; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * N;
        double* c = C + static_cast<std::size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const double* b = B + static_cast<std::size_t>(k) * N;
            double acc = 0.0;
            for (int j = 0; j < N; ++j) acc += a[j] * b[j];
            c[k] += acc;
        }
    }
}

// C += A(MxK)^T * B(MxN) -> KxN
inline void matmul_tn_acc(const double* A, const double* B, double* C, int M,
                          int K, int N) {
#pragma omp parallel for schedule(static) if (static_cast<long>(M) * K * N > 16384)
    for (int k = 0; k < K; ++k) {
        double* c = C + static_cast<std::size_t>(k) * N;
        for (int i = 0; i < M; ++i) {
            double av = A[static_cast<std::size_t>(i) * K + k];
            const double* b = B + static_cast<std::size_t>(i) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw UsageError("matmul: inner dimensions differ (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    Tensor out = detail::make_op(a.rows(), b.cols(), {a.node(), b.node()});
    detail::matmul_acc(a.values().data(), b.values().data(),
                       out.node()->val.data(), a.rows(), a.cols(), b.cols());
    auto an = a.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, bn, on] {
        if (an->requires_grad) {
            an->ensure_grad();
            detail::matmul_nt_acc(on->grad.data(), bn->val.data(), an->grad.data(),
                                  an->rows, bn->cols, an->cols);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            detail::matmul_tn_acc(an->val.data(), on->grad.data(), bn->grad.data(),
                                  an->rows, an->cols, bn->cols);
        }
    });
    return out;
}

// Elementwise addition. The right operand may be a 1 x cols row vector
// (broadcast over rows) or a 1 x 1 scalar (broadcast over everything).
inline Tensor add(const Tensor& a, const Tensor& b) {
    bool row_bcast = (b.rows() == 1 && b.cols() == a.cols() && a.rows() != 1);
    bool scalar_bcast = (b.size() == 1 && a.size() != 1);
    if (!row_bcast && !scalar_bcast) detail::check_same_shape(a, b, "add");
    Tensor out = detail::make_op(a.rows(), a.cols(), {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.node()->val;
    if (scalar_bcast) {
        for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[0];
    } else if (row_bcast) {
        int cols = a.cols();
        for (int r = 0; r < a.rows(); ++r)
            for (int c = 0; c < cols; ++c)
                ov[r * cols + c] = av[r * cols + c] + bv[c];
    } else {
        for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
    }
    auto an = a.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, bn, on, row_bcast, scalar_bcast] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            if (scalar_bcast) {
                double s = 0.0;
                for (double g : on->grad) s += g;
                bn->grad[0] += s;
            } else if (row_bcast) {
                int cols = on->cols;
                for (int r = 0; r < on->rows; ++r)
                    for (int c = 0; c < cols; ++c)
                        bn->grad[c] += on->grad[r * cols + c];
            } else {
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    bn->grad[i] += on->grad[i];
            }
        }
    });
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor out = detail::make_op(a.rows(), a.cols(), {a.node(), b.node()});
    for (std::size_t i = 0; i < a.size(); ++i)
        out.node()->val[i] = a.values()[i] - b.values()[i];
    auto an = a.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, bn, on] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                bn->grad[i] -= on->grad[i];
        }
    });
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor out = detail::make_op(a.rows(), a.cols(), {a.node(), b.node()});
    for (std::size_t i = 0; i < a.size(); ++i)
        out.node()->val[i] = a.values()[i] * b.values()[i];
    auto an = a.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, bn, on] {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] * bn->val[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                bn->grad[i] += on->grad[i] * an->val[i];
        }
    });
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out = detail::make_op(a.rows(), a.cols(), {a.node()});
    for (std::size_t i = 0; i < a.size(); ++i) out.node()->val[i] = a.values()[i] * s;
    auto an = a.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, on, s] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
            an->grad[i] += on->grad[i] * s;
    });
    return out;
}

namespace detail {
template <typename Fwd, typename Dfn>
inline Tensor unary_op(const Tensor& a, Fwd fwd, Dfn dval) {
    Tensor out = make_op(a.rows(), a.cols(), {a.node()});
    for (std::size_t i = 0; i < a.size(); ++i) out.node()->val[i] = fwd(a.values()[i]);
    auto an = a.node().get();
    auto on = out.node().get();
    set_backprop(out, [an, on, dval] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
            an->grad[i] += on->grad[i] * dval(an->val[i], on->val[i]);
    });
    return out;
}
}  // namespace detail

inline Tensor tanh(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_op(
        a,
        [](double x) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor softplus(const Tensor& a) {
    return detail::unary_op(
        a,
        [](double x) {
            return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        },
        [](double x, double) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        });
}

// Elementwise reduction of angles to (-pi, pi]. Gradient passes through
// unchanged (the wrap is a shift almost everywhere).
inline Tensor wrap_to_pi(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return wrap_angle(x); }, [](double, double) { return 1.0; });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat_rows: no inputs");
    int cols = parts[0].cols();
    int rows = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const Tensor& p : parts) {
        if (p.cols() != cols) throw UsageError("concat_rows: column counts differ");
        rows += p.rows();
        parents.push_back(p.node());
    }
    Tensor out = detail::make_op(rows, cols, parents);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        std::copy(p.values().begin(), p.values().end(),
                  out.node()->val.begin() + offset);
        offset += p.size();
    }
    auto on = out.node().get();
    std::vector<TensorNode*> raw;
    for (const Tensor& p : parts) raw.push_back(p.node().get());
    detail::set_backprop(out, [raw, on] {
        std::size_t offset = 0;
        for (TensorNode* p : raw) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < p->val.size(); ++i)
                    p->grad[i] += on->grad[offset + i];
            }
            offset += p->val.size();
        }
    });
    return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat_cols: no inputs");
    int rows = parts[0].rows();
    int cols = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const Tensor& p : parts) {
        if (p.rows() != rows) throw UsageError("concat_cols: row counts differ");
        cols += p.cols();
        parents.push_back(p.node());
    }
    Tensor out = detail::make_op(rows, cols, parents);
    int col_off = 0;
    for (const Tensor& p : parts) {
        for (int r = 0; r < rows; ++r)
            std::copy(p.values().begin() + static_cast<std::size_t>(r) * p.cols(),
                      p.values().begin() + static_cast<std::size_t>(r + 1) * p.cols(),
                      out.node()->val.begin() + static_cast<std::size_t>(r) * cols + col_off);
        col_off += p.cols();
    }
    auto on = out.node().get();
    std::vector<std::pair<TensorNode*, int>> raw;
    col_off = 0;
    for (const Tensor& p : parts) {
        raw.emplace_back(p.node().get(), col_off);
        col_off += p.cols();
    }
    detail::set_backprop(out, [raw, on] {
        for (auto [p, off] : raw) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (int r = 0; r < p->rows; ++r)
                for (int c = 0; c < p->cols; ++c)
                    p->grad[r * p->cols + c] += on->grad[r * on->cols + off + c];
        }
    });
    return out;
}

inline Tensor slice_rows(const Tensor& a, int r0, int r1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw UsageError("slice_rows: bad range [" + std::to_string(r0) + ", " +
                         std::to_string(r1) + ") for " + std::to_string(a.rows()) +
                         " rows");
    Tensor out = detail::make_op(r1 - r0, a.cols(), {a.node()});
    std::copy(a.values().begin() + static_cast<std::size_t>(r0) * a.cols(),
              a.values().begin() + static_cast<std::size_t>(r1) * a.cols(),
              out.node()->val.begin());
    auto an = a.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, on, r0] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        std::size_t base = static_cast<std::size_t>(r0) * an->cols;
        for (std::size_t i = 0; i < on->grad.size(); ++i)
            an->grad[base + i] += on->grad[i];
    });
    return out;
}

inline Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw UsageError("slice_cols: bad range [" + std::to_string(c0) + ", " +
                         std::to_string(c1) + ") for " + std::to_string(a.cols()) +
                         " cols");
    Tensor out = detail::make_op(a.rows(), c1 - c0, {a.node()});
    for (int r = 0; r < a.rows(); ++r)
        std::copy(a.values().begin() + static_cast<std::size_t>(r) * a.cols() + c0,
                  a.values().begin() + static_cast<std::size_t>(r) * a.cols() + c1,
                  out.node()->val.begin() + static_cast<std::size_t>(r) * (c1 - c0));
    auto an = a.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, on, c0] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int r = 0; r < on->rows; ++r)
            for (int c = 0; c < on->cols; ++c)
                an->grad[r * an->cols + c0 + c] += on->grad[r * on->cols + c];
    });
    return out;
}

inline Tensor sum(const Tensor& a) {
    Tensor out = detail::make_op(1, 1, {a.node()});
    double s = 0.0;
    for (double v : a.values()) s += v;
    out.node()->val[0] = s;
    auto an = a.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, on] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
    });
    return out;
}

inline Tensor mean(const Tensor& a) {
    Tensor out = detail::make_op(1, 1, {a.node()});
    double s = 0.0;
    for (double v : a.values()) s += v;
    double inv = 1.0 / static_cast<double>(a.size());
    out.node()->val[0] = s * inv;
    auto an = a.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, on, inv] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < an->grad.size(); ++i)
            an->grad[i] += on->grad[0] * inv;
    });
    return out;
}

inline Tensor mse(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mse");
    Tensor out = detail::make_op(1, 1, {a.node(), b.node()});
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    double inv = 1.0 / static_cast<double>(a.size());
    out.node()->val[0] = s * inv;
    auto an = a.node().get();
    auto bn = b.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, bn, on, inv] {
        double g = on->grad[0] * 2.0 * inv;
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < an->grad.size(); ++i)
                an->grad[i] += g * (an->val[i] - bn->val[i]);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < bn->grad.size(); ++i)
                bn->grad[i] -= g * (an->val[i] - bn->val[i]);
        }
    });
    return out;
}

// Least-squares deviation from a constant: mean((a - c)^2).
inline Tensor lsq(const Tensor& a, double c) {
    Tensor out = detail::make_op(1, 1, {a.node()});
    double s = 0.0;
    for (double v : a.values()) {
        double d = v - c;
        s += d * d;
    }
    double inv = 1.0 / static_cast<double>(a.size());
    out.node()->val[0] = s * inv;
    auto an = a.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [an, on, c, inv] {
        if (!an->requires_grad) return;
        an->ensure_grad();
        double g = on->grad[0] * 2.0 * inv;
        for (std::size_t i = 0; i < an->grad.size(); ++i)
            an->grad[i] += g * (an->val[i] - c);
    });
    return out;
}

// Numerically stable binary cross-entropy on logits, mean-reduced.
inline Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
    detail::check_same_shape(logits, targets, "bce_with_logits");
    Tensor out = detail::make_op(1, 1, {logits.node(), targets.node()});
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double x = logits.values()[i];
        double t = targets.values()[i];
        s += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    double inv = 1.0 / static_cast<double>(logits.size());
    out.node()->val[0] = s * inv;
    auto ln = logits.node().get();
    auto tn = targets.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [ln, tn, on, inv] {
        double g = on->grad[0] * inv;
        if (ln->requires_grad) {
            ln->ensure_grad();
            for (std::size_t i = 0; i < ln->grad.size(); ++i) {
                double x = ln->val[i];
                double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                      : std::exp(x) / (1.0 + std::exp(x));
                ln->grad[i] += g * (sig - tn->val[i]);
            }
        }
        if (tn->requires_grad) {
            tn->ensure_grad();
            for (std::size_t i = 0; i < tn->grad.size(); ++i)
                tn->grad[i] += g * (-ln->val[i]);
        }
    });
    return out;
}

// Copy of the values with the graph connection severed.
inline Tensor detach(const Tensor& a) {
    auto n = std::make_shared<TensorNode>();
    n->rows = a.rows();
    n->cols = a.cols();
    n->val = a.values();
    return Tensor(std::move(n));
}

// 1-D strided convolution over a time-major sequence tensor.
// Input x is (T*B) x c_in with row t*B + b; weight is (k*c_in) x c_out with the
// tap-major layout [tap 0 channels..., tap 1 channels, ...]; bias is
// 1 x c_out. Output is (T_out*B) x c_out with T_out = (T - k)/stride + 1.
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     int batch, int time_steps, int kernel, int stride) {
    if (x.rows() != batch * time_steps)
        throw UsageError("conv1d: input rows do not match batch*time");
    int c_in = x.cols();
    if (weight.rows() != kernel * c_in)
        throw UsageError("conv1d: weight rows must be kernel*c_in");
    int c_out = weight.cols();
    if (bias.rows() != 1 || bias.cols() != c_out)
        throw UsageError("conv1d: bias must be 1 x c_out");
    if (time_steps < kernel) throw UsageError("conv1d: sequence shorter than kernel");
    int t_out = (time_steps - kernel) / stride + 1;

    Tensor out = detail::make_op(t_out * batch, c_out,
                                 {x.node(), weight.node(), bias.node()});
    auto& ov = out.node()->val;
    const auto& xv = x.values();
    const auto& wv = weight.values();
    const auto& bv = bias.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = bv[i % c_out];
    for (int to = 0; to < t_out; ++to)
        for (int j = 0; j < kernel; ++j)
            detail::matmul_acc(xv.data() + static_cast<std::size_t>((to * stride + j)) * batch * c_in,
                               wv.data() + static_cast<std::size_t>(j) * c_in * c_out,
                               ov.data() + static_cast<std::size_t>(to) * batch * c_out,
                               batch, c_in, c_out);

    auto xn = x.node().get();
    auto wn = weight.node().get();
    auto bn = bias.node().get();
    auto on = out.node().get();
    detail::set_backprop(out, [xn, wn, bn, on, batch, kernel, stride, c_in, c_out, t_out] {
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int r = 0; r < on->rows; ++r)
                for (int c = 0; c < c_out; ++c)
                    bn->grad[c] += on->grad[r * c_out + c];
        }
        for (int to = 0; to < t_out; ++to) {
            const double* gy = on->grad.data() + static_cast<std::size_t>(to) * batch * c_out;
            for (int j = 0; j < kernel; ++j) {
                std::size_t x_off = static_cast<std::size_t>(to * stride + j) * batch * c_in;
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    detail::matmul_nt_acc(gy, wn->val.data() + static_cast<std::size_t>(j) * c_in * c_out,
                                          xn->grad.data() + x_off, batch, c_out, c_in);
                }
                if (wn->requires_grad) {
                    wn->ensure_grad();
                    detail::matmul_tn_acc(xn->val.data() + x_off, gy,
                                          wn->grad.data() + static_cast<std::size_t>(j) * c_in * c_out,
                                          batch, c_in, c_out);
                }
            }
        }
    });
    return out;
}

// Reverse-topological gradient accumulation from a scalar loss. Iterative, so
// arbitrarily deep recurrent graphs are fine.
inline void backward(const Tensor& loss) {
    if (loss.size() != 1) throw UsageError("backward: loss must be scalar");
    if (!loss.node()->requires_grad) return;

    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        (*it)->ensure_grad();
        if ((*it)->backprop) (*it)->backprop();
    }
}

// Break a graph's parent links so teardown is iterative and memory is
// reclaimed promptly. Parameter leaves are untouched.
inline void release_graph(const Tensor& root) {
    if (!root.defined()) return;
    std::vector<std::shared_ptr<TensorNode>> pending{root.node()};
    std::unordered_set<TensorNode*> seen{root.node().get()};
    while (!pending.empty()) {
        std::shared_ptr<TensorNode> node = std::move(pending.back());
        pending.pop_back();
        for (auto& p : node->parents)
            if (seen.insert(p.get()).second) pending.push_back(p);
        node->parents.clear();
        node->backprop = nullptr;
    }
}

}  // namespace ioda::nn
