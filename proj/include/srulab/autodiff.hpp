#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "srulab/errors.hpp"
#include "srulab/tensor.hpp"

namespace srulab {

using NodeId = std::size_t;

class Tape;

/// Handle to a node recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    NodeId id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Define-by-run reverse-mode record. Nodes are appended in evaluation order,
/// so node ids are a topological order of the graph. A tape and the tensors it
/// owns must stay on one thread.
class Tape {
public:
    /// Receives the adjoint of the node's output; accumulates into its inputs.
    using BackwardFn = std::function<void(const Tensor& out_grad, Tape& tape, NodeId self)>;

    Var leaf(Tensor value) { return push("leaf", std::move(value), {}, {}, true); }
    Var constant(Tensor value) { return push("constant", std::move(value), {}, {}, false); }

    /// Records an operation. `backward` may be empty when no input needs a gradient.
    Var push(std::string op, Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
        bool needs = false;
        for (NodeId in : inputs) {
            if (in >= nodes_.size()) throw ContractError(op + ": input node " + std::to_string(in) + " not on tape");
            needs = needs || nodes_[in].needs_grad;
        }
        if (!value.all_finite()) throw NonFiniteError(op + " produced a non-finite value");
        return push(std::move(op), std::move(value), std::move(inputs), needs ? std::move(backward) : BackwardFn{},
                    needs);
    }

    std::size_t size() const { return nodes_.size(); }
    const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
    const std::string& op(NodeId id) const { return nodes_.at(id).op; }
    const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
    bool needs_grad(NodeId id) const { return nodes_.at(id).needs_grad; }

    /// Reverse sweep from a scalar loss. Adjoints accumulate by summation over
    /// fan-out. Afterwards `grad(id)` is defined for every node (zeros where
    /// the loss does not depend on it).
    void backward(Var loss) {
        if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
        if (value(loss.id).size() != 1)
            throw ContractError("backward: loss must be scalar, got shape " + shape_string(value(loss.id).shape()));
        grads_.assign(nodes_.size(), Tensor{});
        grads_[loss.id] = Tensor(value(loss.id).shape(), 1.0);
        for (NodeId k = loss.id + 1; k-- > 0;) {
            if (grads_[k].empty() || !nodes_[k].backward) continue;
            nodes_[k].backward(grads_[k], *this, k);
        }
    }

    /// Adjoint of a node after backward(); zeros for unreachable nodes.
    Tensor grad(NodeId id) const {
        if (id < grads_.size() && !grads_[id].empty()) return grads_[id];
        return Tensor(value(id).shape(), 0.0);
    }
    Tensor grad(Var v) const { return grad(v.id); }

    /// Used by backward functions: adds `g` into the adjoint of `id`.
    void accumulate(NodeId id, const Tensor& g) {
        if (!nodes_[id].needs_grad) return;
        auto& slot = grads_[id];
        if (slot.empty()) {
            value(id).require_same_shape(g, "accumulate");
            slot = g;
        } else {
            slot += g;
        }
    }
    void accumulate(NodeId id, Tensor&& g) {
        if (!nodes_[id].needs_grad) return;
        auto& slot = grads_[id];
        if (slot.empty()) {
            value(id).require_same_shape(g, "accumulate");
            slot = std::move(g);
        } else {
            slot += g;
        }
    }

private:
    struct Node {
        std::string op;
        Tensor value;
        std::vector<NodeId> inputs;
        BackwardFn backward;
        bool needs_grad = false;
    };

    Var push(std::string op, Tensor value, std::vector<NodeId> inputs, BackwardFn backward, bool needs) {
        if (!value.all_finite()) throw NonFiniteError(op + " produced a non-finite value");
        nodes_.push_back(Node{std::move(op), std::move(value), std::move(inputs), std::move(backward), needs});
        return Var{this, nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

inline ConstMap as_matrix(const Tensor& t) {
    return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline MutMap as_matrix(Tensor& t) {
    return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

inline void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
}

// out = a*b, a·bᵀ or aᵀ·b depending on flags, all rank-2.
inline Tensor gemm(const Tensor& a, bool ta, const Tensor& b, bool tb) {
    const auto am = as_matrix(a);
    const auto bm = as_matrix(b);
    const auto rows = ta ? a.cols() : a.rows();
    const auto cols = tb ? b.rows() : b.cols();
    Tensor out({rows, cols});
    auto om = as_matrix(out);
    if (!ta && !tb) om.noalias() = am * bm;
    else if (!ta && tb) om.noalias() = am * bm.transpose();
    else if (ta && !tb) om.noalias() = am.transpose() * bm;
    else om.noalias() = am.transpose() * bm.transpose();
    return out;
}

template <typename F, typename DF>
Var unary(const char* name, Var a, F f, DF df_from_out_and_in) {
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return a.tape->push(name, std::move(y), {a.id}, [a, df_from_out_and_in](const Tensor& g, Tape& tape, NodeId) {
        const Tensor& in = tape.value(a.id);
        Tensor dx(in.shape());
        for (std::size_t i = 0; i < in.size(); ++i) dx[i] = g[i] * df_from_out_and_in(in[i]);
        tape.accumulate(a.id, std::move(dx));
    });
}

}  // namespace detail

/// Matrix product a[m×k]·b[k×n].
inline Var matmul(Var a, Var b) {
    detail::require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    detail::require_rank2(av, "matmul");
    detail::require_rank2(bv, "matmul");
    if (av.dim(1) != bv.dim(0))
        throw DimensionError("matmul: inner dimensions differ " + shape_string(av.shape()) + " · " +
                             shape_string(bv.shape()));
    return a.tape->push("matmul", detail::gemm(av, false, bv, false), {a.id, b.id},
                        [a, b](const Tensor& g, Tape& tape, NodeId) {
                            if (tape.needs_grad(a.id)) tape.accumulate(a.id, detail::gemm(g, false, b.value(), true));
                            if (tape.needs_grad(b.id)) tape.accumulate(b.id, detail::gemm(a.value(), true, g, false));
                        });
}

/// a[m×k]·bᵀ for b[n×k]; the batched form of a weight matrix applied to row vectors.
inline Var matmul_bt(Var a, Var b) {
    detail::require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    detail::require_rank2(av, "matmul_bt");
    detail::require_rank2(bv, "matmul_bt");
    if (av.dim(1) != bv.dim(1))
        throw DimensionError("matmul_bt: inner dimensions differ " + shape_string(av.shape()) + " · " +
                             shape_string(bv.shape()) + "ᵀ");
    return a.tape->push("matmul_bt", detail::gemm(av, false, bv, true), {a.id, b.id},
                        [a, b](const Tensor& g, Tape& tape, NodeId) {
                            if (tape.needs_grad(a.id)) tape.accumulate(a.id, detail::gemm(g, false, b.value(), false));
                            if (tape.needs_grad(b.id)) tape.accumulate(b.id, detail::gemm(g, true, a.value(), false));
                        });
}

/// Elementwise sum. Also accepts a matrix plus a rank-1 bias broadcast over rows.
inline Var add(Var a, Var b) {
    detail::require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape() == bv.shape()) {
        Tensor y = av;
        y += bv;
        return a.tape->push("add", std::move(y), {a.id, b.id}, [a, b](const Tensor& g, Tape& tape, NodeId) {
            tape.accumulate(a.id, g);
            tape.accumulate(b.id, g);
        });
    }
    if (av.rank() == 2 && bv.rank() == 1 && av.dim(1) == bv.dim(0)) {
        Tensor y = av;
        const std::size_t rows = av.dim(0), cols = av.dim(1);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) y(r, c) += bv[c];
        return a.tape->push("add_bias", std::move(y), {a.id, b.id}, [a, b, rows, cols](const Tensor& g, Tape& tape, NodeId) {
            tape.accumulate(a.id, g);
            if (tape.needs_grad(b.id)) {
                Tensor db({cols});
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) db[c] += g(r, c);
                tape.accumulate(b.id, std::move(db));
            }
        });
    }
    throw DimensionError("add: incompatible shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
}

inline Var sub(Var a, Var b) {
    detail::require_same_tape(a, b);
    a.value().require_same_shape(b.value(), "sub");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
    return a.tape->push("sub", std::move(y), {a.id, b.id}, [a, b](const Tensor& g, Tape& tape, NodeId) {
        tape.accumulate(a.id, g);
        if (tape.needs_grad(b.id)) {
            Tensor n = g;
            for (auto& v : n.values()) v = -v;
            tape.accumulate(b.id, std::move(n));
        }
    });
}

/// Hadamard product.
inline Var mul(Var a, Var b) {
    detail::require_same_tape(a, b);
    a.value().require_same_shape(b.value(), "mul");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
    return a.tape->push("mul", std::move(y), {a.id, b.id}, [a, b](const Tensor& g, Tape& tape, NodeId) {
        if (tape.needs_grad(a.id)) {
            Tensor da = g;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= b.value()[i];
            tape.accumulate(a.id, std::move(da));
        }
        if (tape.needs_grad(b.id)) {
            Tensor db = g;
            for (std::size_t i = 0; i < db.size(); ++i) db[i] *= a.value()[i];
            tape.accumulate(b.id, std::move(db));
        }
    });
}

inline Var scale(Var a, double c) {
    Tensor y = a.value();
    for (auto& v : y.values()) v *= c;
    return a.tape->push("scale", std::move(y), {a.id}, [a, c](const Tensor& g, Tape& tape, NodeId) {
        Tensor d = g;
        for (auto& v : d.values()) v *= c;
        tape.accumulate(a.id, std::move(d));
    });
}

/// Joins along the last axis. Rank-1 inputs give a rank-1 result; rank-2
/// inputs must share the row count.
inline Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    Tape* tape = parts.front().tape;
    const Tensor& first = parts.front().value();
    const std::size_t rank = first.rank();
    if (rank > 2) throw DimensionError("concat: rank > 2 is not supported");
    const std::size_t rows = first.rows();
    std::vector<std::size_t> widths;
    std::vector<NodeId> ids;
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.tape != tape) throw ContractError("concat: operands recorded on different tapes");
        const Tensor& v = p.value();
        if (v.rank() != rank || v.rows() != rows)
            throw DimensionError("concat: incompatible shape " + shape_string(v.shape()));
        widths.push_back(v.cols());
        ids.push_back(p.id);
        total += v.cols();
    }
    Tensor y(rank == 1 ? Shape{total} : Shape{rows, total});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(r * widths[k]), widths[k],
                        y.data().begin() + static_cast<std::ptrdiff_t>(r * total + offset));
        offset += widths[k];
    }
    return tape->push("concat", std::move(y), ids, [ids, widths, rows, total](const Tensor& g, Tape& t, NodeId) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (t.needs_grad(ids[k])) {
                Tensor d(t.value(ids[k]).shape());
                for (std::size_t r = 0; r < rows; ++r)
                    std::copy_n(g.data().begin() + static_cast<std::ptrdiff_t>(r * total + off), widths[k],
                                d.data().begin() + static_cast<std::ptrdiff_t>(r * widths[k]));
                t.accumulate(ids[k], std::move(d));
            }
            off += widths[k];
        }
    });
}

/// Columns [begin, begin+count) of a matrix (or entries of a vector).
inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    const Tensor& x = a.value();
    const std::size_t rows = x.rows(), cols = x.cols();
    if (count == 0 || begin + count > cols)
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") outside " + std::to_string(cols) + " columns");
    Tensor y(x.rank() == 1 ? Shape{count} : Shape{rows, count});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < count; ++c) y[r * count + c] = x[r * cols + begin + c];
    return a.tape->push("slice_cols", std::move(y), {a.id}, [a, begin, count, rows, cols](const Tensor& g, Tape& t, NodeId) {
        Tensor d(t.value(a.id).shape());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < count; ++c) d[r * cols + begin + c] = g[r * count + c];
        t.accumulate(a.id, std::move(d));
    });
}

/// max(x, 0); the subgradient at exactly 0 is 0.
inline Var relu(Var a) {
    return detail::unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
    return detail::unary(
        "sigmoid", a, [](double x) { return sigmoid(x); },
        [](double x) {
            const double s = sigmoid(x);
            return s * (1.0 - s);
        });
}

inline Var tanh(Var a) {
    return detail::unary(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        });
}

/// Row-wise softmax (a vector is one row).
inline Var softmax(Var a) {
    const Tensor& x = a.value();
    const std::size_t rows = x.rows(), cols = x.cols();
    Tensor y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        double m = x[r * cols];
        for (std::size_t c = 1; c < cols; ++c) m = std::max(m, x[r * cols + c]);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) z += (y[r * cols + c] = std::exp(x[r * cols + c] - m));
        for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] /= z;
    }
    return a.tape->push("softmax", std::move(y), {a.id}, [a, rows, cols](const Tensor& g, Tape& t, NodeId self) {
        const Tensor& s = t.value(self);
        Tensor d(s.shape());
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * s[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] = s[r * cols + c] * (g[r * cols + c] - dot);
        }
        t.accumulate(a.id, std::move(d));
    });
}

inline Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return a.tape->push("sum", Tensor::scalar(s), {a.id}, [a](const Tensor& g, Tape& t, NodeId) {
        t.accumulate(a.id, Tensor(t.value(a.id).shape(), g[0]));
    });
}

inline Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return a.tape->push("mean", Tensor::scalar(s / n), {a.id}, [a, n](const Tensor& g, Tape& t, NodeId) {
        t.accumulate(a.id, Tensor(t.value(a.id).shape(), g[0] / n));
    });
}

inline Var sq_norm(Var a) {
    return a.tape->push("sq_norm", Tensor::scalar(sq_norm(a.value())), {a.id}, [a](const Tensor& g, Tape& t, NodeId) {
        Tensor d = t.value(a.id);
        for (auto& v : d.values()) v *= 2.0 * g[0];
        t.accumulate(a.id, std::move(d));
    });
}

}  // namespace srulab
