// Reverse-mode automatic differentiation over dense 2-D tensors.
//
// Graphs are built eagerly by the op functions below. Every op's backward is
// itself expressed through these ops, so gradients can be differentiated
// again: grad(..., create_graph=true) returns tensors that participate in a
// new graph. That second-order path is what the meta-learner uses to
// differentiate through its inner gradient step.
//
// Values are row-major doubles; matrix products go through Eigen maps.
// Thread safety: graphs are plain shared_ptr structures with no global state
// except a thread_local grad-mode flag, so independent graphs may be built
// and differentiated concurrently on different threads.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "mind/core.hpp"

namespace mind::ad {

class Tensor;

namespace detail {

struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Maps the cotangent of this node to cotangents of the parents.
    std::function<std::vector<Tensor>(const Tensor&)> backward;

    Node() = default;
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    ~Node() {
        // Iterative teardown; recursive shared_ptr destruction would blow the
        // stack on long GRU chains.
        std::vector<std::shared_ptr<Node>> stack;
        stack.swap(parents);
        backward = nullptr;
        while (!stack.empty()) {
            std::shared_ptr<Node> p = std::move(stack.back());
            stack.pop_back();
            if (p && p.use_count() == 1) {
                for (auto& q : p->parents) stack.push_back(std::move(q));
                p->parents.clear();
                p->backward = nullptr;
            }
        }
    }
};

inline thread_local bool grad_mode = true;

}  // namespace detail

// Disables graph recording in a scope (used for plain first-order backward
// passes and for inference).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::grad_mode) { detail::grad_mode = false; }
    ~NoGradGuard() { detail::grad_mode = prev; }
};

struct GradModeGuard {
    bool prev;
    explicit GradModeGuard(bool on) : prev(detail::grad_mode) { detail::grad_mode = on; }
    ~GradModeGuard() { detail::grad_mode = prev; }
};

class Tensor {
  public:
    std::shared_ptr<detail::Node> n;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> node) : n(std::move(node)) {}

    static Tensor from(std::vector<double> data, int rows, int cols, bool requires_grad = false) {
        require(static_cast<size_t>(rows) * cols == data.size(), "Tensor::from: size mismatch");
        auto node = std::make_shared<detail::Node>();
        node->rows = rows;
        node->cols = cols;
        node->v = std::move(data);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor zeros(int rows, int cols) {
        return from(std::vector<double>(static_cast<size_t>(rows) * cols, 0.0), rows, cols);
    }

    static Tensor full(int rows, int cols, double value) {
        return from(std::vector<double>(static_cast<size_t>(rows) * cols, value), rows, cols);
    }

    bool defined() const { return static_cast<bool>(n); }
    int rows() const { return n->rows; }
    int cols() const { return n->cols; }
    size_t size() const { return n->v.size(); }
    bool requires_grad() const { return n && n->requires_grad; }
    const std::vector<double>& data() const { return n->v; }

    double item() const {
        require(n && n->v.size() == 1, "Tensor::item: not a scalar");
        return n->v[0];
    }

    // Value copy detached from any graph.
    Tensor detach() const { return from(n->v, n->rows, n->cols); }
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

inline CMap emap(const Tensor& t) { return CMap(t.n->v.data(), t.n->rows, t.n->cols); }

inline Tensor make_op(int rows, int cols, std::vector<double> v,
                      std::vector<Tensor> parent_tensors,
                      std::function<std::vector<Tensor>(const Tensor&)> backward) {
    auto node = std::make_shared<Node>();
    node->rows = rows;
    node->cols = cols;
    node->v = std::move(v);
    bool rg = false;
    if (grad_mode)
        for (const auto& p : parent_tensors) rg |= p.requires_grad();
    node->requires_grad = rg;
    if (rg) {
        node->parents.reserve(parent_tensors.size());
        for (auto& p : parent_tensors) node->parents.push_back(p.n);
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

}  // namespace detail

// ---- elementwise and structural ops ----

inline Tensor add(const Tensor& a, const Tensor& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a, b},
                           [](const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b);
inline Tensor neg(const Tensor& a);
inline Tensor mul(const Tensor& a, const Tensor& b);
inline Tensor scale(const Tensor& a, double s);

inline Tensor neg(const Tensor& a) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = -a.data()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a},
                           [](const Tensor& g) { return std::vector<Tensor>{neg(g)}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a, b},
                           [](const Tensor& g) { return std::vector<Tensor>{g, neg(g)}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a, b}, [a, b](const Tensor& g) {
        return std::vector<Tensor>{mul(g, b), mul(g, a)};
    });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "div: shape mismatch");
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] / b.data()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a, b}, [a, b](const Tensor& g) {
        Tensor da = div(g, b);
        Tensor db = neg(div(mul(g, a), mul(b, b)));
        return std::vector<Tensor>{da, db};
    });
}

inline Tensor scale(const Tensor& a, double s) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * s;
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a},
                           [s](const Tensor& g) { return std::vector<Tensor>{scale(g, s)}; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + s;
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a},
                           [](const Tensor& g) { return std::vector<Tensor>{g}; });
}

inline Tensor sigmoid(const Tensor& a) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) {
        double x = a.data()[i];
        v[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    Tensor out = detail::make_op(a.rows(), a.cols(), std::move(v), {a}, nullptr);
    if (out.requires_grad()) {
        out.n->backward = [out_weak = std::weak_ptr<detail::Node>(out.n)](const Tensor& g) {
            Tensor y(out_weak.lock());
            // dy/dx = y (1 - y)
            Tensor one_minus = add_scalar(neg(y), 1.0);
            return std::vector<Tensor>{mul(g, mul(y, one_minus))};
        };
    }
    return out;
}

inline Tensor tanh_(const Tensor& a) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.data()[i]);
    Tensor out = detail::make_op(a.rows(), a.cols(), std::move(v), {a}, nullptr);
    if (out.requires_grad()) {
        out.n->backward = [out_weak = std::weak_ptr<detail::Node>(out.n)](const Tensor& g) {
            Tensor y(out_weak.lock());
            return std::vector<Tensor>{mul(g, add_scalar(neg(mul(y, y)), 1.0))};
        };
    }
    return out;
}

inline Tensor log_(const Tensor& a) {
    std::vector<double> v(a.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::log(a.data()[i]);
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a}, [a](const Tensor& g) {
        return std::vector<Tensor>{div(g, a)};
    });
}

// Gradient is passed through inside [lo, hi] and zeroed outside (the mask is
// treated as locally constant).
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    std::vector<double> v(a.size());
    std::vector<double> mask(a.size());
    for (size_t i = 0; i < v.size(); ++i) {
        double x = a.data()[i];
        bool inside = x > lo && x < hi;
        v[i] = inside ? x : (x <= lo ? lo : hi);
        mask[i] = inside ? 1.0 : 0.0;
    }
    Tensor m = Tensor::from(std::move(mask), a.rows(), a.cols());
    return detail::make_op(a.rows(), a.cols(), std::move(v), {a}, [m](const Tensor& g) {
        return std::vector<Tensor>{mul(g, m)};
    });
}

inline Tensor transpose(const Tensor& a) {
    std::vector<double> v(a.size());
    detail::CMap src = detail::emap(a);
    detail::Map dst(v.data(), a.cols(), a.rows());
    dst = src.transpose();
    return detail::make_op(a.cols(), a.rows(), std::move(v), {a},
                           [](const Tensor& g) { return std::vector<Tensor>{transpose(g)}; });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions must agree");
    std::vector<double> v(static_cast<size_t>(a.rows()) * b.cols());
    detail::Map out(v.data(), a.rows(), b.cols());
    out.noalias() = detail::emap(a) * detail::emap(b);
    return detail::make_op(a.rows(), b.cols(), std::move(v), {a, b}, [a, b](const Tensor& g) {
        Tensor da = matmul(g, transpose(b));
        Tensor db = matmul(transpose(a), g);
        return std::vector<Tensor>{da, db};
    });
}

inline Tensor sum_rows(const Tensor& m);
inline Tensor broadcast_rows(const Tensor& v, int rows);

inline Tensor sum_rows(const Tensor& m) {
    std::vector<double> out(m.cols(), 0.0);
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) out[c] += m.data()[static_cast<size_t>(r) * m.cols() + c];
    int rows = m.rows();
    return detail::make_op(1, m.cols(), std::move(out), {m}, [rows](const Tensor& g) {
        return std::vector<Tensor>{broadcast_rows(g, rows)};
    });
}

inline Tensor broadcast_rows(const Tensor& v, int rows) {
    require(v.rows() == 1, "broadcast_rows: v must be a row vector");
    std::vector<double> out(static_cast<size_t>(rows) * v.cols());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < v.cols(); ++c) out[static_cast<size_t>(r) * v.cols() + c] = v.data()[c];
    return detail::make_op(rows, v.cols(), std::move(out), {v},
                           [](const Tensor& g) { return std::vector<Tensor>{sum_rows(g)}; });
}

// m + row vector broadcast over rows; v has shape (1, cols).
inline Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    require(v.rows() == 1 && v.cols() == m.cols(), "add_rowvec: v must be (1, cols)");
    std::vector<double> out(m.size());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            out[static_cast<size_t>(r) * m.cols() + c] =
                m.data()[static_cast<size_t>(r) * m.cols() + c] + v.data()[c];
    return detail::make_op(m.rows(), m.cols(), std::move(out), {m, v}, [](const Tensor& g) {
        return std::vector<Tensor>{g, sum_rows(g)};
    });
}

inline Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double e : a.data()) s += e;
    int rows = a.rows(), cols = a.cols();
    return detail::make_op(1, 1, {s}, {a}, [rows, cols](const Tensor& g) {
        // expand the scalar cotangent to (rows, cols)
        Tensor row = matmul(g, Tensor::full(1, cols, 1.0));  // (1,cols)
        return std::vector<Tensor>{broadcast_rows(row, rows)};
    });
}

inline Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

inline Tensor slice_cols(const Tensor& a, int c0, int c1) {
    require(0 <= c0 && c0 < c1 && c1 <= a.cols(), "slice_cols: bad range");
    int w = c1 - c0;
    std::vector<double> out(static_cast<size_t>(a.rows()) * w);
    for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < w; ++c)
            out[static_cast<size_t>(r) * w + c] = a.data()[static_cast<size_t>(r) * a.cols() + c0 + c];
    int total = a.cols();
    return detail::make_op(a.rows(), w, std::move(out), {a}, [c0, total](const Tensor& g) -> std::vector<Tensor> {
        // pad back to the original width with zeros
        int rows = g.rows(), w2 = g.cols();
        std::vector<double> v(static_cast<size_t>(rows) * total, 0.0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < w2; ++c)
                v[static_cast<size_t>(r) * total + c0 + c] = g.data()[static_cast<size_t>(r) * w2 + c];
        Tensor padded = detail::make_op(rows, total, std::move(v), {g}, [c0, w2](const Tensor& gg) {
            return std::vector<Tensor>{slice_cols(gg, c0, c0 + w2)};
        });
        return {padded};
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: empty input");
    int rows = parts[0].rows();
    int cols = 0;
    for (const auto& p : parts) {
        require(p.rows() == rows, "concat_cols: row mismatch");
        cols += p.cols();
    }
    std::vector<double> out(static_cast<size_t>(rows) * cols);
    int off = 0;
    for (const auto& p : parts) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < p.cols(); ++c)
                out[static_cast<size_t>(r) * cols + off + c] =
                    p.data()[static_cast<size_t>(r) * p.cols() + c];
        off += p.cols();
    }
    std::vector<int> widths;
    widths.reserve(parts.size());
    for (const auto& p : parts) widths.push_back(p.cols());
    return detail::make_op(rows, cols, std::move(out), parts, [widths](const Tensor& g) {
        std::vector<Tensor> grads;
        grads.reserve(widths.size());
        int off2 = 0;
        for (int w : widths) {
            grads.push_back(slice_cols(g, off2, off2 + w));
            off2 += w;
        }
        return grads;
    });
}

// ---- losses ----

// Mean binary cross-entropy over all positions. Probabilities are clamped to
// [eps, 1-eps] so saturated sigmoids cannot produce infinities.
inline Tensor bce_loss(const Tensor& probs, const Tensor& targets, double eps = 1e-12) {
    require(probs.rows() == targets.rows() && probs.cols() == targets.cols(),
            "bce_loss: shape mismatch");
    Tensor p = clamp(probs, eps, 1.0 - eps);
    Tensor term0 = mul(targets, log_(p));
    Tensor term1 = mul(add_scalar(neg(targets), 1.0), log_(add_scalar(neg(p), 1.0)));
    return neg(mean_all(add(term0, term1)));
}

inline Tensor mse_loss(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return mean_all(mul(d, d));
}

// ---- reverse-mode differentiation ----

// Gradients of a scalar output with respect to the given leaves. With
// create_graph the returned tensors are part of a new graph and can be
// differentiated again (used for the second-order meta update).
inline std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& leaves,
                                bool create_graph = false) {
    require(output.defined() && output.size() == 1, "grad: output must be a defined scalar");

    // Topological order over the requires_grad subgraph.
    std::vector<detail::Node*> topo;
    std::unordered_map<detail::Node*, int> state;  // 0 new, 1 open, 2 done
    std::vector<detail::Node*> stack{output.n.get()};
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        int& st = state[n];
        if (st == 0) {
            st = 1;
            for (auto& p : n->parents)
                if (p->requires_grad && state[p.get()] == 0) stack.push_back(p.get());
        } else {
            if (st == 1) {
                st = 2;
                topo.push_back(n);
            }
            stack.pop_back();
        }
    }

    std::unordered_map<detail::Node*, Tensor> gmap;
    gmap[output.n.get()] = Tensor::full(output.rows(), output.cols(), 1.0);

    GradModeGuard mode(create_graph);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        detail::Node* n = *it;
        auto found = gmap.find(n);
        if (found == gmap.end() || !n->backward) continue;
        std::vector<Tensor> pgrads = n->backward(found->second);
        for (size_t i = 0; i < n->parents.size(); ++i) {
            detail::Node* p = n->parents[i].get();
            if (!p->requires_grad || !pgrads[i].defined()) continue;
            auto g = gmap.find(p);
            if (g == gmap.end())
                gmap[p] = pgrads[i];
            else
                g->second = add(g->second, pgrads[i]);
        }
    }

    std::vector<Tensor> out;
    out.reserve(leaves.size());
    for (const auto& leaf : leaves) {
        auto g = gmap.find(leaf.n.get());
        if (g == gmap.end())
            out.push_back(Tensor::zeros(leaf.rows(), leaf.cols()));
        else
            out.push_back(g->second);
    }
    return out;
}

}  // namespace mind::ad
