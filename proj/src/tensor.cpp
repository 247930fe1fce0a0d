#include "vcmr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace vcmr {

namespace {

thread_local Precision g_precision = Precision::f32;
thread_local bool g_grad_enabled = true;

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void quantize_f32(std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) throw FiniteError(std::string(op));
    }
}

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_node(const char* op, std::vector<int> shape, std::vector<double> value,
                 const std::vector<Tensor>& inputs, std::function<void(Node&)> bw) {
    if (static_cast<int64_t>(value.size()) != shape_size(shape))
        throw ShapeError(std::string(op) + ": data size does not match shape " + shape_str(shape));
    if (g_precision == Precision::f32) quantize_f32(value);
    check_finite(value, op);

    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    if (g_grad_enabled) {
        bool req = false;
        for (const Tensor& t : inputs) req = req || t.node()->requires_grad;
        if (req) {
            n->requires_grad = true;
            for (const Tensor& t : inputs) n->inputs.push_back(t.node());
            n->backward_fn = std::move(bw);
        }
    }
    return Tensor(std::move(n));
}

Tensor make_node(const char* op, std::vector<int> shape, std::vector<double> value,
                 std::initializer_list<Tensor> inputs, std::function<void(Node&)> bw) {
    return make_node(op, std::move(shape), std::move(value), std::vector<Tensor>(inputs),
                     std::move(bw));
}

// ---- broadcasting --------------------------------------------------------

struct BcastPlan {
    std::vector<int> out_shape;
    std::vector<int64_t> a_stride;  // per out dim; 0 on broadcast dims
    std::vector<int64_t> b_stride;
};

BcastPlan broadcast_shapes(const std::vector<int>& a, const std::vector<int>& b, const char* op) {
    const size_t rank = std::max(a.size(), b.size());
    BcastPlan p;
    p.out_shape.resize(rank);
    std::vector<int> ae(rank, 1), be(rank, 1);
    std::copy(a.begin(), a.end(), ae.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), be.begin() + (rank - b.size()));
    for (size_t i = 0; i < rank; ++i) {
        if (ae[i] != be[i] && ae[i] != 1 && be[i] != 1)
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                             shape_str(b));
        p.out_shape[i] = std::max(ae[i], be[i]);
    }
    p.a_stride.assign(rank, 0);
    p.b_stride.assign(rank, 0);
    int64_t sa = 1, sb = 1;
    for (size_t i = rank; i-- > 0;) {
        if (ae[i] != 1) p.a_stride[i] = sa;
        if (be[i] != 1) p.b_stride[i] = sb;
        sa *= ae[i];
        sb *= be[i];
    }
    return p;
}

// Walks every output element of a broadcast op, yielding (out_idx, a_idx, b_idx).
template <typename F>
void bcast_for_each(const BcastPlan& p, F&& f) {
    const size_t rank = p.out_shape.size();
    if (rank == 0) {
        f(0, 0, 0);
        return;
    }
    std::vector<int> idx(rank, 0);
    int64_t n = shape_size(p.out_shape);
    for (int64_t o = 0; o < n; ++o) {
        int64_t ia = 0, ib = 0;
        for (size_t d = 0; d < rank; ++d) {
            ia += idx[d] * p.a_stride[d];
            ib += idx[d] * p.b_stride[d];
        }
        f(o, ia, ib);
        for (size_t d = rank; d-- > 0;) {
            if (++idx[d] < p.out_shape[d]) break;
            idx[d] = 0;
        }
    }
}

Tensor binary_op(const char* name, const Tensor& a, const Tensor& b,
                 double (*fwd)(double, double),
                 void (*bwd)(double g, double av, double bv, double& da, double& db)) {
    BcastPlan plan = broadcast_shapes(a.shape(), b.shape(), name);
    std::vector<double> out(static_cast<size_t>(shape_size(plan.out_shape)));
    const auto& av = a.values();
    const auto& bv = b.values();
    bcast_for_each(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        out[static_cast<size_t>(o)] = fwd(av[static_cast<size_t>(ia)], bv[static_cast<size_t>(ib)]);
    });
    Node* an = a.node().get();
    Node* bn = b.node().get();
    return make_node(name, plan.out_shape, std::move(out), {a, b}, [plan, an, bn, bwd](Node& self) {
        if (an->requires_grad) an->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        bcast_for_each(plan, [&](int64_t o, int64_t ia, int64_t ib) {
            double da = 0, db = 0;
            bwd(self.grad[static_cast<size_t>(o)], an->value[static_cast<size_t>(ia)],
                bn->value[static_cast<size_t>(ib)], da, db);
            if (an->requires_grad) an->grad[static_cast<size_t>(ia)] += da;
            if (bn->requires_grad) bn->grad[static_cast<size_t>(ib)] += db;
        });
    });
}

Tensor unary_op(const char* name, const Tensor& x, double (*fwd)(double),
                double (*dfdx)(double x, double y)) {
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
    Node* xn = x.node().get();
    return make_node(name, x.shape(), std::move(out), {x}, [xn, dfdx](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.value.size(); ++i)
            xn->grad[i] += self.grad[i] * dfdx(xn->value[i], self.value[i]);
    });
}

// Lines along `axis` of a rank-1/2 tensor: count, length, stride and base
// offset generator; shared by softmax and the reductions.
struct LineIter {
    int64_t lines;
    int64_t len;
    int64_t stride;
    std::vector<int64_t> base;
};

LineIter make_lines(const std::vector<int>& shape, int axis, const char* op) {
    const int rank = static_cast<int>(shape.size());
    if (rank == 0 || rank > 2) throw ShapeError(std::string(op) + ": expects rank 1 or 2");
    if (axis < 0 || axis >= rank) throw ShapeError(std::string(op) + ": axis out of range");
    LineIter it;
    if (rank == 1) {
        it.lines = 1;
        it.len = shape[0];
        it.stride = 1;
        it.base = {0};
        return it;
    }
    const int64_t rows = shape[0], cols = shape[1];
    if (axis == 1) {
        it.lines = rows;
        it.len = cols;
        it.stride = 1;
        for (int64_t r = 0; r < rows; ++r) it.base.push_back(r * cols);
    } else {
        it.lines = cols;
        it.len = rows;
        it.stride = cols;
        for (int64_t c = 0; c < cols; ++c) it.base.push_back(c);
    }
    return it;
}

std::vector<int> drop_axis(const std::vector<int>& shape, int axis) {
    std::vector<int> s;
    for (int i = 0; i < static_cast<int>(shape.size()); ++i)
        if (i != axis) s.push_back(shape[i]);
    return s;
}

}  // namespace

Precision current_precision() { return g_precision; }
bool grad_recording_enabled() { return g_grad_enabled; }

PrecisionGuard::PrecisionGuard(Precision p) : saved_(g_precision) { g_precision = p; }
PrecisionGuard::~PrecisionGuard() { g_precision = saved_; }

NoGradGuard::NoGradGuard() : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = saved_; }

Tensor Tensor::parameter(std::vector<int> shape, std::vector<double> data) {
    if (static_cast<int64_t>(data.size()) != shape_size(shape))
        throw ShapeError("parameter: data size does not match shape " + shape_str(shape));
    check_finite(data, "parameter");
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = true;
    return Tensor(std::move(n));
}

Tensor Tensor::constant(std::vector<int> shape, std::vector<double> data) {
    if (static_cast<int64_t>(data.size()) != shape_size(shape))
        throw ShapeError("constant: data size does not match shape " + shape_str(shape));
    check_finite(data, "constant");
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    std::vector<double> d(static_cast<size_t>(shape_size(shape)), 0.0);
    return requires_grad ? parameter(std::move(shape), std::move(d))
                         : constant(std::move(shape), std::move(d));
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item: tensor is not scalar");
    return node_->value[0];
}

void backward(const Tensor& loss) {
    Node* root = loss.node().get();
    if (loss.size() != 1) throw InvalidArgument("backward: loss must be scalar");
    if (!root->requires_grad)
        throw InvalidArgument("backward: loss is not connected to any parameter");
    if (root->backward_done) throw InvalidArgument("backward: graph already consumed");
    root->backward_done = true;

    // Iterative post-order DFS; each node enters `order` exactly once.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            Node* child = n->inputs[next++].get();
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double g, double, double, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double g, double, double, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double g, double x, double y, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double g, double x, double y, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

Tensor scale(const Tensor& x, double c) {
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * c;
    Node* xn = x.node().get();
    return make_node("scale", x.shape(), std::move(out), {x}, [xn, c](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.value.size(); ++i) xn->grad[i] += self.grad[i] * c;
    });
}

Tensor log(const Tensor& x) {
    return unary_op(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
    return unary_op(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& x) {
    return unary_op(
        "sqrt", x, [](double v) { return std::sqrt(v); },
        [](double, double y) { return 0.5 / y; });
}

Tensor relu(const Tensor& x) {
    return unary_op(
        "relu", x, [](double v) { return v > 0 ? v : 0.0; },
        [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    // tanh approximation
    return unary_op(
        "gelu", x,
        [](double v) {
            const double s = std::sqrt(2.0 / M_PI);
            return 0.5 * v * (1.0 + std::tanh(s * (v + 0.044715 * v * v * v)));
        },
        [](double v, double) {
            const double s = std::sqrt(2.0 / M_PI);
            const double u = s * (v + 0.044715 * v * v * v);
            const double t = std::tanh(u);
            const double sech2 = 1.0 - t * t;
            return 0.5 * (1.0 + t) + 0.5 * v * sech2 * s * (1.0 + 3.0 * 0.044715 * v * v);
        });
}

// ---- matrix ops -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: expects rank-2 inputs");
    const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i * k + p)];
            if (aip == 0.0) continue;
            const double* brow = &bv[static_cast<size_t>(p * n)];
            double* orow = &out[static_cast<size_t>(i * n)];
            for (int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    Node* an = a.node().get();
    Node* bn = b.node().get();
    return make_node("matmul", {static_cast<int>(m), static_cast<int>(n)}, std::move(out), {a, b},
                     [an, bn, m, k, n](Node& self) {
                         const auto& g = self.grad;
                         if (an->requires_grad) {
                             an->ensure_grad();
                             for (int64_t i = 0; i < m; ++i)
                                 for (int64_t j = 0; j < n; ++j) {
                                     const double gij = g[static_cast<size_t>(i * n + j)];
                                     if (gij == 0.0) continue;
                                     for (int64_t p = 0; p < k; ++p)
                                         an->grad[static_cast<size_t>(i * k + p)] +=
                                             gij * bn->value[static_cast<size_t>(p * n + j)];
                                 }
                         }
                         if (bn->requires_grad) {
                             bn->ensure_grad();
                             for (int64_t i = 0; i < m; ++i)
                                 for (int64_t p = 0; p < k; ++p) {
                                     const double aip = an->value[static_cast<size_t>(i * k + p)];
                                     if (aip == 0.0) continue;
                                     for (int64_t j = 0; j < n; ++j)
                                         bn->grad[static_cast<size_t>(p * n + j)] +=
                                             aip * g[static_cast<size_t>(i * n + j)];
                                 }
                         }
                     });
}

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("transpose: expects rank-2 input");
    const int64_t r = x.dim(0), c = x.dim(1);
    std::vector<double> out(static_cast<size_t>(r * c));
    const auto& xv = x.values();
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j)
            out[static_cast<size_t>(j * r + i)] = xv[static_cast<size_t>(i * c + j)];
    Node* xn = x.node().get();
    return make_node("transpose", {static_cast<int>(c), static_cast<int>(r)}, std::move(out), {x},
                     [xn, r, c](Node& self) {
                         xn->ensure_grad();
                         for (int64_t i = 0; i < r; ++i)
                             for (int64_t j = 0; j < c; ++j)
                                 xn->grad[static_cast<size_t>(i * c + j)] +=
                                     self.grad[static_cast<size_t>(j * r + i)];
                     });
}

Tensor outer(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1) throw ShapeError("outer: expects rank-1 inputs");
    const int64_t n = a.dim(0), m = b.dim(0);
    std::vector<double> out(static_cast<size_t>(n * m));
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j)
            out[static_cast<size_t>(i * m + j)] = av[static_cast<size_t>(i)] * bv[static_cast<size_t>(j)];
    Node* an = a.node().get();
    Node* bn = b.node().get();
    return make_node("outer", {static_cast<int>(n), static_cast<int>(m)}, std::move(out), {a, b},
                     [an, bn, n, m](Node& self) {
                         if (an->requires_grad) an->ensure_grad();
                         if (bn->requires_grad) bn->ensure_grad();
                         for (int64_t i = 0; i < n; ++i)
                             for (int64_t j = 0; j < m; ++j) {
                                 const double g = self.grad[static_cast<size_t>(i * m + j)];
                                 if (an->requires_grad)
                                     an->grad[static_cast<size_t>(i)] += g * bn->value[static_cast<size_t>(j)];
                                 if (bn->requires_grad)
                                     bn->grad[static_cast<size_t>(j)] += g * an->value[static_cast<size_t>(i)];
                             }
                     });
}

// ---- structure ops ----------------------------------------------------------

namespace {

// Copyable mapping of one concat piece into the output buffer.
struct ConcatPiece {
    int64_t rows, cols;
    int64_t row_off, col_off;
};

template <typename F>
void concat_piece_for_each(const ConcatPiece& p, int64_t out_cols, F&& cell) {
    for (int64_t i = 0; i < p.rows; ++i)
        for (int64_t j = 0; j < p.cols; ++j)
            cell(i * p.cols + j, (i + p.row_off) * out_cols + (j + p.col_off));
}

}  // namespace

Tensor concat(std::span<const Tensor> xs, int axis) {
    if (xs.empty()) throw InvalidArgument("concat: empty input list");
    const int rank = xs[0].rank();
    if (rank < 1 || rank > 2) throw ShapeError("concat: expects rank 1 or 2");
    if (axis < 0 || axis >= rank) throw ShapeError("concat: axis out of range");
    for (const Tensor& t : xs) {
        if (t.rank() != rank) throw ShapeError("concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis && t.dim(d) != xs[0].dim(d))
                throw ShapeError("concat: non-axis extents differ");
    }

    std::vector<int> out_shape = xs[0].shape();
    int total = 0;
    for (const Tensor& t : xs) total += t.dim(axis);
    out_shape[static_cast<size_t>(axis)] = total;
    const int64_t out_cols = rank == 2 ? out_shape[1] : out_shape[0];

    std::vector<ConcatPiece> pieces;
    int64_t acc = 0;
    for (const Tensor& t : xs) {
        ConcatPiece p;
        p.rows = rank == 2 ? t.dim(0) : 1;
        p.cols = rank == 2 ? t.dim(1) : t.dim(0);
        p.row_off = (rank == 2 && axis == 0) ? acc : 0;
        p.col_off = (rank == 1 || axis == 1) ? acc : 0;
        pieces.push_back(p);
        acc += t.dim(axis);
    }

    std::vector<double> out(static_cast<size_t>(shape_size(out_shape)));
    for (size_t pi = 0; pi < xs.size(); ++pi) {
        const auto& src = xs[pi].values();
        concat_piece_for_each(pieces[pi], out_cols, [&](int64_t si, int64_t oi) {
            out[static_cast<size_t>(oi)] = src[static_cast<size_t>(si)];
        });
    }

    std::vector<Tensor> inputs(xs.begin(), xs.end());
    std::vector<Node*> nodes;
    for (const Tensor& t : inputs) nodes.push_back(t.node().get());
    return make_node("concat", std::move(out_shape), std::move(out), inputs,
                     [pieces, nodes, out_cols](Node& self) {
                         for (size_t pi = 0; pi < nodes.size(); ++pi) {
                             if (!nodes[pi]->requires_grad) continue;
                             nodes[pi]->ensure_grad();
                             concat_piece_for_each(
                                 pieces[pi], out_cols, [&](int64_t si, int64_t oi) {
                                     nodes[pi]->grad[static_cast<size_t>(si)] +=
                                         self.grad[static_cast<size_t>(oi)];
                                 });
                         }
                     });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    if (shape_size(shape) != x.size())
        throw ShapeError("reshape: element count mismatch " + shape_str(x.shape()) + " -> " +
                         shape_str(shape));
    Node* xn = x.node().get();
    std::vector<double> out = x.values();
    return make_node("reshape", std::move(shape), std::move(out), {x}, [xn](Node& self) {
        xn->ensure_grad();
        for (size_t i = 0; i < self.value.size(); ++i) xn->grad[i] += self.grad[i];
    });
}

Tensor slice_rows(const Tensor& x, int start, int len) {
    if (x.rank() != 2) throw ShapeError("slice_rows: expects rank-2 input");
    if (start < 0 || len < 0 || start + len > x.dim(0))
        throw ShapeError("slice_rows: range out of bounds");
    const int64_t cols = x.dim(1);
    const auto& xv = x.values();
    std::vector<double> out(xv.begin() + start * cols, xv.begin() + (start + len) * cols);
    Node* xn = x.node().get();
    return make_node("slice_rows", {len, static_cast<int>(cols)}, std::move(out), {x},
                     [xn, start, cols](Node& self) {
                         xn->ensure_grad();
                         for (size_t i = 0; i < self.value.size(); ++i)
                             xn->grad[static_cast<size_t>(start * cols) + i] += self.grad[i];
                     });
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    if (x.rank() != 2) throw ShapeError("slice_cols: expects rank-2 input");
    if (start < 0 || len < 0 || start + len > x.dim(1))
        throw ShapeError("slice_cols: range out of bounds");
    const int64_t rows = x.dim(0), cols = x.dim(1);
    std::vector<double> out(static_cast<size_t>(rows * len));
    const auto& xv = x.values();
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < len; ++j)
            out[static_cast<size_t>(i * len + j)] = xv[static_cast<size_t>(i * cols + start + j)];
    Node* xn = x.node().get();
    return make_node("slice_cols", {static_cast<int>(rows), len}, std::move(out), {x},
                     [xn, rows, cols, start, len](Node& self) {
                         xn->ensure_grad();
                         for (int64_t i = 0; i < rows; ++i)
                             for (int64_t j = 0; j < len; ++j)
                                 xn->grad[static_cast<size_t>(i * cols + start + j)] +=
                                     self.grad[static_cast<size_t>(i * len + j)];
                     });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& indices) {
    if (table.rank() != 2) throw ShapeError("gather_rows: expects rank-2 table");
    const int64_t rows = table.dim(0), cols = table.dim(1);
    for (int ix : indices)
        if (ix < 0 || ix >= rows) throw InvalidArgument("gather_rows: index out of range");
    std::vector<double> out(indices.size() * static_cast<size_t>(cols));
    const auto& tv = table.values();
    for (size_t i = 0; i < indices.size(); ++i)
        std::copy_n(tv.begin() + static_cast<int64_t>(indices[i]) * cols, cols,
                    out.begin() + static_cast<int64_t>(i) * cols);
    Node* tn = table.node().get();
    auto idx = indices;
    return make_node("gather_rows", {static_cast<int>(indices.size()), static_cast<int>(cols)},
                     std::move(out), {table}, [tn, idx, cols](Node& self) {
                         tn->ensure_grad();
                         for (size_t i = 0; i < idx.size(); ++i)
                             for (int64_t j = 0; j < cols; ++j)
                                 tn->grad[static_cast<size_t>(idx[i] * cols + j)] +=
                                     self.grad[i * static_cast<size_t>(cols) + static_cast<size_t>(j)];
                     });
}

Tensor element_at(const Tensor& x, int64_t flat_index) {
    if (flat_index < 0 || flat_index >= x.size())
        throw InvalidArgument("element_at: index out of range");
    Node* xn = x.node().get();
    return make_node("element_at", {}, {x.values()[static_cast<size_t>(flat_index)]}, {x},
                     [xn, flat_index](Node& self) {
                         xn->ensure_grad();
                         xn->grad[static_cast<size_t>(flat_index)] += self.grad[0];
                     });
}

// ---- normalization / reductions -------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
    LineIter it = make_lines(x.shape(), axis, "softmax");
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    for (int64_t l = 0; l < it.lines; ++l) {
        const int64_t b = it.base[static_cast<size_t>(l)];
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t i = 0; i < it.len; ++i)
            mx = std::max(mx, xv[static_cast<size_t>(b + i * it.stride)]);
        double sum = 0;
        for (int64_t i = 0; i < it.len; ++i) {
            const double e = std::exp(xv[static_cast<size_t>(b + i * it.stride)] - mx);
            out[static_cast<size_t>(b + i * it.stride)] = e;
            sum += e;
        }
        for (int64_t i = 0; i < it.len; ++i) out[static_cast<size_t>(b + i * it.stride)] /= sum;
    }
    Node* xn = x.node().get();
    return make_node("softmax", x.shape(), std::move(out), {x}, [xn, it](Node& self) {
        xn->ensure_grad();
        for (int64_t l = 0; l < it.lines; ++l) {
            const int64_t b = it.base[static_cast<size_t>(l)];
            double dot = 0;
            for (int64_t i = 0; i < it.len; ++i) {
                const size_t k = static_cast<size_t>(b + i * it.stride);
                dot += self.grad[k] * self.value[k];
            }
            for (int64_t i = 0; i < it.len; ++i) {
                const size_t k = static_cast<size_t>(b + i * it.stride);
                xn->grad[k] += self.value[k] * (self.grad[k] - dot);
            }
        }
    });
}

namespace {

enum class Reduce { sum, mean, max };

Tensor reduce_op(const Tensor& x, int axis, Reduce kind, const char* name) {
    LineIter it = make_lines(x.shape(), axis, name);
    const auto& xv = x.values();
    std::vector<double> out(static_cast<size_t>(it.lines));
    std::vector<int64_t> argmax(kind == Reduce::max ? static_cast<size_t>(it.lines) : 0);
    for (int64_t l = 0; l < it.lines; ++l) {
        const int64_t b = it.base[static_cast<size_t>(l)];
        if (kind == Reduce::max) {
            double best = xv[static_cast<size_t>(b)];
            int64_t bi = 0;
            for (int64_t i = 1; i < it.len; ++i) {
                const double v = xv[static_cast<size_t>(b + i * it.stride)];
                if (v > best) {
                    best = v;
                    bi = i;
                }
            }
            out[static_cast<size_t>(l)] = best;
            argmax[static_cast<size_t>(l)] = bi;
        } else {
            double s = 0;
            for (int64_t i = 0; i < it.len; ++i) s += xv[static_cast<size_t>(b + i * it.stride)];
            out[static_cast<size_t>(l)] = kind == Reduce::mean ? s / static_cast<double>(it.len) : s;
        }
    }
    std::vector<int> out_shape = x.rank() == 1 ? std::vector<int>{} : drop_axis(x.shape(), axis);
    Node* xn = x.node().get();
    return make_node(name, std::move(out_shape), std::move(out), {x},
                     [xn, it, kind, argmax](Node& self) {
                         xn->ensure_grad();
                         for (int64_t l = 0; l < it.lines; ++l) {
                             const int64_t b = it.base[static_cast<size_t>(l)];
                             const double g = self.grad[static_cast<size_t>(l)];
                             if (kind == Reduce::max) {
                                 xn->grad[static_cast<size_t>(
                                     b + argmax[static_cast<size_t>(l)] * it.stride)] += g;
                             } else {
                                 const double gi =
                                     kind == Reduce::mean ? g / static_cast<double>(it.len) : g;
                                 for (int64_t i = 0; i < it.len; ++i)
                                     xn->grad[static_cast<size_t>(b + i * it.stride)] += gi;
                             }
                         }
                     });
}

}  // namespace

Tensor reduce_sum(const Tensor& x, int axis) { return reduce_op(x, axis, Reduce::sum, "sum"); }
Tensor reduce_mean(const Tensor& x, int axis) { return reduce_op(x, axis, Reduce::mean, "mean"); }
Tensor reduce_max(const Tensor& x, int axis) { return reduce_op(x, axis, Reduce::max, "max"); }

Tensor sum_all(const Tensor& x) {
    const auto& xv = x.values();
    double s = std::accumulate(xv.begin(), xv.end(), 0.0);
    Node* xn = x.node().get();
    return make_node("sum_all", {}, {s}, {x}, [xn](Node& self) {
        xn->ensure_grad();
        for (double& g : xn->grad) g += self.grad[0];
    });
}

Tensor layer_norm(const Tensor& x, double eps) {
    if (x.rank() < 1) throw ShapeError("layer_norm: expects rank >= 1");
    const int64_t cols = x.shape().back();
    const int64_t rows = x.size() / cols;
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    std::vector<double> rstd(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const double* row = &xv[static_cast<size_t>(r * cols)];
        double mean = 0;
        for (int64_t j = 0; j < cols; ++j) mean += row[j];
        mean /= static_cast<double>(cols);
        double var = 0;
        for (int64_t j = 0; j < cols; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(cols);
        const double rs = 1.0 / std::sqrt(var + eps);
        rstd[static_cast<size_t>(r)] = rs;
        for (int64_t j = 0; j < cols; ++j)
            out[static_cast<size_t>(r * cols + j)] = (row[j] - mean) * rs;
    }
    Node* xn = x.node().get();
    return make_node("layer_norm", x.shape(), std::move(out), {x}, [xn, rows, cols, rstd](Node& self) {
        xn->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = &self.value[static_cast<size_t>(r * cols)];
            const double* g = &self.grad[static_cast<size_t>(r * cols)];
            double gmean = 0, gymean = 0;
            for (int64_t j = 0; j < cols; ++j) {
                gmean += g[j];
                gymean += g[j] * y[j];
            }
            gmean /= static_cast<double>(cols);
            gymean /= static_cast<double>(cols);
            const double rs = rstd[static_cast<size_t>(r)];
            for (int64_t j = 0; j < cols; ++j)
                xn->grad[static_cast<size_t>(r * cols + j)] +=
                    (g[j] - gmean - y[j] * gymean) * rs;
        }
    });
}

Tensor masked_fill(const Tensor& x, const std::vector<std::uint8_t>& keep, int axis, double fill) {
    if (x.rank() < 1 || x.rank() > 2) throw ShapeError("masked_fill: expects rank 1 or 2");
    if (axis < 0 || axis >= x.rank()) throw ShapeError("masked_fill: axis out of range");
    if (static_cast<int64_t>(keep.size()) != x.dim(axis))
        throw ShapeError("masked_fill: mask length does not match axis extent");
    const int64_t rows = x.rank() == 2 ? x.dim(0) : 1;
    const int64_t cols = x.rank() == 2 ? x.dim(1) : x.dim(0);
    const bool mask_rows = x.rank() == 2 && axis == 0;
    const auto& xv = x.values();
    std::vector<double> out(xv.size());
    auto kept = [&](int64_t i, int64_t j) {
        return mask_rows ? keep[static_cast<size_t>(i)] : keep[static_cast<size_t>(j)];
    };
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) {
            const size_t k = static_cast<size_t>(i * cols + j);
            out[k] = kept(i, j) ? xv[k] : fill;
        }
    Node* xn = x.node().get();
    return make_node("masked_fill", x.shape(), std::move(out), {x},
                     [xn, keep, rows, cols, mask_rows](Node& self) {
                         xn->ensure_grad();
                         for (int64_t i = 0; i < rows; ++i)
                             for (int64_t j = 0; j < cols; ++j) {
                                 const bool k = mask_rows ? keep[static_cast<size_t>(i)]
                                                          : keep[static_cast<size_t>(j)];
                                 if (k) {
                                     const size_t f = static_cast<size_t>(i * cols + j);
                                     xn->grad[f] += self.grad[f];
                                 }
                             }
                     });
}

Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.rank() != 2) throw ShapeError("conv1d: input must be L x Cin");
    if (w.rank() != 3) throw ShapeError("conv1d: weight must be {Cout, Cin, K}");
    const int64_t L = x.dim(0), cin = x.dim(1);
    const int64_t cout = w.dim(0), wcin = w.dim(1), K = w.dim(2);
    if (wcin != cin) throw ShapeError("conv1d: channel mismatch");
    if (K % 2 == 0) throw ShapeError("conv1d: kernel size must be odd for same padding");
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
        throw ShapeError("conv1d: bias must be {Cout}");
    const int64_t P = (K - 1) / 2;
    const auto& xv = x.values();
    const auto& wv = w.values();
    std::vector<double> out(static_cast<size_t>(L * cout), 0.0);
    for (int64_t i = 0; i < L; ++i)
        for (int64_t o = 0; o < cout; ++o) {
            double s = bias.defined() ? bias.values()[static_cast<size_t>(o)] : 0.0;
            for (int64_t t = 0; t < K; ++t) {
                const int64_t src = i + t - P;
                if (src < 0 || src >= L) continue;
                for (int64_t c = 0; c < cin; ++c)
                    s += xv[static_cast<size_t>(src * cin + c)] *
                         wv[static_cast<size_t>((o * cin + c) * K + t)];
            }
            out[static_cast<size_t>(i * cout + o)] = s;
        }
    Node* xn = x.node().get();
    Node* wn = w.node().get();
    Node* bn = bias.defined() ? bias.node().get() : nullptr;
    auto bw = [xn, wn, bn, L, cin, cout, K, P](Node& self) {
        if (xn->requires_grad) xn->ensure_grad();
        if (wn->requires_grad) wn->ensure_grad();
        if (bn && bn->requires_grad) bn->ensure_grad();
        for (int64_t i = 0; i < L; ++i)
            for (int64_t o = 0; o < cout; ++o) {
                const double g = self.grad[static_cast<size_t>(i * cout + o)];
                if (g == 0.0) continue;
                if (bn && bn->requires_grad) bn->grad[static_cast<size_t>(o)] += g;
                for (int64_t t = 0; t < K; ++t) {
                    const int64_t src = i + t - P;
                    if (src < 0 || src >= L) continue;
                    for (int64_t c = 0; c < cin; ++c) {
                        const size_t wi = static_cast<size_t>((o * cin + c) * K + t);
                        const size_t xi = static_cast<size_t>(src * cin + c);
                        if (xn->requires_grad) xn->grad[xi] += g * wn->value[wi];
                        if (wn->requires_grad) wn->grad[wi] += g * xn->value[xi];
                    }
                }
            }
    };
    if (bias.defined())
        return make_node("conv1d", {static_cast<int>(L), static_cast<int>(cout)}, std::move(out),
                         {x, w, bias}, bw);
    return make_node("conv1d", {static_cast<int>(L), static_cast<int>(cout)}, std::move(out),
                     {x, w}, bw);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    Tensor y = matmul(x, w);
    if (bias.defined()) y = add(y, bias);
    return y;
}

Tensor cross_entropy_with_index(const Tensor& logits, int64_t index) {
    if (logits.rank() != 1) throw ShapeError("cross_entropy: logits must be rank-1");
    if (index < 0 || index >= logits.size())
        throw InvalidArgument("cross_entropy: index out of range");
    const auto& lv = logits.values();
    double mx = *std::max_element(lv.begin(), lv.end());
    double sum = 0;
    for (double v : lv) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    const double loss = lse - lv[static_cast<size_t>(index)];
    Node* ln = logits.node().get();
    return make_node("cross_entropy", {}, {loss}, {logits}, [ln, index, mx, sum](Node& self) {
        ln->ensure_grad();
        const double g = self.grad[0];
        for (size_t i = 0; i < ln->value.size(); ++i) {
            double p = std::exp(ln->value[i] - mx) / sum;
            ln->grad[i] += g * (p - (static_cast<int64_t>(i) == index ? 1.0 : 0.0));
        }
    });
}

}  // namespace vcmr
