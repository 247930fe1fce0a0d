#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vcmr/error.hpp"

namespace vcmr {

// Numeric precision of op outputs. Values are always stored as double; in
// f32 mode every op output is rounded to float precision so training runs
// at 32-bit arithmetic fidelity while the gradient-check suite runs exact
// 64-bit under a PrecisionGuard.
enum class Precision { f32, f64 };

Precision current_precision();
bool grad_recording_enabled();

// RAII switch for the thread-local precision mode.
class PrecisionGuard {
   public:
    explicit PrecisionGuard(Precision p);
    ~PrecisionGuard();
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;

   private:
    Precision saved_;
};

// RAII switch that disables tape recording (inference paths).
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool saved_;
};

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first backward touch
    bool requires_grad = false;
    bool backward_done = false;  // set on the loss node once consumed
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this->grad, accumulates into inputs' grad buffers.
    std::function<void(Node&)> backward_fn;

    int64_t size() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantics handle to a node of the computation graph. Copying a
// Tensor aliases the node; data is immutable after creation except for
// gradient accumulation and parameter updates between steps.
class Tensor {
   public:
    Tensor() = default;

    static Tensor parameter(std::vector<int> shape, std::vector<double> data);
    static Tensor constant(std::vector<int> shape, std::vector<double> data);
    static Tensor scalar(double v) { return constant({}, {v}); }
    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int64_t size() const { return node_->size(); }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }

    const std::vector<double>& values() const { return node_->value; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    double item() const;
    double at(int64_t flat_index) const { return node_->value[static_cast<size_t>(flat_index)]; }

    // Parameter mutation between training steps (optimizer / checkpoint load).
    std::vector<double>& mutable_values() { return node_->value; }
    void zero_grad() {
        node_->ensure_grad();
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

   private:
    std::shared_ptr<detail::Node> node_;
};

// Reverse-mode differentiation from a scalar loss. Visits every recorded
// node exactly once; leaf gradients accumulate across all paths. Throws if
// the loss is not scalar or the graph was already consumed.
void backward(const Tensor& loss);

// ---- op set -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);       // broadcasting
Tensor sub(const Tensor& a, const Tensor& b);       // broadcasting
Tensor mul(const Tensor& a, const Tensor& b);       // elementwise, broadcasting
Tensor divide(const Tensor& a, const Tensor& b);    // elementwise, broadcasting
Tensor matmul(const Tensor& a, const Tensor& b);    // 2-d only
Tensor transpose(const Tensor& x);                  // 2-d
Tensor outer(const Tensor& a, const Tensor& b);     // vec x vec -> matrix
Tensor concat(std::span<const Tensor> xs, int axis);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor slice_rows(const Tensor& x, int start, int len);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor gather_rows(const Tensor& table, const std::vector<int>& indices);
Tensor element_at(const Tensor& x, int64_t flat_index);  // -> scalar

Tensor softmax(const Tensor& x, int axis);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor layer_norm(const Tensor& x, double eps = 1e-5);  // last axis, no affine

Tensor reduce_sum(const Tensor& x, int axis);
Tensor reduce_mean(const Tensor& x, int axis);
Tensor reduce_max(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);  // -> scalar

Tensor scale(const Tensor& x, double c);
inline Tensor neg(const Tensor& x) { return scale(x, -1.0); }

// out = keep[i] ? x : fill, with `keep` along `axis` of a rank-1/2 tensor.
// Masked positions receive exactly zero gradient.
Tensor masked_fill(const Tensor& x, const std::vector<std::uint8_t>& keep, int axis, double fill);

// x: L x Cin, w: {Cout, Cin, K} with K odd; zero same-padding; optional bias {Cout}.
Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor());

// x: n x in, w: in x out, optional bias {out} broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor());

// Numerically stable -log softmax(logits)[index] for a rank-1 logits vector.
Tensor cross_entropy_with_index(const Tensor& logits, int64_t index);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace vcmr
