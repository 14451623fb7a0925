#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "edlb/rng.hpp"

namespace edlb {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);
std::int64_t numel_of(const Shape& shape);

// Graph recording switch. Evaluation code wraps forward passes in a
// NoGradGuard so that no backward closures are retained.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// One value in the reverse-mode graph.
///
/// Leaves have no backward closure. Interior nodes keep shared ownership of
/// their inputs so the graph lives exactly as long as its output does.
/// `grad` stays empty until something accumulates into it, and is only ever
/// touched when `requires_grad` is set.
template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::function<void(TensorNode&)> backward;
    const char* op = "leaf";

    bool is_leaf() const { return !backward; }

    // Zero-initialised on first use.
    T* grad_buffer() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        return grad.data();
    }
};

template <typename T>
class BasicTensor {
public:
    using value_type = T;
    using Node = TensorNode<T>;

    BasicTensor() = default;
    explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static BasicTensor zeros(const Shape& shape, bool requires_grad = false);
    static BasicTensor full(const Shape& shape, T value, bool requires_grad = false);
    static BasicTensor from(const Shape& shape, std::vector<T> values, bool requires_grad = false);
    static BasicTensor scalar(T value);
    static BasicTensor uniform(const Shape& shape, Rng& rng, double lo, double hi,
                               bool requires_grad = false);
    static BasicTensor normal(const Shape& shape, Rng& rng, double mean, double stddev,
                              bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    // Negative indices count from the back.
    std::int64_t dim(int i) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

    std::span<const T> data() const { return node_->data; }
    // Direct write access, for optimizers and initialisers. Bypasses the graph.
    std::span<T> mutable_data() { return node_->data; }
    T item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool value);
    bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    // Reverse pass from a scalar. Leaf gradients accumulate across calls.
    void backward() const;

    // New leaf holding a copy of the values, detached from any graph.
    BasicTensor detach() const;

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(node_->data.begin(), node_->data.end());
        return BasicTensor<U>::from(node_->shape, std::move(out));
    }

    const std::shared_ptr<Node>& node() const { return node_; }
    bool same_as(const BasicTensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Records a primitive. The result requires grad iff recording is enabled and
/// some input requires grad; otherwise inputs and closure are dropped.
template <typename T>
BasicTensor<T> make_op(const char* name, Shape shape, std::vector<T> data,
                       const std::vector<BasicTensor<T>>& inputs,
                       std::function<void(TensorNode<T>&)> backward);

/// Topologically ordered view of the graph reachable from a root, restricted
/// to nodes that require grad. Every node appears after all of its inputs.
template <typename T>
struct GradGraph {
    std::vector<TensorNode<T>*> order;

    static GradGraph build(const BasicTensor<T>& root);
};

}  // namespace edlb
