#include "edlb/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

#include "edlb/errors.hpp"

namespace edlb {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::int64_t numel_of(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(const Shape& shape, bool requires_grad) {
    return full(shape, T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(const Shape& shape, T value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->data.assign(static_cast<std::size_t>(numel_of(shape)), value);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from(const Shape& shape, std::vector<T> values, bool requires_grad) {
    if (numel_of(shape) != static_cast<std::int64_t>(values.size())) {
        throw DimensionError("tensor of shape " + shape_str(shape) + " cannot hold " +
                             std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = shape;
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
    return from({}, std::vector<T>{value});
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(const Shape& shape, Rng& rng, double lo, double hi,
                                       bool requires_grad) {
    std::vector<T> values(static_cast<std::size_t>(numel_of(shape)));
    for (auto& v : values) v = static_cast<T>(rng.uniform(lo, hi));
    return from(shape, std::move(values), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::normal(const Shape& shape, Rng& rng, double mean, double stddev,
                                      bool requires_grad) {
    std::vector<T> values(static_cast<std::size_t>(numel_of(shape)));
    for (auto& v : values) v = static_cast<T>(rng.normal(mean, stddev));
    return from(shape, std::move(values), requires_grad);
}

template <typename T>
std::int64_t BasicTensor<T>::dim(int i) const {
    const int n = static_cast<int>(node_->shape.size());
    const int k = i < 0 ? n + i : i;
    if (k < 0 || k >= n) {
        throw DimensionError("dimension index " + std::to_string(i) + " out of range for shape " +
                             shape_str(node_->shape));
    }
    return node_->shape[static_cast<std::size_t>(k)];
}

template <typename T>
T BasicTensor<T>::item() const {
    if (node_->data.size() != 1) {
        throw ContractError("item() needs a single-element tensor, got " + shape_str(node_->shape));
    }
    return node_->data[0];
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool value) {
    if (!node_->is_leaf()) throw ContractError("requires_grad can only be changed on leaf tensors");
    node_->requires_grad = value;
    if (!value) node_->grad.clear();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
    return from(node_->shape, node_->data);
}

template <typename T>
void BasicTensor<T>::backward() const {
    if (node_->data.size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " + shape_str(node_->shape));
    }
    if (!node_->requires_grad) {
        throw ContractError("backward() on a tensor that does not require grad");
    }
    const auto graph = GradGraph<T>::build(*this);
    for (auto* n : graph.order) {
        if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));
    }
    node_->grad_buffer()[0] += T(1);
    for (auto it = graph.order.rbegin(); it != graph.order.rend(); ++it) {
        if (!(*it)->is_leaf()) (*it)->backward(**it);
    }
}

template <typename T>
GradGraph<T> GradGraph<T>::build(const BasicTensor<T>& root) {
    GradGraph<T> g;
    if (!root.defined() || !root.requires_grad()) return g;
    std::unordered_set<const TensorNode<T>*> visited;
    // Iterative post-order DFS.
    std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            TensorNode<T>* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            g.order.push_back(node);
            stack.pop_back();
        }
    }
    return g;
}

template <typename T>
BasicTensor<T> make_op(const char* name, Shape shape, std::vector<T> data,
                       const std::vector<BasicTensor<T>>& inputs,
                       std::function<void(TensorNode<T>&)> backward) {
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = name;
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    }
    if (needs) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& in : inputs) node->inputs.push_back(in.node());
        node->backward = std::move(backward);
    }
    return BasicTensor<T>(std::move(node));
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template struct GradGraph<float>;
template struct GradGraph<double>;
template BasicTensor<float> make_op(const char*, Shape, std::vector<float>,
                                    const std::vector<BasicTensor<float>>&,
                                    std::function<void(TensorNode<float>&)>);
template BasicTensor<double> make_op(const char*, Shape, std::vector<double>,
                                     const std::vector<BasicTensor<double>>&,
                                     std::function<void(TensorNode<double>&)>);

}  // namespace edlb
