#include "dnahnet/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "dnahnet/errors.hpp"

namespace dnahnet::ad {

namespace {

std::atomic<Precision> g_precision{Precision::f64};
thread_local bool t_grad_enabled = true;

}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
}

void set_precision(Precision p) { g_precision.store(p); }
Precision precision() { return g_precision.load(); }

std::span<double> Node::grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw ShapeError("tensor of shape " + shape_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
    const auto& s = node_->shape;
    return s.size() < 2 ? 1 : s[0];
}

std::size_t Tensor::cols() const {
    const auto& s = node_->shape;
    if (s.empty()) return 1;
    if (s.size() == 1) return s[0];
    return shape_size(s) / s[0];
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

namespace {

void finish_values(const char* op, std::vector<double>& value) {
    const bool round32 = g_precision.load(std::memory_order_relaxed) == Precision::f32;
    for (auto& x : value) {
        if (!std::isfinite(x)) throw NumericsError(std::string("non-finite result in ") + op);
        if (round32) x = static_cast<double>(static_cast<float>(x));
    }
}

template <typename Range>
Tensor make_result_impl(const char* op, Shape shape, std::vector<double> value,
                        const Range& parents, std::function<void(Node&)> backward) {
    if (shape_size(shape) != value.size()) {
        throw ShapeError(std::string(op) + ": result shape " + shape_string(shape) +
                         " does not match " + std::to_string(value.size()) + " values");
    }
    finish_values(op, value);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    if (t_grad_enabled) {
        bool any = false;
        for (const auto& p : parents) any = any || (p.defined() && p.requires_grad());
        if (any) {
            node->requires_grad = true;
            node->backward = std::move(backward);
            for (const auto& p : parents) node->parents.push_back(p.node());
        }
    }
    return Tensor(std::move(node));
}

}  // namespace

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> parents, std::function<void(Node&)> backward) {
    return make_result_impl(op, std::move(shape), std::move(value), parents, std::move(backward));
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& parents, std::function<void(Node&)> backward) {
    return make_result_impl(op, std::move(shape), std::move(value), parents, std::move(backward));
}

void backward(const Tensor& loss, std::span<const Tensor> required) {
    if (!loss.defined() || loss.size() != 1) {
        throw ShapeError("backward requires a scalar loss");
    }
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    if (loss.requires_grad()) {
        // Iterative post-order DFS.
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(loss.node().get(), 0);
        seen.insert(loss.node().get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                Node* parent = node->parents[next++].get();
                if (parent && parent->requires_grad && seen.insert(parent).second) {
                    stack.emplace_back(parent, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }
    for (const auto& r : required) {
        if (!r.defined() || !seen.contains(r.node().get())) {
            throw GraphError("loss does not depend on a required parameter");
        }
    }
    if (order.empty()) return;
    for (Node* n : order) {
        if (n->parents.empty()) {
            n->grad_buffer();
        } else {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    Node* root = order.back();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->parents.empty() && n->backward) n->backward(*n);
    }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace dnahnet::ad
