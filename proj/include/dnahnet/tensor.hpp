#pragma once

// Dense row-major tensors with a dynamic reverse-mode gradient graph.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dnahnet::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Storage is always 64-bit. In f32 mode every primitive rounds its result to
// the nearest binary32 value, which reproduces single-precision storage.
enum class Precision { f64, f32 };
void set_precision(Precision p);
Precision precision();

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this node's grad into its parents' grads.
    std::function<void(Node&)> backward;
    const char* op = "leaf";

    std::span<double> grad_buffer();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }
    // Rank <= 2 view: a rank-1 tensor of length n is a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const { return node_->value; }
    // Writable values. Only meaningful on leaves; used by optimizers and tests.
    std::span<double> mutable_data() { return node_->value; }
    double item() const;
    double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

    bool requires_grad() const { return node_->requires_grad; }
    // Empty when no gradient has been accumulated yet.
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad();

    const std::shared_ptr<Node>& node() const noexcept { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Builds the result of a primitive. Records the parents and backward rule
// only when gradients are enabled and some parent requires a gradient.
// Rejects non-finite results with NumericsError.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> parents, std::function<void(Node&)> backward);
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& parents, std::function<void(Node&)> backward);

// Reverse sweep from a scalar loss. Leaf gradients accumulate (+=); interior
// gradients are reset at the start of every sweep. Every tensor in `required`
// must be reachable from the loss, otherwise GraphError.
void backward(const Tensor& loss, std::span<const Tensor> required = {});

bool grad_enabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace dnahnet::ad
