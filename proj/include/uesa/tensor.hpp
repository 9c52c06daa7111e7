#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace uesa {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Thrown when an op produces NaN or Inf. `op()` names the offending op.
class NonFiniteError : public std::runtime_error {
public:
    explicit NonFiniteError(std::string op);
    const std::string& op() const noexcept { return op_; }

private:
    std::string op_;
};

struct Node;

/// Accumulates the gradient of one node's output into its parents.
/// `parent_grads[i]` is null when parent i does not require a gradient.
using BackwardFn = std::function<void(const Node& self, std::span<const double> grad_out,
                                      std::span<double* const> parent_grads)>;

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;
};

/// Dense row-major tensor of doubles with reverse-mode gradient support.
///
/// A Tensor is a shared handle to an immutable value. Ops allocate new nodes and,
/// when grad mode is on and an input requires a gradient, record a backward closure.
/// Leaves that require a gradient accumulate into `grad()` on `backward()`.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(const Shape& shape);
    static Tensor ones(const Shape& shape);
    static Tensor full(const Shape& shape, double value);
    static Tensor scalar(double value);

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

    std::span<const double> data() const { return node_->data; }
    double operator[](std::size_t i) const { return node_->data[i]; }
    double item() const;

    /// Leaf parameters only: in-place access for optimizers and loaders.
    std::span<double> mutable_data();

    bool requires_grad() const { return node_->requires_grad; }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad();

    /// Seeds d(root)/d(root) = 1 (root must hold one element) and accumulates
    /// into every reachable leaf that requires a gradient.
    void backward() const;

    /// Copy of the values with no history.
    Tensor detach() const;
    Tensor requiring_grad() const;

    const Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

    static Tensor from_node(std::shared_ptr<Node> node);

private:
    std::shared_ptr<Node> node_;
};

/// Gradient of a scalar root w.r.t. every leaf requiring a gradient, keyed by leaf node.
/// Leaf `grad()` buffers are left untouched.
using LeafGradients = std::unordered_map<const Node*, std::vector<double>>;
LeafGradients compute_gradients(const Tensor& root);

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {
/// Builds the output node of an op. Records history only when needed.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward);
}  // namespace detail

}  // namespace uesa
