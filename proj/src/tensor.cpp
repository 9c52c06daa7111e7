#include "uesa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace uesa {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

NonFiniteError::NonFiniteError(std::string op)
    : std::runtime_error("non-finite value produced by op '" + op + "'"), op_(std::move(op)) {}

Tensor::Tensor() : Tensor(Shape{1}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    for (auto d : shape) {
        if (d == 0) throw std::invalid_argument("tensor dimension must be positive: " + shape_to_string(shape));
    }
    if (shape.empty()) throw std::invalid_argument("tensor rank must be at least 1");
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_to_string(shape));
    }
    for (double v : data) {
        if (!std::isfinite(v)) throw NonFiniteError("leaf");
    }
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0); }
Tensor Tensor::ones(const Shape& shape) { return full(shape, 1.0); }
Tensor Tensor::full(const Shape& shape, double value) {
    return Tensor(shape, std::vector<double>(shape_numel(shape), value));
}
Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, {value}); }

Tensor Tensor::from_node(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item() needs a single-element tensor, got " + shape_to_string(shape()));
    return node_->data[0];
}

std::span<double> Tensor::mutable_data() {
    if (node_->backward) throw std::logic_error("mutable_data() is only valid on leaf tensors");
    return node_->data;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(shape(), node_->data); }

Tensor Tensor::requiring_grad() const { return Tensor(shape(), node_->data, true); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   BackwardFn backward) {
    for (double v : data) {
        if (!std::isfinite(v)) throw NonFiniteError(op);
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    const bool track = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                                     [](const Tensor& t) { return t.requires_grad(); });
    if (track) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (auto& t : inputs) node->parents.push_back(t.node_ptr());
        node->backward = std::move(backward);
    }
    return Tensor::from_node(std::move(node));
}

}  // namespace detail

namespace {

// Reverse topological order (root first) over nodes that require a gradient.
std::vector<Node*> reverse_topo(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

template <typename LeafSink>
void run_backward(const Tensor& root, LeafSink&& sink) {
    if (root.numel() != 1) {
        throw std::invalid_argument("backward needs a scalar root, got " + shape_to_string(root.shape()));
    }
    if (!root.requires_grad()) return;
    Node* root_node = const_cast<Node*>(root.node());
    auto order = reverse_topo(root_node);

    std::unordered_map<Node*, std::vector<double>> grads;
    grads[root_node] = {1.0};
    std::vector<double*> parent_ptrs;
    for (Node* node : order) {
        auto it = grads.find(node);
        if (it == grads.end()) continue;
        if (!node->backward) {
            sink(node, it->second);
            grads.erase(it);
            continue;
        }
        parent_ptrs.assign(node->parents.size(), nullptr);
        for (std::size_t i = 0; i < node->parents.size(); ++i) {
            Node* p = node->parents[i].get();
            if (!p->requires_grad) continue;
            auto& g = grads[p];
            if (g.empty()) g.assign(p->data.size(), 0.0);
            parent_ptrs[i] = g.data();
        }
        // `it` may be invalidated by the inserts above.
        std::vector<double> gout = std::move(grads[node]);
        grads.erase(node);
        node->backward(*node, gout, parent_ptrs);
    }
}

}  // namespace

void Tensor::backward() const {
    run_backward(*this, [](Node* leaf, const std::vector<double>& g) {
        if (leaf->grad.empty()) leaf->grad.assign(leaf->data.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) leaf->grad[i] += g[i];
    });
}

LeafGradients compute_gradients(const Tensor& root) {
    LeafGradients out;
    run_backward(root, [&out](Node* leaf, std::vector<double>& g) { out[leaf] = std::move(g); });
    return out;
}

}  // namespace uesa
