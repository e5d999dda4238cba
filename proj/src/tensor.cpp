#include "mov3d/tensor.h"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "mov3d/error.h"

namespace mov3d {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

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

namespace detail {

std::vector<double>& Node::grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
    for (auto e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
}

}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(Shape shape, double fill) {
    check_shape(shape);
    node_ = std::make_shared<detail::Node>();
    node_->data.assign(shape_numel(shape), fill);
    node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
    check_shape(shape);
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    }
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->data = std::move(values);
}

Tensor Tensor::from_node(detail::NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

const Shape& Tensor::shape() const {
    if (!node_) throw UsageError("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw DimensionError("axis out of range for " + shape_str(s));
    return s[axis];
}

std::span<const double> Tensor::data() const {
    if (!node_) throw UsageError("use of undefined tensor");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw UsageError("use of undefined tensor");
    if (!node_->is_leaf()) throw UsageError("cannot mutate a recorded intermediate tensor");
    return node_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (!node_) throw UsageError("use of undefined tensor");
    if (!node_->is_leaf()) throw UsageError("requires_grad can only be changed on leaves");
    node_->requires_grad = on;
    return *this;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::vector<double> Tensor::grad() const {
    if (!node_) throw UsageError("use of undefined tensor");
    if (!has_grad()) return std::vector<double>(node_->data.size(), 0.0);
    return node_->grad;
}

std::span<const double> Tensor::grad_span() const {
    if (!has_grad()) throw UsageError("tensor has no accumulated gradient");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), std::vector<double>(data().begin(), data().end())); }

void Tensor::backward() const {
    if (!node_) throw UsageError("backward() on undefined tensor");
    if (!node_->requires_grad || node_->is_leaf()) {
        throw UsageError("backward() on a tensor with no recorded graph");
    }
    if (node_->data.size() != 1) {
        throw UsageError("backward() requires a scalar, got " + shape_str(node_->shape));
    }

    // Tape: post-order DFS gives parents before children; the reverse sweep
    // then visits every node after all of its consumers.
    std::vector<detail::Node*> tape;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && !p->is_leaf() && visited.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            tape.push_back(n);
            stack.pop_back();
        }
    }

    for (auto* n : tape) n->grad.assign(n->data.size(), 0.0);
    node_->grad[0] = 1.0;
    for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
        (*it)->backward(**it);
    }
    // Release interior buffers; only leaves keep gradients.
    for (auto* n : tape) {
        if (n != node_.get()) std::vector<double>().swap(n->grad);
    }
}

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   detail::BackwardFn backward) {
    Tensor out(std::move(shape), std::move(values));
    if (!GradMode::enabled()) return out;
    bool needs = false;
    for (const auto& t : inputs) needs = needs || t.requires_grad();
    if (!needs) return out;
    auto& node = *out.node();
    node.requires_grad = true;
    node.parents.reserve(inputs.size());
    for (auto& t : inputs) node.parents.push_back(t.node());
    node.backward = std::move(backward);
    return out;
}

void accumulate_grad(const detail::NodePtr& node, std::span<const double> values) {
    if (!node || !node->requires_grad) return;
    auto& g = node->grad_buffer();
    for (std::size_t i = 0; i < values.size(); ++i) g[i] += values[i];
}

}  // namespace mov3d
