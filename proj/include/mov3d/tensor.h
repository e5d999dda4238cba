#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mov3d {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Called once during the reverse sweep with the node whose grad is complete.
using BackwardFn = std::function<void(Node& self)>;

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    BackwardFn backward;

    bool is_leaf() const { return !backward; }
    // Lazily sizes the grad buffer to match data.
    std::vector<double>& grad_buffer();
};

}  // namespace detail

// Thread-local switch for graph recording. Inference paths wrap themselves
// in a NoGradGuard so forward passes allocate no backward closures.
class GradMode {
  public:
    static bool enabled();
    static void set_enabled(bool on);
};

class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

// Dense row-major array with an optional reverse-mode gradient.
//
// A Tensor is a shared handle: copies alias the same storage and graph
// node. Results of operations are immutable; only leaves created by the
// user (parameters, inputs) expose mutable data.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
    static Tensor scalar(double value) { return Tensor(Shape{1}, value); }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    std::size_t dim(std::size_t axis) const;

    std::span<const double> data() const;
    // Only valid on leaves; mutating a recorded intermediate would corrupt
    // the values its backward closure captured.
    std::span<double> mutable_data();
    double item() const;
    double operator[](std::size_t i) const { return data()[i]; }

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on = true);
    bool has_grad() const;
    // Zero-filled view when no gradient has been accumulated yet.
    std::vector<double> grad() const;
    std::span<const double> grad_span() const;
    void zero_grad();

    // Reverse sweep from this scalar. Interior gradients are recomputed from
    // scratch each call; leaf gradients accumulate.
    void backward() const;

    // Value copy detached from any graph.
    Tensor detach() const;
    Tensor clone() const { return detach(); }

    const detail::NodePtr& node() const { return node_; }
    static Tensor from_node(detail::NodePtr node);

  private:
    detail::NodePtr node_;
};

// Builds an op result. When recording is on and any input requires grad,
// the result keeps the inputs alive and will run `backward` during the sweep.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   detail::BackwardFn backward);

// Accumulates `values` into the grad of `t` if it participates in autodiff.
void accumulate_grad(const detail::NodePtr& node, std::span<const double> values);

}  // namespace mov3d
