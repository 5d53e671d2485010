#pragma once

// Define-by-run reverse-mode differentiation over Tensor<T>.
//
// A Var is a shared handle to a graph node. Ops record a backward closure on
// their output when grad mode is on and at least one input requires grad;
// otherwise they only compute values. backward() walks the recorded graph in
// reverse topological order and accumulates into each node's grad.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dseg/tensor.hpp"

namespace dseg {

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    /// Zero-initialized gradient buffer, allocated on first use.
    Tensor<T>& grad_buffer() {
        if (grad.shape() != value.shape() || grad.is_meta()) grad = Tensor<T>(value.shape());
        return grad;
    }
};

template <class T>
class Var {
public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false)
        : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
    [[nodiscard]] const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& mutable_value() { return node_->value; }
    [[nodiscard]] const Tensor<T>& grad() const { return node_->grad; }
    Tensor<T>& grad_buffer() { return node_->grad_buffer(); }
    [[nodiscard]] bool has_grad() const { return node_->grad.shape() == node_->value.shape(); }
    void zero_grad() {
        if (has_grad()) node_->grad.fill(T(0));
    }
    [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
    [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
    [[nodiscard]] bool is_meta() const { return node_->value.is_meta(); }

    [[nodiscard]] const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Thread-local switch for graph recording.
class GradMode {
public:
    static bool enabled();
    static void set(bool on);
};

class NoGradGuard {
public:
    NoGradGuard() : saved_(GradMode::enabled()) { GradMode::set(false); }
    ~NoGradGuard() { GradMode::set(saved_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool saved_;
};

/// Thread-local multiply-accumulate tally for conv ops while a scope is live.
class MacCounter {
public:
    MacCounter();
    ~MacCounter();
    MacCounter(const MacCounter&) = delete;
    MacCounter& operator=(const MacCounter&) = delete;

    [[nodiscard]] std::uint64_t macs() const { return macs_; }
    static void record(std::uint64_t macs);

private:
    std::uint64_t macs_ = 0;
    MacCounter* outer_;
};

/// Creates an output Var wired to `parents` if recording is warranted.
template <class T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> backward);

/// Seeds d(root)/d(root) = 1 and propagates. `root` must hold a single element.
template <class T>
void backward(const Var<T>& root);

}  // namespace dseg
