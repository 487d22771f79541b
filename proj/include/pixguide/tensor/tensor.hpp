// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <Eigen/Core>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pixguide/error.hpp"

namespace pixguide {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

template <class T>
struct Node;

/// Receives the upstream gradient of a node and accumulates into the gradient
/// buffers of its inputs. An input that does not require grad gets an empty span.
template <class T>
using BackwardFn = std::function<void(std::span<const T> grad_out, std::vector<std::span<T>>& grad_in)>;

template <class T>
struct Node {
    Shape shape;
    std::vector<T> value;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<const Node>> inputs;
    BackwardFn<T> backward;
};

/// Dense row-major array with reverse-mode autodiff bookkeeping.
///
/// A Tensor is a cheap handle onto an immutable node. Results of ops record
/// their inputs only when at least one input requires grad, so inference
/// builds no graph. The only mutation path is `mutable_values()` on leaves,
/// which the optimizer uses.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
        PIXGUIDE_CHECK(numel(shape) == values.size(), shape_mismatch,
                       "tensor shape " + to_string(shape) + " does not match " +
                           std::to_string(values.size()) + " values");
        auto node = std::make_shared<Node<T>>();
        node->shape = std::move(shape);
        node->value = std::move(values);
        node->requires_grad = requires_grad;
        node_ = std::move(node);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor filled(Shape shape, T v) {
        auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, v));
    }

    static Tensor scalar(T v, bool requires_grad = false) { return Tensor(Shape{}, {v}, requires_grad); }

    static Tensor from_node(std::shared_ptr<Node<T>> node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }
    std::span<const T> values() const& { return node_->value; }
    std::span<const T> values() const&& = delete;
    const T* data() const { return node_->value.data(); }
    bool requires_grad() const { return node_->requires_grad; }
    const char* op() const { return node_->op; }

    T item() const {
        PIXGUIDE_CHECK(size() == 1, shape_mismatch, "item() on tensor of shape " + to_string(shape()));
        return node_->value[0];
    }

    T operator[](std::size_t i) const { return node_->value[i]; }

    bool is_leaf() const { return node_->inputs.empty() && !node_->backward; }

    /// Leaves only. Used by optimizers and by loaders; never on op results.
    std::span<T> mutable_values() {
        PIXGUIDE_CHECK(is_leaf(), invalid_argument, "mutable_values() on a non-leaf tensor");
        return node_->value;
    }

    void set_requires_grad(bool flag) {
        PIXGUIDE_CHECK(is_leaf(), invalid_argument, "set_requires_grad() on a non-leaf tensor");
        node_->requires_grad = flag;
    }

    /// Fresh leaf carrying a copy of the values, cut from any graph.
    Tensor detach(bool requires_grad = false) const { return Tensor(shape(), node_->value, requires_grad); }

    std::vector<T> to_vector() const { return node_->value; }

    const std::shared_ptr<Node<T>>& node() const { return node_; }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> out(node_->value.begin(), node_->value.end());
        return Tensor<U>(shape(), std::move(out));
    }

private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <class T>
void check_finite(const char* op, std::span<const T> values) {
    if (!Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(values.data(), static_cast<Eigen::Index>(values.size()))
             .allFinite())
        throw Error(ErrorCode::non_finite, std::string("non-finite value produced by ") + op);
}

/// Wraps a freshly computed value into a node. The graph edge and backward
/// rule are kept only when some input requires grad.
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value, std::vector<Tensor<T>> inputs,
                      BackwardFn<T> backward) {
    check_finite<T>(op, value);
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& in : inputs) node->inputs.push_back(in.node());
        node->backward = std::move(backward);
    }
    return Tensor<T>::from_node(std::move(node));
}

}  // namespace detail

}  // namespace pixguide
