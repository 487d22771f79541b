// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pixguide/tensor/tensor.hpp"

namespace pixguide {

/// Reverse-mode gradients of a scalar `loss` with respect to each tensor in
/// `wrt`. Gradient buffers live only for the duration of the call, so the
/// graph can be differentiated again with respect to other tensors.
template <class T>
std::vector<Tensor<T>> gradients(const Tensor<T>& loss, const std::vector<Tensor<T>>& wrt, T seed = T(1)) {
    PIXGUIDE_CHECK(loss.defined() && loss.size() == 1, shape_mismatch,
                   "gradient() needs a scalar loss");
    using NodePtr = const Node<T>*;

    // Iterative post-order DFS over the nodes that carry gradient.
    std::vector<NodePtr> order;
    std::unordered_set<NodePtr> visited;
    if (loss.requires_grad()) {
        std::vector<std::pair<NodePtr, std::size_t>> stack{{loss.node().get(), 0}};
        visited.insert(loss.node().get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->inputs.size()) {
                NodePtr child = node->inputs[next++].get();
                if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }

    std::unordered_set<NodePtr> targets;
    for (const auto& w : wrt) {
        PIXGUIDE_CHECK(w.defined() && visited.count(w.node().get()), not_in_graph,
                       "gradient(): tensor does not participate in the loss graph");
        targets.insert(w.node().get());
    }

    std::unordered_map<NodePtr, std::vector<T>> grads;
    grads[loss.node().get()] = std::vector<T>(1, seed);
    std::vector<std::span<T>> grad_in;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodePtr node = *it;
        auto found = grads.find(node);
        if (found == grads.end()) continue;
        if (node->backward) {
            grad_in.assign(node->inputs.size(), std::span<T>{});
            for (std::size_t i = 0; i < node->inputs.size(); ++i) {
                NodePtr in = node->inputs[i].get();
                if (!in->requires_grad) continue;
                auto& buf = grads[in];
                if (buf.empty()) buf.assign(in->value.size(), T(0));
                grad_in[i] = buf;
            }
            // grads may rehash above; look the upstream buffer up again.
            const auto& upstream = grads.at(node);
            node->backward(upstream, grad_in);
        }
        if (!targets.count(node)) grads.erase(node);
    }

    std::vector<Tensor<T>> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) {
        auto found = grads.find(w.node().get());
        std::vector<T> g = found != grads.end() ? found->second : std::vector<T>(w.size(), T(0));
        detail::check_finite<T>("gradient", g);
        out.emplace_back(w.shape(), std::move(g));
    }
    return out;
}

template <class T>
Tensor<T> gradient(const Tensor<T>& loss, const Tensor<T>& wrt) {
    return gradients<T>(loss, {wrt}).front();
}

}  // namespace pixguide
