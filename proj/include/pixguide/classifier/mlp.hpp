// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pixguide/data/segmap.hpp"
#include "pixguide/tensor/ops.hpp"

namespace pixguide {

/// Per-pixel MLP: in_dim -> hidden[0] -> hidden[1] -> K with ReLU between
/// the three affine layers.
template <class T>
class PixelClassifier {
public:
    PixelClassifier() = default;

    PixelClassifier(std::size_t in_dim, std::array<std::size_t, 2> hidden, std::size_t n_classes, std::uint64_t seed)
        : in_dim_(in_dim), hidden_(hidden), k_(n_classes) {
        PIXGUIDE_CHECK(in_dim > 0 && hidden[0] > 0 && hidden[1] > 0 && n_classes > 0, invalid_argument,
                       "classifier: dimensions must be positive");
        std::mt19937_64 rng(seed);
        const std::size_t dims[4] = {in_dim, hidden[0], hidden[1], n_classes};
        for (std::size_t l = 0; l < 3; ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
            std::uniform_real_distribution<double> u(-bound, bound);
            std::vector<T> w(dims[l + 1] * dims[l]), b(dims[l + 1]);
            for (auto& v : w) v = static_cast<T>(u(rng));
            for (auto& v : b) v = static_cast<T>(u(rng));
            params_.push_back(Tensor<T>(Shape{dims[l + 1], dims[l]}, std::move(w)));
            params_.push_back(Tensor<T>(Shape{dims[l + 1]}, std::move(b)));
        }
    }

    /// From explicit weights [W1, b1, W2, b2, W3, b3].
    explicit PixelClassifier(std::vector<Tensor<T>> params) : params_(std::move(params)) {
        PIXGUIDE_CHECK(params_.size() == 6, invalid_argument, "classifier: expected six parameter tensors");
        for (std::size_t l = 0; l < 3; ++l) {
            const auto& w = params_[2 * l];
            PIXGUIDE_CHECK(w.rank() == 2 && params_[2 * l + 1].shape() == Shape{w.dim(0)}, shape_mismatch,
                           "classifier: malformed layer " + std::to_string(l));
            if (l > 0)
                PIXGUIDE_CHECK(w.dim(1) == params_[2 * l - 2].dim(0), shape_mismatch, "classifier: layer widths differ");
        }
        in_dim_ = params_[0].dim(1);
        hidden_ = {params_[0].dim(0), params_[2].dim(0)};
        k_ = params_[4].dim(0);
    }

    std::size_t in_dim() const { return in_dim_; }
    std::size_t num_classes() const { return k_; }
    std::array<std::size_t, 2> hidden() const { return hidden_; }
    const std::vector<Tensor<T>>& parameters() const { return params_; }

    void set_trainable(bool flag) {
        for (auto& p : params_) p.set_requires_grad(flag);
    }

    /// rows [P, in_dim] -> logits [P, K].
    Tensor<T> logits(const Tensor<T>& rows) const {
        PIXGUIDE_CHECK(rows.rank() == 2 && rows.dim(1) == in_dim_, shape_mismatch,
                       "classifier: feature rows " + to_string(rows.shape()) + " do not match in_dim " +
                           std::to_string(in_dim_));
        auto h = relu(linear(rows, params_[0], params_[1]));
        h = relu(linear(h, params_[2], params_[3]));
        return linear(h, params_[4], params_[5]);
    }

    template <class U>
    PixelClassifier<U> cast() const {
        std::vector<Tensor<U>> p;
        for (const auto& t : params_) p.push_back(t.template cast<U>());
        return PixelClassifier<U>(std::move(p));
    }

private:
    std::size_t in_dim_ = 0;
    std::array<std::size_t, 2> hidden_{};
    std::size_t k_ = 0;
    std::vector<Tensor<T>> params_;
};

/// Per-row argmax, ties to the lowest class id.
template <class T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
    const std::size_t p = logits.dim(0), k = logits.dim(1);
    std::vector<int> out(p);
    for (std::size_t r = 0; r < p; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (logits[r * k + c] > logits[r * k + best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

/// features [1, d, H, W] -> label map.
template <class T>
SegMap predict_map(const PixelClassifier<T>& g, const Tensor<T>& features, const Palette& palette) {
    PIXGUIDE_CHECK(features.rank() == 4 && features.dim(0) == 1, shape_mismatch,
                   "predict_map: expected features [1, d, H, W], got " + to_string(features.shape()));
    PIXGUIDE_CHECK(features.dim(1) == g.in_dim(), shape_mismatch, "predict_map: feature dim differs from classifier");
    PIXGUIDE_CHECK(palette.size() == g.num_classes(), invalid_argument, "predict_map: palette size differs from K");
    return SegMap(features.dim(2), features.dim(3), argmax_rows(g.logits(pixel_rows(features.detach()))), palette);
}

}  // namespace pixguide
