// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <random>

#include "pixguide/classifier/mlp.hpp"
#include "pixguide/diffusion/sampling.hpp"
#include "pixguide/net/model.hpp"
#include "pixguide/tensor/adam.hpp"
#include "pixguide/tensor/autodiff.hpp"

namespace pixguide {

/// Features of x0 [3,S,S] noised to each step with the same eps, stacked
/// along channels: [1, d * steps.size(), S, S].
template <class T>
Tensor<T> noisy_features(const DiffusionModel<T>& model, const Tensor<T>& x0, const std::vector<int>& steps,
                         const Tensor<T>& eps) {
    PIXGUIDE_CHECK(!steps.empty(), invalid_argument, "noisy_features: no timesteps");
    const Shape s4{1, x0.dim(0), x0.dim(1), x0.dim(2)};
    const auto x = reshape(x0, s4), e = reshape(eps, s4);
    std::vector<Tensor<T>> parts;
    for (int t : steps) parts.push_back(model.features(q_sample(x, t, e, model.sched), t));
    return parts.size() == 1 ? parts.front() : concat(parts, 1);
}

template <class T>
struct TrainingPairs {
    Tensor<T> rows;           // [P, d]
    std::vector<int> labels;  // [P]
};

/// Noisy-pair construction: each pixel's feature from x_t is paired with
/// the label annotated on x0. Labels never depend on the drawn noise.
template <class T, class Rng>
TrainingPairs<T> build_training_pairs(const std::vector<Tensor<T>>& images, const std::vector<SegMap>& maps,
                                      const std::vector<int>& steps, const DiffusionModel<T>& model, Rng& rng) {
    PIXGUIDE_CHECK(!images.empty(), empty_dataset, "classifier: no annotated images");
    PIXGUIDE_CHECK(images.size() == maps.size(), shape_mismatch, "classifier: image and map counts differ");
    std::vector<T> rows;
    std::vector<int> labels;
    std::size_t d = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        maps[i].validate();
        PIXGUIDE_CHECK(maps[i].height == images[i].dim(1) && maps[i].width == images[i].dim(2), shape_mismatch,
                       "classifier: map size differs from image");
        const auto eps = randn<T>(images[i].shape(), rng);
        const auto f = pixel_rows(noisy_features(model, images[i], steps, eps));
        d = f.dim(1);
        rows.insert(rows.end(), f.values().begin(), f.values().end());
        labels.insert(labels.end(), maps[i].labels.begin(), maps[i].labels.end());
    }
    return {Tensor<T>(Shape{labels.size(), d}, std::move(rows)), std::move(labels)};
}

struct ClassifierTrainConfig {
    int epochs = 4;
    std::size_t batch = 64;
    double lr = 1e-3;
    std::array<std::size_t, 2> hidden{128, 32};
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"hidden", hidden}, {"seed", seed}};
    }
};

/// Cross-entropy training with Adam over shuffled pixel minibatches.
template <class T>
PixelClassifier<T> fit_pixel_classifier(const TrainingPairs<T>& data, std::size_t n_classes,
                                        const ClassifierTrainConfig& cfg) {
    PIXGUIDE_CHECK(!data.labels.empty(), empty_dataset, "classifier: no training pixels");
    for (int l : data.labels)
        PIXGUIDE_CHECK(l >= 0 && static_cast<std::size_t>(l) < n_classes, out_of_range,
                       "classifier: label " + std::to_string(l) + " out of range");
    std::mt19937_64 rng(cfg.seed);
    PixelClassifier<T> g(data.rows.dim(1), cfg.hidden, n_classes, rng());
    g.set_trainable(true);
    Adam<T> opt(g.parameters(), {.lr = cfg.lr});
    std::vector<std::size_t> order(data.labels.size());
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < order.size(); i += cfg.batch) {
            const std::size_t n = std::min(cfg.batch, order.size() - i);
            std::vector<std::size_t> idx(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(i + n));
            std::vector<int> lab(n);
            for (std::size_t j = 0; j < n; ++j) lab[j] = data.labels[idx[j]];
            auto loss = softmax_cross_entropy(g.logits(gather_rows(data.rows, std::move(idx))), lab);
            opt.step(gradients(loss, g.parameters()));
        }
    }
    g.set_trainable(false);
    return g;
}

/// G_t: features at a single timestep.
template <class T>
PixelClassifier<T> train_pixel_classifier(const std::vector<Tensor<T>>& images, const std::vector<SegMap>& maps,
                                          int t, const DiffusionModel<T>& model, const ClassifierTrainConfig& cfg) {
    std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66Dull);
    const auto data = build_training_pairs(images, maps, {t}, model, rng);
    return fit_pixel_classifier(data, maps.front().palette.size(), cfg);
}

/// G_multi: features at several timesteps concatenated.
template <class T>
PixelClassifier<T> train_multi_classifier(const std::vector<Tensor<T>>& images, const std::vector<SegMap>& maps,
                                          const std::vector<int>& steps, const DiffusionModel<T>& model,
                                          const ClassifierTrainConfig& cfg) {
    std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66Dull);
    const auto data = build_training_pairs(images, maps, steps, model, rng);
    return fit_pixel_classifier(data, maps.front().palette.size(), cfg);
}

/// Pixel accuracy of g on freshly noised images.
template <class T>
double pixel_accuracy(const PixelClassifier<T>& g, const std::vector<Tensor<T>>& images,
                      const std::vector<SegMap>& maps, const std::vector<int>& steps, const DiffusionModel<T>& model,
                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t hit = 0, n = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto eps = randn<T>(images[i].shape(), rng);
        const auto pred = predict_map(g, noisy_features(model, images[i], steps, eps), maps[i].palette);
        for (std::size_t p = 0; p < pred.size(); ++p) hit += pred.labels[p] == maps[i].labels[p];
        n += pred.size();
    }
    return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
}

}  // namespace pixguide
