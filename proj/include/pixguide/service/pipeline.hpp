// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>

#include "pixguide/classifier/bank.hpp"
#include "pixguide/edit/result.hpp"
#include "pixguide/edit/roi.hpp"
#include "pixguide/io/base64.hpp"
#include "pixguide/io/dataset.hpp"
#include "pixguide/io/rle.hpp"
#include "pixguide/net/train.hpp"
#include "pixguide/service/workspace.hpp"

// Pipeline steps shared by the command line and the HTTP service.

namespace pixguide {

struct Artifacts {
    DiffusionModel<double> model;
    ClassifierBank<double> bank;
    std::string digest;  // content hash of the two checkpoint files
};

inline std::shared_ptr<const Artifacts> load_artifacts(const std::filesystem::path& model_path,
                                                       const std::filesystem::path& bank_path) {
    PIXGUIDE_CHECK(std::filesystem::exists(model_path), missing_artifact, "no model at " + model_path.string());
    PIXGUIDE_CHECK(std::filesystem::exists(bank_path), missing_artifact, "no classifier bank at " + bank_path.string());
    auto a = std::make_shared<Artifacts>(Artifacts{DiffusionModel<double>::load(model_path),
                                                   ClassifierBank<double>::load(bank_path),
                                                   sha256_hex(sha256_hex(read_file(model_path)) + sha256_hex(read_file(bank_path)))});
    PIXGUIDE_CHECK(a->bank.per_t.empty() || a->bank.per_t.begin()->second.in_dim() == a->model.config().feature_dim(),
                   missing_artifact, "classifier bank does not match the model's feature size");
    return a;
}

/// Loaded artifacts keyed by path; reloaded when a file changes on disk.
class ArtifactCache {
public:
    std::shared_ptr<const Artifacts> get(const std::filesystem::path& model, const std::filesystem::path& bank) {
        PIXGUIDE_CHECK(std::filesystem::exists(model), missing_artifact, "no model at " + model.string());
        PIXGUIDE_CHECK(std::filesystem::exists(bank), missing_artifact, "no classifier bank at " + bank.string());
        const auto key = model.string() + "|" + bank.string();
        const auto stamp = std::filesystem::last_write_time(model).time_since_epoch().count() ^
                           (std::filesystem::last_write_time(bank).time_since_epoch().count() * 31);
        std::lock_guard lock(mu_);
        auto& e = entries_[key];
        if (!e.artifacts || e.stamp != stamp) e = {load_artifacts(model, bank), stamp};
        return e.artifacts;
    }

private:
    struct Entry {
        std::shared_ptr<const Artifacts> artifacts;
        long long stamp = 0;
    };
    std::mutex mu_;
    std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Wire payloads

/// Image payload: a base64 PNG string, {"png": base64}, or {"hash": h}
/// naming an image already in the workspace.
inline std::vector<std::uint8_t> decode_image_png(const nlohmann::json& j, const Workspace* ws) {
    if (j.is_string()) return base64_decode(j.get<std::string>());
    PIXGUIDE_CHECK(j.is_object(), invalid_argument, "image must be a base64 string or an object");
    if (j.contains("png")) return base64_decode(j.at("png").get<std::string>());
    PIXGUIDE_CHECK(j.contains("hash"), invalid_argument, "image object needs 'png' or 'hash'");
    PIXGUIDE_CHECK(ws != nullptr, invalid_argument, "image hashes need a workspace");
    auto bytes = ws->get_image(j.at("hash"));
    PIXGUIDE_CHECK(bytes.has_value(), missing_artifact, "unknown image " + j.at("hash").get<std::string>());
    return *bytes;
}

/// Map payload: {"png": base64 gray, "palette": [...]} or the run-length
/// form {"height", "width", "runs", "palette"}.
inline SegMap decode_map(const nlohmann::json& j, const Palette& fallback) {
    PIXGUIDE_CHECK(j.is_object(), invalid_argument, "map must be an object");
    if (j.contains("runs")) return segmap_from_rle(j, fallback);
    PIXGUIDE_CHECK(j.contains("png"), invalid_argument, "map object needs 'png' or 'runs'");
    const Palette p = j.contains("palette") ? palette_from_json(j.at("palette")) : fallback;
    return labels_from_png(base64_decode(j.at("png").get<std::string>()), p);
}

inline nlohmann::json encode_map(const SegMap& y) {
    auto j = segmap_to_rle(y);
    j["png"] = base64_encode(labels_to_png(y));
    return j;
}

inline nlohmann::json mask_to_json(const RoiMask& m) {
    SegMap bits(m.height, m.width, std::vector<int>(m.bits.begin(), m.bits.end()), {{"keep", {0, 0, 0}}, {"edit", {255, 255, 255}}});
    auto j = segmap_to_rle(bits);
    j["pixels"] = m.count();
    j["core_pixels"] = m.core_count();
    return j;
}

/// Class list given by names or ids.
inline std::vector<int> parse_classes(const nlohmann::json& j, const Palette& palette) {
    std::vector<int> out;
    for (const auto& c : j) {
        int id = -1;
        if (c.is_number_integer()) id = c.get<int>();
        else {
            for (std::size_t i = 0; i < palette.size(); ++i)
                if (palette[i].name == c.get<std::string>()) id = static_cast<int>(i);
        }
        PIXGUIDE_CHECK(id >= 0 && id < static_cast<int>(palette.size()), invalid_argument,
                       "unknown class " + c.dump());
        out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Editing

struct EditRequest {
    std::vector<std::uint8_t> image_png;
    SegMap y_edited;
    std::optional<SegMap> y;  // estimated from the image when absent
    std::vector<int> q_edit;  // classes that differ between y and y_edited when empty
    bool auto_params = false;
    GuidanceParams params;
    ParamPolicy policy = ParamPolicy::toy();
    GuidanceOptions options;
    Selection selection = Selection::quantitative;
    std::uint64_t selection_seed = 0;
    std::string precision = "double";

    /// Fields: image, map, original_map?, q_edit?, auto_params?, params?,
    /// policy?, options? {literal_sign, background_alpha_t}, selection?,
    /// selection_seed?, precision?.
    static EditRequest from_json(const nlohmann::json& j, const Workspace* ws, const Palette& palette) {
        PIXGUIDE_CHECK(j.is_object(), invalid_argument, "edit request must be a JSON object");
        PIXGUIDE_CHECK(j.contains("image") && j.contains("map"), invalid_argument, "edit request needs image and map");
        EditRequest r;
        r.image_png = decode_image_png(j.at("image"), ws);
        r.y_edited = decode_map(j.at("map"), palette);
        if (j.contains("original_map")) r.y = decode_map(j.at("original_map"), palette);
        if (j.contains("q_edit")) r.q_edit = parse_classes(j.at("q_edit"), r.y_edited.palette);
        r.auto_params = j.value("auto_params", false);
        if (j.contains("params")) r.params = GuidanceParams::from_json(j.at("params"));
        if (j.contains("policy")) r.policy = ParamPolicy::from_json(j.at("policy"));
        if (j.contains("options")) {
            r.options.literal_sign = j.at("options").value("literal_sign", false);
            r.options.background_alpha_t = j.at("options").value("background_alpha_t", false);
        }
        r.selection = parse_selection(j.value("selection", std::string("quantitative")));
        r.selection_seed = j.value("selection_seed", std::uint64_t{0});
        r.precision = j.value("precision", std::string("double"));
        PIXGUIDE_CHECK(r.precision == "double" || r.precision == "float", invalid_argument,
                       "precision must be double or float");
        return r;
    }

    /// Canonical form used for request hashing.
    nlohmann::json canonical() const {
        nlohmann::json j{{"image", sha256_hex(image_png)},
                         {"map", segmap_to_rle(y_edited)},
                         {"q_edit", q_edit},
                         {"auto_params", auto_params},
                         {"params", params.to_json()},
                         {"options", {{"literal_sign", options.literal_sign}, {"background_alpha_t", options.background_alpha_t}}},
                         {"selection", selection == Selection::random ? "random" : "quantitative"},
                         {"selection_seed", selection_seed},
                         {"precision", precision}};
        if (auto_params) j["policy"] = policy.to_json();
        if (y) j["original_map"] = segmap_to_rle(*y);
        return j;
    }
};

struct PreparedEdit {
    Tensor<double> x;
    SegMap y, y_edited;
    bool y_estimated = false;
    std::vector<int> q_edit;
    RoiMask m;
    GuidanceParams params;
};

/// Decodes and validates an edit: builds the ROI and resolves parameters.
/// Fails with empty_roi / out_of_range before any sampling starts.
inline PreparedEdit prepare_edit(const EditRequest& r, const Artifacts& a) {
    PreparedEdit p;
    p.x = image_from_png(r.image_png);
    const auto S = a.model.config().image_size;
    PIXGUIDE_CHECK(p.x.dim(1) == S && p.x.dim(2) == S, shape_mismatch,
                   "image is " + std::to_string(p.x.dim(2)) + "x" + std::to_string(p.x.dim(1)) + ", model expects " +
                       std::to_string(S) + "x" + std::to_string(S));
    PIXGUIDE_CHECK(r.y_edited.height == S && r.y_edited.width == S, shape_mismatch, "edited map size differs from image");
    PIXGUIDE_CHECK(r.y_edited.num_classes() == static_cast<int>(a.bank.palette.size()), invalid_argument,
                   "edited map palette has a different class count than the classifiers");
    p.y_edited = r.y_edited;
    if (r.y) {
        p.y = *r.y;
    } else {
        p.y = estimate_map(p.x, a.model, a.bank);
        p.y_estimated = true;
    }
    p.q_edit = r.q_edit.empty() ? changed_classes(p.y, p.y_edited) : r.q_edit;
    PIXGUIDE_CHECK(!p.q_edit.empty(), empty_roi, "empty ROI: the edited map does not change any class");
    p.m = build_roi_mask(p.y, p.y_edited, p.q_edit);
    PIXGUIDE_CHECK(p.m.count() > 0, empty_roi, "empty ROI: no pixel carries an edited class");
    p.params = r.auto_params ? select_params(p.m, r.policy, r.params.seed) : r.params;
    if (r.auto_params) p.params.batch = r.params.batch;
    p.params.validate(a.model.sched.steps());
    return p;
}

struct EditOutcome {
    EditResult<double> result;
    std::size_t chosen = 0;
    double seconds = 0;
};

inline EditOutcome run_edit(const PreparedEdit& p, const EditRequest& r, const Artifacts& a,
                            const EditObserver<double>& observer = {}) {
    const auto start = std::chrono::steady_clock::now();
    EditOutcome out;
    if (r.precision == "float") {
        const auto model = DiffusionModel<float>::from_checkpoint(a.model.to_checkpoint());
        const auto bank = a.bank.cast<float>();
        EditObserver<float> obs;
        if (observer)
            obs = [&](const StepEvent<float>& e) {
                const auto x0 = e.x0_pred->cast<double>();
                observer({e.candidate, e.step, e.n_steps, e.t, e.snr, e.accuracy, e.loss, &x0});
            };
        auto res = guided_sample(p.x.cast<float>(), p.y_edited, p.m, p.params, model, bank, r.options, obs);
        out.result.params = res.params;
        for (auto& c : res.candidates)
            out.result.candidates.push_back(
                {c.failed ? Tensor<double>() : c.image.cast<double>(), c.metrics, c.trace, c.failed, c.error});
    } else {
        out.result = guided_sample(p.x, p.y_edited, p.m, p.params, a.model, a.bank, r.options, observer);
    }
    out.chosen = select_candidate(out.result, r.selection, r.selection_seed);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// Full JSON record of an edit; `image_ref` stores a candidate image and
/// returns its reference.
inline nlohmann::json edit_record(const PreparedEdit& p, const EditRequest& r, const EditOutcome& o,
                                  const std::function<std::string(const Tensor<double>&)>& image_ref) {
    auto j = edit_result_to_json<double>(o.result, image_ref);
    j["kind"] = "edit";
    j["auto_params"] = r.auto_params;
    j["q_edit"] = p.q_edit;
    j["roi"] = mask_to_json(p.m);
    j["original_map"] = segmap_to_rle(p.y);
    j["original_map_estimated"] = p.y_estimated;
    j["edited_map"] = segmap_to_rle(p.y_edited);
    j["chosen"] = o.chosen;
    j["selection"] = r.selection == Selection::random ? "random" : "quantitative";
    j["precision"] = r.precision;
    j["runtime_s"] = o.seconds;
    j["options"] = {{"literal_sign", r.options.literal_sign}, {"background_alpha_t", r.options.background_alpha_t}};
    return j;
}

// ---------------------------------------------------------------------------
// Training

/// Every timestep the guided sampler visits under `policy` (both presets on
/// their respaced grids), plus `extra`.
inline std::vector<int> classifier_timesteps(const ParamPolicy& policy, const NoiseSchedule& sched,
                                             const std::vector<int>& extra = {}) {
    std::set<int> ts(extra.begin(), extra.end());
    for (const auto& p : {policy.small, policy.large}) {
        if (p.t0 > sched.steps()) continue;
        const auto grid = respace(sched, std::min(policy.n_steps, p.t0), p.t0);
        ts.insert(grid.steps().begin(), grid.steps().end());
    }
    return {ts.begin(), ts.end()};
}

/// Trains the backbone in `precision` and returns it in double.
inline DiffusionModel<double> train_backbone(const std::vector<Tensor<double>>& images, const UNetConfig& cfg,
                                             const NoiseSchedule& sched, const DdpmTrainConfig& tc,
                                             const std::string& precision, const TrainObserver& observer = {}) {
    if (precision == "double") return train_ddpm(images, cfg, sched, tc, observer).model;
    PIXGUIDE_CHECK(precision == "float", invalid_argument, "precision must be double or float");
    std::vector<Tensor<float>> f;
    for (const auto& x : images) f.push_back(x.cast<float>());
    return DiffusionModel<double>::from_checkpoint(train_ddpm(f, cfg, sched, tc, observer).model.to_checkpoint());
}

}  // namespace pixguide
