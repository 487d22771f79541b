// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iostream>

#include "pixguide/service/http.hpp"

using namespace pixguide;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) { write_file(p, std::vector<std::uint8_t>(s.begin(), s.end())); }

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& p) {
    const auto b = read_file(p);
    return nlohmann::json::parse(b.begin(), b.end());
}

/// Gray-label PNG, or a .json file holding the run-length form.
SegMap read_map(const fs::path& p, const Palette& palette) {
    if (p.extension() == ".json") return segmap_from_rle(read_json(p), palette);
    return labels_from_png(read_file(p), palette);
}

ParamPolicy read_policy(const std::string& path) {
    return path.empty() ? ParamPolicy::toy() : ParamPolicy::from_json(read_json(path));
}

struct Progress {
    int every = 100;
    void operator()(int step, double loss) const {
        if ((step + 1) % every == 0) std::cerr << "step " << step + 1 << " loss " << loss << "\n";
    }
};

Service* g_service = nullptr;

extern "C" void on_signal(int) {
    if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Segmentation-guided diffusion editing on synthetic scenes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "pixguide 0.1.0");
    std::function<void()> run;

    // dataset gen
    auto* dataset = app.add_subcommand("dataset", "Synthetic dataset tools")->require_subcommand(1);
    auto* gen = dataset->add_subcommand("gen", "Generate train/annotated/test splits");
    std::string gen_out, gen_spec;
    std::uint64_t gen_seed = 0;
    DatasetSizes sizes;
    std::size_t gen_size = 32;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_seed, "Dataset seed");
    gen->add_option("--train", sizes.train, "Training images");
    gen->add_option("--annotated", sizes.annotated, "Annotated images for the classifiers");
    gen->add_option("--test", sizes.test, "Test images");
    gen->add_option("--size", gen_size, "Image size in pixels");
    gen->add_option("--spec", gen_spec, "Scene spec JSON file")->check(CLI::ExistingFile);
    gen->callback([&] {
        run = [&] {
            auto spec = gen_spec.empty() ? SceneSpec{} : SceneSpec::from_json(read_json(gen_spec));
            spec.image_size = gen_size;
            spec.validate();
            save_dataset(gen_out, spec, generate_dataset(spec, sizes, gen_seed));
            std::cout << "wrote " << sizes.train + sizes.annotated + sizes.test << " scenes to " << gen_out << "\n";
        };
    });

    // train ddpm / classifiers
    auto* train = app.add_subcommand("train", "Training")->require_subcommand(1);
    auto* tddpm = train->add_subcommand("ddpm", "Train the denoising backbone");
    std::string td_data, td_out, td_precision = "float", td_unet;
    DdpmTrainConfig tc;
    int td_T = 1000;
    Progress td_progress;
    tddpm->add_option("--data", td_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    tddpm->add_option("--out", td_out, "Output checkpoint")->required();
    tddpm->add_option("--steps", tc.steps, "Optimizer steps");
    tddpm->add_option("--batch", tc.batch, "Batch size");
    tddpm->add_option("--lr", tc.adam.lr, "Adam learning rate");
    tddpm->add_option("--warmup", tc.warmup, "Linear warmup steps");
    tddpm->add_option("--grad-clip", tc.grad_clip, "Global gradient-norm clip");
    tddpm->add_option("--seed", tc.seed, "Sampling seed");
    tddpm->add_option("--init-seed", tc.init_seed, "Weight initialization seed");
    tddpm->add_option("--T", td_T, "Diffusion steps");
    tddpm->add_option("--unet", td_unet, "U-Net config JSON file")->check(CLI::ExistingFile);
    tddpm->add_option("--precision", td_precision, "float or double")->check(CLI::IsMember({"float", "double"}));
    tddpm->add_option("--log-every", td_progress.every, "Loss print interval")->check(CLI::PositiveNumber);
    tddpm->callback([&] {
        run = [&] {
            const auto split = load_split(td_data, "train");
            auto cfg = td_unet.empty() ? UNetConfig{} : UNetConfig::from_json(read_json(td_unet));
            cfg.image_size = split.images.at(0).dim(1);
            auto model = train_backbone(split.images, cfg, default_schedule(td_T), tc, td_precision, td_progress);
            auto meta = tc.to_json();
            meta["precision"] = td_precision;
            model.save(td_out, meta);
            std::cout << "saved " << td_out << "\n";
        };
    });

    auto* tcls = train->add_subcommand("classifiers", "Train the per-timestep pixel classifiers");
    std::string tc_data, tc_model, tc_out, tc_policy;
    std::vector<int> tc_ts, tc_multi = default_multi_steps();
    ClassifierTrainConfig cc;
    tcls->add_option("--data", tc_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    tcls->add_option("--model", tc_model, "Backbone checkpoint")->required()->check(CLI::ExistingFile);
    tcls->add_option("--out", tc_out, "Output bank checkpoint")->required();
    tcls->add_option("--epochs", cc.epochs, "Epochs per classifier");
    tcls->add_option("--batch", cc.batch, "Pixel batch size");
    tcls->add_option("--lr", cc.lr, "Adam learning rate");
    tcls->add_option("--seed", cc.seed, "Seed");
    tcls->add_option("--policy", tc_policy, "Parameter policy JSON (its grids define the timesteps)")
        ->check(CLI::ExistingFile);
    tcls->add_option("--timesteps", tc_ts, "Explicit timesteps, replacing the policy grids");
    tcls->add_option("--multi-steps", tc_multi, "Timesteps of the multi-step classifier");
    tcls->callback([&] {
        run = [&] {
            const auto model = DiffusionModel<double>::load(tc_model);
            const auto split = load_split(tc_data, "annotated");
            const auto ts = tc_ts.empty() ? classifier_timesteps(read_policy(tc_policy), model.sched, tc_multi) : tc_ts;
            auto bank = train_classifier_bank(split.images, split.labels, ts, tc_multi, model, cc,
                                              [](int t, std::size_t done, std::size_t total) {
                                                  std::cerr << "classifier " << done << "/" << total << " (t="
                                                            << (t < 0 ? std::string("multi") : std::to_string(t)) << ")\n";
                                              });
            bank.save(tc_out);
            std::cout << "saved " << tc_out << " with " << bank.per_t.size() << " timesteps\n";
        };
    });

    // shared artifact options
    std::string model_path, bank_path;
    auto add_artifacts = [&](CLI::App* c, bool need_bank) {
        c->add_option("--model", model_path, "Backbone checkpoint")->required()->check(CLI::ExistingFile);
        auto* b = c->add_option("--bank", bank_path, "Classifier bank checkpoint")->check(CLI::ExistingFile);
        if (need_bank) b->required();
    };

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate the segmentation map of an image");
    std::string est_image, est_out;
    est->add_option("--image", est_image, "RGB PNG")->required()->check(CLI::ExistingFile);
    est->add_option("--out", est_out, "Output directory")->required();
    add_artifacts(est, true);
    est->callback([&] {
        run = [&] {
            const auto a = load_artifacts(model_path, bank_path);
            const auto y = estimate_map(image_from_png(read_file(est_image)), a->model, a->bank);
            fs::create_directories(est_out);
            write_file(fs::path(est_out) / "map.png", labels_to_png(y));
            write_file(fs::path(est_out) / "map_color.png", labels_to_color_png(y));
            write_json(fs::path(est_out) / "map.json", segmap_to_rle(y));
            std::cout << "wrote " << est_out << "\n";
        };
    });

    // edit
    auto* ed = app.add_subcommand("edit", "Edit an image to match an edited map");
    std::string ed_image, ed_map, ed_orig, ed_out, ed_policy, ed_selection = "quantitative", ed_precision = "double";
    std::vector<std::string> ed_q;
    bool ed_auto = false;
    GuidanceParams gp;
    GuidanceOptions go;
    std::uint64_t ed_sel_seed = 0;
    ed->add_option("--image", ed_image, "RGB PNG")->required()->check(CLI::ExistingFile);
    ed->add_option("--map", ed_map, "Edited map (gray-label PNG or RLE JSON)")->required()->check(CLI::ExistingFile);
    ed->add_option("--original-map", ed_orig, "Map of the input image; estimated when omitted")
        ->check(CLI::ExistingFile);
    ed->add_option("--q-edit", ed_q, "Edited classes (names or ids); default: classes that changed")->delimiter(',');
    auto* auto_flag = ed->add_flag("--auto-params", ed_auto, "Pick t0 and scale from the ROI size");
    ed->add_option("--t0", gp.t0, "Start timestep")->excludes(auto_flag);
    ed->add_option("--scale", gp.s, "Guidance scale s")->excludes(auto_flag);
    ed->add_option("--steps", gp.n_steps, "Respaced steps");
    ed->add_option("--batch", gp.batch, "Candidates");
    ed->add_option("--seed", gp.seed, "Seed");
    ed->add_option("--policy", ed_policy, "Parameter policy JSON for --auto-params")->check(CLI::ExistingFile);
    ed->add_option("--selection", ed_selection, "Candidate selection")->check(CLI::IsMember({"quantitative", "random"}));
    ed->add_option("--selection-seed", ed_sel_seed, "Seed of random selection");
    ed->add_flag("--literal-sign", go.literal_sign, "Shift the mean up the loss gradient");
    ed->add_flag("--bg-alpha-t", go.background_alpha_t, "Noise the background to t instead of t-1");
    ed->add_option("--precision", ed_precision, "double or float")->check(CLI::IsMember({"float", "double"}));
    ed->add_option("--out", ed_out, "Output directory")->required();
    add_artifacts(ed, true);
    ed->callback([&] {
        run = [&] {
            const auto a = load_artifacts(model_path, bank_path);
            EditRequest r;
            r.image_png = read_file(ed_image);
            r.y_edited = read_map(ed_map, a->bank.palette);
            if (!ed_orig.empty()) r.y = read_map(ed_orig, a->bank.palette);
            if (!ed_q.empty()) {
                nlohmann::json q = nlohmann::json::array();
                for (const auto& s : ed_q)
                    q.push_back(!s.empty() && std::all_of(s.begin(), s.end(), ::isdigit) ? nlohmann::json(std::stoi(s))
                                                                                          : nlohmann::json(s));
                r.q_edit = parse_classes(q, a->bank.palette);
            }
            r.auto_params = ed_auto;
            r.params = gp;
            r.policy = read_policy(ed_policy);
            r.options = go;
            r.selection = parse_selection(ed_selection);
            r.selection_seed = ed_sel_seed;
            r.precision = ed_precision;
            const auto prep = prepare_edit(r, *a);
            std::cerr << "roi " << prep.m.core_count() << " px (" << prep.m.count() << " dilated), t0 " << prep.params.t0
                      << ", s " << prep.params.s << ", " << prep.params.n_steps << " steps, batch " << prep.params.batch
                      << "\n";
            const auto out = run_edit(prep, r, *a, [](const StepEvent<double>& e) {
                if (e.step + 1 == e.n_steps) std::cerr << "candidate " << e.candidate << " done\n";
            });
            const fs::path dir(ed_out);
            fs::create_directories(dir);
            std::size_t k = 0;
            const auto rec = edit_record(prep, r, out, [&](const Tensor<double>& x) {
                const auto name = "candidate_" + std::to_string(k++) + ".png";
                write_file(dir / name, image_to_png(x));
                return name;
            });
            for (std::size_t b = 0; b < out.result.candidates.size(); ++b)
                write_text(dir / ("trace_" + std::to_string(b) + ".csv"), trace_to_csv(out.result.candidates[b].trace));
            write_file(dir / "chosen.png", image_to_png(out.result.candidates[out.chosen].image));
            write_file(dir / "original_map.png", labels_to_color_png(prep.y));
            write_file(dir / "edited_map.png", labels_to_color_png(prep.y_edited));
            auto metrics = nlohmann::json::array();
            for (const auto& c : out.result.candidates) metrics.push_back(metrics_to_json(c.metrics));
            write_json(dir / "metrics.json", {{"chosen", out.chosen}, {"params", prep.params.to_json()},
                                              {"candidates", metrics}, {"runtime_s", out.seconds}});
            write_json(dir / "result.json", rec);
            const auto& m = out.result.candidates[out.chosen].metrics;
            std::cout << "chosen candidate " << out.chosen << ": MAE x1e3 " << m.mae_outside * 1e3 << ", PSNR "
                      << m.psnr_outside << " dB, accuracy " << m.accuracy_inside << "\n";
        };
    });

    // interpolate
    auto* ip = app.add_subcommand("interpolate", "Interpolate two images through their DDIM latents");
    std::string ip_a, ip_b, ip_out;
    int ip_t0 = 500, ip_n = 50, ip_steps = 50;
    ip->add_option("--a", ip_a, "First RGB PNG")->required()->check(CLI::ExistingFile);
    ip->add_option("--b", ip_b, "Second RGB PNG")->required()->check(CLI::ExistingFile);
    ip->add_option("--t0", ip_t0, "Latent timestep");
    ip->add_option("--n", ip_n, "Number of samples");
    ip->add_option("--steps", ip_steps, "Respaced steps");
    ip->add_option("--out", ip_out, "Output directory")->required();
    add_artifacts(ip, false);
    ip->callback([&] {
        run = [&] {
            const auto model = DiffusionModel<double>::load(model_path);
            const auto xs = interpolate_latents(image_from_png(read_file(ip_a)), image_from_png(read_file(ip_b)), ip_t0,
                                                ip_n, model, ip_steps);
            fs::create_directories(ip_out);
            for (std::size_t k = 0; k < xs.size(); ++k) write_file(fs::path(ip_out) / indexed_name(k), image_to_png(xs[k]));
            std::cout << "wrote " << xs.size() << " images to " << ip_out << "\n";
        };
    });

    // eval
    auto* ev = app.add_subcommand("eval", "Run the scripted edit benchmark");
    std::string ev_data, ev_out, ev_policy;
    BenchmarkConfig bc;
    ev->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--n", bc.n, "Number of edits");
    ev->add_option("--seed", bc.seed, "Edit list and sampler seed");
    ev->add_option("--batch", bc.batch, "Candidates per edit");
    ev->add_option("--selection-seed", bc.selection_seed, "Seed of random selection");
    ev->add_option("--policy", ev_policy, "Parameter policy JSON")->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "Report JSON")->required();
    add_artifacts(ev, true);
    ev->callback([&] {
        run = [&] {
            bc.policy = read_policy(ev_policy);
            const auto a = load_artifacts(model_path, bank_path);
            const auto rep = eval_benchmark(load_split(ev_data, "test"), *a, bc, [](std::size_t d, std::size_t n) {
                std::cerr << "edit " << d << "/" << n << "\n";
            });
            write_json(ev_out, rep.to_json());
            for (auto sel : {Selection::quantitative, Selection::random}) {
                std::cout << (sel == Selection::quantitative ? "quantitative" : "random      ");
                for (const char* c : {"mae_x1e3", "psnr", "accuracy", "runtime"}) {
                    const auto s = rep.summary(sel, c);
                    std::cout << "  " << c << " " << s.mean << " +- " << s.std;
                }
                std::cout << "\n";
            }
        };
    });

    // serve
    auto* sv = app.add_subcommand("serve", "Run the HTTP service");
    std::string sv_config;
    ServiceConfig scfg;
    std::optional<int> sv_port;
    std::optional<std::string> sv_host, sv_ws;
    std::optional<unsigned> sv_workers;
    sv->add_option("--config", sv_config, "Config file (key = value)")->check(CLI::ExistingFile);
    sv->add_option("--port", sv_port, "Port (0 picks a free one)");
    sv->add_option("--host", sv_host, "Bind address");
    sv->add_option("--workspace", sv_ws, "Workspace root");
    sv->add_option("--workers", sv_workers, "Worker threads");
    sv->callback([&] {
        run = [&] {
            if (!sv_config.empty()) scfg.load_file(sv_config);
            scfg.apply_env();
            if (sv_port) scfg.set("port", std::to_string(*sv_port));
            if (sv_host) scfg.host = *sv_host;
            if (sv_ws) scfg.workspace = *sv_ws;
            if (sv_workers) scfg.workers = *sv_workers;
            Service svc(scfg);
            g_service = &svc;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            svc.on_bound([&](int port) { std::cout << "listening on " << scfg.host << ":" << port << std::endl; });
            if (!svc.listen()) throw Error(ErrorCode::io, "cannot bind " + scfg.host + ":" + std::to_string(scfg.port));
            g_service = nullptr;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        run();
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
