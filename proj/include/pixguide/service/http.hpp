// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>

#include "pixguide/service/benchmark.hpp"
#include "pixguide/service/config.hpp"
#include "pixguide/service/jobs.hpp"

// After Eigen: <resolv.h> defines a macro named _res.
#include <httplib.h>

// JSON-over-HTTP front end, all routes under /v1.

namespace pixguide {

inline int http_status(ErrorCode c) {
    switch (c) {
        case ErrorCode::missing_artifact: return 404;
        case ErrorCode::io:
        case ErrorCode::divergence:
        case ErrorCode::not_in_graph: return 500;
        default: return 422;
    }
}

class Service {
public:
    explicit Service(ServiceConfig cfg) : cfg_(std::move(cfg)), ws_(cfg_.workspace), jobs_(cfg_.worker_count()) {
        routes();
    }

    ~Service() { stop(); }

    /// Binds and serves until stop(); returns false when binding fails.
    bool listen() {
        if (cfg_.port == 0) {
            port_ = server_.bind_to_any_port(cfg_.host);
            if (port_ < 0) return false;
            if (on_bound_) on_bound_(port_);
            return server_.listen_after_bind();
        }
        if (!server_.bind_to_port(cfg_.host, cfg_.port)) return false;
        port_ = cfg_.port;
        if (on_bound_) on_bound_(port_);
        return server_.listen_after_bind();
    }

    void on_bound(std::function<void(int)> fn) { on_bound_ = std::move(fn); }

    void stop() {
        server_.stop();
        jobs_.shutdown();
    }

    int port() const { return port_; }
    bool running() const { return server_.is_running(); }
    Workspace& workspace() { return ws_; }
    JobQueue& jobs() { return jobs_; }

private:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    static void send(httplib::Response& res, int status, const nlohmann::json& j) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
        send(res, status, {{"error", {{"code", code}, {"message", msg}}}});
    }

    static Handler guarded(Handler h) {
        return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const nlohmann::json::exception& e) {
                send_error(res, 400, "malformed", e.what());
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    static nlohmann::json body(const httplib::Request& req) {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw nlohmann::json::type_error::create(302, "request body must be a JSON object", &j);
        return j;
    }

    std::string model_name(const nlohmann::json& j) const {
        auto n = j.value("model", cfg_.model);
        check_name(n);
        return n;
    }

    std::shared_ptr<const Artifacts> artifacts(const std::string& name) {
        return cache_.get(ws_.model_path(name), ws_.bank_path(name));
    }

    /// Cached result (200), an identical job already in flight (409), or a new job (202).
    void submit(httplib::Response& res, JobKind kind, const nlohmann::json& key, JobQueue::Work work) {
        const auto rh = json_hash(key);
        if (auto hit = ws_.cached(rh)) {
            send(res, 200, {{"cached", true}, {"request_hash", rh}, {"result_hash", *hit}, {"result", *ws_.get_result(*hit)}});
            return;
        }
        if (auto j = jobs_.active_for(rh)) {
            send(res, 409, {{"error", {{"code", "conflict"}, {"message", "an identical request is already running"}}},
                            {"job", j->id()}});
            return;
        }
        auto job = jobs_.submit(
            kind,
            [this, rh, work = std::move(work)](Job& jb) {
                auto result = work(jb);
                const auto h = ws_.put_result(result);
                ws_.remember(rh, h);
                return nlohmann::json{{"result_hash", h}};
            },
            rh);
        send(res, 202, {{"job", job->id()}, {"request_hash", rh}});
    }

    void routes() {
        server_.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"status", "ok"}}); }));

        server_.Post("/v1/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto j = body(req);
            const std::string name = j.value("name", std::string("default"));
            const auto root = ws_.dataset_path(name);
            DatasetSizes sizes;
            if (j.contains("sizes")) {
                sizes.train = j["sizes"].value("train", sizes.train);
                sizes.annotated = j["sizes"].value("annotated", sizes.annotated);
                sizes.test = j["sizes"].value("test", sizes.test);
            }
            const auto spec = j.contains("spec") ? SceneSpec::from_json(j["spec"]) : SceneSpec{};
            const std::uint64_t seed = j.value("seed", std::uint64_t{0});
            std::lock_guard lock(dataset_mu_);
            save_dataset(root, spec, generate_dataset(spec, sizes, seed));
            send(res, 201, {{"name", name},
                            {"train", sizes.train},
                            {"annotated", sizes.annotated},
                            {"test", sizes.test},
                            {"manifest_sha256", sha256_hex(read_file(root / "manifest.json"))}});
        }));

        server_.Post("/v1/train/ddpm", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto j = body(req);
            const auto name = model_name(j);
            const auto data = ws_.dataset_path(j.value("dataset", std::string("default")));
            PIXGUIDE_CHECK(std::filesystem::exists(data / "manifest.json"), missing_artifact, "unknown dataset");
            DdpmTrainConfig tc;
            if (j.contains("config")) {
                const auto& c = j["config"];
                tc.steps = c.value("steps", tc.steps);
                tc.batch = c.value("batch", tc.batch);
                tc.adam.lr = c.value("lr", tc.adam.lr);
                tc.warmup = c.value("warmup", tc.warmup);
                tc.grad_clip = c.value("grad_clip", tc.grad_clip);
                tc.seed = c.value("seed", tc.seed);
                tc.init_seed = c.value("init_seed", tc.init_seed);
            }
            auto ucfg = j.contains("unet") ? UNetConfig::from_json(j["unet"]) : UNetConfig{};
            const int T = j.value("T", 1000);
            const auto precision = j.value("precision", std::string("float"));
            auto job = jobs_.submit(JobKind::train_ddpm, [=, this](Job& jb) mutable {
                const auto split = load_split(data, "train");
                if (ucfg.image_size != split.images.at(0).dim(1)) ucfg.image_size = split.images.at(0).dim(1);
                double last = 0;
                auto model = train_backbone(split.images, ucfg, default_schedule(T), tc, precision, [&](int s, double l) {
                    last = l;
                    jb.set_progress(static_cast<double>(s + 1) / tc.steps);
                    if ((s + 1) % 10 == 0) jb.emit({{"type", "train"}, {"step", s + 1}, {"loss", l}});
                });
                model.save(ws_.model_path(name), tc.to_json());
                return nlohmann::json{{"model", name}, {"final_loss", last}};
            });
            send(res, 202, {{"job", job->id()}});
        }));

        server_.Post("/v1/train/classifiers", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto j = body(req);
            const auto name = model_name(j);
            const auto data = ws_.dataset_path(j.value("dataset", std::string("default")));
            PIXGUIDE_CHECK(std::filesystem::exists(data / "manifest.json"), missing_artifact, "unknown dataset");
            PIXGUIDE_CHECK(std::filesystem::exists(ws_.model_path(name)), missing_artifact, "unknown model " + name);
            ClassifierTrainConfig cc;
            if (j.contains("config")) {
                const auto& c = j["config"];
                cc.epochs = c.value("epochs", cc.epochs);
                cc.batch = c.value("batch", cc.batch);
                cc.lr = c.value("lr", cc.lr);
                cc.seed = c.value("seed", cc.seed);
                if (c.contains("hidden")) cc.hidden = c["hidden"].get<std::array<std::size_t, 2>>();
            }
            const auto policy = j.contains("policy") ? ParamPolicy::from_json(j["policy"]) : ParamPolicy::toy();
            const auto multi = j.value("multi_steps", default_multi_steps());
            auto job = jobs_.submit(JobKind::train_classifiers, [=, this](Job& jb) {
                const auto model = DiffusionModel<double>::load(ws_.model_path(name));
                const auto split = load_split(data, "annotated");
                const auto ts = classifier_timesteps(policy, model.sched, multi);
                auto bank = train_classifier_bank(split.images, split.labels, ts, multi, model, cc,
                                                  [&](int t, std::size_t done, std::size_t total) {
                                                      jb.set_progress(static_cast<double>(done) / static_cast<double>(total));
                                                      jb.emit({{"type", "classifier"}, {"t", t}, {"done", done}, {"total", total}});
                                                  });
                bank.save(ws_.bank_path(name));
                return nlohmann::json{{"model", name}, {"timesteps", bank.trained_ts()}};
            });
            send(res, 202, {{"job", job->id()}});
        }));

        server_.Post("/v1/segmentation/estimate", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto j = body(req);
            const auto name = model_name(j);
            const auto png = decode_image_png(j.at("image"), &ws_);
            auto art = artifacts(name);
            auto work = [this, art, png](Job&) {
                const auto x = image_from_png(png);
                const auto y = estimate_map(x, art->model, art->bank);
                return nlohmann::json{{"kind", "estimate_map"},
                                      {"image", ws_.put_image(png)},
                                      {"map", encode_map(y)},
                                      {"color", ws_.put_image(labels_to_color_png(y))}};
            };
            submit(res, JobKind::estimate_map,
                   {{"kind", "estimate_map"}, {"artifacts", art->digest}, {"image", sha256_hex(png)}}, work);
        }));

        server_.Post("/v1/edits", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto j = body(req);
            const auto name = model_name(j);
            auto art = artifacts(name);
            auto request = std::make_shared<EditRequest>(EditRequest::from_json(j, &ws_, art->bank.palette));
            auto prep = std::make_shared<PreparedEdit>(prepare_edit(*request, *art));
            const int every = cfg_.thumbnails > 0 ? std::max(1, prep->params.n_steps / cfg_.thumbnails) : 0;
            auto work = [this, art, request, prep, every](Job& jb) {
                ws_.put_image(request->image_png);
                const double total = static_cast<double>(prep->params.batch) * prep->params.n_steps;
                std::atomic<std::size_t> seen{0};
                const auto out = run_edit(*prep, *request, *art, [&](const StepEvent<double>& e) {
                    nlohmann::json ev{{"type", "step"},  {"candidate", e.candidate}, {"step", e.step},
                                      {"t", e.t},        {"snr", e.snr},             {"accuracy", e.accuracy},
                                      {"loss", metric_json(e.loss)}};
                    const bool last = e.step + 1 == e.n_steps;
                    if (every > 0 && (e.step % static_cast<std::size_t>(every) == 0 || last))
                        ev["thumbnail"] = ws_.put_image(*e.x0_pred);
                    jb.emit(std::move(ev));
                    jb.set_progress(static_cast<double>(++seen) / total);
                });
                return edit_record(*prep, *request, out, [this](const Tensor<double>& x) { return ws_.put_image(x); });
            };
            submit(res, JobKind::edit, {{"kind", "edit"}, {"artifacts", art->digest}, {"request", request->canonical()}},
                   work);
        }));

        server_.Post("/v1/interpolations", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto j = body(req);
            const auto name = model_name(j);
            auto art = artifacts(name);
            const auto a = decode_image_png(j.at("a"), &ws_), b = decode_image_png(j.at("b"), &ws_);
            const int t0 = j.value("t0", 500), n = j.value("n", 50), steps = j.value("n_steps", 50);
            PIXGUIDE_CHECK(n >= 2 && n <= 1000, out_of_range, "n must lie in [2, 1000]");
            GuidanceParams{t0, 0, steps, 1, 0}.validate(art->model.sched.steps());
            auto work = [this, art, a, b, t0, n, steps](Job& jb) {
                const auto xs = interpolate_latents(image_from_png(a), image_from_png(b), t0, n, art->model, steps);
                auto refs = nlohmann::json::array();
                for (const auto& x : xs) refs.push_back(ws_.put_image(x));
                jb.emit({{"type", "interpolation"}, {"count", xs.size()}});
                return nlohmann::json{{"kind", "interpolate"}, {"t0", t0}, {"n_steps", steps}, {"images", refs}};
            };
            submit(res, JobKind::interpolate,
                   {{"kind", "interpolate"}, {"artifacts", art->digest}, {"a", sha256_hex(a)}, {"b", sha256_hex(b)},
                    {"t0", t0}, {"n", n}, {"n_steps", steps}},
                   work);
        }));

        server_.Post("/v1/evals", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto j = body(req);
            const auto name = model_name(j);
            auto art = artifacts(name);
            const auto data = ws_.dataset_path(j.value("dataset", std::string("default")));
            PIXGUIDE_CHECK(std::filesystem::exists(data / "manifest.json"), missing_artifact, "unknown dataset");
            BenchmarkConfig bc;
            bc.n = j.value("n", bc.n);
            bc.seed = j.value("seed", bc.seed);
            bc.batch = j.value("batch", bc.batch);
            bc.selection_seed = j.value("selection_seed", bc.selection_seed);
            if (j.contains("policy")) bc.policy = ParamPolicy::from_json(j["policy"]);
            auto work = [art, data, bc](Job& jb) {
                const auto rep = eval_benchmark(load_split(data, "test"), *art, bc, [&](std::size_t d, std::size_t n) {
                    jb.set_progress(static_cast<double>(d) / static_cast<double>(n));
                    jb.emit({{"type", "eval"}, {"done", d}, {"total", n}});
                });
                auto r = rep.to_json();
                r["kind"] = "eval";
                return r;
            };
            submit(res, JobKind::eval,
                   {{"kind", "eval"}, {"artifacts", art->digest}, {"manifest", sha256_hex(read_file(data / "manifest.json"))},
                    {"n", bc.n}, {"seed", bc.seed}, {"batch", bc.batch}, {"selection_seed", bc.selection_seed},
                    {"policy", bc.policy.to_json()}},
                   work);
        }));

        server_.Get(R"(/v1/jobs/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto job = jobs_.get(req.matches[1]);
            if (!job) return send_error(res, 404, "not_found", "unknown job");
            send(res, 200, job->to_json());
        }));

        server_.Get(R"(/v1/jobs/([0-9a-f]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto job = jobs_.get(req.matches[1]);
            if (!job) return send_error(res, 404, "not_found", "unknown job");
            auto offset = std::make_shared<std::size_t>(0);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [job, offset](std::size_t, httplib::DataSink& sink) {
                bool terminal = false;
                const auto evs = job->events_since(*offset, std::chrono::milliseconds(250), terminal);
                std::string out;
                for (const auto& e : evs)
                    out += "id: " + std::to_string((*offset)++) + "\nevent: " + e.value("type", std::string("step")) +
                           "\ndata: " + e.dump() + "\n\n";
                if (terminal && evs.empty()) {
                    const auto st = job->to_json();
                    out += "event: " + st.at("state").get<std::string>() + "\ndata: " + st.dump() + "\n\n";
                    if (!sink.write(out.data(), out.size())) return false;
                    sink.done();
                    return true;
                }
                if (!out.empty() && !sink.write(out.data(), out.size())) return false;
                return sink.is_writable();
            });
        }));

        server_.Get(R"(/v1/results/([0-9a-f]{64}))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto r = ws_.get_result(req.matches[1]);
            if (!r) return send_error(res, 404, "not_found", "unknown result");
            send(res, 200, *r);
        }));

        server_.Get(R"(/v1/images/([0-9a-f]{64}))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto b = ws_.get_image(req.matches[1]);
            if (!b) return send_error(res, 404, "not_found", "unknown image");
            res.set_content(std::string(b->begin(), b->end()), "image/png");
        }));

        server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) send_error(res, res.status, "not_found", "no such route");
        });
    }

    ServiceConfig cfg_;
    Workspace ws_;
    JobQueue jobs_;
    ArtifactCache cache_;
    httplib::Server server_;
    std::mutex dataset_mu_;
    int port_ = -1;
    std::function<void(int)> on_bound_;
};

}  // namespace pixguide
