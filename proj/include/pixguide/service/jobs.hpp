// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "pixguide/error.hpp"

namespace pixguide {

enum class JobKind { train_ddpm, train_classifiers, estimate_map, edit, interpolate, eval };
enum class JobState { queued, running, done, failed };

inline std::string to_string(JobKind k) {
    switch (k) {
        case JobKind::train_ddpm: return "train_ddpm";
        case JobKind::train_classifiers: return "train_classifiers";
        case JobKind::estimate_map: return "estimate_map";
        case JobKind::edit: return "edit";
        case JobKind::interpolate: return "interpolate";
        case JobKind::eval: return "eval";
    }
    return "?";
}

inline std::string to_string(JobState s) {
    switch (s) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "?";
}

inline bool is_training(JobKind k) { return k == JobKind::train_ddpm || k == JobKind::train_classifiers; }

inline bool is_terminal(JobState s) { return s == JobState::done || s == JobState::failed; }

class Job {
public:
    Job(std::string id, JobKind kind, std::string request_hash)
        : id_(std::move(id)), kind_(kind), request_hash_(std::move(request_hash)) {}

    const std::string& id() const { return id_; }
    JobKind kind() const { return kind_; }
    const std::string& request_hash() const { return request_hash_; }

    JobState state() const {
        std::lock_guard lock(mu_);
        return state_;
    }

    /// Only queued -> running -> {done, failed}.
    void transition(JobState to) {
        std::lock_guard lock(mu_);
        const bool ok = (state_ == JobState::queued && to == JobState::running) ||
                        (state_ == JobState::running && is_terminal(to));
        PIXGUIDE_CHECK(ok, invalid_argument, "job: illegal transition " + to_string(state_) + " -> " + to_string(to));
        state_ = to;
        if (is_terminal(to)) progress_ = to == JobState::done ? 1.0 : progress_;
        cv_.notify_all();
    }

    void emit(nlohmann::json event) {
        std::lock_guard lock(mu_);
        events_.push_back(std::move(event));
        cv_.notify_all();
    }

    void set_progress(double f) {
        std::lock_guard lock(mu_);
        progress_ = std::clamp(f, 0.0, 1.0);
    }

    void finish(nlohmann::json result) {
        {
            std::lock_guard lock(mu_);
            result_ = std::move(result);
        }
        transition(JobState::done);
    }

    void fail(const std::string& code, const std::string& message) {
        {
            std::lock_guard lock(mu_);
            error_ = {{"code", code}, {"message", message}};
        }
        transition(JobState::failed);
    }

    /// Events from index `from` on, waiting up to `timeout` for at least one
    /// new event or a terminal state.
    std::vector<nlohmann::json> events_since(std::size_t from, std::chrono::milliseconds timeout, bool& terminal) const {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [&] { return events_.size() > from || is_terminal(state_); });
        terminal = is_terminal(state_);
        if (from >= events_.size()) return {};
        return {events_.begin() + static_cast<long>(from), events_.end()};
    }

    nlohmann::json to_json() const {
        std::lock_guard lock(mu_);
        nlohmann::json j{{"id", id_},
                         {"kind", to_string(kind_)},
                         {"state", to_string(state_)},
                         {"progress", progress_},
                         {"events", events_.size()}};
        if (!result_.is_null()) j["result"] = result_;
        if (!error_.is_null()) j["error"] = error_;
        return j;
    }

private:
    std::string id_;
    JobKind kind_;
    std::string request_hash_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    JobState state_ = JobState::queued;
    double progress_ = 0;
    std::vector<nlohmann::json> events_;
    nlohmann::json result_, error_;
};

/// FIFO job queue on a fixed worker pool. At most one training job runs at
/// a time; other jobs keep flowing on the remaining workers.
class JobQueue {
public:
    using Work = std::function<nlohmann::json(Job&)>;

    explicit JobQueue(unsigned workers) {
        PIXGUIDE_CHECK(workers >= 1, invalid_argument, "job queue needs at least one worker");
        for (unsigned i = 0; i < workers; ++i) pool_.emplace_back([this] { loop(); });
    }

    ~JobQueue() { shutdown(); }

    void shutdown() {
        {
            std::lock_guard lock(mu_);
            if (stop_) return;
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : pool_) t.join();
    }

    std::shared_ptr<Job> submit(JobKind kind, Work work, std::string request_hash = {}) {
        auto job = std::make_shared<Job>(new_id(), kind, std::move(request_hash));
        {
            std::lock_guard lock(mu_);
            jobs_[job->id()] = job;
            queue_.push_back({job, std::move(work)});
        }
        cv_.notify_all();
        return job;
    }

    std::shared_ptr<Job> get(const std::string& id) const {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(id);
        return it == jobs_.end() ? nullptr : it->second;
    }

    /// A queued or running job for the same request, if any.
    std::shared_ptr<Job> active_for(const std::string& request_hash) const {
        if (request_hash.empty()) return nullptr;
        std::lock_guard lock(mu_);
        for (const auto& [id, j] : jobs_)
            if (j->request_hash() == request_hash && !is_terminal(j->state())) return j;
        return nullptr;
    }

    /// Blocks until the job is terminal.
    static void wait(const Job& job) {
        bool terminal = false;
        for (std::size_t seen = 0; !terminal;) seen += job.events_since(seen, std::chrono::milliseconds(200), terminal).size();
    }

private:
    struct Entry {
        std::shared_ptr<Job> job;
        Work work;
    };

    std::string new_id() {
        static const char* hex = "0123456789abcdef";
        std::string id;
        std::lock_guard lock(id_mu_);
        for (int i = 0; i < 16; ++i) id.push_back(hex[rng_() % 16]);
        return id;
    }

    void loop() {
        for (;;) {
            Entry e;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stop_ || runnable() != queue_.end(); });
                if (stop_) return;
                auto it = runnable();
                e = std::move(*it);
                queue_.erase(it);
                if (is_training(e.job->kind())) training_ = true;
            }
            e.job->transition(JobState::running);
            try {
                e.job->finish(e.work(*e.job));
            } catch (const Error& err) {
                e.job->fail(std::string(to_string(err.code())), err.what());
            } catch (const std::exception& err) {
                e.job->fail("internal", err.what());
            }
            {
                std::lock_guard lock(mu_);
                if (is_training(e.job->kind())) training_ = false;
            }
            cv_.notify_all();
        }
    }

    /// First queued entry that may start now (caller holds mu_).
    std::deque<Entry>::iterator runnable() {
        for (auto it = queue_.begin(); it != queue_.end(); ++it)
            if (!(training_ && is_training(it->job->kind()))) return it;
        return queue_.end();
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Entry> queue_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::vector<std::thread> pool_;
    bool stop_ = false;
    bool training_ = false;
    std::mutex id_mu_;
    std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace pixguide
