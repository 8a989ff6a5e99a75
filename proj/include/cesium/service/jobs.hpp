#pragma once

// Background jobs: a FIFO queue drained by a fixed pool of workers. The job
// table is owned by JobQueue and every status change goes through its mutex.
// The completion callback runs on the worker after the job's result has been
// written and its terminal status recorded.

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cesium/persist/recipe.hpp"

namespace cesium::service {

enum class JobStatus { queued, running, done, failed };

inline const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "?";
}

struct Job {
  std::string id;
  std::string kind;  ///< featurize | train | predict
  JobStatus status = JobStatus::queued;
  std::string created, started, finished;
  std::string result_ref;  ///< resource id, set once done
  std::string error;

  bool terminal() const { return status == JobStatus::done || status == JobStatus::failed; }

  nlohmann::json to_json() const {
    nlohmann::json j{{"id", id}, {"kind", kind}, {"status", to_string(status)}, {"created", created}};
    j["started"] = started.empty() ? nlohmann::json(nullptr) : nlohmann::json(started);
    j["finished"] = finished.empty() ? nlohmann::json(nullptr) : nlohmann::json(finished);
    j["result_ref"] = status == JobStatus::done ? nlohmann::json(result_ref) : nlohmann::json(nullptr);
    j["error"] = status == JobStatus::failed ? nlohmann::json(error) : nlohmann::json(nullptr);
    return j;
  }
};

class JobQueue {
 public:
  /// Runs the job body; throwing marks the job failed with the message.
  using Work = std::function<void()>;
  using OnTerminal = std::function<void(const Job&)>;

  JobQueue(std::size_t workers, OnTerminal on_terminal) : on_terminal_(std::move(on_terminal)) {
    if (workers == 0) workers = 1;
    for (std::size_t i = 0; i < workers; ++i)
      pool_.emplace_back([this](std::stop_token st) { run(st); });
  }

  ~JobQueue() { shutdown(); }

  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  void shutdown() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    ready_.notify_all();
    pool_.clear();
  }

  /// `result_ref` is the id of the resource the job will create.
  std::string submit(std::string kind, std::string result_ref, Work work) {
    std::string id;
    {
      std::lock_guard lock(mutex_);
      id = "job" + std::to_string(++counter_);
      Job job;
      job.id = id;
      job.kind = std::move(kind);
      job.result_ref = std::move(result_ref);
      job.created = persist::utc_timestamp();
      jobs_.emplace(id, std::move(job));
      order_.push_back(id);
      queue_.push_back({id, std::move(work)});
    }
    ready_.notify_one();
    return id;
  }

  std::optional<Job> get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<Job> list() const {
    std::lock_guard lock(mutex_);
    std::vector<Job> out;
    for (const auto& id : order_) out.push_back(jobs_.at(id));
    return out;
  }

  std::size_t running() const {
    std::lock_guard lock(mutex_);
    return running_;
  }

  std::size_t peak_running() const {
    std::lock_guard lock(mutex_);
    return peak_running_;
  }

 private:
  struct Pending {
    std::string id;
    Work work;
  };

  void run(std::stop_token) {
    while (true) {
      Pending next;
      {
        std::unique_lock lock(mutex_);
        ready_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        next = std::move(queue_.front());
        queue_.pop_front();
        Job& job = jobs_.at(next.id);
        job.status = JobStatus::running;
        job.started = persist::utc_timestamp();
        peak_running_ = std::max(peak_running_, ++running_);
      }
      std::string error;
      bool ok = true;
      try {
        next.work();
      } catch (const std::exception& e) {
        ok = false;
        error = e.what();
      }
      Job snapshot;
      {
        std::lock_guard lock(mutex_);
        Job& job = jobs_.at(next.id);
        job.status = ok ? JobStatus::done : JobStatus::failed;
        job.error = error;
        job.finished = persist::utc_timestamp();
        --running_;
        snapshot = job;
      }
      if (on_terminal_) on_terminal_(snapshot);
    }
  }

  OnTerminal on_terminal_;
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::map<std::string, Job> jobs_;
  std::vector<std::string> order_;
  std::deque<Pending> queue_;
  std::size_t counter_ = 0;
  std::size_t running_ = 0;
  std::size_t peak_running_ = 0;
  bool stopping_ = false;
  std::vector<std::jthread> pool_;
};

}  // namespace cesium::service
