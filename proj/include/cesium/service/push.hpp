#pragma once

// Fan-out of push messages to connected subscribers. publish() only hands
// each subscriber a shared copy of the frame; delivery happens on the
// subscriber's own executor, so a slow client never blocks a job worker.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesium/service/jobs.hpp"

namespace cesium::service {

class PushHub {
 public:
  class Subscriber {
   public:
    virtual ~Subscriber() = default;
    virtual void deliver(std::shared_ptr<const std::string> frame) = 0;
  };

  void subscribe(const std::shared_ptr<Subscriber>& s) {
    std::lock_guard lock(mutex_);
    subscribers_[s.get()] = s;
  }

  void unsubscribe(const Subscriber* s) {
    std::lock_guard lock(mutex_);
    subscribers_.erase(s);
  }

  std::size_t subscriber_count() const {
    std::lock_guard lock(mutex_);
    return subscribers_.size();
  }

  void publish(std::string frame) {
    auto shared = std::make_shared<const std::string>(std::move(frame));
    std::vector<std::shared_ptr<Subscriber>> live;
    {
      std::lock_guard lock(mutex_);
      for (auto it = subscribers_.begin(); it != subscribers_.end();) {
        if (auto s = it->second.lock()) {
          live.push_back(std::move(s));
          ++it;
        } else {
          it = subscribers_.erase(it);
        }
      }
    }
    for (auto& s : live) s->deliver(shared);
  }

 private:
  mutable std::mutex mutex_;
  std::map<const Subscriber*, std::weak_ptr<Subscriber>> subscribers_;
};

inline std::string job_complete_message(const Job& job) {
  nlohmann::json payload{{"job_id", job.id}, {"kind", job.kind}, {"status", to_string(job.status)}};
  if (job.status == JobStatus::done) payload["result_ref"] = job.result_ref;
  else payload["error"] = job.error;
  return nlohmann::json{{"action", "job_complete"}, {"payload", std::move(payload)}}.dump();
}

}  // namespace cesium::service
