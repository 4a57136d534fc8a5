#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "triage/tracker.hpp"

namespace triage::testing {

/// Records every request. Responses come from a per-target script, then from
/// a fallback handler, then default to 200 "{}".
class MockTransport final : public HttpTransport {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&)>;

  HttpResponse send(const HttpRequest& request) override {
    std::lock_guard lock(mu_);
    transcript_.push_back(request);
    const std::string key = request.method + " " + request.target;
    if (auto it = scripted_.find(key); it != scripted_.end() && !it->second.empty()) {
      HttpResponse r = it->second.front();
      it->second.pop_front();
      return r;
    }
    if (fallback_) return fallback_(request);
    HttpResponse ok;
    ok.status = 200;
    ok.body = "{}";
    return ok;
  }

  void script(const std::string& method, const std::string& target, std::vector<HttpResponse> responses) {
    std::lock_guard lock(mu_);
    auto& q = scripted_[method + " " + target];
    for (auto& r : responses) q.push_back(std::move(r));
  }

  void set_fallback(Handler h) {
    std::lock_guard lock(mu_);
    fallback_ = std::move(h);
  }

  std::vector<HttpRequest> transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }

  std::size_t count(const std::string& method) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& r : transcript_) n += r.method == method;
    return n;
  }

 private:
  mutable std::mutex mu_;
  std::vector<HttpRequest> transcript_;
  std::map<std::string, std::deque<HttpResponse>> scripted_;
  Handler fallback_;
};

inline HttpResponse response(int status, std::string body = "{}", HeaderMap headers = {}) {
  HttpResponse r;
  r.status = status;
  r.body = std::move(body);
  r.headers = std::move(headers);
  return r;
}

}  // namespace triage::testing
