#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "triage/error.hpp"
#include "triage/policy.hpp"
#include "triage/service/signature.hpp"
#include "triage/tracker.hpp"
#include "triage/triage.hpp"

namespace triage {

// ---------------------------------------------------------------------------
// Tracker write-back

inline ApiResult apply_labels(TrackerClient& api, const std::string& repo, std::uint64_t issue_number,
                              const std::vector<std::string>& labels) {
  if (labels.empty()) throw ConfigError("apply_labels needs at least one label");
  return api.post_json("/repos/" + repo + "/issues/" + std::to_string(issue_number) + "/labels",
                       nlohmann::json{{"labels", labels}});
}

inline ApiResult apply_assignee(TrackerClient& api, const std::string& repo, std::uint64_t issue_number,
                                const std::string& login, const std::vector<std::string>& roster) {
  if (std::find(roster.begin(), roster.end(), login) == roster.end())
    throw ConfigError("'" + login + "' is not in the assignment roster");
  return api.post_json("/repos/" + repo + "/issues/" + std::to_string(issue_number) + "/assignees",
                       nlohmann::json{{"assignees", {login}}});
}

// ---------------------------------------------------------------------------
// Deliveries

struct WebhookDelivery {
  std::string delivery_id;       // X-GitHub-Delivery
  std::string event;             // X-GitHub-Event
  std::string signature_header;  // X-Hub-Signature-256
  std::string raw_body;
};

struct IssueOpened {
  std::string repo;  // owner/name
  std::uint64_t number = 0;
  std::string title;
  std::string body;
  std::string action;
};

struct SkipEvent {
  bool ping = false;
  std::string reason;
};

using ParsedEvent = std::variant<IssueOpened, SkipEvent>;

/// Only call after verify_signature succeeded. Throws ProtocolError on
/// malformed JSON or a malformed issues payload.
inline ParsedEvent parse_event(const WebhookDelivery& d) {
  if (d.event == "ping") return SkipEvent{true, "ping"};
  const auto j = nlohmann::json::parse(d.raw_body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("webhook body is not a JSON object");
  if (d.event != "issues") return SkipEvent{false, "event '" + d.event + "' is not handled"};
  if (!j.contains("action") || !j["action"].is_string()) throw ProtocolError("issues event without action");
  const std::string action = j["action"].get<std::string>();
  if (action != "opened") return SkipEvent{false, "issues action '" + action + "' is not handled"};
  try {
    IssueOpened ev;
    ev.action = action;
    ev.repo = j.at("repository").at("full_name").get<std::string>();
    const auto& issue = j.at("issue");
    ev.number = issue.at("number").get<std::uint64_t>();
    ev.title = issue.at("title").get<std::string>();
    if (issue.contains("body") && issue["body"].is_string()) ev.body = issue["body"].get<std::string>();
    return ev;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed issues payload: ") + e.what());
  }
}

/// Bounded LRU set of delivery ids. insert_if_absent is the linearization
/// point: of several concurrent callers with the same id exactly one gets true.
class DedupCache {
 public:
  explicit DedupCache(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("dedup capacity must be at least 1");
  }

  bool insert_if_absent(const std::string& id) {
    std::lock_guard lock(mu_);
    if (auto it = index_.find(id); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return false;
    }
    order_.push_front(id);
    index_.emplace(id, order_.begin());
    if (order_.size() > capacity_) {
      index_.erase(order_.back());
      order_.pop_back();
    }
    return true;
  }

  bool contains(const std::string& id) const {
    std::lock_guard lock(mu_);
    return index_.count(id) != 0;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return order_.size();
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<std::string> order_;
  std::unordered_map<std::string, std::list<std::string>::iterator> index_;
};

struct ServiceConfig {
  std::string webhook_secret;
  std::string api_base_url = "https://api.github.com";
  std::string auth_token;
  bool dry_run = false;
  std::size_t dedup_capacity = 10000;

  void validate() const {
    if (webhook_secret.empty()) throw ConfigError("webhook secret must not be empty");
    if (dedup_capacity == 0) throw ConfigError("dedup capacity must be at least 1");
  }

  /// TRIAGE_WEBHOOK_SECRET, TRIAGE_GH_TOKEN, TRIAGE_API_BASE, TRIAGE_DRY_RUN.
  static ServiceConfig from_env() {
    auto env = [](const char* name) -> std::optional<std::string> {
      const char* v = std::getenv(name);
      return v ? std::optional<std::string>(v) : std::nullopt;
    };
    ServiceConfig c;
    c.webhook_secret = env("TRIAGE_WEBHOOK_SECRET").value_or("");
    c.auth_token = env("TRIAGE_GH_TOKEN").value_or("");
    if (auto base = env("TRIAGE_API_BASE"); base && !base->empty()) c.api_base_url = *base;
    if (auto dry = env("TRIAGE_DRY_RUN")) c.dry_run = !dry->empty() && *dry != "0" && *dry != "false";
    return c;
  }
};

enum class DeliveryStatus { kRejected, kBadRequest, kDuplicate, kPing, kSkipped, kProcessed, kFailed };

inline std::string to_string(DeliveryStatus s) {
  switch (s) {
    case DeliveryStatus::kRejected: return "rejected";
    case DeliveryStatus::kBadRequest: return "bad_request";
    case DeliveryStatus::kDuplicate: return "duplicate";
    case DeliveryStatus::kPing: return "ping";
    case DeliveryStatus::kSkipped: return "skipped";
    case DeliveryStatus::kProcessed: return "processed";
    case DeliveryStatus::kFailed: return "failed";
  }
  return "unknown";
}

struct DeliveryOutcome {
  DeliveryStatus status = DeliveryStatus::kRejected;
  int http_status = 401;
  std::string delivery_id;
  std::string message;
  std::optional<IssueOpened> event;
  std::optional<TriageDecision> decision;
  std::optional<ApiResult> labels_result;
  std::optional<ApiResult> assignee_result;

  nlohmann::ordered_json to_json() const {
    auto api_json = [](const std::optional<ApiResult>& r) -> nlohmann::ordered_json {
      if (!r) return nullptr;
      return {{"ok", r->ok}, {"status", r->status}, {"attempts", r->attempts}, {"error", r->error}};
    };
    nlohmann::ordered_json j;
    j["status"] = to_string(status);
    j["delivery_id"] = delivery_id;
    j["message"] = message;
    if (event) {
      j["issue"] = {{"repo", event->repo}, {"number", event->number}};
    } else {
      j["issue"] = nullptr;
    }
    j["decision"] = decision ? decision->to_json() : nlohmann::ordered_json(nullptr);
    j["labels_result"] = api_json(labels_result);
    j["assignee_result"] = api_json(assignee_result);
    return j;
  }
};

struct ServiceStats {
  std::uint64_t received = 0;
  std::uint64_t rejected = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t processed = 0;
  std::uint64_t failed = 0;
};

/// Verifies, deduplicates, triages, and writes decisions back. Safe to call
/// handle_delivery from many threads: models and policy are immutable and the
/// dedup cache is the only shared mutable state.
class WebhookService {
 public:
  WebhookService(std::shared_ptr<const TriageModels> models, TriagePolicy policy, ServiceConfig config,
                 std::shared_ptr<TrackerClient> api)
      : models_(std::move(models)),
        policy_(std::move(policy)),
        config_(std::move(config)),
        api_(std::move(api)),
        dedup_(config_.dedup_capacity) {
    config_.validate();
    policy_.validate();
    if (!models_) throw ConfigError("service needs a label model");
    if (policy_.assign_enabled && !models_->assign())
      throw ConfigError("assignment is enabled but no assignment model is loaded");
    if (!api_ && !config_.dry_run) throw ConfigError("service needs a tracker client unless in dry-run mode");
  }

  const ServiceConfig& config() const { return config_; }

  DeliveryOutcome handle_delivery(const WebhookDelivery& d) {
    ++received_;
    DeliveryOutcome out;
    out.delivery_id = d.delivery_id;
    if (!verify_signature(d.raw_body, d.signature_header, config_.webhook_secret)) {
      ++rejected_;
      out.status = DeliveryStatus::kRejected;
      out.http_status = 401;
      out.message = "invalid signature";
      spdlog::warn("delivery {}: rejected, invalid signature", d.delivery_id);
      return out;
    }
    if (d.delivery_id.empty()) return bad_request(out, "missing delivery id");
    ParsedEvent parsed;
    try {
      parsed = parse_event(d);
    } catch (const ProtocolError& e) {
      return bad_request(out, e.what());
    }
    if (!dedup_.insert_if_absent(d.delivery_id)) {
      ++duplicates_;
      out.status = DeliveryStatus::kDuplicate;
      out.http_status = 202;
      out.message = "duplicate delivery";
      spdlog::info("delivery {}: duplicate, ignored", d.delivery_id);
      return out;
    }
    if (const auto* skip = std::get_if<SkipEvent>(&parsed)) {
      out.status = skip->ping ? DeliveryStatus::kPing : DeliveryStatus::kSkipped;
      out.http_status = skip->ping ? 200 : 202;
      out.message = skip->reason;
      return out;
    }
    out.event = std::get<IssueOpened>(parsed);
    const IssueOpened& ev = *out.event;
    try {
      out.decision = triage_issue(ev.title, ev.body, *models_, policy_);
    } catch (const Error& e) {
      ++failed_;
      out.status = DeliveryStatus::kFailed;
      out.http_status = 500;
      out.message = std::string("triage failed: ") + e.what();
      spdlog::error("delivery {}: {}", d.delivery_id, out.message);
      return out;
    }
    out.status = DeliveryStatus::kProcessed;
    out.http_status = 202;
    if (config_.dry_run) {
      out.message = "dry run";
      spdlog::info("delivery {}: dry run for {}#{}: {}", d.delivery_id, ev.repo, ev.number,
                   out.decision->to_json().dump());
      ++processed_;
      return out;
    }
    std::vector<std::string> names;
    for (const auto& l : out.decision->labels) names.push_back(l.category);
    if (!names.empty()) out.labels_result = apply_labels(*api_, ev.repo, ev.number, names);
    if (out.decision->assignee)
      out.assignee_result = apply_assignee(*api_, ev.repo, ev.number, out.decision->assignee->login, policy_.roster);
    const bool ok = (!out.labels_result || out.labels_result->ok) && (!out.assignee_result || out.assignee_result->ok);
    if (ok) {
      ++processed_;
      out.message = names.empty() ? "no label reached the threshold" : "applied";
    } else {
      ++failed_;
      out.status = DeliveryStatus::kFailed;
      out.message = "tracker update failed";
      spdlog::error("delivery {}: tracker update failed for {}#{}: {}", d.delivery_id, ev.repo, ev.number,
                    out.to_json().dump());
    }
    return out;
  }

  ServiceStats stats() const {
    return {received_.load(), rejected_.load(), duplicates_.load(), processed_.load(), failed_.load()};
  }

 private:
  DeliveryOutcome& bad_request(DeliveryOutcome& out, const std::string& why) {
    out.status = DeliveryStatus::kBadRequest;
    out.http_status = 400;
    out.message = why;
    spdlog::warn("delivery {}: bad request: {}", out.delivery_id, why);
    return out;
  }

  std::shared_ptr<const TriageModels> models_;
  TriagePolicy policy_;
  ServiceConfig config_;
  std::shared_ptr<TrackerClient> api_;
  DedupCache dedup_;
  std::atomic<std::uint64_t> received_{0}, rejected_{0}, duplicates_{0}, processed_{0}, failed_{0};
};

}  // namespace triage
