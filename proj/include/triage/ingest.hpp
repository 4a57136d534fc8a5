#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/corpus.hpp"
#include "triage/error.hpp"
#include "triage/labels.hpp"
#include "triage/tracker.hpp"

namespace triage {

struct RepoInfo {
  std::string full_name;  // "owner/name"
  std::string language;
  std::uint64_t stars = 0;
};

/// Expands common short forms ("py", "rs") to GitHub language names, lowercased.
inline std::string canonical_language(std::string_view language) {
  static const std::map<std::string, std::string, std::less<>> kShort = {
      {"py", "python"},     {"rs", "rust"},    {"js", "javascript"}, {"ts", "typescript"},
      {"cpp", "c++"},       {"cs", "c#"},      {"rb", "ruby"},       {"kt", "kotlin"},
      {"golang", "go"},     {"sh", "shell"},   {"objc", "objective-c"}};
  std::string l = detail::trim_lower(language);
  if (auto it = kShort.find(l); it != kShort.end()) return it->second;
  return l;
}

/// Most-starred repositories whose primary language matches `language`
/// (case-insensitive), in descending star order.
inline std::vector<RepoInfo> search_top_repos(const std::string& language, std::size_t count,
                                              TrackerClient& api) {
  if (count == 0) throw ConfigError("repository count must be at least 1");
  const std::size_t per_page = std::min<std::size_t>(100, count);
  std::vector<RepoInfo> repos;
  const std::string want = canonical_language(language);
  // The search API serves at most 1000 results.
  for (std::size_t page = 1; repos.size() < count && (page - 1) * per_page < 1000; ++page) {
    const auto resp = api.get_path("/search/repositories?q=" + url_encode("language:" + want) +
                                   "&sort=stars&order=desc&per_page=" + std::to_string(per_page) +
                                   "&page=" + std::to_string(page));
    const auto j = nlohmann::json::parse(resp.body, nullptr, false);
    if (j.is_discarded() || !j.contains("items") || !j["items"].is_array())
      throw TrackerError("malformed search response", resp.status, false);
    const auto& items = j["items"];
    for (const auto& item : items) {
      if (!item.is_object() || !item.contains("full_name") || !item["full_name"].is_string())
        continue;
      RepoInfo info;
      info.full_name = item["full_name"].get<std::string>();
      if (item.contains("language") && item["language"].is_string())
        info.language = item["language"].get<std::string>();
      if (item.contains("stargazers_count") && item["stargazers_count"].is_number_unsigned())
        info.stars = item["stargazers_count"].get<std::uint64_t>();
      if (canonical_language(info.language) != want) continue;
      if (std::any_of(repos.begin(), repos.end(),
                      [&](const RepoInfo& r) { return r.full_name == info.full_name; }))
        continue;
      repos.push_back(std::move(info));
    }
    if (items.size() < per_page) break;
  }
  std::stable_sort(repos.begin(), repos.end(), [](const RepoInfo& a, const RepoInfo& b) {
    return a.stars != b.stars ? a.stars > b.stars : a.full_name < b.full_name;
  });
  if (repos.size() > count) repos.resize(count);
  return repos;
}

struct FetchResult {
  std::vector<IssueRecord> records;
  std::size_t pull_requests = 0;  // dropped
  std::size_t malformed = 0;      // skipped, counted as ingestion warnings
};

namespace detail {

inline std::optional<IssueRecord> issue_from_json(const nlohmann::json& item, const std::string& repo,
                                                  const std::string& language,
                                                  const LabelAliasMap& aliases) {
  if (!item.is_object()) return std::nullopt;
  if (!item.contains("id") || !item["id"].is_number_unsigned()) return std::nullopt;
  if (!item.contains("title") || !item["title"].is_string()) return std::nullopt;
  IssueRecord r;
  r.id = item["id"].get<std::uint64_t>();
  if (r.id == 0) return std::nullopt;
  r.repo = repo;
  r.language = language;
  r.title = strip_nul(item["title"].get<std::string>());
  if (item.contains("body") && item["body"].is_string())
    r.body = strip_nul(item["body"].get<std::string>());
  if (item.contains("labels") && item["labels"].is_array()) {
    for (const auto& l : item["labels"]) {
      if (l.is_string()) {
        r.raw_labels.push_back(l.get<std::string>());
      } else if (l.is_object() && l.contains("name") && l["name"].is_string()) {
        r.raw_labels.push_back(l["name"].get<std::string>());
      }
    }
  }
  r.labels = canonicalize_labels(r.raw_labels, aliases);
  auto login_of = [](const nlohmann::json& u) -> std::optional<std::string> {
    if (u.is_object() && u.contains("login") && u["login"].is_string())
      return u["login"].get<std::string>();
    return std::nullopt;
  };
  // First listed assignee wins.
  if (item.contains("assignees") && item["assignees"].is_array() && !item["assignees"].empty())
    r.assignee = login_of(item["assignees"].front());
  if (!r.assignee && item.contains("assignee")) r.assignee = login_of(item["assignee"]);
  if (item.contains("created_at") && item["created_at"].is_string())
    r.created_at = item["created_at"].get<std::string>();
  return r;
}

}  // namespace detail

/// Every issue of `repo` (state=all), following Link pagination until
/// exhausted. Pull requests are dropped.
inline FetchResult fetch_issues(const std::string& repo, TrackerClient& api,
                                const std::string& language = "",
                                const LabelAliasMap& aliases = default_alias_map()) {
  const auto slash = repo.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == repo.size())
    throw ConfigError("repository must be 'owner/name': " + repo);
  FetchResult out;
  std::optional<std::string> target =
      api.base().prefix + "/repos/" + url_encode(repo.substr(0, slash)) + "/" +
      url_encode(repo.substr(slash + 1)) + "/issues?state=all&per_page=100";
  std::set<std::uint64_t> seen;
  while (target) {
    HttpResponse resp;
    try {
      resp = api.get(*target);
    } catch (const NotFoundError&) {
      throw NotFoundError("unknown repository: " + repo);
    }
    const auto page = nlohmann::json::parse(resp.body, nullptr, false);
    if (page.is_discarded() || !page.is_array())
      throw TrackerError("malformed issues page for " + repo, resp.status, false);
    for (const auto& item : page) {
      if (item.is_object() && item.contains("pull_request")) {
        ++out.pull_requests;
        continue;
      }
      auto rec = detail::issue_from_json(item, repo, language, aliases);
      if (!rec || !seen.insert(rec->id).second) {
        ++out.malformed;
        continue;
      }
      out.records.push_back(std::move(*rec));
    }
    target.reset();
    if (auto next = next_link(resp.header("Link"))) target = target_from_url(*next);
  }
  return out;
}

}  // namespace triage
