#include <chrono>

#include <gtest/gtest.h>

#include "support/mock_transport.hpp"
#include "triage/error.hpp"
#include "triage/ingest.hpp"
#include "triage/tracker.hpp"

using namespace triage;
using namespace triage::testing;
using namespace std::chrono_literals;

namespace {

struct Client {
  std::shared_ptr<MockTransport> mock = std::make_shared<MockTransport>();
  std::vector<std::chrono::milliseconds> sleeps;
  TrackerClient api{mock, "https://api.example.test", "tok", RetryPolicy{},
                    [this](std::chrono::milliseconds d) { sleeps.push_back(d); }};
};

nlohmann::json issue(std::uint64_t id, const std::string& title, nlohmann::json labels = nlohmann::json::array()) {
  return {{"id", id},           {"number", id % 1000},       {"title", title}, {"body", "b"},
          {"labels", labels},   {"created_at", "2021-05-05T00:00:00Z"}, {"assignee", nullptr}};
}

HeaderMap link_next(const std::string& url) { return {{"Link", "<" + url + ">; rel=\"next\", <x>; rel=\"last\""}}; }

const std::string kIssues = "/repos/octo/demo/issues?state=all&per_page=100";

}  // namespace

TEST(Helpers, NextLink) {
  EXPECT_EQ(next_link(R"(<https://a/b?page=2>; rel="next", <https://a/b?page=5>; rel="last")"), "https://a/b?page=2");
  EXPECT_EQ(next_link(R"(<https://a/b?page=1>; rel="prev", <https://a/b?page=3>; rel="next")"), "https://a/b?page=3");
  EXPECT_FALSE(next_link(R"(<https://a/b?page=1>; rel="prev")"));
  EXPECT_FALSE(next_link(""));
  EXPECT_EQ(target_from_url("https://h:8080/api/v3/x?y=1"), "/api/v3/x?y=1");
}

TEST(Helpers, ApiBaseAndEncoding) {
  const auto b = ApiBase::parse("https://ghe.local/api/v3/");
  EXPECT_EQ(b.origin, "https://ghe.local");
  EXPECT_EQ(b.prefix, "/api/v3");
  EXPECT_EQ(ApiBase::parse("http://127.0.0.1:9000").prefix, "");
  EXPECT_THROW(ApiBase::parse("api.github.com"), ConfigError);
  EXPECT_EQ(url_encode("language:c++"), "language%3Ac%2B%2B");
}

TEST(Client, SendsAuthHeaders) {
  Client c;
  c.api.get_path("/rate_limit");
  const auto t = c.mock->transcript();
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].headers.at("authorization"), "Bearer tok");
  EXPECT_EQ(t[0].headers.at("Accept"), "application/vnd.github+json");
}

TEST(Client, RateLimitCarriesReset) {
  Client c;
  c.mock->script("GET", "/x", {response(403, "{}", {{"X-RateLimit-Remaining", "0"}, {"X-RateLimit-Reset", "1700000000"}})});
  try {
    c.api.get_path("/x");
    FAIL();
  } catch (const RateLimitError& e) {
    EXPECT_EQ(e.reset_epoch_seconds(), 1700000000);
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(c.mock->transcript().size(), 1u);
}

TEST(Client, TransportFailureIsRetryableError) {
  Client c;
  c.mock->set_fallback([](const HttpRequest&) { return response(0, ""); });
  try {
    c.api.get_path("/x");
    FAIL();
  } catch (const TrackerError& e) {
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(c.mock->transcript().size(), 3u);
  EXPECT_EQ(c.sleeps, (std::vector<std::chrono::milliseconds>{1s, 2s}));
}

TEST(Client, PostRetriesServerErrors) {
  Client c;
  c.mock->script("POST", "/repos/o/r/issues/1/labels", {response(500), response(500), response(200, "[]")});
  const auto r = c.api.post_json("/repos/o/r/issues/1/labels", {{"labels", {"bug"}}});
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(c.mock->transcript().size(), 3u);
  EXPECT_EQ(c.sleeps, (std::vector<std::chrono::milliseconds>{1s, 2s}));
}

TEST(Client, PostDoesNotRetryClientErrors) {
  Client c;
  c.mock->script("POST", "/p", {response(422), response(200)});
  const auto r = c.api.post_json("/p", nlohmann::json::object());
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.attempts, 1);
  EXPECT_TRUE(c.sleeps.empty());
}

TEST(Client, PostGivesUpAfterThreeAttempts) {
  Client c;
  c.mock->set_fallback([](const HttpRequest&) { return response(503); });
  const auto r = c.api.post_json("/p", nlohmann::json::object());
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(c.mock->transcript().size(), 3u);
}

TEST(Search, SortedAndFiltered) {
  Client c;
  nlohmann::json items = nlohmann::json::array();
  items.push_back({{"full_name", "a/low"}, {"language", "Python"}, {"stargazers_count", 10}});
  items.push_back({{"full_name", "a/high"}, {"language", "Python"}, {"stargazers_count", 900}});
  items.push_back({{"full_name", "a/other"}, {"language", "Rust"}, {"stargazers_count", 5000}});
  items.push_back({{"full_name", "a/mid"}, {"language", "python"}, {"stargazers_count", 50}});
  c.mock->script("GET", "/search/repositories?q=language%3Apython&sort=stars&order=desc&per_page=3&page=1",
                 {response(200, nlohmann::json{{"items", items}}.dump())});
  const auto repos = search_top_repos("py", 3, c.api);
  ASSERT_EQ(repos.size(), 3u);
  EXPECT_EQ(repos[0].full_name, "a/high");
  EXPECT_EQ(repos[1].full_name, "a/mid");
  EXPECT_EQ(repos[2].full_name, "a/low");
}

TEST(Search, NoMatches) {
  Client c;
  c.mock->set_fallback([](const HttpRequest&) { return response(200, R"({"items":[]})"); });
  EXPECT_TRUE(search_top_repos("nosuchlang", 5, c.api).empty());
  EXPECT_THROW(search_top_repos("python", 0, c.api), ConfigError);
}

TEST(Fetch, FollowsPagination) {
  Client c;
  const std::string page2 = "https://api.example.test/repositories/1/issues?state=all&per_page=100&page=2";
  c.mock->script("GET", kIssues,
                 {response(200, nlohmann::json::array({issue(1, "one"), issue(2, "two", {{{"name", "Bug"}}})}).dump(),
                           link_next(page2))});
  c.mock->script("GET", "/repositories/1/issues?state=all&per_page=100&page=2",
                 {response(200, nlohmann::json::array({issue(3, "three", {"question"})}).dump())});
  const auto r = fetch_issues("octo/demo", c.api, "python");
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[1].raw_labels, std::vector<std::string>{"Bug"});
  EXPECT_TRUE(r.records[1].labels.bug);
  EXPECT_TRUE(r.records[2].labels.question);
  EXPECT_EQ(r.records[0].repo, "octo/demo");
  EXPECT_EQ(r.records[0].language, "python");
  EXPECT_EQ(c.mock->transcript().size(), 2u);
}

TEST(Fetch, DropsPullRequests) {
  Client c;
  auto pr = issue(3, "a pr");
  pr["pull_request"] = {{"url", "x"}};
  c.mock->script("GET", kIssues, {response(200, nlohmann::json::array({issue(1, "a"), pr, issue(2, "b")}).dump())});
  const auto r = fetch_issues("octo/demo", c.api);
  EXPECT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.pull_requests, 1u);
}

TEST(Fetch, EmptyRepo) {
  Client c;
  c.mock->script("GET", kIssues, {response(200, "[]")});
  EXPECT_TRUE(fetch_issues("octo/demo", c.api).records.empty());
}

TEST(Fetch, UnknownRepo) {
  Client c;
  c.mock->script("GET", kIssues, {response(404, R"({"message":"Not Found"})")});
  EXPECT_THROW(fetch_issues("octo/demo", c.api), NotFoundError);
  EXPECT_THROW(fetch_issues("no-slash", c.api), ConfigError);
}

TEST(Fetch, MalformedItemsCounted) {
  Client c;
  auto nul = issue(7, std::string("nul\0title", 9));
  nul["assignees"] = {{{"login", "first"}}, {{"login", "second"}}};
  c.mock->script("GET", kIssues,
                 {response(200, nlohmann::json::array({issue(1, "ok"), {{"id", "bad"}}, 42, nul, issue(1, "dup")}).dump())});
  const auto r = fetch_issues("octo/demo", c.api);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.malformed, 3u);
  EXPECT_EQ(r.records[1].title, "nultitle");
  EXPECT_EQ(r.records[1].assignee, "first");
}
