#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/error.hpp"

namespace triage {

struct CaseInsensitiveLess {
  bool operator()(std::string_view a, std::string_view b) const {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
      return std::tolower(static_cast<unsigned char>(x)) <
             std::tolower(static_cast<unsigned char>(y));
    });
  }
};

using HeaderMap = std::map<std::string, std::string, CaseInsensitiveLess>;

struct HttpRequest {
  std::string method;
  std::string target;  // path and query, starting with '/'
  HeaderMap headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;  // 0 means the request never completed
  HeaderMap headers;
  std::string body;

  std::string header(std::string_view name) const {
    auto it = headers.find(std::string(name));
    return it == headers.end() ? std::string() : it->second;
  }
};

/// Carries one request to the tracker. Implementations must be safe to call
/// from several threads at once.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// Percent-encodes everything outside the RFC 3986 unreserved set.
inline std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

/// Splits "https://host:port/prefix" into origin and path prefix.
struct ApiBase {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // "" or "/api/v3"

  static ApiBase parse(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw ConfigError("API base URL needs a scheme: " + std::string(url));
    const auto path_start = url.find('/', scheme_end + 3);
    ApiBase b;
    b.origin = std::string(url.substr(0, path_start));
    if (path_start != std::string_view::npos) b.prefix = std::string(url.substr(path_start));
    while (!b.prefix.empty() && b.prefix.back() == '/') b.prefix.pop_back();
    return b;
  }
};

/// Returns the URL tagged rel="next" in a Link header, if any.
inline std::optional<std::string> next_link(std::string_view link_header) {
  std::size_t pos = 0;
  while (pos < link_header.size()) {
    const auto open = link_header.find('<', pos);
    if (open == std::string_view::npos) break;
    const auto close = link_header.find('>', open);
    if (close == std::string_view::npos) break;
    auto end = link_header.find(',', close);
    if (end == std::string_view::npos) end = link_header.size();
    const auto params = link_header.substr(close + 1, end - close - 1);
    if (params.find("rel=\"next\"") != std::string_view::npos ||
        params.find("rel=next") != std::string_view::npos)
      return std::string(link_header.substr(open + 1, close - open - 1));
    pos = end + 1;
  }
  return std::nullopt;
}

/// Strips scheme and authority so an absolute URL becomes a request target.
inline std::string target_from_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) return std::string(url);
  const auto path_start = url.find('/', scheme_end + 3);
  return path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
}

struct RetryPolicy {
  int max_attempts = 3;
  std::vector<std::chrono::milliseconds> backoff = {std::chrono::seconds(1), std::chrono::seconds(2),
                                                    std::chrono::seconds(4)};

  std::chrono::milliseconds delay_before(int attempt) const {
    if (backoff.empty()) return std::chrono::milliseconds(0);
    const auto i = static_cast<std::size_t>(std::max(0, attempt - 1));
    return backoff[std::min(i, backoff.size() - 1)];
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline bool is_rate_limited(const HttpResponse& r) {
  return r.status == 429 || (r.status == 403 && r.header("X-RateLimit-Remaining") == "0");
}

inline bool is_retryable(const HttpResponse& r) {
  return r.status == 0 || r.status >= 500 || is_rate_limited(r);
}

/// Outcome of one logical write against the tracker, after retries.
struct ApiResult {
  bool ok = false;
  int status = 0;
  int attempts = 0;
  std::string error;
};

/// GitHub-compatible REST client. Reads raise typed errors; writes report an
/// ApiResult so callers can record failures without unwinding.
class TrackerClient {
 public:
  TrackerClient(std::shared_ptr<HttpTransport> transport, std::string api_base, std::string token,
                RetryPolicy retry = {}, Sleeper sleeper = nullptr)
      : transport_(std::move(transport)),
        base_(ApiBase::parse(api_base)),
        token_(std::move(token)),
        retry_(std::move(retry)),
        sleep_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {}

  const ApiBase& base() const { return base_; }

  /// GET with retry on transport failures and 5xx. Rate limits and client
  /// errors are raised immediately.
  HttpResponse get(const std::string& target) {
    HttpResponse resp;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      resp = transport_->send(make_request("GET", target, {}));
      if (resp.status == 0 || resp.status >= 500) {
        if (attempt < retry_.max_attempts) sleep_(retry_.delay_before(attempt));
        continue;
      }
      break;
    }
    raise_for_status(resp, target);
    return resp;
  }

  HttpResponse get_path(const std::string& path) { return get(base_.prefix + path); }

  /// POST with retry on 5xx, transport failure and rate limiting.
  ApiResult post_json(const std::string& path, const nlohmann::json& body) {
    ApiResult result;
    const auto req = make_request("POST", base_.prefix + path, body.dump());
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      const HttpResponse resp = transport_->send(req);
      result.attempts = attempt;
      result.status = resp.status;
      if (resp.status >= 200 && resp.status < 300) {
        result.ok = true;
        result.error.clear();
        return result;
      }
      result.error = describe_failure(resp);
      if (!is_retryable(resp)) return result;
      if (attempt < retry_.max_attempts) sleep_(retry_.delay_before(attempt));
    }
    return result;
  }

 private:
  HttpRequest make_request(std::string method, std::string target, std::string body) const {
    HttpRequest req;
    req.method = std::move(method);
    req.target = std::move(target);
    req.body = std::move(body);
    req.headers["Accept"] = "application/vnd.github+json";
    req.headers["User-Agent"] = "issue-triage";
    if (!req.body.empty()) req.headers["Content-Type"] = "application/json";
    if (!token_.empty()) req.headers["Authorization"] = "Bearer " + token_;
    return req;
  }

  static std::string describe_failure(const HttpResponse& r) {
    if (r.status == 0) return "transport failure";
    if (r.status == 404) return "not found";
    if (r.status == 422) return "unprocessable entity";
    if (is_rate_limited(r)) return "rate limited";
    return "HTTP " + std::to_string(r.status);
  }

  static void raise_for_status(const HttpResponse& r, const std::string& target) {
    if (r.status >= 200 && r.status < 300) return;
    if (r.status == 0) throw TrackerError("transport failure requesting " + target, 0, true);
    if (r.status == 404) throw NotFoundError("not found: " + target);
    if (is_rate_limited(r)) {
      std::int64_t reset = 0;
      try {
        reset = std::stoll(r.header("X-RateLimit-Reset"));
      } catch (const std::exception&) {
      }
      throw RateLimitError("rate limit exhausted requesting " + target, reset);
    }
    throw TrackerError("HTTP " + std::to_string(r.status) + " requesting " + target, r.status,
                       r.status >= 500);
  }

  std::shared_ptr<HttpTransport> transport_;
  ApiBase base_;
  std::string token_;
  RetryPolicy retry_;
  Sleeper sleep_;
};

}  // namespace triage
