#pragma once

// HTTP bindings: a cpp-httplib transport for the tracker client and the
// webhook listener. Kept apart from webhook.hpp so tests of the service logic
// do not pull in the HTTP stack.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <memory>
#include <string>

#include <spdlog/spdlog.h>

#include "triage/service/webhook.hpp"
#include "triage/tracker.hpp"

namespace triage {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::string origin, std::chrono::seconds timeout = std::chrono::seconds(10))
      : origin_(std::move(origin)), timeout_(timeout) {}

  HttpResponse send(const HttpRequest& request) override {
    httplib::Client cli(origin_);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    httplib::Result res = request.method == "POST"
                              ? cli.Post(request.target, headers, request.body, content_type)
                              : cli.Get(request.target, headers);
    HttpResponse out;
    if (!res) {
      spdlog::debug("{} {}{} failed: {}", request.method, origin_, request.target, httplib::to_string(res.error()));
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers[k] = v;
    return out;
  }

 private:
  std::string origin_;
  std::chrono::seconds timeout_;
};

/// POST /webhook and GET /healthz over a WebhookService.
class WebhookServer {
 public:
  explicit WebhookServer(std::shared_ptr<WebhookService> service) : service_(std::move(service)) {
    server_.set_payload_max_length(25 * 1024 * 1024);
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content("ok", "text/plain");
    });
    server_.Post("/webhook", [this](const httplib::Request& req, httplib::Response& res) {
      WebhookDelivery d;
      d.delivery_id = req.get_header_value("X-GitHub-Delivery");
      d.event = req.get_header_value("X-GitHub-Event");
      d.signature_header = req.get_header_value("X-Hub-Signature-256");
      d.raw_body = req.body;
      const DeliveryOutcome outcome = service_->handle_delivery(d);
      res.status = outcome.http_status;
      res.set_content(outcome.to_json().dump(), "application/json");
    });
  }

  /// Blocks until stop() is called.
  bool listen(const std::string& host, int port) {
    spdlog::info("listening on {}:{}", host, port);
    return server_.listen(host, port);
  }

  /// Binds an ephemeral port and returns it; pair with listen_after_bind().
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }

  void wait_until_ready() const { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  std::shared_ptr<WebhookService> service_;
  httplib::Server server_;
};

}  // namespace triage
