#pragma once

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "citeaudit/common/concurrency.hpp"
#include "citeaudit/common/errors.hpp"

namespace citeaudit {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// "https://host:port/prefix" split into the origin httplib wants and a path
/// prefix prepended to every request.
struct BaseUrl {
  std::string origin;
  std::string prefix;

  static BaseUrl parse(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("base url needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
  }
};

/// GET/POST with a shared rate limiter and retry-with-backoff on transport
/// failures, 429 and 5xx responses. Other statuses are returned to the caller.
class HttpClient {
 public:
  HttpClient(std::string base_url, std::shared_ptr<RateLimiter> limiter, RetryPolicy retry,
             std::chrono::seconds timeout = std::chrono::seconds(60))
      : base_(BaseUrl::parse(base_url)), limiter_(std::move(limiter)), retry_(retry),
        timeout_(timeout) {}

  HttpResponse get(const std::string& path, const httplib::Params& params = {},
                   const httplib::Headers& headers = {}) const {
    return with_retry("GET " + path, [&](httplib::Client& cli) {
      return cli.Get(base_.prefix + path, params, headers);
    });
  }

  HttpResponse post_json(const std::string& path, const std::string& body,
                         const httplib::Headers& headers = {}) const {
    return with_retry("POST " + path, [&](httplib::Client& cli) {
      return cli.Post(base_.prefix + path, headers, body, "application/json");
    });
  }

  const std::string& origin() const { return base_.origin; }

 private:
  template <typename Call>
  HttpResponse with_retry(const std::string& what, Call&& call) const {
    auto backoff = retry_.initial_backoff;
    std::string last_error;
    int last_status = 0;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      if (limiter_) limiter_->acquire();
      httplib::Client cli(base_.origin);
      cli.set_follow_location(true);
      cli.set_connection_timeout(timeout_);
      cli.set_read_timeout(timeout_);
      auto res = call(cli);
      if (res) {
        last_status = res->status;
        if (res->status != 429 && res->status < 500) return {res->status, res->body};
        last_error = "HTTP " + std::to_string(res->status);
      } else {
        last_status = 0;
        last_error = httplib::to_string(res.error());
      }
      if (attempt < retry_.max_attempts) {
        spdlog::warn("{} {} failed ({}), retry {}/{} in {} ms", base_.origin, what, last_error,
                     attempt, retry_.max_attempts - 1, backoff.count());
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
      }
    }
    throw TransportError(base_.origin + " " + what + ": " + last_error + " after " +
                             std::to_string(retry_.max_attempts) + " attempts",
                         last_status);
  }

  BaseUrl base_;
  std::shared_ptr<RateLimiter> limiter_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
};

}  // namespace citeaudit
