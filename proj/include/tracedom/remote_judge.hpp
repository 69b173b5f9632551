#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>

#include "tracedom/judge.hpp"

namespace tracedom {

struct EndpointUrl {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "/judge"
};

inline EndpointUrl split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

/// Generic HTTP judge: POSTs multipart {prompt, image_a, image_b} and
/// strictly parses the JSON reply. Transport failures (no response, 5xx)
/// are retried with exponential backoff; protocol failures are not.
class RemoteJudge : public SemanticJudge {
 public:
  explicit RemoteJudge(JudgeConfig cfg)
      : cfg_(std::move(cfg)), slots_(std::clamp<std::ptrdiff_t>(cfg_.max_in_flight, 1, kMaxSlots)) {
    cfg_.validate();
    url_ = split_endpoint(cfg_.endpoint);
  }

  SemanticJudgment judge(const StateObservation& a, const StateObservation& b) override {
    if (!a.png || !b.png) throw Error(ErrorCode::Precondition, "remote judge needs PNG payloads");
    slots_.acquire();
    struct Release {
      std::counting_semaphore<kMaxSlots>& s;
      ~Release() { s.release(); }
    } release{slots_};

    httplib::MultipartFormDataItems items = {
        {"prompt", std::string(kEquivalencePrompt), "", "text/plain"},
        {"image_a", std::string(a.png->begin(), a.png->end()), "image_a.png", "image/png"},
        {"image_b", std::string(b.png->begin(), b.png->end()), "image_b.png", "image/png"},
    };
    httplib::Headers headers;
    if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        const double wait = cfg_.backoff_base_seconds * std::pow(2.0, attempt - 1);
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      }
      httplib::Client client(url_.scheme_host_port);
      const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
      const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - secs) * 1e6);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);

      auto res = client.Post(url_.path, headers, items);
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "server returned HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw Error(ErrorCode::JudgeTransport, "judge returned HTTP " + std::to_string(res->status));
      }
      return parse_judgment(res->body);
    }
    throw Error(ErrorCode::JudgeTransport,
                last_error + " (after " + std::to_string(cfg_.max_retries + 1) + " attempts)");
  }

  const JudgeConfig& config() const { return cfg_; }

 private:
  static constexpr std::ptrdiff_t kMaxSlots = 1024;

  JudgeConfig cfg_;
  EndpointUrl url_;
  std::counting_semaphore<kMaxSlots> slots_;
};

}  // namespace tracedom
