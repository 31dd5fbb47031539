#pragma once

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "citeaudit/common/errors.hpp"
#include "citeaudit/common/http.hpp"
#include "citeaudit/common/io.hpp"
#include "citeaudit/llmgate/prompts.hpp"

namespace citeaudit::llmgate {

namespace fs = std::filesystem;

/// The provider declined to answer (content filter, safety stop).
class RefusalError : public Error {
 public:
  using Error::Error;
};

/// The mock store has no response for a prompt.
class MockMissError : public Error {
 public:
  MockMissError(const std::string& hash, const fs::path& helper)
      : Error("no mock response for prompt " + hash + " (prompt written to " + helper.string() + ")"),
        hash_(hash) {}
  const std::string& hash() const { return hash_; }

 private:
  std::string hash_;
};

/// Sampling parameters are passed through to the provider verbatim
/// (temperature, max_tokens, ...). An empty object means provider defaults.
using SamplingParams = nlohmann::json;

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual std::string send(const Messages& messages, const SamplingParams& params) = 0;
};

inline std::string env_or_throw(const std::string& var) {
  const char* v = std::getenv(var.c_str());
  if (!v || !*v) throw ConfigError("environment variable " + var + " is not set");
  return v;
}

/// Any OpenAI-compatible chat-completions endpoint.
class OpenAIProvider : public Provider {
 public:
  OpenAIProvider(std::string base_url, std::string model, const std::string& api_key_env,
                 std::shared_ptr<RateLimiter> limiter, RetryPolicy retry)
      : http_(std::move(base_url), std::move(limiter), retry, std::chrono::seconds(300)),
        model_(std::move(model)), key_(env_or_throw(api_key_env)) {}

  std::string name() const override { return "openai:" + model_; }

  std::string send(const Messages& messages, const SamplingParams& params) override {
    nlohmann::json body = params.is_object() ? params : nlohmann::json::object();
    body["model"] = model_;
    body["messages"] = to_json(messages);
    const auto res = http_.post_json("/chat/completions", body.dump(),
                                     {{"Authorization", "Bearer " + key_}});
    if (res.status != 200) {
      throw TransportError("chat completion: HTTP " + std::to_string(res.status) + ": " +
                               res.body.substr(0, 300),
                           res.status);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res.body);
      const auto& choice = j.at("choices").at(0);
      if (choice.value("finish_reason", "") == "content_filter") throw RefusalError("content filter");
      const auto& content = choice.at("message").at("content");
      return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed chat completion: ") + e.what());
    }
  }

 private:
  HttpClient http_;
  std::string model_;
  std::string key_;
};

/// Anthropic Messages API.
class AnthropicProvider : public Provider {
 public:
  AnthropicProvider(std::string base_url, std::string model, const std::string& api_key_env,
                    std::shared_ptr<RateLimiter> limiter, RetryPolicy retry)
      : http_(std::move(base_url), std::move(limiter), retry, std::chrono::seconds(300)),
        model_(std::move(model)), key_(env_or_throw(api_key_env)) {}

  std::string name() const override { return "anthropic:" + model_; }

  std::string send(const Messages& messages, const SamplingParams& params) override {
    nlohmann::json body = params.is_object() ? params : nlohmann::json::object();
    body["model"] = model_;
    if (!body.contains("max_tokens")) body["max_tokens"] = 4096;
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& m : messages) {
      if (m.role == "system") {
        body["system"] = m.content;
      } else {
        turns.push_back({{"role", m.role}, {"content", m.content}});
      }
    }
    body["messages"] = turns;
    const auto res = http_.post_json("/v1/messages", body.dump(),
                                     {{"x-api-key", key_}, {"anthropic-version", "2023-06-01"}});
    if (res.status != 200) {
      throw TransportError("messages: HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300),
                           res.status);
    }
    try {
      const auto j = nlohmann::json::parse(res.body);
      if (j.value("stop_reason", "") == "refusal") throw RefusalError("model refused");
      std::string out;
      for (const auto& block : j.at("content")) {
        if (block.value("type", "") == "text") out += block.at("text").get<std::string>();
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed messages response: ") + e.what());
    }
  }

 private:
  HttpClient http_;
  std::string model_;
  std::string key_;
};

/// Directory of canned responses keyed by prompt hash: `<dir>/<sha256>.txt`.
/// A miss writes `<sha256>.prompt.txt` next to it to ease authoring and then
/// fails; a response file consisting of `!refusal` simulates a refusal.
class MockProvider : public Provider {
 public:
  explicit MockProvider(fs::path dir) : dir_(std::move(dir)) {}

  std::string name() const override { return "mock"; }

  std::string send(const Messages& messages, const SamplingParams&) override {
    const auto hash = prompt_hash(messages);
    const auto path = dir_ / (hash + ".txt");
    std::error_code ec;
    if (!fs::exists(path, ec)) {
      const auto helper = dir_ / (hash + ".prompt.txt");
      try {
        std::string dump;
        for (const auto& m : messages) dump += "### " + m.role + "\n" + m.content + "\n";
        io::write_if_changed(helper, dump);
      } catch (const IoError&) {
      }
      throw MockMissError(hash, helper);
    }
    auto body = io::read_file(path);
    if (body == "!refusal" || body == "!refusal\n") throw RefusalError("mock refusal");
    return body;
  }

 private:
  fs::path dir_;
};

/// Forwards to another provider and stores each response under its prompt
/// hash, producing a store the mock provider can replay.
class RecordingProvider : public Provider {
 public:
  RecordingProvider(std::shared_ptr<Provider> inner, fs::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {}

  std::string name() const override { return inner_->name(); }

  std::string send(const Messages& messages, const SamplingParams& params) override {
    auto out = inner_->send(messages, params);
    io::write_if_changed(dir_ / (prompt_hash(messages) + ".txt"), out);
    return out;
  }

 private:
  std::shared_ptr<Provider> inner_;
  fs::path dir_;
};

}  // namespace citeaudit::llmgate
