#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/rng.hpp"
#include "offlang/text.hpp"

namespace offlang {

struct CompletionParams {
  double temperature = 0.7;
  int max_tokens = 512;
  std::uint64_t seed = 0;
};

inline nlohmann::ordered_json completion_params_to_json(const CompletionParams& params) {
  nlohmann::ordered_json j;
  j["temperature"] = params.temperature;
  j["max_tokens"] = params.max_tokens;
  j["seed"] = params.seed;
  return j;
}

/// Text-completion service. Implementations must be safe to call from
/// multiple threads at once.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const std::string& prompt, const CompletionParams& params) const = 0;
  virtual std::string name() const = 0;
};

/// Offline stand-in for the completion service. Pure in (prompt, params):
/// it recovers the quoted sample text from the prompt, emits the requested
/// number of paraphrase-shaped variants (seeded token shuffle plus a variant
/// suffix token) as a numbered list, and never touches the network.
///
/// Two knobs exist for exercising failure paths, both fixed at construction:
/// prompts whose sample text is listed in `fail_texts` throw ClientError, and
/// the first variant for a text listed in `flip_texts` carries a
/// "<label-flip>" marker so downstream audits have something to catch.
class MockCompletionClient : public CompletionClient {
 public:
  struct Options {
    std::vector<std::string> flip_texts;
    std::vector<std::string> fail_texts;
  };

  MockCompletionClient() = default;
  explicit MockCompletionClient(Options options)
      : flip_texts_(options.flip_texts.begin(), options.flip_texts.end()),
        fail_texts_(options.fail_texts.begin(), options.fail_texts.end()) {}

  std::string complete(const std::string& prompt, const CompletionParams& params) const override {
    const std::string text = extract_sample_text(prompt);
    if (fail_texts_.count(text) != 0) {
      raise(ErrorCode::ClientError, "mock client configured to fail for this sample");
    }
    const int n = extract_requested_count(prompt);

    std::string out;
    for (int v = 1; v <= n; ++v) {
      HashWriter h;
      h.write(text).write(params.seed).write(static_cast<std::uint64_t>(v));
      Rng rng(h.finish());

      std::vector<std::string> tokens;
      for (std::string_view t : tokenize(text)) tokens.emplace_back(t);
      if (tokens.empty()) tokens.emplace_back("sample");
      rng.shuffle(tokens);
      tokens.push_back("v" + std::to_string(v));
      if (v == 1 && flip_texts_.count(text) != 0) tokens.push_back("<label-flip>");

      out += std::to_string(v) + ". ";
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i != 0) out += ' ';
        out += tokens[i];
      }
      out += '\n';
    }
    return out;
  }

  std::string name() const override { return "mock"; }

  static std::string extract_sample_text(const std::string& prompt) {
    static constexpr std::string_view kOpen = "text sample: ";
    static constexpr std::string_view kClose = ", please generate";
    const std::size_t begin = prompt.find(kOpen);
    const std::size_t end = prompt.rfind(kClose);
    if (begin == std::string::npos || end == std::string::npos ||
        end <= begin + kOpen.size()) {
      return trim(prompt);
    }
    const std::size_t start = begin + kOpen.size();
    return prompt.substr(start, end - start);
  }

  static int extract_requested_count(const std::string& prompt) {
    static constexpr std::string_view kClose = ", please generate ";
    const std::size_t pos = prompt.rfind(kClose);
    if (pos == std::string::npos) return 3;
    const std::string_view rest = std::string_view(prompt).substr(pos + kClose.size());
    const std::vector<std::string_view> words = tokenize(rest);
    if (words.empty()) return 3;
    const int n = parse_number_word(words.front());
    if (n < 0) return 3;
    return std::min(n, 64);
  }

 private:
  std::unordered_set<std::string> flip_texts_;
  std::unordered_set<std::string> fail_texts_;
};

/// HTTP completion client. Sends a JSON POST to the configured endpoint with
/// a bearer token read from the environment, retrying transient failures with
/// exponential backoff before giving up.
class RemoteCompletionClient : public CompletionClient {
 public:
  struct Options {
    std::string endpoint;
    std::string model = "default";
    std::string api_key_env = "AUG_LLM_API_KEY";
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{100};
    std::chrono::seconds timeout{30};
  };

  explicit RemoteCompletionClient(Options options) : options_(std::move(options)) {
    parse_endpoint(options_.endpoint, host_, port_, path_);
  }

  std::string complete(const std::string& prompt, const CompletionParams& params) const override {
    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      raise(ErrorCode::ClientError,
            "environment variable " + options_.api_key_env + " is not set");
    }

    nlohmann::ordered_json body;
    body["model"] = options_.model;
    body["prompt"] = prompt;
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    body["seed"] = params.seed;
    const std::string payload = body.dump();

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
      }
      // A fresh connection per call keeps the client safe under concurrent
      // augmentation workers.
      httplib::Client http(host_, port_);
      http.set_connection_timeout(options_.timeout);
      http.set_read_timeout(options_.timeout);
      httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
      httplib::Result res = http.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      const nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_discarded()) {
        last_error = "response body is not JSON";
        continue;
      }
      if (const std::optional<std::string> text = extract_completion_text(reply)) {
        return *text;
      }
      last_error = "response JSON carries no completion text";
    }
    raise(ErrorCode::ClientError, "completion request to " + options_.endpoint +
                                      " failed after " + std::to_string(options_.max_attempts) +
                                      " attempts: " + last_error);
  }

  std::string name() const override { return "remote"; }

  static std::optional<std::string> extract_completion_text(const nlohmann::json& reply) {
    if (reply.contains("text") && reply["text"].is_string()) {
      return reply["text"].get<std::string>();
    }
    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
      const nlohmann::json& first = reply["choices"][0];
      if (first.contains("text") && first["text"].is_string()) {
        return first["text"].get<std::string>();
      }
      if (first.contains("message") && first["message"].is_object() &&
          first["message"].contains("content") && first["message"]["content"].is_string()) {
        return first["message"]["content"].get<std::string>();
      }
    }
    return std::nullopt;
  }

  static void parse_endpoint(const std::string& endpoint, std::string& host, int& port,
                             std::string& path) {
    static constexpr std::string_view kScheme = "http://";
    if (endpoint.rfind(kScheme, 0) != 0) {
      raise(ErrorCode::ClientError,
            "endpoint must start with http:// (got '" + endpoint + "')");
    }
    const std::string rest = endpoint.substr(kScheme.size());
    const std::size_t slash = rest.find('/');
    const std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
    path = slash == std::string::npos ? "/" : rest.substr(slash);
    const std::size_t colon = authority.rfind(':');
    if (colon == std::string::npos) {
      host = authority;
      port = 80;
    } else {
      host = authority.substr(0, colon);
      try {
        port = std::stoi(authority.substr(colon + 1));
      } catch (const std::exception&) {
        raise(ErrorCode::ClientError, "endpoint port is not a number");
      }
    }
    if (host.empty()) raise(ErrorCode::ClientError, "endpoint host is empty");
  }

 private:
  Options options_;
  std::string host_;
  int port_ = 80;
  std::string path_;
};

}  // namespace offlang
