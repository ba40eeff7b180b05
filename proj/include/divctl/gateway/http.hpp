#pragma once

#include <chrono>
#include <string>
#include <utility>

#include "divctl/base64.hpp"
#include "divctl/error.hpp"
#include "divctl/gateway/types.hpp"
#include "httplib.h"
#include "json.hpp"

namespace divctl {

namespace http_detail {

/// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, ""};
  auto prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

inline nlohmann::json post_json(const std::string& endpoint, const std::string& route,
                                const nlohmann::json& body, int timeout_ms) {
  auto [base, prefix] = split_endpoint(endpoint);
  httplib::Client client(base);
  auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto started = std::chrono::steady_clock::now();
  auto result = client.Post(prefix + route, body.dump(), "application/json");
  if (!result) {
    auto err = result.error();
    auto elapsed = std::chrono::steady_clock::now() - started;
    if (err == httplib::Error::Read && elapsed >= timeout)
      fail(Errc::Timeout, endpoint + route + " did not answer within " +
                              std::to_string(timeout_ms) + " ms");
    fail(Errc::BackendUnavailable, endpoint + route + ": " + httplib::to_string(err));
  }
  if (result->status < 200 || result->status >= 300)
    fail(Errc::BackendUnavailable,
         endpoint + route + " answered HTTP " + std::to_string(result->status));
  auto parsed = nlohmann::json::parse(result->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    fail(Errc::MalformedResponse, endpoint + route + " returned a non-object body");
  return parsed;
}

template <typename T>
T require(const nlohmann::json& body, const char* field) {
  auto it = body.find(field);
  if (it == body.end()) fail(Errc::MalformedResponse, std::string("missing field '") + field + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(Errc::MalformedResponse, std::string("field '") + field + "' has the wrong type");
  }
}

}  // namespace http_detail

/// POST {endpoint}/generate {prompt, seed} -> {image_id, content_base64}
class HttpImageGenerator final : public ImageGenerator {
 public:
  HttpImageGenerator(std::string endpoint, int timeout_ms)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  ImagePayload generate(const std::string& prompt, std::uint64_t seed) override {
    auto body = http_detail::post_json(endpoint_, "/generate", {{"prompt", prompt}, {"seed", seed}},
                                       timeout_ms_);
    ImagePayload p;
    p.image_id = http_detail::require<std::string>(body, "image_id");
    if (p.image_id.empty()) fail(Errc::MalformedResponse, "empty image_id");
    p.content = base64::decode(http_detail::require<std::string>(body, "content_base64"));
    p.source_prompt = prompt;
    p.seed = seed;
    return p;
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

/// POST {endpoint}/complete {system, instruction, template} -> {text}
class HttpLanguageModel final : public LanguageModel {
 public:
  HttpLanguageModel(std::string endpoint, int timeout_ms)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  std::string complete(const CompletionRequest& request) override {
    auto body = http_detail::post_json(endpoint_, "/complete",
                                       {{"system", request.system},
                                        {"instruction", request.instruction},
                                        {"template", request.answer_template}},
                                       timeout_ms_);
    return http_detail::require<std::string>(body, "text");
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

/// POST {endpoint}/embed {kind, payload} -> {values[]}. Image payloads are
/// sent base64-encoded, text payloads verbatim.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string endpoint, int timeout_ms)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  EmbeddingVector embed(const EmbedRequest& request) override {
    if (request.payload.empty()) fail(Errc::InvalidArgument, "nothing to embed");
    bool image = request.kind == EmbedKind::Image;
    auto body = http_detail::post_json(
        endpoint_, "/embed",
        {{"kind", image ? "image" : "text"},
         {"payload", image ? base64::encode(request.payload) : request.payload}},
        timeout_ms_);
    auto values = http_detail::require<std::vector<double>>(body, "values");
    if (values.empty()) fail(Errc::MalformedResponse, "empty embedding");
    return EmbeddingVector(std::move(values));
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

}  // namespace divctl
