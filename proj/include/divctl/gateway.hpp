#pragma once

#include <cctype>
#include <memory>
#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/gateway/http.hpp"
#include "divctl/gateway/mock.hpp"
#include "divctl/gateway/prompts.hpp"
#include "divctl/gateway/types.hpp"

namespace divctl {

/// The three model roles behind one configuration.
struct Gateway {
  std::shared_ptr<ImageGenerator> images;
  std::shared_ptr<LanguageModel> llm;
  std::shared_ptr<Embedder> embedder;
  GatewayConfig config;
};

inline Gateway make_gateway(const GatewayConfig& config) {
  config.validate();
  Gateway gw;
  gw.config = config;
  if (config.backend == BackendKind::Mock) {
    gw.images = std::make_shared<MockImageGenerator>();
    gw.llm = std::make_shared<MockLanguageModel>();
    gw.embedder = std::make_shared<MockEmbedder>(config.mock_q, config.mock_sigma, config.mock_seed);
  } else {
    gw.images = std::make_shared<HttpImageGenerator>(config.image_endpoint, config.timeout_ms);
    gw.llm = std::make_shared<HttpLanguageModel>(config.llm_endpoint, config.timeout_ms);
    gw.embedder = std::make_shared<HttpEmbedder>(config.embed_endpoint, config.timeout_ms);
  }
  return gw;
}

inline ImagePayload generate_image(ImageGenerator& generator, const std::string& prompt,
                                   std::uint64_t seed) {
  if (trim(prompt).empty()) fail(Errc::InvalidArgument, "prompt is empty");
  auto payload = generator.generate(prompt, seed);
  if (payload.image_id.empty()) fail(Errc::MalformedResponse, "backend returned no image id");
  return payload;
}

namespace detail {
// Backends often continue straight after the "1." of the answer template.
inline std::string with_leading_number(const std::string& text) {
  auto t = trim(text);
  if (!t.empty() && std::isdigit(static_cast<unsigned char>(t.front()))) return text;
  if (t.rfind("Here are", 0) == 0) return text;
  return "1." + text;
}
}  // namespace detail

/// Asks the language model for `count` labels of `attribute` in `context`.
inline std::vector<Label> suggest_labels(LanguageModel& llm, const std::string& context,
                                         const std::string& attribute, std::size_t count) {
  if (trim(context).empty() || trim(attribute).empty())
    fail(Errc::InvalidArgument, "context and attribute must be non-empty");
  if (count < 1) fail(Errc::InvalidArgument, "label count must be at least 1");
  auto text = llm.complete(prompts::label_request(trim(context), trim(attribute), count));
  auto items = prompts::parse_numbered_list(detail::with_leading_number(text), count);
  std::vector<Label> labels;
  for (auto& item : items) labels.emplace_back(item);
  return labels;
}

/// Three suggested attribute names for `context`.
inline std::vector<std::string> suggest_attributes(LanguageModel& llm, const std::string& context) {
  if (trim(context).empty()) fail(Errc::InvalidArgument, "context must be non-empty");
  auto text = llm.complete(prompts::attribute_request(trim(context)));
  return prompts::parse_numbered_list(detail::with_leading_number(text), 3);
}

}  // namespace divctl
