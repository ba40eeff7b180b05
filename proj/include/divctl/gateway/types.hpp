#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/error.hpp"

namespace divctl {

/// One generated image as returned by the image backend.
struct ImagePayload {
  std::string image_id;
  std::string content;  ///< encoded image bytes; prompt text for the mock
  std::string source_prompt;
  std::uint64_t seed = 0;

  friend bool operator==(const ImagePayload&, const ImagePayload&) = default;
};

struct EmbeddingVector {
  std::vector<double> values;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v) : values(std::move(v)) {
    for (double x : values)
      if (!std::isfinite(x)) fail(Errc::MalformedResponse, "embedding has non-finite entries");
  }

  std::size_t dimension() const noexcept { return values.size(); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

enum class EmbedKind { Image, Text };

/// The labels currently known to a session, grouped by attribute. The mock
/// embedder derives its basis from this; real backends ignore it.
struct LabelSpace {
  struct Group {
    std::string attribute;
    std::vector<std::string> labels;
  };
  std::vector<Group> groups;

  static LabelSpace from(std::span<const AttributeSpec> specs) {
    LabelSpace space;
    for (const auto& s : specs) {
      Group g{s.name(), {}};
      for (const auto& l : s.labels()) g.labels.push_back(l.text());
      space.groups.push_back(std::move(g));
    }
    return space;
  }
};

struct EmbedRequest {
  EmbedKind kind = EmbedKind::Text;
  std::string payload;            ///< image bytes or text
  std::string key;                ///< image id; seeds the mock's corruption and noise
  const LabelSpace* labels = nullptr;
};

enum class CompletionTask { SuggestLabels, SuggestAttributes };

/// A rendered LLM request. The first three fields go over the wire; the rest
/// is structured context that table-driven mocks key on.
struct CompletionRequest {
  std::string system;
  std::string instruction;
  std::string answer_template;

  CompletionTask task = CompletionTask::SuggestLabels;
  std::string context;
  std::string attribute;
  std::size_t count = 0;
};

class ImageGenerator {
 public:
  virtual ~ImageGenerator() = default;
  virtual ImagePayload generate(const std::string& prompt, std::uint64_t seed) = 0;
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(const EmbedRequest& request) = 0;
};

enum class BackendKind { Mock, Http };

struct GatewayConfig {
  BackendKind backend = BackendKind::Mock;
  std::string image_endpoint;
  std::string llm_endpoint;
  std::string embed_endpoint;
  int timeout_ms = 30000;
  double mock_sigma = 0.0;
  double mock_q = 1.0;
  std::uint64_t mock_seed = 0;
  std::size_t concurrency = 4;
  /// Compare images against `{context}, {attribute} {label}` instead of the bare label.
  bool classify_against_prompt = false;

  void validate() const {
    if (!(mock_q >= 0.0 && mock_q <= 1.0)) fail(Errc::InvalidArgument, "mock_q must lie in [0,1]");
    if (!(mock_sigma >= 0.0) || !std::isfinite(mock_sigma))
      fail(Errc::InvalidArgument, "mock_sigma must be non-negative");
    if (timeout_ms <= 0) fail(Errc::InvalidArgument, "timeout_ms must be positive");
    if (concurrency == 0) fail(Errc::InvalidArgument, "concurrency must be positive");
    if (backend == BackendKind::Http &&
        (image_endpoint.empty() || llm_endpoint.empty() || embed_endpoint.empty()))
      fail(Errc::InvalidArgument, "http backend needs all three endpoints");
  }
};

}  // namespace divctl
