#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/gateway/types.hpp"
#include "divctl/sampler.hpp"
#include "divctl/verify.hpp"

namespace divctl {

/// One generated image inside an iteration.
struct ImageRecord {
  std::string image_id;
  std::size_t index = 0;
  std::string prompt;       ///< build_prompt(context, specs, assignment)
  Assignment assignment;
  std::string payload_ref;  ///< store-relative path of the payload bytes
  std::uint64_t seed = 0;   ///< per-image generation seed
  EmbeddingVector embedding;
  PredictedLabels predicted;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Immutable record of one generate -> verify cycle.
struct IterationSnapshot {
  std::size_t index = 0;
  std::optional<std::size_t> parent;
  std::vector<AttributeSpec> attributes;
  std::vector<ImageRecord> images;
  std::map<std::string, MeasuredDistribution> measured;
  std::uint64_t seed = 0;

  friend bool operator==(const IterationSnapshot&, const IterationSnapshot&) = default;
};

struct Session {
  std::string id;
  std::string context;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<AttributeSpec> attributes;  ///< working specs edited by the user
  std::vector<IterationSnapshot> iterations;
  std::size_t head = 0;
  /// Measurements of the head images against the working specs. An entry is
  /// dropped when its attribute's labels change.
  std::map<std::string, MeasuredDistribution> live;
  std::map<std::string, std::string> image_content;
  /// Serialized operations, oldest first.
  std::vector<std::string> log;

  const IterationSnapshot& head_snapshot() const { return iterations.at(head); }

  const AttributeSpec* find_attribute(std::string_view name) const {
    for (const auto& a : attributes)
      if (iequals(a.name(), trim(name))) return &a;
    return nullptr;
  }

  friend bool operator==(const Session&, const Session&) = default;
};

}  // namespace divctl
