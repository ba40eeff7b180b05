#pragma once

#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/metrics.hpp"
#include "divctl/sampler.hpp"
#include "divctl/session.hpp"
#include "divctl/verify.hpp"
#include "json.hpp"

// Non-default-constructible domain types convert through explicit serializers.
namespace nlohmann {

template <>
struct adl_serializer<divctl::Label> {
  static divctl::Label from_json(const json& j) { return divctl::Label(j.get<std::string>()); }
  static void to_json(json& j, const divctl::Label& l) { j = l.text(); }
};

template <>
struct adl_serializer<divctl::Distribution> {
  static divctl::Distribution from_json(const json& j) {
    return divctl::Distribution(j.get<std::vector<double>>());
  }
  static void to_json(json& j, const divctl::Distribution& d) {
    j = std::vector<double>(d.weights().begin(), d.weights().end());
  }
};

template <>
struct adl_serializer<divctl::AttributeSpec> {
  static divctl::AttributeSpec from_json(const json& j) {
    return divctl::AttributeSpec(j.at("name").get<std::string>(),
                                 j.at("labels").get<std::vector<divctl::Label>>(),
                                 j.at("target").get<divctl::Distribution>());
  }
  static void to_json(json& j, const divctl::AttributeSpec& a) {
    j = json{{"name", a.name()}, {"labels", a.labels()}, {"target", a.target()}};
  }
};

}  // namespace nlohmann

namespace divctl {

using json = nlohmann::json;

/// Leading field of every persisted record and API body.
inline constexpr int kSchemaVersion = 1;

inline void to_json(json& j, const Assignment& a) {
  j = json::object();
  for (const auto& [name, idx] : a.choices) j[name] = idx;
}
inline void from_json(const json& j, Assignment& a) {
  a.choices.clear();
  for (const auto& [name, idx] : j.items()) a.choices[name] = idx.get<std::size_t>();
}

inline void to_json(json& j, const EmbeddingVector& e) { j = e.values; }
inline void from_json(const json& j, EmbeddingVector& e) {
  e = EmbeddingVector(j.get<std::vector<double>>());
}

inline void to_json(json& j, const Prediction& p) {
  j = json{{"label", p.label_index}, {"score", p.score}};
}
inline void from_json(const json& j, Prediction& p) {
  p.label_index = j.at("label").get<std::size_t>();
  p.score = j.at("score").get<double>();
}

inline void to_json(json& j, const PredictedLabels& p) {
  j = json{{"image_id", p.image_id}, {"labels", json::object()}};
  for (const auto& [name, pred] : p.per_attribute) j["labels"][name] = pred;
}
inline void from_json(const json& j, PredictedLabels& p) {
  p.image_id = j.at("image_id").get<std::string>();
  p.per_attribute.clear();
  for (const auto& [name, pred] : j.at("labels").items())
    p.per_attribute[name] = pred.get<Prediction>();
}

inline void to_json(json& j, const MeasuredDistribution& m) {
  j = json{{"attribute", m.attribute}, {"labels", m.labels},           {"counts", m.counts},
           {"image_ids", m.image_ids}, {"predictions", m.predictions}};
}
inline void from_json(const json& j, MeasuredDistribution& m) {
  m.attribute = j.at("attribute").get<std::string>();
  m.labels = j.at("labels").get<std::vector<std::string>>();
  m.counts = j.at("counts").get<std::vector<std::size_t>>();
  m.image_ids = j.at("image_ids").get<std::vector<std::string>>();
  m.predictions = j.at("predictions").get<std::vector<Prediction>>();
  if (m.labels.size() != m.counts.size() || m.image_ids.size() != m.predictions.size())
    throw std::runtime_error("inconsistent measured distribution");
}

inline void to_json(json& j, const ImageRecord& r) {
  j = json{{"image_id", r.image_id},       {"index", r.index},
           {"prompt", r.prompt},           {"assignment", r.assignment},
           {"payload_ref", r.payload_ref}, {"seed", r.seed},
           {"embedding", r.embedding},     {"predicted", r.predicted}};
}
inline void from_json(const json& j, ImageRecord& r) {
  r.image_id = j.at("image_id").get<std::string>();
  r.index = j.at("index").get<std::size_t>();
  r.prompt = j.at("prompt").get<std::string>();
  r.assignment = j.at("assignment").get<Assignment>();
  r.payload_ref = j.at("payload_ref").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.embedding = j.at("embedding").get<EmbeddingVector>();
  r.predicted = j.at("predicted").get<PredictedLabels>();
}

inline void to_json(json& j, const IterationSnapshot& s) {
  j = json{{"index", s.index},
           {"parent", s.parent ? json(*s.parent) : json(nullptr)},
           {"seed", s.seed},
           {"attributes", s.attributes},
           {"images", s.images},
           {"measured", json::object()}};
  for (const auto& [name, m] : s.measured) j["measured"][name] = m;
}

inline void to_json(json& j, const DiversityReport& r) {
  j = json{{"span", r.span},
           {"alignment", r.alignment},
           {"image_count", r.image_count},
           {"generated_at", r.generated_at}};
}

inline const char* to_string(SamplingMode m) { return m == SamplingMode::Quota ? "quota" : "iid"; }

inline SamplingMode sampling_mode_from(std::string_view s) {
  if (iequals(s, "quota")) return SamplingMode::Quota;
  if (iequals(s, "iid")) return SamplingMode::IID;
  fail(Errc::InvalidArgument, "unknown sampling mode '" + std::string(s) + "'");
}

inline void from_json(const json& j, IterationSnapshot& s) {
  s.index = j.at("index").get<std::size_t>();
  const auto& parent = j.at("parent");
  s.parent = parent.is_null() ? std::nullopt : std::optional<std::size_t>(parent.get<std::size_t>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.attributes = j.at("attributes").get<std::vector<AttributeSpec>>();
  s.images = j.at("images").get<std::vector<ImageRecord>>();
  s.measured.clear();
  for (const auto& [name, m] : j.at("measured").items())
    s.measured[name] = m.get<MeasuredDistribution>();
}

}  // namespace divctl
