#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/error.hpp"
#include "divctl/gateway/types.hpp"
#include "divctl/parallel.hpp"

namespace divctl {

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    fail(Errc::DimensionMismatch, std::to_string(a.dimension()) + " vs " +
                                      std::to_string(b.dimension()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Prediction {
  std::size_t label_index = 0;
  double score = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Argmax of cosine similarity; ties go to the lowest label index.
inline Prediction classify(const EmbeddingVector& image,
                           std::span<const EmbeddingVector> label_embeddings) {
  if (label_embeddings.empty()) fail(Errc::EmptyLabelSet, "no label embeddings");
  Prediction best{0, cosine_similarity(image, label_embeddings[0])};
  for (std::size_t j = 1; j < label_embeddings.size(); ++j) {
    double s = cosine_similarity(image, label_embeddings[j]);
    if (s > best.score) best = {j, s};
  }
  return best;
}

/// Per-image predictions, one entry per measured attribute (tooltip data).
struct PredictedLabels {
  std::string image_id;
  std::map<std::string, Prediction, std::less<>> per_attribute;

  friend bool operator==(const PredictedLabels&, const PredictedLabels&) = default;
};

/// Histogram of predicted labels for one attribute over one image set.
struct MeasuredDistribution {
  std::string attribute;
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;
  std::vector<std::string> image_ids;     ///< image-index order
  std::vector<Prediction> predictions;    ///< aligned with image_ids

  std::size_t total() const noexcept {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  /// counts / total. Requires total > 0.
  Distribution empirical() const {
    auto t = total();
    if (t == 0) fail(Errc::EmptySet, "no classified images for '" + attribute + "'");
    std::vector<double> w(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      w[i] = static_cast<double>(counts[i]) / static_cast<double>(t);
    return Distribution(std::move(w));
  }

  /// Ids of images classified as `label_index`, in image order.
  std::vector<std::string> images_with_label(std::size_t label_index) const {
    if (label_index >= counts.size())
      fail(Errc::IndexOutOfRange, "label index " + std::to_string(label_index));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < predictions.size(); ++i)
      if (predictions[i].label_index == label_index) ids.push_back(image_ids[i]);
    return ids;
  }

  friend bool operator==(const MeasuredDistribution&, const MeasuredDistribution&) = default;
};

/// What measure() needs to know about an image.
struct ImageView {
  std::string_view image_id;
  std::string_view content;
};

struct MeasureOptions {
  const LabelSpace* label_space = nullptr;
  std::size_t concurrency = 1;
  /// When set, labels are embedded as `{context}, {attribute} {label}`.
  bool classify_against_prompt = false;
  std::string_view context;
};

inline std::vector<EmbeddingVector> embed_labels(Embedder& embedder, const AttributeSpec& spec,
                                                 const MeasureOptions& options) {
  std::vector<EmbeddingVector> out;
  out.reserve(spec.size());
  for (const auto& label : spec.labels()) {
    EmbedRequest req;
    req.kind = EmbedKind::Text;
    req.payload = options.classify_against_prompt
                      ? std::string(options.context) + ", " + spec.name() + " " + label.text()
                      : label.text();
    req.labels = options.label_space;
    out.push_back(embedder.embed(req));
  }
  return out;
}

inline std::vector<EmbeddingVector> embed_images(Embedder& embedder, std::span<const ImageView> images,
                                                 const MeasureOptions& options) {
  std::vector<EmbeddingVector> out(images.size());
  parallel_for(images.size(), options.concurrency, [&](std::size_t i) {
    EmbedRequest req;
    req.kind = EmbedKind::Image;
    req.payload = std::string(images[i].content);
    req.key = std::string(images[i].image_id);
    req.labels = options.label_space;
    out[i] = embedder.embed(req);
  });
  return out;
}

/// Classifies already-embedded images against one attribute.
inline MeasuredDistribution tally(std::span<const ImageView> images,
                                  std::span<const EmbeddingVector> image_embeddings,
                                  const AttributeSpec& spec,
                                  std::span<const EmbeddingVector> label_embeddings) {
  MeasuredDistribution m;
  m.attribute = spec.name();
  for (const auto& l : spec.labels()) m.labels.push_back(l.text());
  m.counts.assign(spec.size(), 0);
  m.image_ids.reserve(images.size());
  m.predictions.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto p = classify(image_embeddings[i], label_embeddings);
    ++m.counts[p.label_index];
    m.image_ids.emplace_back(images[i].image_id);
    m.predictions.push_back(p);
  }
  return m;
}

/// Classifies every image against `spec` and counts the predicted labels.
/// Any embedder failure propagates; nothing partial is returned.
inline MeasuredDistribution measure(std::span<const ImageView> images, const AttributeSpec& spec,
                                    Embedder& embedder, const MeasureOptions& options) {
  if (images.empty()) fail(Errc::EmptySet, "no images to measure");
  auto label_vecs = embed_labels(embedder, spec, options);
  auto image_vecs = embed_images(embedder, images, options);
  return tally(images, image_vecs, spec, label_vecs);
}

/// measure() for several attributes, embedding each image once.
inline std::vector<MeasuredDistribution> measure_all(std::span<const ImageView> images,
                                                     std::span<const AttributeSpec> specs,
                                                     Embedder& embedder,
                                                     const MeasureOptions& options) {
  std::vector<MeasuredDistribution> out;
  if (specs.empty()) return out;
  if (images.empty()) fail(Errc::EmptySet, "no images to measure");
  auto image_vecs = embed_images(embedder, images, options);
  for (const auto& spec : specs)
    out.push_back(tally(images, image_vecs, spec, embed_labels(embedder, spec, options)));
  return out;
}

}  // namespace divctl
