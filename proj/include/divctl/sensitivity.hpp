#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/gateway.hpp"
#include "divctl/metrics.hpp"
#include "divctl/sampler.hpp"
#include "divctl/verify.hpp"

namespace divctl {

/// One point of the label-accuracy sweep.
struct SensitivityPoint {
  double configured_q = 1.0;
  double observed_accuracy = 1.0;
  double alignment_predicted = 1.0;  ///< from classifier labels
  double alignment_actual = 1.0;     ///< from the labels sampled into the prompts
};

struct SensitivityScenario {
  std::string context = "an image";
  std::vector<AttributeSpec> attributes;  ///< targets are forced uniform
  std::uint64_t seed = 0;
  double sigma = 0.0;
  std::size_t concurrency = 1;
};

/// Twelve everyday attributes with k labels each. The first five labels are
/// hand-picked words that never collide across attributes; k > 5 pads with
/// "{attribute} type {i}".
inline std::vector<AttributeSpec> sensitivity_attributes(std::size_t k) {
  if (k < 2 || k > 10) fail(Errc::InvalidArgument, "k must lie in [2,10]");
  struct Row {
    const char* name;
    const char* labels[5];
  };
  static const Row kRows[] = {
      {"color", {"red", "green", "blue", "yellow", "purple"}},
      {"environment", {"city", "countryside", "forest", "desert", "beach"}},
      {"weather", {"sunny", "cloudy", "rainy", "snowy", "foggy"}},
      {"style", {"photorealistic", "cartoon", "watercolor", "pixel art", "sketch"}},
      {"period", {"medieval", "victorian", "modern", "futuristic", "prehistoric"}},
      {"pose", {"standing", "sitting", "running", "jumping", "lying down"}},
      {"lighting", {"daylight", "sunset", "night", "studio light", "candlelight"}},
      {"season", {"spring", "summer", "autumn", "winter", "monsoon"}},
      {"age", {"child", "teenager", "adult", "middle-aged", "elderly"}},
      {"material", {"wood", "metal", "glass", "stone", "plastic"}},
      {"mood", {"happy", "sad", "calm", "angry", "mysterious"}},
      {"viewpoint", {"close-up", "aerial view", "side view", "front view", "wide shot"}},
  };
  std::vector<AttributeSpec> out;
  for (const auto& row : kRows) {
    std::vector<Label> labels;
    for (std::size_t i = 0; i < k; ++i)
      labels.emplace_back(i < 5 ? std::string(row.labels[i])
                                : std::string(row.name) + " type " + std::to_string(i + 1));
    out.push_back(AttributeSpec::uniform(row.name, std::move(labels)));
  }
  return out;
}

/// Runs sample -> generate -> embed -> classify under a mock backend with
/// label accuracy q, for each q in `accuracies`.
///
/// The n images of a point are split across the attributes by largest
/// remainder; each attribute gets its own batch whose prompts carry only
/// that attribute. Alignments are averaged uniformly over attributes with a
/// non-empty batch; observed accuracy is pooled over all n images. Every
/// point reuses the same prompts and image ids; label corruption draws from
/// an independent stream per point.
inline std::vector<SensitivityPoint> sensitivity_sweep(const SensitivityScenario& scenario,
                                                       std::span<const double> accuracies,
                                                       std::size_t n) {
  if (scenario.attributes.empty()) fail(Errc::InvalidArgument, "sweep needs attributes");
  if (n < 1) fail(Errc::InvalidCount, "sweep needs at least one image");
  for (double q : accuracies)
    if (!(q >= 0.0 && q <= 1.0)) fail(Errc::InvalidArgument, "accuracy outside [0,1]");

  std::vector<AttributeSpec> uniform_specs;
  for (const auto& a : scenario.attributes) uniform_specs.push_back(balance(a));
  const auto space = LabelSpace::from(uniform_specs);
  const auto per_attribute = largest_remainder(
      Distribution::uniform(uniform_specs.size()).weights(), n);

  struct Batch {
    std::size_t attribute;
    std::vector<std::size_t> actual;
    std::vector<ImagePayload> images;
  };
  std::vector<Batch> batches;
  MockImageGenerator generator;
  for (std::size_t a = 0; a < uniform_specs.size(); ++a) {
    if (per_attribute[a] == 0) continue;
    PromptPlan plan{scenario.context, per_attribute[a], {uniform_specs[a]},
                    combine64(scenario.seed, a), SamplingMode::Quota};
    Batch batch{a, {}, {}};
    auto planned = plan_iteration(plan);
    for (std::size_t i = 0; i < planned.size(); ++i) {
      batch.actual.push_back(planned[i].assignment.choices.at(uniform_specs[a].name()));
      batch.images.push_back(
          generate_image(generator, planned[i].prompt, combine64(plan.seed, i)));
    }
    batches.push_back(std::move(batch));
  }

  std::vector<SensitivityPoint> points;
  for (std::size_t point = 0; point < accuracies.size(); ++point) {
    const double q = accuracies[point];
    MockEmbedder embedder(q, scenario.sigma, combine64(scenario.seed, point));
    MeasureOptions options;
    options.label_space = &space;
    options.concurrency = scenario.concurrency;

    std::size_t correct = 0, total = 0;
    double predicted_sum = 0.0, actual_sum = 0.0;
    for (const auto& batch : batches) {
      const auto& spec = uniform_specs[batch.attribute];
      std::vector<ImageView> views;
      for (const auto& img : batch.images) views.push_back({img.image_id, img.content});
      auto measured = measure(views, spec, embedder, options);

      std::vector<double> actual_counts(spec.size(), 0.0);
      for (std::size_t i = 0; i < batch.actual.size(); ++i) {
        actual_counts[batch.actual[i]] += 1.0;
        if (measured.predictions[i].label_index == batch.actual[i]) ++correct;
        ++total;
      }
      predicted_sum += alignment(measured.empirical(), spec.target());
      actual_sum += alignment(normalize(actual_counts), spec.target());
    }
    const auto m = static_cast<double>(batches.size());
    points.push_back({q, static_cast<double>(correct) / static_cast<double>(total),
                      predicted_sum / m, actual_sum / m});
  }
  return points;
}

}  // namespace divctl
